import hydra
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import partition_speakers
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="cluster", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    """Partition training speakers among experts, e.g. `python cluster.py experts.method=random experts.k=3`."""
    setup_args(args)
    partition_speakers(args)


if __name__ == "__main__":
    main()
