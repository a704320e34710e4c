import hydra
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import decode_experts
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="decode", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    """Decode n-best lists with every expert."""
    setup_args(args)
    decode_experts(args)


if __name__ == "__main__":
    main()
