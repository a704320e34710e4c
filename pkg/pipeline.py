import hydra
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import run_pipeline
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="pipeline", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    setup_args(args)
    run_pipeline(args)


if __name__ == "__main__":
    main()
