import hydra
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import train_weighter
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="train_weighter", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    """Train the Smart-Weighter on the labeled weighter split."""
    setup_args(args)
    train_weighter(args)


if __name__ == "__main__":
    main()
