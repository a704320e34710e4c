import hydra
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import train_experts
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="train_experts", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    """Train one expert transducer per speaker partition."""
    setup_args(args)
    train_experts(args)


if __name__ == "__main__":
    main()
