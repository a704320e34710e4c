import hydra
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import train_student
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="train_student", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    """Train a student under one policy, e.g. `python train_student.py student.policy=oracle`."""
    setup_args(args)
    train_student(args)


if __name__ == "__main__":
    main()
