import hydra
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import evaluate, write_report
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="evaluate", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    """Evaluate experts, students and the weighter and write the metrics report."""
    setup_args(args)
    write_report(args, evaluate(args))


if __name__ == "__main__":
    main()
