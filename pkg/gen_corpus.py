import hydra
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import generate
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="gen_corpus", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    setup_args(args)
    generate(args)


if __name__ == "__main__":
    main()
