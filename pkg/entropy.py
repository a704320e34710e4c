import sys

import hydra
from hydra.utils import to_absolute_path
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import dump_jsonl, entropy_records


@hydra.main(config_path="configs", config_name="entropy", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    records = entropy_records(to_absolute_path(args.nbest), args.decode.n_max)
    if args.out:
        with open(to_absolute_path(args.out), "w", encoding="utf-8", newline="\n") as f:
            dump_jsonl(records, f)
    else:
        dump_jsonl(records, sys.stdout)


if __name__ == "__main__":
    main()
