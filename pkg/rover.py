import sys

import hydra
from hydra.utils import to_absolute_path
from omegaconf import DictConfig, ListConfig

from ensd.errors import exit_on_error
from ensd.experiment import dump_jsonl, fuse_corpus, fuse_files
from ensd.fusion import VotingScheme
from ensd.utils import setup_args


@hydra.main(config_path="configs", config_name="rover", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    """Fuse expert transcripts with ROVER.

    With `nbest=<file>` or `nbest=[a,b,c]` the named files are fused and printed
    as JSONL; otherwise the workdir n-best files of `fuse` are fused in place.
    """
    setup_args(args)
    if not args.nbest:
        fuse_corpus(args, args.fuse)
        return

    paths = list(args.nbest) if isinstance(args.nbest, ListConfig) else [args.nbest]
    records = fuse_files([to_absolute_path(p) for p in paths], VotingScheme.parse(args.rover.scheme), args.decode.n_max)
    if args.out:
        with open(to_absolute_path(args.out), "w", encoding="utf-8", newline="\n") as f:
            dump_jsonl(records, f)
    else:
        dump_jsonl(records, sys.stdout)


if __name__ == "__main__":
    main()
