import hydra
from hydra.utils import to_absolute_path
from omegaconf import DictConfig

from ensd.errors import exit_on_error
from ensd.experiment import score_files
from ensd.metrics import format_wer


@hydra.main(config_path="configs", config_name="wer", version_base="1.1")
@exit_on_error
def main(args: DictConfig):
    """Print the WER of `hyp` against `ref` as a decimal, then per-utterance values for JSONL input."""
    total, per_utterance = score_files(to_absolute_path(args.ref), to_absolute_path(args.hyp))
    print(format_wer(total))
    if args.ref.endswith(".jsonl"):
        for utt_id, value in per_utterance.items():
            print(f"{utt_id}\t{format_wer(value)}")


if __name__ == "__main__":
    main()
