from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import torch
from hydra.utils import to_absolute_path
from omegaconf import DictConfig

from ensd.confidence.nbest import load_nbest_files, NBestList
from ensd.dataset import MANIFEST_NAME, Partition, Split, Utterance, read_corpus_info, read_manifest
from ensd.errors import ConfigError, DataError
from ensd.metrics.alignment import TokenSequence, tokenize
from ensd.tokenizer import Tokenizer
from ensd.utils import get_tokenizer

LABELED = "labeled"
POOL = "pool"


@dataclass(frozen=True)
class Workdir:
    """Artifact layout shared by all pipeline stages."""
    root: Path

    @classmethod
    def from_args(cls, args: DictConfig) -> Workdir:
        return cls(Path(to_absolute_path(args.workdir)))

    def corpus_dir(self, corpus: str) -> Path:
        return self.root / ("corpus" if corpus == LABELED else "pool")

    def manifest(self, corpus: str) -> Path:
        return self.corpus_dir(corpus) / MANIFEST_NAME

    @property
    def partition(self) -> Path:
        return self.root / "partition.json"

    def expert(self, k: int) -> Path:
        return self.root / "experts" / f"expert{k}.ensd"

    def nbest(self, corpus: str, k: int) -> Path:
        return self.root / "nbest" / corpus / f"expert{k}.jsonl"

    def fused(self, corpus: str) -> Path:
        return self.root / "rover" / f"{corpus}.jsonl"

    @property
    def weighter(self) -> Path:
        return self.root / "weighter" / "weighter.ensd"

    def student(self, policy: str) -> Path:
        return self.root / "students" / f"{policy}.ensd"

    def supervision(self, policy: str) -> Path:
        return self.root / "students" / f"{policy}.supervision.jsonl"

    @property
    def reports(self) -> Path:
        return self.root / "reports"


def require(path: Path, key: str, what: str) -> Path:
    if not path.exists():
        raise ConfigError(key, f"{what} {path} does not exist; run the stage that produces it first")
    return path


def load_tokenizer(workdir: Workdir) -> Tokenizer:
    corpus_dir = require(workdir.corpus_dir(LABELED), "workdir", "corpus")
    return get_tokenizer(read_corpus_info(corpus_dir)["vocab"])


def feature_dim(workdir: Workdir, corpus: str = LABELED) -> int:
    return int(read_corpus_info(workdir.corpus_dir(corpus))["spec"]["feature_dim"])


def load_utterances(
        workdir: Workdir,
        corpus: str,
        splits: Optional[Sequence[Union[str, Split]]] = None,
        guard: bool = False,
) -> list[Utterance]:
    manifest = require(workdir.manifest(corpus), "workdir", "manifest")
    return read_manifest(manifest, splits, guard)


def load_partition(workdir: Workdir) -> Partition:
    return Partition.load(require(workdir.partition, "workdir", "partition file"))


def expert_utterances(utterances: Iterable[Utterance], partition: Partition, k: int) -> list[Utterance]:
    """Training-split utterances of the speakers assigned to expert k."""
    return [u for u in utterances if u.split == Split.TRAIN and partition.assignment.get(u.speaker_id) == k]


def load_nbest_table(workdir: Workdir, corpus: str, num_experts: int, n_max: int) -> dict[str, list[NBestList]]:
    paths = [require(workdir.nbest(corpus, k), "workdir", "n-best file") for k in range(1, num_experts + 1)]
    return load_nbest_files(paths, n_max)


def nbest_row(table: dict[str, list[NBestList]], utt_id: str) -> list[NBestList]:
    try:
        return table[utt_id]
    except KeyError:
        raise DataError(f"{utt_id} has no expert n-best lists") from None


def feature_tensor(utterance: Utterance) -> torch.Tensor:
    return torch.from_numpy(utterance.features()).to(torch.get_default_dtype())


def write_jsonl(path: Path, records: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path: Union[str, Path]) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def read_fused(path: Path) -> dict[str, TokenSequence]:
    return {r["utt_id"]: tokenize(r["text"]) for r in read_jsonl(path)}


def read_fusion_settings(path: Path) -> Optional[dict]:
    """Voting scheme and confidence source a fused file was written with, None when unrecorded."""
    records = read_jsonl(path)
    if not records or "scheme" not in records[0]:
        return None
    return {"scheme": records[0]["scheme"], "confidence_source": records[0].get("confidence_source")}
