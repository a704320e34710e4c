from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from ensd.errors import InvalidScore, DataError
from ensd.metrics.alignment import TokenSequence, tokenize

DEFAULT_N_MAX = 10


@dataclasses.dataclass(frozen=True)
class NBestEntry:
    text: TokenSequence
    score: float


@dataclasses.dataclass(frozen=True)
class NBestList:
    """Scored hypotheses of one expert for one utterance, best first."""
    utt_id: str
    expert_id: int
    entries: tuple[NBestEntry, ...]
    greedy: Optional[TokenSequence] = None

    @property
    def best(self) -> TokenSequence:
        return self.entries[0].text

    @property
    def one_best(self) -> TokenSequence:
        """Greedy transcript when it was decoded, otherwise the top beam entry.

        Expert rows of the report score the greedy output, and the weighter,
        ROVER and student supervision read this same transcript.
        """
        return self.best if self.greedy is None else self.greedy

    @property
    def scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries], dtype=np.float64)

    def validate(self, n_max: int = DEFAULT_N_MAX) -> "NBestList":
        if not 1 <= len(self.entries) <= n_max:
            raise DataError(f"{self.utt_id}: expert {self.expert_id} has {len(self.entries)} entries, "
                            f"expected 1..{n_max}")
        scores = self.scores
        if np.any(~np.isfinite(scores)) or np.any(scores <= 0):
            raise InvalidScore(f"{self.utt_id}: scores must be positive, got {scores.tolist()}")
        if np.any(np.diff(scores) > 0):
            raise DataError(f"{self.utt_id}: entries are not sorted by descending score")
        return self

    def to_record(self) -> dict:
        record = {
            "utt_id": self.utt_id,
            "expert_id": self.expert_id,
            "hyps": [{"text": " ".join(e.text), "score": e.score} for e in self.entries],
        }
        if self.greedy is not None:
            record["greedy"] = " ".join(self.greedy)
        return record

    @classmethod
    def from_record(cls, record: dict) -> "NBestList":
        greedy = record.get("greedy")
        return cls(
            utt_id=record["utt_id"],
            expert_id=int(record["expert_id"]),
            entries=tuple(NBestEntry(tokenize(h["text"]), float(h["score"])) for h in record["hyps"]),
            greedy=None if greedy is None else tokenize(greedy),
        )


def normalize_scores(nbest: Union[NBestList, Iterable[float]]) -> np.ndarray:
    """p_i = s_i / sum_j s_j. Scores must be strictly positive."""
    scores = nbest.scores if isinstance(nbest, NBestList) else np.asarray(list(nbest), dtype=np.float64)
    if scores.size == 0:
        raise InvalidScore("no scores to normalize")
    if np.any(~np.isfinite(scores)) or np.any(scores <= 0):
        raise InvalidScore(f"scores must be positive and finite, got {scores.tolist()}")
    return scores / scores.sum()


def entropy(nbest: Union[NBestList, Iterable[float]]) -> float:
    """Shannon entropy in nats of the normalized n-best scores, with 0 ln 0 = 0."""
    p = normalize_scores(nbest)
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log(p))))


def max_entropy(n: int) -> float:
    return math.log(n)


def write_nbest_file(path: Union[str, Path], nbests: Iterable[NBestList]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for nbest in nbests:
            f.write(json.dumps(nbest.to_record(), sort_keys=True) + "\n")


def read_nbest_file(path: Union[str, Path], n_max: int = DEFAULT_N_MAX) -> Iterator[NBestList]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield NBestList.from_record(json.loads(line)).validate(n_max)


def load_nbest_files(paths: list[Union[str, Path]], n_max: int = DEFAULT_N_MAX) -> dict[str, list[NBestList]]:
    """Index K expert n-best files by utterance: utt_id -> [expert 1 list, ..., expert K list]."""
    table: dict[str, list[Optional[NBestList]]] = {}
    for k, path in enumerate(paths):
        for nbest in read_nbest_file(path, n_max):
            row = table.setdefault(nbest.utt_id, [None] * len(paths))
            if row[k] is not None:
                raise DataError(f"{nbest.utt_id}: duplicated in {path}")
            row[k] = nbest
    for utt_id, row in table.items():
        missing = [k + 1 for k, nbest in enumerate(row) if nbest is None]
        if missing:
            raise DataError(f"{utt_id}: missing from expert n-best files {missing}")
    return table
