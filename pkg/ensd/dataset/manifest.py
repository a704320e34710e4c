from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy.typing as npt

from ensd.errors import DataError, GroundTruthAccessError
from .features import read_features


class Split(Enum):
    TRAIN = "train"
    WEIGHTER = "weighter"
    DEV = "dev"
    TEST = "test"
    POOL = "pool"


@dataclass(frozen=True)
class Utterance:
    """One manifest record.

    A guarded utterance refuses to hand out its reference transcript, so code
    that trains on expert transcripts cannot read ground truth by accident.
    """
    utt_id: str
    speaker_id: str
    domain_id: int
    num_frames: int
    features_path: str
    split: Split
    _ref_text: Optional[str] = field(default=None, repr=False)
    guarded: bool = False

    @property
    def ref_text(self) -> str:
        if self.guarded:
            raise GroundTruthAccessError(f"reference transcript of {self.utt_id} is not available under this policy")
        if self._ref_text is None:
            raise DataError(f"{self.utt_id} has no reference transcript")
        return self._ref_text

    def guard(self) -> Utterance:
        return dataclasses.replace(self, guarded=True)

    def features(self) -> npt.NDArray:
        return read_features(self.features_path, self.utt_id)

    def to_record(self, base_dir: Optional[Union[str, Path]] = None) -> dict:
        features_path = self.features_path
        if base_dir is not None:
            features_path = Path(os.path.relpath(features_path, base_dir)).as_posix()
        return {
            "utt_id": self.utt_id,
            "speaker_id": self.speaker_id,
            "domain_id": self.domain_id,
            "num_frames": self.num_frames,
            "features_path": features_path,
            "ref_text": self._ref_text,
            "split": self.split.value,
        }

    @classmethod
    def from_record(cls, record: dict, base_dir: Optional[Union[str, Path]] = None) -> Utterance:
        try:
            features_path = record["features_path"]
            if base_dir is not None and not os.path.isabs(features_path):
                features_path = str(Path(base_dir) / features_path)
            return cls(
                utt_id=record["utt_id"],
                speaker_id=record["speaker_id"],
                domain_id=int(record["domain_id"]),
                num_frames=int(record["num_frames"]),
                features_path=features_path,
                split=Split(record.get("split", Split.TRAIN.value)),
                _ref_text=record.get("ref_text"),
            )
        except (KeyError, ValueError) as e:
            raise DataError(f"malformed manifest record {record!r}: {e}") from e


def write_manifest(path: Union[str, Path], utterances: Iterable[Utterance]) -> None:
    """Write JSONL with features paths relative to the manifest directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for utterance in utterances:
            f.write(json.dumps(utterance.to_record(path.parent)) + "\n")


def read_manifest(
        path: Union[str, Path],
        splits: Optional[Sequence[Union[str, Split]]] = None,
        guard: bool = False,
) -> list[Utterance]:
    """Load a manifest, optionally keeping only some splits and guarding references."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest {path} does not exist")
    keep = None if splits is None else {Split(s) for s in splits}

    utterances = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            utterance = Utterance.from_record(json.loads(line), path.parent)
            if keep is not None and utterance.split not in keep:
                continue
            utterances.append(utterance.guard() if guard else utterance)
    return utterances


def by_speaker(utterances: Iterable[Utterance]) -> dict[str, list[Utterance]]:
    speakers: dict[str, list[Utterance]] = {}
    for utterance in utterances:
        speakers.setdefault(utterance.speaker_id, []).append(utterance)
    return dict(sorted(speakers.items()))
