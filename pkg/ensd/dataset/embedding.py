from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

from ensd.errors import EmptyInput

DEFAULT_SEGMENTS = 10
DEFAULT_UTTERANCES = 10
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureNormalizer:
    mean: npt.NDArray
    std: npt.NDArray

    def __call__(self, features: npt.NDArray) -> npt.NDArray:
        return (features - self.mean) / self.std


def fit_normalizer(features: Sequence[npt.NDArray]) -> FeatureNormalizer:
    """Global mean and variance normalization over all frames."""
    frames = np.concatenate(list(features), axis=0)
    return FeatureNormalizer(frames.mean(axis=0), np.maximum(frames.std(axis=0), STD_FLOOR))


@dataclass(frozen=True)
class SpeakerEmbedding:
    """Speaker vector plus the per-utterance vectors it averages.

    `votes` holds one embedding per sampled utterance; these are the inputs to
    majority-vote cluster assignment.
    """
    speaker_id: str
    vector: npt.NDArray
    votes: npt.NDArray


def segment_embedding(segment: npt.NDArray) -> npt.NDArray:
    return np.concatenate([segment.mean(axis=0), segment.std(axis=0)])


def utterance_embedding(
        features: npt.NDArray,
        segment_frames: int,
        num_segments: int = DEFAULT_SEGMENTS,
) -> npt.NDArray:
    """Average of up to `num_segments` evenly spaced segment embeddings.

    Utterances shorter than a segment are used whole.
    """
    num_frames = len(features)
    if num_frames == 0:
        raise EmptyInput("cannot embed an utterance without frames")
    if num_frames <= segment_frames:
        return segment_embedding(features)
    starts = np.unique(np.linspace(0, num_frames - segment_frames, num_segments).round().astype(int))
    return np.mean([segment_embedding(features[s:s + segment_frames]) for s in starts], axis=0)


def speaker_embedding(
        speaker_id: str,
        utterances: Sequence[npt.NDArray],
        segment_frames: int,
        num_segments: int = DEFAULT_SEGMENTS,
        num_utterances: int = DEFAULT_UTTERANCES,
        seed: int = 0,
        normalizer: Optional[FeatureNormalizer] = None,
) -> SpeakerEmbedding:
    """Embed a speaker from up to `num_utterances` randomly chosen utterances.

    Args:
        speaker_id: Speaker the utterances belong to.
        utterances: Feature matrices of all the speaker's utterances.
        segment_frames: Frames in one nominal second.
        num_segments: Segments averaged per utterance.
        num_utterances: Utterances sampled per speaker.
        seed: Sampling seed.
        normalizer: Global normalization applied to frames first.

    Returns:
        The speaker embedding and its per-utterance votes.
    """
    if len(utterances) == 0:
        raise EmptyInput(f"speaker {speaker_id} has no utterances")
    rng = np.random.default_rng(seed)
    count = min(num_utterances, len(utterances))
    chosen = np.sort(rng.choice(len(utterances), size=count, replace=False))

    votes = []
    for index in chosen:
        features = utterances[index]
        if normalizer is not None:
            features = normalizer(features)
        votes.append(utterance_embedding(features, segment_frames, num_segments))
    votes = np.stack(votes)
    return SpeakerEmbedding(speaker_id, votes.mean(axis=0), votes)
