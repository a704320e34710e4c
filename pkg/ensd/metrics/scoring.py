from __future__ import annotations

from typing import Sequence

import numpy as np

from ensd.errors import EmptySet, InvalidArity
from .wer import wer, best_expert_labels


def weighter_accuracy(
        predictions: Sequence[Sequence[float]],
        refs: Sequence[Sequence[str]],
        hyps: Sequence[Sequence[Sequence[str]]],
) -> float:
    """Fraction of utterances whose highest-weighted expert is a lowest-WER expert.

    Args:
        predictions: One weight vector per utterance.
        refs: Ground-truth transcript per utterance.
        hyps: Per utterance, one transcript per expert.

    Returns:
        accuracy: Value in [0, 1]. Argmax ties go to the lowest index.
    """
    if not (len(predictions) == len(refs) == len(hyps)):
        raise InvalidArity(f"{len(predictions)} predictions, {len(refs)} refs, {len(hyps)} hypothesis sets")
    if len(predictions) == 0:
        raise EmptySet("no utterances to score")

    hits = 0
    for weights, ref, utt_hyps in zip(predictions, refs, hyps):
        if len(weights) != len(utt_hyps):
            raise InvalidArity(f"{len(weights)} weights for {len(utt_hyps)} experts")
        z = best_expert_labels(ref, utt_hyps)
        hits += z[int(np.argmax(weights))]
    return hits / len(predictions)


def weighted_wer(weights: Sequence[float], ref: Sequence[str], hyps: Sequence[Sequence[str]]) -> float:
    """sum_i w_i * WER(ref, hyps[i])."""
    if len(weights) != len(hyps):
        raise InvalidArity(f"{len(weights)} weights for {len(hyps)} experts")
    return sum(float(w) * float(wer(ref, h)) for w, h in zip(weights, hyps))
