from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from ensd.errors import InvalidArity, DataError
from ensd.model.autograd import forward_backward
from ensd.model.transducer import TransducerModel
from .loss import rnnt_loss

SIMPLEX_TOLERANCE = 1e-6


def weighted_multi_teacher_loss(
        model: TransducerModel,
        features: torch.Tensor,
        transcripts: Sequence[Sequence[int]],
        weights: Sequence[float],
) -> torch.Tensor:
    """sum_i w_i * L_rnnt(x, t_i) with one encoder pass shared by all teachers.

    Teachers with zero weight are skipped.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != len(transcripts):
        raise InvalidArity(f"{len(weights)} weights for {len(transcripts)} transcripts")
    if (weights < 0).any() or abs(weights.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise DataError(f"teacher weights must lie on the simplex, got {weights.tolist()}")

    enc = model.encode(features)
    total = features.new_zeros(())
    for weight, tokens in zip(weights, transcripts):
        if weight == 0:
            continue
        tokens = torch.as_tensor(list(tokens), dtype=torch.long, device=features.device)
        lattice = model.join(enc, model.predict(tokens))
        total = total + float(weight) * rnnt_loss(lattice, tokens.tolist())
    return total


def weighted_multi_teacher_grad(
        model: TransducerModel,
        features: torch.Tensor,
        transcripts: Sequence[Sequence[int]],
        weights: Sequence[float],
) -> tuple[torch.Tensor, list[torch.Tensor]]:
    def multi_teacher_graph():
        return weighted_multi_teacher_loss(model, features, transcripts, weights)

    return forward_backward(multi_teacher_graph, list(model.parameters()))
