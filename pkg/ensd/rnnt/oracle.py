from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np
import torch
from scipy.special import logsumexp

from .loss import BLANK, _check


def alignment_paths(num_frames: int, num_targets: int) -> list[tuple[bool, ...]]:
    """Every move sequence through a T x (U + 1) lattice, True for a label emission.

    The terminating blank from the last cell is implied.
    """
    moves = num_frames - 1 + num_targets
    paths = []
    for emits in itertools.combinations(range(moves), num_targets):
        emit_set = set(emits)
        paths.append(tuple(i in emit_set for i in range(moves)))
    return paths


def brute_force_rnnt_loss(lattice: torch.Tensor, targets: Sequence[int]) -> float:
    """Loss by explicit enumeration of alignments. Only usable on tiny lattices."""
    targets = _check(lattice, targets)
    log_probs = torch.log_softmax(lattice.detach().to(torch.float64), dim=-1).cpu().numpy()

    path_scores = []
    for path in alignment_paths(log_probs.shape[0], len(targets)):
        t = u = 0
        score = 0.0
        for is_emit in path:
            if is_emit:
                score += log_probs[t, u, targets[u]]
                u += 1
            else:
                score += log_probs[t, u, BLANK]
                t += 1
        score += log_probs[t, u, BLANK]
        path_scores.append(score)
    return float(-logsumexp(path_scores))
