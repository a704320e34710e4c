from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ensd.errors import InvalidLattice, ShapeError, VocabError

BLANK = 0


@dataclass(frozen=True)
class AlphaBeta:
    """Log-space forward and backward variables over a T x (U + 1) lattice."""
    alpha: np.ndarray
    beta: np.ndarray
    final_blank: float

    @property
    def forward_log_likelihood(self) -> float:
        return float(self.alpha[-1, -1] + self.final_blank)

    @property
    def backward_log_likelihood(self) -> float:
        return float(self.beta[0, 0])


def _check(lattice: torch.Tensor, targets: Sequence[int]) -> np.ndarray:
    if lattice.dim() != 3:
        raise ShapeError("rnnt_loss", f"expected a (T, U + 1, V + 1) lattice, got {tuple(lattice.shape)}")
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    num_frames, num_positions, num_classes = lattice.shape
    if num_frames == 0:
        raise InvalidLattice(f"lattice has no frames for {len(targets)} target tokens")
    if num_positions != len(targets) + 1:
        raise ShapeError("rnnt_loss", f"lattice has {num_positions} label positions for {len(targets)} targets")
    if len(targets) and (targets.min() < 1 or targets.max() >= num_classes):
        raise VocabError(f"targets must lie in [1, {num_classes - 1}], got {targets.tolist()}")
    return targets


def _alpha_beta(log_probs: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    num_frames, num_positions, _ = log_probs.shape
    blank = log_probs[:, :, BLANK]
    emit = np.full((num_frames, num_positions), -np.inf)
    if len(targets):
        emit[:, :-1] = log_probs[:, np.arange(len(targets)), targets]

    alpha = np.full((num_frames, num_positions), -np.inf)
    alpha[0, 0] = 0.0
    for t in range(num_frames):
        for u in range(num_positions):
            if t == 0 and u == 0:
                continue
            from_blank = alpha[t - 1, u] + blank[t - 1, u] if t > 0 else -np.inf
            from_emit = alpha[t, u - 1] + emit[t, u - 1] if u > 0 else -np.inf
            alpha[t, u] = np.logaddexp(from_blank, from_emit)

    beta = np.full((num_frames, num_positions), -np.inf)
    beta[-1, -1] = blank[-1, -1]
    for t in reversed(range(num_frames)):
        for u in reversed(range(num_positions)):
            if t == num_frames - 1 and u == num_positions - 1:
                continue
            via_blank = blank[t, u] + beta[t + 1, u] if t < num_frames - 1 else -np.inf
            via_emit = emit[t, u] + beta[t, u + 1] if u < num_positions - 1 else -np.inf
            beta[t, u] = np.logaddexp(via_blank, via_emit)

    # alpha ends at the last cell; the terminating blank closes the path
    alpha_total = alpha[-1, -1] + blank[-1, -1]
    return alpha, beta, alpha_total


def _log_prob_grad(log_probs: np.ndarray, targets: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """dL/d(log_probs) from occupancy probabilities."""
    num_frames, num_positions, _ = log_probs.shape
    log_z = beta[0, 0]
    grad = np.zeros_like(log_probs)

    blank = log_probs[:, :, BLANK]
    grad[:-1, :, BLANK] = -np.exp(alpha[:-1] + blank[:-1] + beta[1:] - log_z)
    grad[-1, -1, BLANK] = -np.exp(alpha[-1, -1] + blank[-1, -1] - log_z)

    for u, label in enumerate(targets):
        grad[:, u, label] = -np.exp(alpha[:, u] + log_probs[:, u, label] + beta[:, u + 1] - log_z)
    return grad


class TransducerLossFunction(torch.autograd.Function):
    """Negative transducer log-likelihood with the alpha-beta gradient."""

    @staticmethod
    def forward(ctx, logits: torch.Tensor, targets: np.ndarray) -> torch.Tensor:
        log_softmax = torch.log_softmax(logits.detach().to(torch.float64), dim=-1)
        log_probs = log_softmax.cpu().numpy()
        alpha, beta, _ = _alpha_beta(log_probs, targets)

        grad_log_probs = _log_prob_grad(log_probs, targets, alpha, beta)
        probs = np.exp(log_probs)
        grad_logits = grad_log_probs - probs * grad_log_probs.sum(axis=-1, keepdims=True)
        ctx.save_for_backward(torch.from_numpy(grad_logits).to(logits))
        return logits.new_tensor(-beta[0, 0])

    @staticmethod
    def backward(ctx, grad_output: torch.Tensor):
        (grad_logits,) = ctx.saved_tensors
        return grad_output * grad_logits, None


def alpha_beta(lattice: torch.Tensor, targets: Sequence[int]) -> AlphaBeta:
    targets = _check(lattice, targets)
    log_probs = torch.log_softmax(lattice.detach().to(torch.float64), dim=-1).cpu().numpy()
    alpha, beta, _ = _alpha_beta(log_probs, targets)
    return AlphaBeta(alpha, beta, float(log_probs[-1, -1, BLANK]))


def rnnt_loss(lattice: torch.Tensor, targets: Sequence[int]) -> torch.Tensor:
    """-log P(targets | lattice) summed over all monotonic alignments.

    Args:
        lattice: (T, U + 1, V + 1) unnormalized logits with blank at index 0.
        targets: U token ids in [1, V]. An empty sequence is valid supervision.

    Returns:
        Scalar tensor, differentiable with respect to the lattice.
    """
    targets = _check(lattice, targets)
    return TransducerLossFunction.apply(lattice, targets)


def rnnt_grad(lattice: torch.Tensor, targets: Sequence[int]) -> torch.Tensor:
    lattice = lattice.detach().requires_grad_(True)
    loss = rnnt_loss(lattice, targets)
    (grad,) = torch.autograd.grad(loss, lattice)
    return grad
