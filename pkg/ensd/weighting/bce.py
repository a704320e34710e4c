from __future__ import annotations

import torch

from ensd.errors import InvalidArity

BCE_EPS = 1e-7


def bce_loss(w, z, eps: float = BCE_EPS) -> tuple[torch.Tensor, torch.Tensor]:
    """Binary cross entropy of weights against best-expert targets.

    L = -sum_i z_i log w_i + (1 - z_i) log(1 - w_i), summed over experts and
    averaged over a leading batch dimension if there is one. Weights are
    clamped to [eps, 1 - eps] first.

    Args:
        w: Weights of shape (K,) or (B, K). Keeps its autograd graph.
        z: Binary targets of the same shape.

    Returns:
        loss: Scalar loss, differentiable with respect to w.
        grad: dL/dw evaluated on the clamped weights, detached.
    """
    w = torch.as_tensor(w, dtype=torch.float64)
    z = torch.as_tensor(z, dtype=w.dtype, device=w.device)
    if w.shape != z.shape:
        raise InvalidArity(f"weights {tuple(w.shape)} and targets {tuple(z.shape)} differ")

    wc = w.clamp(eps, 1 - eps)
    per_utterance = -(z * torch.log(wc) + (1 - z) * torch.log1p(-wc)).sum(-1)
    batch = per_utterance.numel() if w.dim() > 1 else 1
    loss = per_utterance.mean() if w.dim() > 1 else per_utterance

    with torch.no_grad():
        wd = wc.detach()
        grad = (-z / wd + (1 - z) / (1 - wd)) / batch
    return loss, grad
