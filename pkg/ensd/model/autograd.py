from __future__ import annotations

from typing import Callable, Sequence

import torch

from ensd.errors import ShapeError

_SHAPE_HINTS = ("shape", "size", "dimension", "must match")


def forward_backward(fn: Callable[[], torch.Tensor], params: Sequence[torch.Tensor]) -> tuple[torch.Tensor, list[torch.Tensor]]:
    """Run a scalar-valued graph and return its value with the gradient of every parameter.

    Parameters the graph does not touch get a zero gradient. Shape mismatches
    inside the graph surface as ShapeError naming the function that built it.
    """
    node = getattr(fn, "__qualname__", repr(fn))
    try:
        out = fn()
    except RuntimeError as e:
        if any(hint in str(e) for hint in _SHAPE_HINTS):
            raise ShapeError(node, str(e)) from e
        raise

    if out.numel() != 1:
        raise ShapeError(node, f"expected a scalar output, got shape {tuple(out.shape)}")

    grads = torch.autograd.grad(out.reshape(()), list(params), allow_unused=True)
    return out.detach().reshape(()), [
        torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)
    ]
