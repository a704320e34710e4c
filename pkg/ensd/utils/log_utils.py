from __future__ import annotations

from fractions import Fraction
from typing import Any, Union

import numpy as np
import torch

Total = Union[float, Fraction]


def _summed(value: Any) -> tuple[Total, int]:
    if isinstance(value, torch.Tensor):
        return value.detach().sum().item(), value.numel()
    if isinstance(value, np.ndarray):
        return float(value.sum()), value.size
    if isinstance(value, (Fraction, int)):
        return Fraction(value), 1
    return float(value), 1


class Averager:
    """Running means of logged statistics, reset on every read.

    Tensor and array values count once per element. Fractions, such as
    per-utterance WERs, are summed exactly and only become floats on read.
    """

    def __init__(self):
        self.reset()

    # noinspection PyAttributeOutsideInit
    def reset(self):
        self.total: dict[str, Total] = {}
        self.counter: dict[str, int] = {}

    def update(self, stats: dict[str, Any]) -> None:
        for key, value in stats.items():
            total, count = _summed(value)
            self.total[key] = self.total.get(key, 0) + total
            self.counter[key] = self.counter.get(key, 0) + count

    def average(self) -> dict[str, float]:
        averaged_stats = {
            key: float(total / self.counter[key])
            for key, total in self.total.items()
            if self.counter[key]
        }
        self.reset()

        return averaged_stats
