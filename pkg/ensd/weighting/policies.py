from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

from ensd.errors import ConfigError, InvalidArity
from ensd.metrics import wer

DEFAULT_TEMPERATURE = 1.0


class Policy(Enum):
    BEST_EXPERT = "best_expert"
    ALL_EXPERTS = "all_experts"
    ROVER = "rover"
    SMART_WEIGHTER = "smart_weighter"
    ORACLE = "oracle"

    @classmethod
    def parse(cls, name: str) -> "Policy":
        """Accepts `smart_weighter`, `smart-weighter` or `SmartWeighter`."""
        key = "".join(c for c in str(name).lower() if c.isalnum())
        for policy in cls:
            if policy.value.replace("_", "") == key:
                return policy
        raise ConfigError("student.policy", f"unknown policy {name!r}, expected one of {[p.value for p in cls]}")

    @property
    def reads_references(self) -> bool:
        return self == Policy.ORACLE


def uniform_weights(num_experts: int) -> np.ndarray:
    if num_experts < 1:
        raise InvalidArity(f"need at least one expert, got {num_experts}")
    return np.full(num_experts, 1.0 / num_experts)


def one_hot(index: int, num_experts: int) -> np.ndarray:
    w = np.zeros(num_experts)
    w[index] = 1.0
    return w


def best_expert_weights(dev_wers: Sequence[float]) -> np.ndarray:
    """One-hot on the expert with the lowest validation WER, lowest index on ties."""
    dev_wers = np.asarray(dev_wers, dtype=np.float64)
    if dev_wers.size == 0:
        raise InvalidArity("empty WER table")
    return one_hot(int(np.argmin(dev_wers)), dev_wers.size)


def oracle_weights(ref: Sequence[str], hyps: Sequence[Sequence[str]]) -> np.ndarray:
    """One-hot on the first expert with the lowest WER against the reference."""
    wers = [wer(ref, h) for h in hyps]
    return one_hot(wers.index(min(wers)), len(hyps))


def temperature_renormalize(w: Sequence[float], temperature: float = DEFAULT_TEMPERATURE) -> np.ndarray:
    """Softmax of the weights at temperature T, flattening low-entropy weight vectors."""
    if temperature <= 0:
        raise ConfigError("student.temperature", f"temperature must be positive, got {temperature}")
    logits = np.asarray(w, dtype=np.float64) / temperature
    e = np.exp(logits - logits.max())
    return e / e.sum()
