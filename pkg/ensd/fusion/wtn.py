from __future__ import annotations

import dataclasses
from types import MappingProxyType
from typing import Mapping, Optional, Sequence, Union

from ensd.errors import EmptyInput, InvalidArity
from ensd.metrics.alignment import EditOp, edit_path, TokenSequence

NULL = None
DEFAULT_CONFIDENCE = 1.0

Confidence = Union[float, Sequence[float]]


@dataclasses.dataclass(frozen=True)
class SlotEntry:
    count: int
    confidence_sum: float

    @property
    def mean_confidence(self) -> float:
        return self.confidence_sum / self.count


@dataclasses.dataclass(frozen=True)
class WordTransitionNetwork:
    slots: tuple[Mapping[Optional[str], SlotEntry], ...]
    num_hypotheses: int

    def __len__(self) -> int:
        return len(self.slots)


def _token_confidences(tokens: Sequence[str], confidence: Optional[Confidence]) -> tuple[list[float], float]:
    """Per-token confidences plus the confidence this hypothesis gives to NULL."""
    if confidence is None:
        return [DEFAULT_CONFIDENCE] * len(tokens), DEFAULT_CONFIDENCE
    if isinstance(confidence, (int, float)):
        return [float(confidence)] * len(tokens), float(confidence)
    if len(confidence) != len(tokens):
        raise InvalidArity(f"{len(confidence)} confidences for {len(tokens)} tokens")
    per_token = [float(c) for c in confidence]
    null_conf = sum(per_token) / len(per_token) if per_token else DEFAULT_CONFIDENCE
    return per_token, null_conf


def _add(slot: dict, token: Optional[str], confidence: float) -> None:
    entry = slot.get(token)
    if entry is None:
        slot[token] = SlotEntry(1, confidence)
    else:
        slot[token] = SlotEntry(entry.count + 1, entry.confidence_sum + confidence)


def build_wtn(
        hyps: Sequence[TokenSequence],
        confidences: Optional[Sequence[Optional[Confidence]]] = None,
) -> WordTransitionNetwork:
    """Align hypotheses one after another into a word transition network.

    Hypothesis k+1 is aligned against the slots built from hypotheses 1..k. A
    token costs 0 against a slot already holding it and 1 otherwise, leaving a
    slot unfilled costs 0 if the slot already holds NULL and 1 otherwise, and an
    unmatched token opens a new slot where every earlier hypothesis votes NULL.

    Args:
        hyps: Hypotheses in combination order.
        confidences: Optional per hypothesis: one utterance-level value, which
            is replicated over its tokens, or one value per token.

    Returns:
        wtn: Slots whose counts each sum to len(hyps).
    """
    if len(hyps) == 0:
        raise EmptyInput("no hypotheses to combine")
    if confidences is None:
        confidences = [None] * len(hyps)
    if len(confidences) != len(hyps):
        raise InvalidArity(f"{len(confidences)} confidence entries for {len(hyps)} hypotheses")

    slots: list[dict] = []
    null_confs: list[float] = []
    for k, (tokens, confidence) in enumerate(zip(hyps, confidences)):
        token_conf, null_conf = _token_confidences(tokens, confidence)
        ops = edit_path(
            len(slots),
            len(tokens),
            lambda i, j: 0 if tokens[j] in slots[i] else 1,
            lambda i: 0 if NULL in slots[i] else 1,
            lambda j: 1,
        )

        merged = []
        for pair in ops:
            if pair.op in (EditOp.MATCH, EditOp.SUBSTITUTE):
                slot = slots[pair.ref_index]
                _add(slot, tokens[pair.hyp_index], token_conf[pair.hyp_index])
            elif pair.op == EditOp.DELETE:
                slot = slots[pair.ref_index]
                _add(slot, NULL, null_conf)
            else:
                slot = {}
                if k > 0:
                    slot[NULL] = SlotEntry(k, sum(null_confs))
                _add(slot, tokens[pair.hyp_index], token_conf[pair.hyp_index])
            merged.append(slot)
        slots = merged
        null_confs.append(null_conf)

    return WordTransitionNetwork(
        slots=tuple(MappingProxyType(slot) for slot in slots),
        num_hypotheses=len(hyps),
    )
