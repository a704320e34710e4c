from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ensd.errors import UndefinedWER, InvalidArity
from .alignment import align

WER_DECIMALS = 4


def wer(ref: Sequence[str], hyp: Sequence[str]) -> Fraction:
    """Word error rate (S + D + I) / len(ref) as an exact fraction. May exceed 1."""
    if len(ref) == 0:
        if len(hyp) == 0:
            return Fraction(0)
        raise UndefinedWER(f"empty reference with {len(hyp)} hypothesis tokens")

    return Fraction(align(ref, hyp).errors, len(ref))


def corpus_wer(refs: Sequence[Sequence[str]], hyps: Sequence[Sequence[str]]) -> Fraction:
    """Total edit errors over total reference words."""
    if len(refs) != len(hyps):
        raise InvalidArity(f"{len(refs)} references but {len(hyps)} hypotheses")

    errors = 0
    words = 0
    for r, h in zip(refs, hyps):
        errors += align(r, h).errors
        words += len(r)

    if words == 0:
        if errors == 0:
            return Fraction(0)
        raise UndefinedWER("all references are empty")
    return Fraction(errors, words)


def best_expert_labels(ref: Sequence[str], hyps: Sequence[Sequence[str]]) -> tuple[int, ...]:
    """Binary targets z: 1 for every expert attaining the minimum WER.

    Ties all receive 1, so z always has at least one positive entry.
    """
    if len(hyps) < 2:
        raise InvalidArity(f"need at least 2 experts, got {len(hyps)}")

    wers = [wer(ref, h) for h in hyps]
    best = min(wers)
    return tuple(int(w == best) for w in wers)


def format_wer(value) -> str:
    return f"{float(value):.{WER_DECIMALS}f}"
