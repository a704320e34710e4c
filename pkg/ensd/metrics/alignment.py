from __future__ import annotations

import dataclasses
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

TokenSequence = tuple[str, ...]


class EditOp(Enum):
    MATCH = "match"
    SUBSTITUTE = "sub"
    DELETE = "del"
    INSERT = "ins"


@dataclasses.dataclass(frozen=True)
class AlignedPair:
    op: EditOp
    ref_index: Optional[int]
    hyp_index: Optional[int]


@dataclasses.dataclass(frozen=True)
class EditAlignment:
    ops: tuple[AlignedPair, ...]
    substitutions: int
    deletions: int
    insertions: int
    matches: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def tokenize(text: str) -> TokenSequence:
    """Lowercase and split on whitespace runs."""
    return tuple(text.lower().split())


def edit_path(
        ref_len: int,
        hyp_len: int,
        sub_cost: Callable[[int, int], int],
        del_cost: Callable[[int], int],
        ins_cost: Callable[[int], int],
) -> list[AlignedPair]:
    """Minimum-cost edit path between two sequences under caller-supplied costs.

    A diagonal step of cost 0 is a match, any other diagonal step a substitution.
    Backtrace prefers match > substitution > deletion > insertion, so equal-cost
    paths always resolve the same way.

    Args:
        ref_len: Length of the reference side.
        hyp_len: Length of the hypothesis side.
        sub_cost: Cost of aligning ref[i] with hyp[j].
        del_cost: Cost of leaving ref[i] unaligned.
        ins_cost: Cost of leaving hyp[j] unaligned.

    Returns:
        ops: Aligned pairs in reference order.
    """
    d = np.zeros((ref_len + 1, hyp_len + 1), dtype=np.int64)
    for i in range(1, ref_len + 1):
        d[i, 0] = d[i - 1, 0] + del_cost(i - 1)
    for j in range(1, hyp_len + 1):
        d[0, j] = d[0, j - 1] + ins_cost(j - 1)
    for i in range(1, ref_len + 1):
        for j in range(1, hyp_len + 1):
            d[i, j] = min(
                d[i - 1, j - 1] + sub_cost(i - 1, j - 1),
                d[i - 1, j] + del_cost(i - 1),
                d[i, j - 1] + ins_cost(j - 1),
            )

    ops = []
    i, j = ref_len, hyp_len
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            diag = sub_cost(i - 1, j - 1)
            if diag == 0 and d[i, j] == d[i - 1, j - 1]:
                ops.append(AlignedPair(EditOp.MATCH, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
            if d[i, j] == d[i - 1, j - 1] + diag:
                ops.append(AlignedPair(EditOp.SUBSTITUTE, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and d[i, j] == d[i - 1, j] + del_cost(i - 1):
            ops.append(AlignedPair(EditOp.DELETE, i - 1, None))
            i -= 1
            continue
        ops.append(AlignedPair(EditOp.INSERT, None, j - 1))
        j -= 1

    ops.reverse()
    return ops


def align(ref: Sequence[str], hyp: Sequence[str]) -> EditAlignment:
    """Levenshtein alignment with unit costs."""
    ops = edit_path(
        len(ref),
        len(hyp),
        lambda i, j: 0 if ref[i] == hyp[j] else 1,
        lambda i: 1,
        lambda j: 1,
    )
    counts = {op: 0 for op in EditOp}
    for pair in ops:
        counts[pair.op] += 1
    return EditAlignment(
        ops=tuple(ops),
        substitutions=counts[EditOp.SUBSTITUTE],
        deletions=counts[EditOp.DELETE],
        insertions=counts[EditOp.INSERT],
        matches=counts[EditOp.MATCH],
    )
