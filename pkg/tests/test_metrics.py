import functools
import itertools
from fractions import Fraction

import numpy as np
import pytest

from ensd.errors import EmptySet, InvalidArity, UndefinedWER
from ensd.metrics import (
    EditOp,
    align,
    best_expert_labels,
    corpus_wer,
    format_wer,
    tokenize,
    weighted_wer,
    weighter_accuracy,
    wer,
)


def _with_errors(ref, n):
    """Copy of ref with the first n tokens substituted."""
    return tuple("x" if i < n else t for i, t in enumerate(ref))


REF10 = tuple("a b c d e f g h i j".split())


@functools.lru_cache(maxsize=None)
def _brute_force_distance(ref, hyp):
    """Edit distance as the minimum over all edit sequences."""
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    return min(
        _brute_force_distance(ref[1:], hyp[1:]) + (ref[0] != hyp[0]),
        _brute_force_distance(ref[1:], hyp) + 1,
        _brute_force_distance(ref, hyp[1:]) + 1,
    )


@pytest.mark.parametrize("text,expected", [
    ("A b  c ", ("a", "b", "c")),
    ("", ()),
    ("Hello HELLO", ("hello", "hello")),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_align_counts():
    alignment = align(("a", "b", "c"), ("a", "b", "c"))
    assert (alignment.substitutions, alignment.deletions, alignment.insertions, alignment.matches) == (0, 0, 0, 3)

    alignment = align(("a", "b", "c"), ("a", "x", "c"))
    assert (alignment.substitutions, alignment.deletions, alignment.insertions, alignment.matches) == (1, 0, 0, 2)
    assert [p.op for p in alignment.ops] == [EditOp.MATCH, EditOp.SUBSTITUTE, EditOp.MATCH]

    alignment = align(("a", "b"), ())
    assert (alignment.substitutions, alignment.deletions, alignment.insertions, alignment.matches) == (0, 2, 0, 0)


def test_align_matches_brute_force():
    alphabet = ("a", "b", "c")
    sequences = [seq for n in range(6) for seq in itertools.product(alphabet, repeat=n)]
    for ref, hyp in itertools.product(sequences, repeat=2):
        alignment = align(ref, hyp)
        assert alignment.errors == _brute_force_distance(ref, hyp)
        assert alignment.matches + alignment.substitutions + alignment.deletions == len(ref)


def test_wer_is_invariant_under_token_renaming():
    rng = np.random.default_rng(0)
    alphabet = np.array(["a", "b", "c", "d"])
    for _ in range(200):
        ref = tuple(rng.choice(alphabet, size=rng.integers(1, 8)))
        hyp = tuple(rng.choice(alphabet, size=rng.integers(0, 8)))
        renaming = dict(zip(alphabet, rng.permutation(["p", "q", "r", "s"])))
        renamed = align(tuple(renaming[t] for t in ref), tuple(renaming[t] for t in hyp))
        original = align(ref, hyp)
        assert wer(tuple(renaming[t] for t in ref), tuple(renaming[t] for t in hyp)) == wer(ref, hyp)
        assert [p.op for p in renamed.ops] == [p.op for p in original.ops]


def test_wer_examples():
    assert wer(("a", "b", "c"), ("a", "x", "c")) == Fraction(1, 3)
    assert wer(("a", "b"), ("a", "b")) == 0
    assert wer(("a",), ("x", "y")) == 2
    assert wer((), ()) == 0


def test_wer_empty_reference():
    with pytest.raises(UndefinedWER):
        wer((), ("a",))


def test_corpus_wer_pools_errors():
    refs = [("a", "b", "c"), ("d",)]
    hyps = [("a", "b", "c"), ("x",)]
    assert corpus_wer(refs, hyps) == Fraction(1, 4)
    with pytest.raises(InvalidArity):
        corpus_wer(refs, hyps[:1])


def test_best_expert_labels():
    hyps = [_with_errors(REF10, 1), _with_errors(REF10, 3), _with_errors(REF10, 5)]
    assert best_expert_labels(REF10, hyps) == (1, 0, 0)

    assert best_expert_labels(REF10, [REF10] * 3) == (1, 1, 1)

    hyps = [_with_errors(REF10, 2), _with_errors(REF10, 2), _with_errors(REF10, 4)]
    assert best_expert_labels(REF10, hyps) == (1, 1, 0)

    with pytest.raises(InvalidArity):
        best_expert_labels(REF10, [REF10])


def test_weighter_accuracy():
    refs = [REF10, REF10]
    hyps = [
        [_with_errors(REF10, 3), _with_errors(REF10, 1), _with_errors(REF10, 2)],
        [_with_errors(REF10, 1), _with_errors(REF10, 2), _with_errors(REF10, 3)],
    ]
    assert weighter_accuracy([[0, 1, 0], [1, 0, 0]], refs, hyps) == 1.0
    # uniform weights resolve to the first expert, which is best only for the second utterance
    assert weighter_accuracy([[1 / 3] * 3] * 2, refs, hyps) == 0.5

    with pytest.raises(EmptySet):
        weighter_accuracy([], [], [])
    with pytest.raises(InvalidArity):
        weighter_accuracy([[1, 0]], refs[:1], hyps[:1])


def test_weighted_wer():
    hyps = [_with_errors(REF10, 1), _with_errors(REF10, 2), _with_errors(REF10, 3)]
    assert weighted_wer([1 / 3] * 3, REF10, hyps) == pytest.approx(0.2)
    assert weighted_wer([1, 0, 0], REF10, [REF10, hyps[1], hyps[2]]) == 0
    with pytest.raises(InvalidArity):
        weighted_wer([0.5, 0.5], REF10, hyps)


def test_oracle_weighted_wer_is_a_lower_bound():
    rng = np.random.default_rng(0)
    for _ in range(20):
        hyps = [_with_errors(REF10, int(n)) for n in rng.integers(0, 10, size=3)]
        wers = [float(wer(REF10, h)) for h in hyps]
        one_hot = np.eye(3)[int(np.argmin(wers))]
        assert weighted_wer(one_hot, REF10, hyps) <= weighted_wer([1 / 3] * 3, REF10, hyps) + 1e-12


def test_format_wer():
    assert format_wer(Fraction(1, 3)) == "0.3333"
