import math

import numpy as np
import pytest

from ensd.confidence import (
    NBestEntry,
    NBestList,
    entropy,
    load_nbest_files,
    max_entropy,
    normalize_scores,
    read_nbest_file,
    write_nbest_file,
)
from ensd.errors import DataError, InvalidScore


def _nbest(utt_id, expert_id, scores, texts=None):
    texts = texts or [("a",) * (i + 1) for i in range(len(scores))]
    return NBestList(utt_id, expert_id, tuple(NBestEntry(t, s) for t, s in zip(texts, scores)))


@pytest.mark.parametrize("scores,expected", [
    ((1, 1, 1, 1), (0.25, 0.25, 0.25, 0.25)),
    ((9, 1), (0.9, 0.1)),
    ((2, 1, 1), (0.5, 0.25, 0.25)),
])
def test_normalize_scores(scores, expected):
    np.testing.assert_allclose(normalize_scores(scores), expected)


def test_entropy_examples():
    assert entropy([1.0] * 10) == pytest.approx(math.log(10))
    assert entropy([1.0] * 10) == pytest.approx(max_entropy(10))
    assert entropy([0.7]) == 0.0
    assert entropy([9, 1]) == pytest.approx(0.325083, abs=1e-6)


def test_entropy_bounds():
    rng = np.random.default_rng(0)
    for n in range(1, 11):
        value = entropy(rng.uniform(0.01, 1.0, size=n))
        assert 0.0 <= value <= max_entropy(n) + 1e-12


@pytest.mark.parametrize("scale", [1e-6, 1e6])
def test_normalization_ignores_score_scale(scale):
    rng = np.random.default_rng(0)
    for n in range(1, 11):
        nbest = _nbest("u", 1, sorted(rng.uniform(0.01, 1.0, size=n), reverse=True))
        scaled = _nbest("u", 1, [s * scale for s in nbest.scores])
        np.testing.assert_allclose(normalize_scores(scaled), normalize_scores(nbest), rtol=1e-12)
        assert entropy(scaled) == pytest.approx(entropy(nbest), abs=1e-12)


def test_normalization_follows_entry_order():
    rng = np.random.default_rng(1)
    for n in range(1, 11):
        scores = rng.uniform(0.01, 1.0, size=n)
        order = rng.permutation(n)
        np.testing.assert_allclose(normalize_scores(scores[order]), normalize_scores(scores)[order], rtol=1e-12)
        assert entropy(scores[order]) == pytest.approx(entropy(scores), abs=1e-12)


@pytest.mark.parametrize("scores", [(1.0, 0.0), (1.0, -0.5), (), (np.nan, 1.0)])
def test_invalid_scores(scores):
    with pytest.raises(InvalidScore):
        normalize_scores(scores)


def test_validate_rejects_bad_lists():
    _nbest("u", 1, [0.9, 0.5]).validate()
    with pytest.raises(DataError):
        _nbest("u", 1, [0.5, 0.9]).validate()
    with pytest.raises(DataError):
        _nbest("u", 1, [0.5] * 3).validate(n_max=2)
    with pytest.raises(DataError):
        _nbest("u", 1, []).validate()
    with pytest.raises(InvalidScore):
        _nbest("u", 1, [0.5, 0.0]).validate()


def test_nbest_file_keeps_best_first(tmp_path):
    nbest = NBestList("u1", 2, (NBestEntry(("a", "b"), 0.8), NBestEntry(("a",), 0.3)), greedy=("a", "b"))
    write_nbest_file(tmp_path / "e.jsonl", [nbest])
    (loaded,) = read_nbest_file(tmp_path / "e.jsonl")
    assert loaded == nbest
    assert loaded.best == ("a", "b")


def test_load_nbest_files_indexes_by_utterance(tmp_path):
    paths = []
    for k in (1, 2):
        paths.append(tmp_path / f"expert{k}.jsonl")
        write_nbest_file(paths[-1], [_nbest("u1", k, [0.5]), _nbest("u2", k, [0.4])])
    table = load_nbest_files(paths)
    assert sorted(table) == ["u1", "u2"]
    assert [nb.expert_id for nb in table["u1"]] == [1, 2]


def test_load_nbest_files_requires_full_coverage(tmp_path):
    write_nbest_file(tmp_path / "expert1.jsonl", [_nbest("u1", 1, [0.5]), _nbest("u2", 1, [0.4])])
    write_nbest_file(tmp_path / "expert2.jsonl", [_nbest("u1", 2, [0.5])])
    with pytest.raises(DataError, match="u2"):
        load_nbest_files([tmp_path / "expert1.jsonl", tmp_path / "expert2.jsonl"])

    write_nbest_file(tmp_path / "dup.jsonl", [_nbest("u1", 1, [0.5]), _nbest("u1", 1, [0.5])])
    with pytest.raises(DataError, match="duplicated"):
        load_nbest_files([tmp_path / "dup.jsonl"])
