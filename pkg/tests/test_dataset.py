import dataclasses
import itertools
from collections import Counter

import numpy as np
import pytest
from omegaconf import OmegaConf
from sklearn.metrics import adjusted_rand_score

from ensd.dataset import (
    MANIFEST_NAME,
    CorpusSpec,
    Partition,
    PartitionMethod,
    SpeakerEmbedding,
    Split,
    assign_speakers_by_vote,
    by_speaker,
    cluster_speakers,
    domain_unigrams,
    fit_normalizer,
    generate_corpus,
    kmeans,
    make_speaker,
    make_world,
    random_partition,
    read_features,
    read_manifest,
    speaker_embedding,
    utterance_embedding,
    write_features,
)
from ensd.errors import ClusterError, ConfigError, DataError, FeatureIOError, GroundTruthAccessError, EmptyInput

SMALL = CorpusSpec(num_speakers=6, utterances_per_speaker=3, vocab_size=8, feature_dim=4,
                   split_fractions={"dev": 0.2})


def _total_variation(p, q):
    return 0.5 * np.abs(p - q).sum()


def test_same_seed_gives_identical_corpora(tmp_path):
    generate_corpus(SMALL, tmp_path / "one")
    generate_corpus(SMALL, tmp_path / "two")
    assert (tmp_path / "one" / MANIFEST_NAME).read_bytes() == (tmp_path / "two" / MANIFEST_NAME).read_bytes()
    for path in (tmp_path / "one" / "features").iterdir():
        assert path.read_bytes() == (tmp_path / "two" / "features" / path.name).read_bytes()


def test_speaker_seed_changes_speakers_not_world():
    other = dataclasses.replace(SMALL, speaker_seed=7)
    world = make_world(SMALL)
    np.testing.assert_array_equal(world.prototypes, make_world(other).prototypes)
    first = make_speaker(SMALL, world, 0, Split.TRAIN)
    assert not np.allclose(first.offset, make_speaker(other, world, 0, Split.TRAIN).offset)
    np.testing.assert_array_equal(first.offset, make_speaker(SMALL, world, 0, Split.TRAIN).offset)


def test_noiseless_features_are_prototypes(tmp_path):
    spec = dataclasses.replace(SMALL, noise_sigma=0.0, identity_voices=True, onset_decay=0.0)
    corpus = generate_corpus(spec, tmp_path)
    index = {token: i for i, token in enumerate(spec.vocab)}
    for utterance in corpus.utterances:
        tokens = [index[t] for t in utterance.ref_text.split()]
        expected = np.repeat(corpus.world.prototypes[tokens], spec.frames_per_token, axis=0)
        np.testing.assert_allclose(utterance.features(), expected, atol=1e-6)
        assert utterance.num_frames == len(tokens) * spec.frames_per_token


def test_domains_have_distinct_vocabularies(tmp_path):
    spec = CorpusSpec(num_speakers=12, utterances_per_speaker=20, split_fractions={})
    corpus = generate_corpus(spec, tmp_path)
    unigrams = domain_unigrams(corpus.utterances, spec.vocab, spec.num_domains)
    for a in range(spec.num_domains):
        for b in range(a + 1, spec.num_domains):
            assert _total_variation(unigrams[a], unigrams[b]) > 0.3


def test_held_out_splits_take_whole_speakers(tmp_path):
    spec = dataclasses.replace(SMALL, num_speakers=10, split_fractions={"weighter": 0.1, "dev": 0.2})
    corpus = generate_corpus(spec, tmp_path)
    splits = Counter(s.split for s in corpus.speakers)
    assert splits == {Split.TRAIN: 7, Split.WEIGHTER: 1, Split.DEV: 2}
    for speaker_id, utterances in by_speaker(corpus.utterances).items():
        assert len({u.split for u in utterances}) == 1


@pytest.mark.parametrize("field,value", [
    ("num_domains", 1),
    ("vocab_size", 0),
    ("max_tokens", 1),
    ("domain_affinity", 1.5),
    ("split_fractions", {"train": 0.1}),
    ("split_fractions", {"dev": 0.6, "test": 0.5}),
])
def test_invalid_spec_names_the_field(field, value):
    with pytest.raises(ConfigError) as info:
        dataclasses.replace(SMALL, **{field: value}).validate()
    assert info.value.key.startswith("corpus.")


def test_spec_from_config():
    spec = CorpusSpec.from_config(OmegaConf.create({"num_speakers": 4, "split_fractions": None}))
    assert spec.num_speakers == 4 and spec.split_fractions == {}
    with pytest.raises(ConfigError, match="corpus.speakers"):
        CorpusSpec.from_config(OmegaConf.create({"speakers": 4}))


def test_world_mismatch_names_the_first_differing_field():
    pool = dataclasses.replace(SMALL, name="pool", num_speakers=2, speaker_seed=9, split_fractions={},
                               default_split="pool", noise_sigma=0.5)
    assert SMALL.world_mismatch(pool) is None
    assert SMALL.world_mismatch(dataclasses.replace(pool, feature_dim=5)) == "feature_dim"
    assert SMALL.world_mismatch(dataclasses.replace(pool, seed=7)) == "seed"


def test_manifest_guard(tmp_path):
    generate_corpus(SMALL, tmp_path)
    plain = read_manifest(tmp_path / MANIFEST_NAME)
    assert all(u.ref_text for u in plain)

    guarded = read_manifest(tmp_path / MANIFEST_NAME, splits=[Split.TRAIN], guard=True)
    assert guarded and all(u.split == Split.TRAIN for u in guarded)
    with pytest.raises(GroundTruthAccessError):
        guarded[0].ref_text
    # features stay readable under the guard
    assert guarded[0].features().shape == (guarded[0].num_frames, SMALL.feature_dim)


def test_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        read_manifest(tmp_path / MANIFEST_NAME)


def test_feature_file_errors(tmp_path):
    write_features(tmp_path / "u.fea", np.ones((3, 2)))
    np.testing.assert_array_equal(read_features(tmp_path / "u.fea"), np.ones((3, 2)))

    with pytest.raises(FeatureIOError, match="missing-utt"):
        read_features(tmp_path / "absent.fea", "missing-utt")

    (tmp_path / "short.fea").write_bytes((tmp_path / "u.fea").read_bytes()[:-4])
    with pytest.raises(FeatureIOError):
        read_features(tmp_path / "short.fea")

    (tmp_path / "magic.fea").write_bytes(b"XXXX" + (tmp_path / "u.fea").read_bytes()[4:])
    with pytest.raises(FeatureIOError):
        read_features(tmp_path / "magic.fea")


def test_identical_utterances_embed_identically():
    features = np.random.default_rng(0).standard_normal((50, 4))
    embedding = speaker_embedding("s", [features] * 12, segment_frames=10)
    assert len(embedding.votes) == 10
    for vote in embedding.votes:
        np.testing.assert_allclose(vote, embedding.vector)


def test_short_utterances_are_used_whole():
    features = np.random.default_rng(0).standard_normal((4, 3))
    np.testing.assert_allclose(utterance_embedding(features, segment_frames=10),
                               np.concatenate([features.mean(0), features.std(0)]))


def test_speaker_embedding_deterministic():
    rng = np.random.default_rng(0)
    utterances = [rng.standard_normal((30, 4)) for _ in range(15)]
    a = speaker_embedding("s", utterances, segment_frames=10, seed=3)
    b = speaker_embedding("s", utterances, segment_frames=10, seed=3)
    np.testing.assert_array_equal(a.vector, b.vector)
    with pytest.raises(EmptyInput):
        speaker_embedding("s", [], segment_frames=10)


def _cosine(a, b):
    return float(a @ b / np.linalg.norm(a) / np.linalg.norm(b))


def test_voices_separate_speakers(tmp_path):
    spec = CorpusSpec(num_speakers=12, utterances_per_speaker=20, split_fractions={})
    corpus = generate_corpus(spec, tmp_path)
    first = corpus.speakers[0]
    second = next(s for s in corpus.speakers if s.voice_group != first.voice_group)
    utterances = by_speaker(corpus.utterances)
    features = {s.speaker_id: [u.features() for u in utterances[s.speaker_id]] for s in (first, second)}
    normalizer = fit_normalizer([f for fs in features.values() for f in fs])

    def halves(speaker_id):
        fs = features[speaker_id]
        return [speaker_embedding(speaker_id, part, spec.segment_frames, normalizer=normalizer).vector
                for part in (fs[:10], fs[10:])]

    a1, a2 = halves(first.speaker_id)
    b1, _ = halves(second.speaker_id)
    assert _cosine(a1, b1) < _cosine(a1, a2)


def test_kmeans_separates_two_groups():
    points = [(0, 0), (0, 1), (10, 10), (10, 11)]
    result = kmeans(points, k=2, seed=0)
    a = result.assignments
    assert a[0] == a[1] and a[2] == a[3] and a[0] != a[2]

    doubled = kmeans(points * 2, k=2, seed=0)
    np.testing.assert_allclose(np.sort(doubled.centroids, axis=0), np.sort(result.centroids, axis=0))


def _best_two_partition_sse(points):
    best = np.inf
    for labels in itertools.product((0, 1), repeat=len(points)):
        labels = np.array(labels)
        if labels.all() or not labels.any():
            continue
        best = min(best, sum(((points[labels == c] - points[labels == c].mean(axis=0)) ** 2).sum() for c in (0, 1)))
    return best


def test_kmeans_matches_exhaustive_two_partition():
    rng = np.random.default_rng(0)
    for seed in range(10):
        points = np.concatenate([rng.normal(center, 0.5, size=(4, 2)) for center in (0.0, 10.0)])
        result = kmeans(points, k=2, seed=seed)
        assert result.sse_history[-1] == pytest.approx(_best_two_partition_sse(points), rel=1e-9)


def test_kmeans_single_cluster_is_the_mean():
    points = np.random.default_rng(0).standard_normal((20, 3))
    result = kmeans(points, k=1, seed=0)
    np.testing.assert_allclose(result.centroids[0], points.mean(axis=0))


def test_kmeans_sse_never_increases():
    rng = np.random.default_rng(0)
    for seed in range(10):
        points = np.concatenate([rng.normal(c, 1.0, size=(15, 2)) for c in (0, 3, 6)])
        history = kmeans(points, k=3, seed=seed).sse_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


def test_kmeans_needs_k_distinct_points():
    with pytest.raises(ClusterError):
        kmeans([(0, 0), (0, 0), (1, 1)], k=3, seed=0)


CENTROIDS = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])


def _voter(speaker_id, counts, vector=None):
    votes = np.concatenate([np.repeat(CENTROIDS[c][None], n, axis=0) for c, n in enumerate(counts) if n])
    vector = votes.mean(axis=0) if vector is None else np.asarray(vector, dtype=float)
    return SpeakerEmbedding(speaker_id, vector, votes)


FILLERS = [_voter(f"f{c}", [2 if i == c else 0 for i in range(3)]) for c in range(3)]


def test_unanimous_and_majority_votes():
    partition = assign_speakers_by_vote([_voter("s", [0, 10, 0]), *FILLERS], CENTROIDS)
    assert partition.expert_of("s") == 2
    partition = assign_speakers_by_vote([_voter("s", [6, 4, 0]), *FILLERS], CENTROIDS)
    assert partition.expert_of("s") == 1


def test_vote_tie_goes_to_nearest_centroid_of_the_mean():
    partition = assign_speakers_by_vote([_voter("s", [5, 5, 0], vector=[6.0, 0.0]), *FILLERS], CENTROIDS)
    assert partition.expert_of("s") == 2
    partition = assign_speakers_by_vote([_voter("s", [5, 5, 0], vector=[4.0, 0.0]), *FILLERS], CENTROIDS)
    assert partition.expert_of("s") == 1


def test_empty_cluster_takes_a_speaker():
    voters = [_voter("a", [3, 0, 0]), _voter("b", [3, 0, 0], vector=[1.0, 9.0]), _voter("c", [0, 3, 0])]
    partition = assign_speakers_by_vote(voters, CENTROIDS)
    assert partition.sizes() == [1, 1, 1]
    assert partition.expert_of("b") == 3


def test_random_partition_sizes():
    speakers = [f"spk{i:04d}" for i in range(2338)]
    partition = random_partition(speakers, 3, seed=0)
    assert sorted(partition.sizes()) == [779, 779, 780]
    assert set(partition.assignment) == set(speakers)
    assert partition.assignment == random_partition(speakers, 3, seed=0).assignment

    assert random_partition(["a", "b", "c"], 3, seed=1).sizes() == [1, 1, 1]
    with pytest.raises(ClusterError):
        random_partition(["a", "b"], 3, seed=0)


def test_partition_file(tmp_path):
    partition = random_partition(["a", "b", "c", "d"], 2, seed=0)
    partition.save(tmp_path / "partition.json")
    loaded = Partition.load(tmp_path / "partition.json")
    assert loaded == partition
    assert PartitionMethod.parse("kmeans") == PartitionMethod.CLUSTERED
    with pytest.raises(ConfigError):
        PartitionMethod.parse("spectral")
    with pytest.raises(DataError):
        Partition(PartitionMethod.RANDOM, 2, 0, {"a": 1}).validate()


def test_clustering_recovers_voice_groups(tmp_path):
    spec = CorpusSpec(num_speakers=30, utterances_per_speaker=5, split_fractions={})
    corpus = generate_corpus(spec, tmp_path)
    utterances = by_speaker(corpus.utterances)
    features = {s: [u.features() for u in us] for s, us in utterances.items()}
    normalizer = fit_normalizer([f for fs in features.values() for f in fs])
    embeddings = [
        speaker_embedding(s, features[s], spec.segment_frames, seed=i, normalizer=normalizer)
        for i, s in enumerate(utterances)
    ]
    partition = cluster_speakers(embeddings, k=spec.num_voice_groups, seed=0)
    partition.validate(list(utterances))

    groups = {s.speaker_id: s.voice_group for s in corpus.speakers}
    ids = sorted(groups)
    ari = adjusted_rand_score([groups[s] for s in ids], [partition.expert_of(s) for s in ids])
    assert ari >= 0.9
