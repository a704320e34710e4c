from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import numpy.typing as npt
from accelerate.logging import get_logger
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus

from ensd.errors import ClusterError, ConfigError, DataError, NumericError
from .embedding import SpeakerEmbedding

logger = get_logger(__name__)

MAX_ITERATIONS = 100
SSE_TOLERANCE = 1e-9


class PartitionMethod(Enum):
    RANDOM = "random"
    CLUSTERED = "clustered"

    @classmethod
    def parse(cls, value: str) -> PartitionMethod:
        value = value.lower()
        if value == "kmeans":
            return cls.CLUSTERED
        try:
            return cls(value)
        except ValueError:
            raise ConfigError("experts.method", f"expected random or kmeans, got {value!r}") from None


@dataclass
class Partition:
    """Assignment of training speakers to experts, expert indices starting at 1."""
    method: PartitionMethod
    k: int
    seed: int
    assignment: dict[str, int] = field(default_factory=dict)

    def speakers(self, expert: int) -> list[str]:
        return sorted(s for s, e in self.assignment.items() if e == expert)

    def sizes(self) -> list[int]:
        return [len(self.speakers(e)) for e in range(1, self.k + 1)]

    def expert_of(self, speaker_id: str) -> int:
        return self.assignment[speaker_id]

    def validate(self, speakers: Sequence[str] | None = None) -> None:
        if any(not 1 <= e <= self.k for e in self.assignment.values()):
            raise DataError(f"partition assigns experts outside 1..{self.k}")
        if 0 in self.sizes():
            raise DataError(f"partition leaves an expert without speakers: sizes {self.sizes()}")
        if speakers is not None and set(speakers) != set(self.assignment):
            missing = sorted(set(speakers) - set(self.assignment))
            extra = sorted(set(self.assignment) - set(speakers))
            raise DataError(f"partition does not cover the speakers exactly: missing {missing[:5]}, extra {extra[:5]}")

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump({
                "method": self.method.value,
                "k": self.k,
                "seed": self.seed,
                "assignment": dict(sorted(self.assignment.items())),
            }, f, indent=2)

    @classmethod
    def load(cls, path: Union[str, Path]) -> Partition:
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise DataError(f"partition file {path} does not exist") from None
        partition = cls(PartitionMethod(data["method"]), int(data["k"]), int(data["seed"]),
                        {s: int(e) for s, e in data["assignment"].items()})
        partition.validate()
        return partition


@dataclass(frozen=True)
class KMeansResult:
    assignments: npt.NDArray
    centroids: npt.NDArray
    sse_history: list[float]

    @property
    def iterations(self) -> int:
        return len(self.sse_history)


def _sse(points: npt.NDArray, centroids: npt.NDArray, assignments: npt.NDArray) -> float:
    return float(((points - centroids[assignments]) ** 2).sum())


def kmeans(points: npt.ArrayLike, k: int, seed: int, max_iterations: int = MAX_ITERATIONS) -> KMeansResult:
    """Lloyd's algorithm from a seeded k-means++ initial state.

    Stops at an assignment fixpoint or after `max_iterations`. A cluster that
    runs empty is re-seeded with the point farthest from its centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ClusterError(f"expected a (n, dim) point matrix, got shape {points.shape}")
    if k < 1:
        raise ClusterError(f"k must be >= 1, got {k}")
    if len(np.unique(points, axis=0)) < k:
        raise ClusterError(f"need at least {k} distinct points, got {len(np.unique(points, axis=0))}")

    centroids, _ = kmeans_plusplus(points, n_clusters=k, random_state=seed)
    assignments = cdist(points, centroids, "sqeuclidean").argmin(axis=1)
    history = [_sse(points, centroids, assignments)]

    for _ in range(max_iterations):
        for c in range(k):
            members = assignments == c
            if members.any():
                centroids[c] = points[members].mean(axis=0)
            else:
                distances = ((points - centroids[assignments]) ** 2).sum(axis=1)
                farthest = int(distances.argmax())
                centroids[c] = points[farthest]
                assignments[farthest] = c

        new_assignments = cdist(points, centroids, "sqeuclidean").argmin(axis=1)
        sse = _sse(points, centroids, new_assignments)
        if sse > history[-1] + SSE_TOLERANCE * max(1.0, history[-1]):
            raise NumericError(f"k-means SSE increased from {history[-1]} to {sse}")
        history.append(sse)
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments

    return KMeansResult(assignments, centroids, history)


def assign_speakers_by_vote(
        embeddings: Sequence[SpeakerEmbedding],
        centroids: npt.ArrayLike,
        seed: int = 0,
        metric: str = "euclidean",
) -> Partition:
    """Put each speaker in the cluster most of its vote embeddings are nearest to.

    Vote ties go to whichever tied centroid is nearest the speaker's mean
    embedding. A cluster that receives no speaker takes the speaker nearest
    its centroid from a cluster that has more than one.
    """
    if metric not in ("euclidean", "cosine"):
        raise ConfigError("experts.metric", f"expected euclidean or cosine, got {metric!r}")
    centroids = np.asarray(centroids, dtype=np.float64)
    k = len(centroids)

    assignment = {}
    for embedding in embeddings:
        votes = cdist(embedding.votes, centroids, metric).argmin(axis=1)
        counts = np.bincount(votes, minlength=k)
        tied = np.flatnonzero(counts == counts.max())
        if len(tied) > 1:
            distances = cdist(embedding.vector[None, :], centroids[tied], metric)[0]
            winner = int(tied[distances.argmin()])
        else:
            winner = int(tied[0])
        assignment[embedding.speaker_id] = winner + 1

    vectors = {e.speaker_id: e.vector for e in embeddings}
    for cluster in range(1, k + 1):
        if cluster in assignment.values():
            continue
        sizes = np.bincount(list(assignment.values()), minlength=k + 1)
        donors = [s for s, c in assignment.items() if sizes[c] > 1]
        if not donors:
            raise ClusterError(f"cannot fill {k} clusters from {len(assignment)} speakers")
        distances = cdist(np.stack([vectors[s] for s in donors]), centroids[cluster - 1][None, :], metric)[:, 0]
        moved = donors[int(distances.argmin())]
        logger.warning(f"Cluster {cluster} received no speakers; moving {moved} into it")
        assignment[moved] = cluster

    partition = Partition(PartitionMethod.CLUSTERED, k, seed, assignment)
    partition.validate()
    return partition


def cluster_speakers(embeddings: Sequence[SpeakerEmbedding], k: int, seed: int, metric: str = "euclidean") -> Partition:
    vectors = np.stack([e.vector for e in embeddings])
    result = kmeans(vectors, k, seed)
    logger.info(f"k-means converged after {result.iterations} iterations, SSE {result.sse_history[-1]:.4f}")
    return assign_speakers_by_vote(embeddings, result.centroids, seed, metric)


def random_partition(speakers: Sequence[str], k: int, seed: int) -> Partition:
    """Seeded shuffle followed by a round-robin deal, so sizes differ by at most one."""
    speakers = sorted(speakers)
    if len(speakers) < k:
        raise ClusterError(f"cannot split {len(speakers)} speakers among {k} experts")
    order = np.random.default_rng(seed).permutation(len(speakers))
    assignment = {speakers[index]: i % k + 1 for i, index in enumerate(order)}
    return Partition(PartitionMethod.RANDOM, k, seed, assignment)

