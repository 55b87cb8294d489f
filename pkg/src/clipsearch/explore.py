"""Video-level similarity: pooled embeddings, clustering, summaries.

A video embeds as the renormalized mean of its segment vectors. Clusters
come from spherical k-means (cosine distance, k-means++ seeding, unit
centroids); each cluster is represented by its medoid video. Summaries
pick one medoid keyframe from each of n contiguous time chunks, so they
stay in temporal order while favoring representative frames.

Clustering runs offline after ingest and the result is persisted in the
metadata store under a reserved key; the exploration view only reads it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ClustersNotBuilt,
    DegenerateMean,
    NoVectors,
    TooFewVideos,
    UnknownVideo,
    ZeroVector,
)
from .store import MetadataStore
from .vectors import VectorIndex, normalize

CLUSTERS_META_KEY = "__meta__/clusters"


@dataclass(frozen=True)
class VideoEmbedding:
    video_id: str
    vector: np.ndarray


@dataclass(frozen=True)
class Cluster:
    cluster_id: int
    member_video_ids: tuple[str, ...]
    medoid_video_id: str


@dataclass(frozen=True)
class Summary:
    video_id: str
    keyframe_refs: tuple[str, ...]
    segment_ids: tuple[str, ...]


def video_embedding(store: MetadataStore, index: VectorIndex, video_id: str) -> VideoEmbedding:
    """Renormalized mean of the video's segment vectors."""
    _, segments = store.get_video(video_id)
    vectors = [index.vector_of(s.segment_id) for s in segments if index.contains(s.segment_id)]
    if not vectors:
        raise NoVectors(f"video {video_id!r} has no indexed segments")
    mean = np.mean(np.stack(vectors), axis=0)
    try:
        pooled = normalize(mean)
    except ZeroVector:
        raise DegenerateMean(
            f"video {video_id!r}: segment vectors cancel out; mean has no direction"
        ) from None
    return VideoEmbedding(video_id, pooled)


def default_k(n_videos: int) -> int:
    return max(1, int(np.ceil(np.sqrt(n_videos / 2))))


def _kmeanspp_init(matrix: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = matrix.shape[0]
    centroids = np.empty((k, matrix.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = matrix[first]
    # cosine distance to the nearest chosen centroid so far
    dist = np.clip(1.0 - matrix @ centroids[0], 0.0, None)
    for c in range(1, k):
        weights = dist**2
        total = float(weights.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=weights / total))
        centroids[c] = matrix[idx]
        dist = np.minimum(dist, np.clip(1.0 - matrix @ centroids[c], 0.0, None))
    return centroids


@dataclass
class ClusteringResult:
    clusters: list[Cluster]
    iterations: int
    objective_history: list[float]  # sum of cosine distances, per iteration


def cluster_videos(
    store: MetadataStore,
    index: VectorIndex,
    k: int,
    seed: int = 0,
    max_iterations: int = 100,
    tolerance: float = 1e-6,
) -> ClusteringResult:
    """Spherical k-means over all video embeddings, deterministic per seed.

    Empty clusters are repaired by re-seeding them with the farthest
    member of the largest cluster. The objective (total cosine distance
    to the assigned centroid) is recorded each iteration and never
    increases.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    video_ids = []
    rows = []
    for vid in store.video_ids():
        try:
            emb = video_embedding(store, index, vid)
        except (NoVectors, DegenerateMean):
            continue
        video_ids.append(vid)
        rows.append(emb.vector.astype(np.float64))
    n = len(video_ids)
    if k > n:
        raise TooFewVideos(f"k={k} but only {n} videos have embeddings")
    matrix = np.stack(rows)
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(matrix, k, rng)

    assignment = np.zeros(n, dtype=np.int64)
    history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        sims = matrix @ centroids.T
        assignment = np.argmax(sims, axis=1)
        # repair empty clusters from the largest one
        counts = np.bincount(assignment, minlength=k)
        while np.any(counts == 0):
            empty = int(np.argmin(counts))
            largest = int(np.argmax(counts))
            members = np.flatnonzero(assignment == largest)
            farthest = members[int(np.argmin(sims[members, largest]))]
            assignment[farthest] = empty
            counts = np.bincount(assignment, minlength=k)
        objective = float(np.sum(1.0 - sims[np.arange(n), assignment]))
        history.append(objective)
        moved = 0.0
        new_centroids = centroids.copy()
        for c in range(k):
            members = np.flatnonzero(assignment == c)
            mean = matrix[members].mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm < 1e-12:
                continue  # keep previous centroid for a degenerate mean
            candidate = mean / norm
            moved = max(moved, float(np.linalg.norm(candidate - centroids[c])))
            new_centroids[c] = candidate
        centroids = new_centroids
        if moved < tolerance:
            break

    clusters = []
    for c in range(k):
        rows_c = np.flatnonzero(assignment == c)
        members = [video_ids[i] for i in rows_c]
        sub = matrix[rows_c]
        # medoid: maximal total similarity == minimal total cosine distance;
        # exact ties break toward the smaller video id
        totals = (sub @ sub.T).sum(axis=1)
        best = totals.max()
        medoid = min(members[int(i)] for i in np.flatnonzero(totals == best))
        clusters.append(
            Cluster(cluster_id=c, member_video_ids=tuple(sorted(members)), medoid_video_id=medoid)
        )
    return ClusteringResult(clusters=clusters, iterations=iterations, objective_history=history)


def persist_clusters(store: MetadataStore, result: ClusteringResult, k: int, seed: int) -> None:
    store.put_meta(
        CLUSTERS_META_KEY,
        {
            "k": k,
            "seed": seed,
            "clusters": [
                {
                    "clusterId": c.cluster_id,
                    "memberVideoIds": list(c.member_video_ids),
                    "medoidVideoId": c.medoid_video_id,
                }
                for c in result.clusters
            ],
        },
    )


def load_clusters(store: MetadataStore) -> dict:
    doc = store.get_meta(CLUSTERS_META_KEY)
    if doc is None:
        raise ClustersNotBuilt("run the cluster command first")
    return doc


def summarize(
    store: MetadataStore, index: VectorIndex, video_id: str, n: int = 25
) -> Summary:
    """Pick one representative keyframe from each of n contiguous chunks.

    Within a chunk the medoid segment wins: the one with maximal mean
    similarity to its chunk peers (temporal order breaks exact ties)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    video, segments = store.get_video(video_id)
    if not segments:
        raise UnknownVideo(f"video {video_id!r} has no segments")
    chunks = np.array_split(np.arange(len(segments)), min(n, len(segments)))
    chosen = []
    for chunk in chunks:
        if len(chunk) == 1:
            chosen.append(int(chunk[0]))
            continue
        vectors = np.stack([index.vector_of(segments[i].segment_id) for i in chunk])
        sims = vectors @ vectors.T
        totals = sims.sum(axis=1)
        chosen.append(int(chunk[int(np.argmax(totals))]))
    return Summary(
        video_id=video_id,
        keyframe_refs=tuple(segments[i].keyframe_ref for i in chosen),
        segment_ids=tuple(segments[i].segment_id for i in chosen),
    )
