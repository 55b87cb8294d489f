"""Exact top-k inner-product search over unit-normalized embeddings.

Vectors are stored as float32 rows of a contiguous matrix; a query is a
single matmul followed by an exact top-k selection. Because every stored
vector and every query is unit-norm, the inner product equals cosine
similarity and all scores live in [-1, 1].

Result ordering is the total order (score desc, videoId asc, segmentId
asc), which makes search results reproducible even under score ties.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DuplicateSegment, UnknownSegment, ZeroVector

NORM_TOLERANCE = 1e-4
_ZERO_NORM = 1e-12


def normalize(values, dim: int | None = None) -> np.ndarray:
    """Scale a raw vector to unit L2 norm, preserving direction.

    Raises ZeroVector when the norm is below 1e-12 and DimensionMismatch
    when ``dim`` is given and the vector length differs.
    """
    v = np.asarray(values, dtype=np.float32).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"expected dim {dim}, got {v.shape[0]}")
    norm = float(np.linalg.norm(v.astype(np.float64)))
    if norm < _ZERO_NORM:
        raise ZeroVector("cannot normalize a zero vector")
    return (v / norm).astype(np.float32)


def is_normalized(v: np.ndarray) -> bool:
    return abs(float(np.linalg.norm(v.astype(np.float64))) - 1.0) <= NORM_TOLERANCE


@dataclass(frozen=True)
class IndexEntry:
    segment_id: str
    video_id: str
    vector: np.ndarray


@dataclass(frozen=True)
class SearchHit:
    segment_id: str
    video_id: str
    score: float


def hit_sort_key(score: float, video_id: str, segment_id: str):
    # total order shared with every brute-force oracle in the tests
    return (-score, video_id, segment_id)


class VectorIndex:
    """Flat, exact index. Reads may run concurrently; writes take a lock
    and swap in a freshly consolidated matrix, so in-flight searches keep
    operating on the snapshot they grabbed."""

    def __init__(self, dim: int):
        if dim <= 0:
            raise DimensionMismatch("index dimension must be positive")
        self.dim = dim
        self._matrix = np.empty((0, dim), dtype=np.float32)
        self._segment_ids: list[str] = []
        self._video_ids: list[str] = []
        self._row_of: dict[str, int] = {}
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._segment_ids)

    @property
    def size(self) -> int:
        return len(self._segment_ids)

    def contains(self, segment_id: str) -> bool:
        return segment_id in self._row_of

    def add_entries(self, entries: list[IndexEntry]) -> int:
        """Add entries atomically: everything is validated before any row
        becomes visible, so a failed batch leaves the index unchanged."""
        if not entries:
            return 0
        with self._write_lock:
            rows = []
            seen: set[str] = set()
            for e in entries:
                v = np.asarray(e.vector, dtype=np.float32).reshape(-1)
                if v.shape[0] != self.dim:
                    raise DimensionMismatch(
                        f"entry {e.segment_id!r}: expected dim {self.dim}, got {v.shape[0]}"
                    )
                if not is_normalized(v):
                    raise ZeroVector(
                        f"entry {e.segment_id!r}: vector is not unit-norm; normalize() it first"
                    )
                if e.segment_id in self._row_of or e.segment_id in seen:
                    raise DuplicateSegment(e.segment_id)
                seen.add(e.segment_id)
                rows.append(v)
            matrix = np.vstack([self._matrix] + rows) if rows else self._matrix
            base = len(self._segment_ids)
            for i, e in enumerate(entries):
                self._row_of[e.segment_id] = base + i
            self._segment_ids.extend(e.segment_id for e in entries)
            self._video_ids.extend(e.video_id for e in entries)
            self._matrix = matrix
            return len(entries)

    def vector_of(self, segment_id: str) -> np.ndarray:
        try:
            row = self._row_of[segment_id]
        except KeyError:
            raise UnknownSegment(segment_id) from None
        return self._matrix[row].copy()

    def search(self, query, k: int) -> list[SearchHit]:
        """Return the k entries with maximal inner product, exactly.

        Ties are resolved by (videoId asc, segmentId asc); an empty index
        yields an empty list.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        matrix = self._matrix
        segment_ids = self._segment_ids
        video_ids = self._video_ids
        n = matrix.shape[0]
        if n == 0:
            return []
        q = np.asarray(query, dtype=np.float32).reshape(-1)
        if q.shape[0] != self.dim:
            raise DimensionMismatch(f"query dim {q.shape[0]} != index dim {self.dim}")
        scores = matrix @ q
        if k >= n:
            candidates = range(n)
        else:
            # every row scoring >= the k-th largest score is a candidate,
            # so tied groups are never split before the exact sort below
            kth = np.partition(scores, n - k)[n - k]
            candidates = np.flatnonzero(scores >= kth)
        order = sorted(
            candidates,
            key=lambda i: hit_sort_key(float(scores[i]), video_ids[i], segment_ids[i]),
        )[:k]
        return [SearchHit(segment_ids[i], video_ids[i], float(scores[i])) for i in order]

    def entries(self):
        """Snapshot of (segmentId, videoId, row) for dump/debug purposes."""
        for i, sid in enumerate(self._segment_ids):
            yield sid, self._video_ids[i], self._matrix[i]
