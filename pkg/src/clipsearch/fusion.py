"""Query planning, concurrent sub-query execution, and result merging.

A parsed query turns into one plan stage per temporal stage. Each stage
fans out concurrently: its free text goes to one or more vector indexes,
each modality filter goes to the metadata store. The stage's lists are
then combined under one of four policies:

* embeddingOnly / metadataOnly - pass one side through
* filterByVideos - keep vector hits whose video also matched every filter
* rrfFuse       - reciprocal-rank fusion of all lists

Rank-based fusion is used because inner-product similarities and
detector confidences live on incomparable scales. Multi-stage queries
are merged temporally afterwards: a video qualifies only if it contains
one hit per stage in stage order within a bounded gap, and the
best-scoring valid chain represents the video.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import IndexUnavailable
from .model import Modality
from .querylang import QueryAst
from .store import MetadataStore
from .textenc import TextEncoder
from .vectors import VectorIndex

DEFAULT_INDEX = "default"
DEFAULT_RRF_K = 60
DEFAULT_WINDOW_MS = 30_000
DEFAULT_STAGE_DEPTH = 1000


class Source(str, enum.Enum):
    EMBEDDING = "embedding"
    METADATA = "metadata"


class PolicyKind(str, enum.Enum):
    FILTER_BY_VIDEOS = "filterByVideos"
    RRF_FUSE = "rrfFuse"
    EMBEDDING_ONLY = "embeddingOnly"
    METADATA_ONLY = "metadataOnly"


@dataclass(frozen=True)
class MergePolicy:
    kind: PolicyKind = PolicyKind.RRF_FUSE
    k_const: int = DEFAULT_RRF_K

    def __post_init__(self):
        if self.k_const < 1:
            raise ValueError("kConst must be >= 1")


@dataclass(frozen=True)
class TemporalParams:
    window_ms: int = DEFAULT_WINDOW_MS
    per_stage_depth: int = DEFAULT_STAGE_DEPTH

    def __post_init__(self):
        if self.window_ms <= 0:
            raise ValueError("windowMs must be positive")
        if self.per_stage_depth < 1:
            raise ValueError("perStageDepth must be >= 1")


@dataclass(frozen=True)
class RankedHit:
    video_id: str
    segment_id: str
    score: float
    rank: int
    source: Source


@dataclass(frozen=True)
class TemporalMatch:
    video_id: str
    segment_ids: tuple[str, ...]  # one chosen segment per stage, in stage order
    score: float


@dataclass(frozen=True)
class ResultPage:
    items: tuple
    page: int
    page_size: int
    total_hits: int
    total_pages: int


@dataclass(frozen=True)
class EmbeddingSubQuery:
    index_name: str
    text: str | None = None
    vector: tuple[float, ...] | None = None


@dataclass
class StagePlan:
    embedding: list[EmbeddingSubQuery]
    metadata: list[tuple[Modality, str]]
    policy: MergePolicy


@dataclass
class QueryPlan:
    stages: list[StagePlan]
    policy: MergePolicy
    temporal: TemporalParams


def plan(
    ast: QueryAst,
    policy: MergePolicy | None = None,
    temporal: TemporalParams | None = None,
    default_indexes: Sequence[str] = (DEFAULT_INDEX,),
) -> QueryPlan:
    """Split an AST into per-stage sub-queries.

    Free text becomes one embedding sub-query per target index; each
    filter becomes one metadata sub-query. One-sided stages have their
    policy coerced (nothing to fuse).
    """
    policy = policy or MergePolicy()
    temporal = temporal or TemporalParams()
    indexes = list(ast.target_indexes or default_indexes)
    stages = []
    for stage in ast.stages:
        embedding = (
            [EmbeddingSubQuery(index_name=name, text=stage.free_text) for name in indexes]
            if stage.free_text
            else []
        )
        metadata = list(stage.filters)
        if not metadata:
            effective = MergePolicy(PolicyKind.EMBEDDING_ONLY, policy.k_const)
        elif not embedding:
            effective = MergePolicy(PolicyKind.METADATA_ONLY, policy.k_const)
        else:
            effective = policy
        stages.append(StagePlan(embedding=embedding, metadata=metadata, policy=effective))
    return QueryPlan(stages=stages, policy=policy, temporal=temporal)


def to_ranked(
    rows: Sequence, source: Source, limit: int | None = None
) -> list[RankedHit]:
    """Assign ranks 1..n to already-ordered (videoId, segmentId, score) rows."""
    out = []
    for i, row in enumerate(rows if limit is None else rows[:limit]):
        out.append(
            RankedHit(
                video_id=row.video_id,
                segment_id=row.segment_id,
                score=float(row.score),
                rank=i + 1,
                source=source,
            )
        )
    return out


def filter_by_videos(hits: Sequence[RankedHit], allowed: set[str]) -> list[RankedHit]:
    """Keep hits whose video is in the allowed set, preserving relative
    order and renumbering ranks 1..m."""
    out = []
    for h in hits:
        if h.video_id in allowed:
            out.append(
                RankedHit(h.video_id, h.segment_id, h.score, len(out) + 1, h.source)
            )
    return out


_SOURCE_PREFERENCE = {Source.EMBEDDING: 0, Source.METADATA: 1}


def rrf_fuse(lists: Sequence[Sequence[RankedHit]], k_const: int = DEFAULT_RRF_K) -> list[RankedHit]:
    """Reciprocal-rank fusion: each occurrence of a segment contributes
    1/(kConst + rank); segments are reordered by the fused score.

    The result is bit-for-bit invariant under permutation of the input
    lists: per-segment contributions are totalled with math.fsum (exactly
    rounded, so summation order cannot show), and a fused hit's source is
    taken from its best-ranked occurrence with ties preferring the
    embedding source, which does not depend on list order either.
    """
    if k_const < 1:
        raise ValueError("kConst must be >= 1")
    if not lists:
        raise ValueError("need at least one list to fuse")
    fused: dict[str, dict] = {}
    for hits in lists:
        for h in hits:
            entry = fused.get(h.segment_id)
            if entry is None:
                entry = fused[h.segment_id] = {
                    "video_id": h.video_id,
                    "parts": [],
                    "best": (h.rank, _SOURCE_PREFERENCE[h.source]),
                    "source": h.source,
                }
            entry["parts"].append(1.0 / (k_const + h.rank))
            key = (h.rank, _SOURCE_PREFERENCE[h.source])
            if key < entry["best"]:
                entry["best"] = key
                entry["source"] = h.source
    totals = {sid: math.fsum(e["parts"]) for sid, e in fused.items()}
    ordered = sorted(
        fused.items(), key=lambda kv: (-totals[kv[0]], kv[1]["video_id"], kv[0])
    )
    return [
        RankedHit(e["video_id"], sid, totals[sid], i + 1, e["source"])
        for i, (sid, e) in enumerate(ordered)
    ]


@dataclass(frozen=True)
class _Cand:
    segment_id: str
    start: int
    end: int
    score: float


def temporal_merge(
    stage_results: Sequence[Sequence[RankedHit]],
    params: TemporalParams,
    span_of: Callable[[str], tuple[int, int]] | Mapping[str, tuple[int, int]],
) -> list[TemporalMatch]:
    """Combine per-stage hit lists into per-video temporal matches.

    A valid chain picks one hit per stage, all in one video, with
    strictly increasing start times and a gap (next start minus previous
    end) of at most the window. For each video the maximum-aggregate-
    score chain is reported (dynamic programming over time-sorted
    candidates; score ties resolved toward the earliest chain), videos
    without a valid chain are dropped, and matches sort by score then
    video id.
    """
    if len(stage_results) < 2:
        raise ValueError("temporal merge needs at least two stages")
    lookup = span_of if callable(span_of) else span_of.__getitem__
    n_stages = len(stage_results)
    per_video: dict[str, list[list[_Cand]]] = {}
    for s, hits in enumerate(stage_results):
        for h in hits:
            start, end = lookup(h.segment_id)
            per_video.setdefault(h.video_id, [[] for _ in range(n_stages)])[s].append(
                _Cand(h.segment_id, start, end, h.score)
            )
    matches = []
    for video_id, stages in per_video.items():
        if any(not cands for cands in stages):
            continue
        for cands in stages:
            cands.sort(key=lambda c: (c.start, c.segment_id))
        chain = _best_chain(stages, params.window_ms)
        if chain is None:
            continue
        matches.append(
            TemporalMatch(
                video_id=video_id,
                segment_ids=tuple(c.segment_id for c in chain),
                score=sum(c.score for c in chain),
            )
        )
    matches.sort(key=lambda m: (-m.score, m.video_id))
    return matches


def _valid_step(prev: _Cand, nxt: _Cand, window: int) -> bool:
    return nxt.start > prev.start and nxt.start - prev.end <= window


def _best_chain(stages: list[list[_Cand]], window: int) -> list[_Cand] | None:
    """Maximum-score chain via suffix DP; among equal-score chains the
    one whose (start, segmentId) sequence is lexicographically smallest
    wins, so the choice is deterministic."""
    n = len(stages)
    best: list[list[float | None]] = [[None] * len(s) for s in stages]
    best[-1] = [c.score for c in stages[-1]]
    for s in range(n - 2, -1, -1):
        nxt = stages[s + 1]
        for i, c in enumerate(stages[s]):
            top: float | None = None
            for j, nc in enumerate(nxt):
                tail = best[s + 1][j]
                if tail is None or not _valid_step(c, nc, window):
                    continue
                if top is None or tail > top:
                    top = tail
            if top is not None:
                best[s][i] = c.score + top
    total: float | None = None
    for value in best[0]:
        if value is not None and (total is None or value > total):
            total = value
    if total is None:
        return None
    # greedy front-to-back reconstruction: at each stage take the earliest
    # candidate that still completes an optimal chain. Equality checks
    # recompute the exact float sums the DP produced, so no drift.
    cur = next(i for i, v in enumerate(best[0]) if v == total)
    chain = [stages[0][cur]]
    for s in range(n - 1):
        c = stages[s][cur]
        value = best[s][cur]
        cur = None
        for j, nc in enumerate(stages[s + 1]):
            tail = best[s + 1][j]
            if tail is None or not _valid_step(c, nc, window):
                continue
            if c.score + tail == value:
                cur = j
                break
        assert cur is not None, "chain reconstruction failed"
        chain.append(stages[s + 1][cur])
    return chain


def paginate(items: Sequence, page: int, page_size: int) -> ResultPage:
    if page < 0:
        raise ValueError("page must be >= 0")
    if page_size < 1:
        raise ValueError("pageSize must be >= 1")
    total = len(items)
    start = page * page_size
    return ResultPage(
        items=tuple(items[start : start + page_size]),
        page=page,
        page_size=page_size,
        total_hits=total,
        total_pages=math.ceil(total / page_size),
    )


class Orchestrator:
    """Stateless request executor over a set of named indexes, the
    metadata store, and the text encoder. Sub-queries of a stage (and
    the stages themselves) run on a shared thread pool; results are
    collected in plan order, so completion order never shows."""

    def __init__(
        self,
        indexes: Mapping[str, VectorIndex],
        store: MetadataStore,
        encoder: TextEncoder,
        max_workers: int = 8,
    ):
        self.indexes = indexes
        self.store = store
        self.encoder = encoder
        self._pool = ThreadPoolExecutor(max_workers=max_workers)

    def default_indexes(self) -> list[str]:
        if DEFAULT_INDEX in self.indexes:
            return [DEFAULT_INDEX]
        return sorted(self.indexes)[:1] or [DEFAULT_INDEX]

    def plan(
        self,
        ast: QueryAst,
        policy: MergePolicy | None = None,
        temporal: TemporalParams | None = None,
    ) -> QueryPlan:
        return plan(ast, policy, temporal, default_indexes=self.default_indexes())

    # -- sub-query primitives ------------------------------------------

    def _index_for(self, name: str) -> VectorIndex:
        index = self.indexes.get(name)
        if index is None:
            raise IndexUnavailable(name)
        return index

    def _run_embedding(self, sub: EmbeddingSubQuery, depth: int) -> list[RankedHit]:
        index = self._index_for(sub.index_name)
        if sub.vector is not None:
            query = np.asarray(sub.vector, dtype=np.float32)
        else:
            query = self.encoder.encode(sub.text or "")
        return to_ranked(index.search(query, depth), Source.EMBEDDING)

    def _run_metadata(
        self, modality: Modality, term: str, depth: int | None
    ) -> list[RankedHit]:
        hits = self.store.find_segments(modality, term, limit=depth)
        return to_ranked(hits, Source.METADATA)

    # -- stage & plan execution ----------------------------------------

    def execute_stage(self, stage: StagePlan, temporal: TemporalParams) -> list[RankedHit]:
        depth = temporal.per_stage_depth
        policy = stage.policy
        emb_futures = [
            self._pool.submit(self._run_embedding, sub, depth) for sub in stage.embedding
        ]
        if policy.kind is PolicyKind.FILTER_BY_VIDEOS:
            meta_futures = [
                self._pool.submit(self.store.video_ids_for_term, mod, term)
                for mod, term in stage.metadata
            ]
        else:
            meta_futures = [
                self._pool.submit(self._run_metadata, mod, term, depth)
                for mod, term in stage.metadata
            ]
        emb_lists = [f.result() for f in emb_futures]
        meta_results = [f.result() for f in meta_futures]

        embedding = None
        if emb_lists:
            embedding = emb_lists[0] if len(emb_lists) == 1 else rrf_fuse(emb_lists, policy.k_const)

        if policy.kind is PolicyKind.EMBEDDING_ONLY:
            merged = embedding or []
        elif policy.kind is PolicyKind.METADATA_ONLY:
            if len(meta_results) == 1:
                merged = meta_results[0]
            else:
                merged = rrf_fuse(meta_results, policy.k_const)
        elif policy.kind is PolicyKind.FILTER_BY_VIDEOS:
            allowed: set[str] | None = None
            for vids in meta_results:
                allowed = vids if allowed is None else (allowed & vids)
            merged = filter_by_videos(embedding or [], allowed or set())
        else:  # RRF_FUSE
            merged = rrf_fuse([embedding or []] + list(meta_results), policy.k_const)

        if len(merged) > depth:
            merged = merged[:depth]
        return merged

    def execute(self, query_plan: QueryPlan) -> list[RankedHit] | list[TemporalMatch]:
        """Run all stages (concurrently for temporal queries) and merge.

        Single-stage plans return RankedHits; multi-stage plans return
        TemporalMatches.
        """
        temporal = query_plan.temporal
        if len(query_plan.stages) == 1:
            return self.execute_stage(query_plan.stages[0], temporal)
        futures = [
            self._pool.submit(self.execute_stage, stage, temporal)
            for stage in query_plan.stages
        ]
        stage_results = [f.result() for f in futures]
        return temporal_merge(stage_results, temporal, self.store.segment_span)
