from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clipsearch.model import Annotation, Dataset, Modality, SegmentDoc, VideoDoc
from clipsearch.store import MetadataStore
from clipsearch.vectors import IndexEntry, VectorIndex, normalize


def random_unit_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    m = rng.standard_normal((n, dim)).astype(np.float32)
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def make_segment(video_id, i, start, end, annotations=()):
    return SegmentDoc(
        segment_id=f"{video_id}_s{i:04d}",
        video_id=video_id,
        start_ms=start,
        end_ms=end,
        keyframe_ref=f"{video_id}/kf_{i:04d}.jpg",
        annotations=list(annotations),
    )


def make_video(video_id, segments, dataset=Dataset.V, title=None):
    duration = max((s.end_ms for s in segments), default=1000)
    return VideoDoc(
        video_id=video_id,
        title=title or f"video {video_id}",
        duration_ms=duration,
        dataset=dataset,
        segment_ids=[s.segment_id for s in segments],
    )


def random_store(rng: np.random.Generator, n_videos=20, segs_per_video=25, n_labels=20):
    """Store with random annotations over a small label vocabulary,
    returned together with the flat segment list for oracle scans."""
    labels = [f"label{i:02d}" for i in range(n_labels)]
    modalities = list(Modality)
    store = MetadataStore()
    all_segments = []
    for v in range(n_videos):
        video_id = f"v{v:03d}"
        segments = []
        for i in range(segs_per_video):
            anns = []
            for _ in range(int(rng.integers(0, 4))):
                anns.append(
                    Annotation(
                        modality=modalities[int(rng.integers(len(modalities)))],
                        label=labels[int(rng.integers(len(labels)))],
                        # dyadic scores make float comparisons exact
                        score=float(rng.integers(0, 1025)) / 1024.0,
                    )
                )
            segments.append(make_segment(video_id, i, i * 1000, (i + 1) * 1000, anns))
        store.upsert_video(make_video(video_id, segments), segments)
        all_segments.extend(segments)
    return store, all_segments


def small_index(rng: np.random.Generator, n=50, dim=16, n_videos=10):
    index = VectorIndex(dim)
    entries = []
    for i in range(n):
        entries.append(
            IndexEntry(
                segment_id=f"v{i % n_videos:03d}_s{i // n_videos:04d}",
                video_id=f"v{i % n_videos:03d}",
                vector=normalize(rng.standard_normal(dim)),
            )
        )
    index.add_entries(entries)
    return index, entries


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- the 5,000-segment corpus shared by gateway and acceptance tests -----

FIXTURE_SEED = 42
FIXTURE_VIDEOS = 50
FIXTURE_SEGMENTS = 100
FIXTURE_DIM = 64


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    from clipsearch.ingest import generate_fixture

    out = tmp_path_factory.mktemp("corpus")
    generate_fixture(
        out,
        seed=FIXTURE_SEED,
        n_videos=FIXTURE_VIDEOS,
        segments_per_video=FIXTURE_SEGMENTS,
        dim=FIXTURE_DIM,
    )
    return out


@pytest.fixture(scope="session")
def fixture_engine(corpus_dir):
    from clipsearch.engine import Engine
    from clipsearch.explore import cluster_videos, persist_clusters
    from clipsearch.ingest import ingest

    engine = Engine(dim=FIXTURE_DIM)
    report = ingest(corpus_dir / "manifest.json", engine)
    assert report.warnings == []
    result = cluster_videos(engine.store, engine.index(), k=4, seed=0)
    persist_clusters(engine.store, result, k=4, seed=0)
    return engine


def protocol_corpus():
    """Tiny hand-built engine with exactly known vectors (one-hot, dim 8)
    so protocol example responses are byte-stable: every score in them is
    a small exact dyadic float."""
    from clipsearch.engine import Engine

    engine = Engine(dim=8)
    basis = np.eye(8, dtype=np.float32)

    def seg(vid, i, anns):
        return make_segment(vid, i, i * 1000, (i + 1) * 1000, anns)

    v1 = [
        seg("pv01", 0, [Annotation(Modality.OBJECT, "dog", 0.75)]),
        seg("pv01", 1, [Annotation(Modality.OBJECT, "dog", 0.5),
                        Annotation(Modality.CONCEPT, "beach", 1.0)]),
        seg("pv01", 2, []),
    ]
    v2 = [
        seg("pv02", 0, [Annotation(Modality.OBJECT, "cat", 0.25)]),
        seg("pv02", 1, [Annotation(Modality.TEXT, "happy birthday party", 1.0)]),
    ]
    engine.store.upsert_video(make_video("pv01", v1, title="protocol video one"), v1)
    engine.store.upsert_video(make_video("pv02", v2, title="protocol video two"), v2)
    engine.index().add_entries(
        [
            IndexEntry("pv01_s0000", "pv01", basis[0]),
            IndexEntry("pv01_s0001", "pv01", basis[1]),
            IndexEntry("pv01_s0002", "pv01", basis[2]),
            IndexEntry("pv02_s0000", "pv02", basis[0]),  # planted duplicate of pv01_s0000
            IndexEntry("pv02_s0001", "pv02", basis[3]),
        ]
    )
    return engine
