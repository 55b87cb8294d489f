from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from clipsearch.engine import Engine
from clipsearch.errors import (
    DuplicateSegment,
    ManifestInvalid,
    NonPositiveDuration,
    VectorCountMismatch,
)
from clipsearch.ingest import (
    Manifest,
    SegmentRecord,
    generate_fixture,
    ingest,
    uniform_segments,
)


class TestUniformSegments:
    def test_exact_tiling(self):
        segs = uniform_segments(10_000, 1000)
        assert len(segs) == 10
        assert segs[0].start_ms == 0 and segs[0].end_ms == 1000
        assert segs[9].start_ms == 9000 and segs[9].end_ms == 10_000

    def test_remainder_segment(self):
        segs = uniform_segments(2500, 1000)
        assert len(segs) == 3
        assert (segs[2].start_ms, segs[2].end_ms) == (2000, 2500)

    def test_keyframe_is_midpoint(self):
        segs = uniform_segments(2500, 1000)
        assert segs[0].keyframe == "kf_000000500.bmp"
        assert segs[2].keyframe == f"kf_{(2000 + 2500) // 2:09d}.bmp"

    def test_non_positive_duration(self):
        with pytest.raises(NonPositiveDuration):
            uniform_segments(0)

    def test_spans_reconstruct_duration(self, rng):
        for _ in range(50):
            duration = int(rng.integers(1, 20_000))
            interval = int(rng.integers(1, 3000))
            segs = uniform_segments(duration, interval)
            assert segs[0].start_ms == 0
            assert segs[-1].end_ms == duration
            for a, b in zip(segs, segs[1:]):
                assert b.start_ms == a.end_ms


def write_manifest(tmp_path: Path, videos: list[dict], dim=8, dataset="V") -> Path:
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"dataset": dataset, "dim": dim, "videos": videos}))
    return path


def write_video_files(tmp_path: Path, video_id: str, n_segments: int, dim=8, rng=None):
    rng = rng or np.random.default_rng(0)
    vdir = tmp_path / video_id
    (vdir / "keyframes").mkdir(parents=True)
    records = uniform_segments(n_segments * 1000, 1000, video_id=video_id)
    with (vdir / "segments.jsonl").open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")
    rows = rng.standard_normal((n_segments, dim)).astype("<f4")
    (vdir / "embeddings.f32").write_bytes(rows.tobytes())
    return {
        "videoId": video_id,
        "title": video_id,
        "durationMs": n_segments * 1000,
        "segmentsFile": f"{video_id}/segments.jsonl",
        "embeddingsFile": f"{video_id}/embeddings.f32",
        "keyframeDir": f"{video_id}/keyframes",
    }


class TestIngest:
    def test_empty_manifest(self, tmp_path):
        manifest = write_manifest(tmp_path, [])
        engine = Engine(dim=8)
        report = ingest(manifest, engine)
        assert (report.videos, report.segments, report.vectors) == (0, 0, 0)

    def test_one_video(self, tmp_path):
        entry = write_video_files(tmp_path, "v0001", 3)
        manifest = write_manifest(tmp_path, [entry])
        engine = Engine(dim=8)
        report = ingest(manifest, engine)
        assert (report.videos, report.segments, report.vectors) == (1, 3, 3)
        assert len(engine.store) == 3
        assert engine.index().size == 3
        # raw vectors were normalized on the way in
        for sid, _, vec in engine.index().entries():
            assert abs(np.linalg.norm(vec) - 1.0) < 1e-5

    def test_vector_count_mismatch_names_video(self, tmp_path):
        entry = write_video_files(tmp_path, "v0001", 3)
        (tmp_path / "v0001/embeddings.f32").write_bytes(
            np.zeros((2, 8), "<f4").tobytes()
        )
        manifest = write_manifest(tmp_path, [entry])
        with pytest.raises(VectorCountMismatch) as exc:
            ingest(manifest, Engine(dim=8))
        assert "v0001" in str(exc.value)

    def test_bad_manifest(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        with pytest.raises(ManifestInvalid):
            Manifest.load(path)

    def test_dim_mismatch(self, tmp_path):
        entry = write_video_files(tmp_path, "v0001", 2)
        manifest = write_manifest(tmp_path, [entry], dim=8)
        engine = Engine(dim=16)
        with pytest.raises(Exception):
            ingest(manifest, engine)

    def test_atomic_per_video(self, tmp_path):
        good = write_video_files(tmp_path, "v0001", 3)
        bad = write_video_files(tmp_path, "v0002", 3)
        later = write_video_files(tmp_path, "v0003", 3)
        # sabotage v0002 mid-manifest: wrong row count
        (tmp_path / "v0002/embeddings.f32").write_bytes(np.zeros((1, 8), "<f4").tobytes())
        manifest = write_manifest(tmp_path, [good, bad, later])
        engine = Engine(dim=8)
        with pytest.raises(VectorCountMismatch):
            ingest(manifest, engine)
        # v0001 fully in, v0002 not at all, v0003 never reached
        assert engine.store.has_video("v0001")
        assert not engine.store.has_video("v0002")
        assert not engine.store.has_video("v0003")
        assert engine.index().size == 3
        assert not any(sid.startswith("v0002") for sid, _, _ in engine.index().entries())

    def test_atomic_on_duplicate_segment_mid_video(self, tmp_path):
        entry = write_video_files(tmp_path, "v0001", 3)
        other = write_video_files(tmp_path, "v0002", 3)
        # v0002's second segment reuses a v0001 segment id
        seg_path = tmp_path / "v0002/segments.jsonl"
        rows = [json.loads(l) for l in seg_path.read_text().splitlines()]
        rows[1]["segmentId"] = "v0001_s00001"
        seg_path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        manifest = write_manifest(tmp_path, [entry, other])
        engine = Engine(dim=8)
        with pytest.raises(Exception):
            ingest(manifest, engine)
        assert engine.store.has_video("v0001")
        assert not engine.store.has_video("v0002")
        assert engine.index().size == 3


class TestFixture:
    def test_deterministic_output(self, tmp_path):
        def tree_hash(root: Path) -> str:
            h = hashlib.sha256()
            for p in sorted(root.rglob("*")):
                if p.is_file():
                    h.update(str(p.relative_to(root)).encode())
                    h.update(p.read_bytes())
            return h.hexdigest()

        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_fixture(a, seed=42, n_videos=4, segments_per_video=6, dim=16)
        generate_fixture(b, seed=42, n_videos=4, segments_per_video=6, dim=16)
        assert tree_hash(a) == tree_hash(b)
        c = tmp_path / "c"
        generate_fixture(c, seed=43, n_videos=4, segments_per_video=6, dim=16)
        assert tree_hash(a) != tree_hash(c)

    def test_vectors_unit_norm(self, tmp_path):
        manifest = generate_fixture(tmp_path, seed=1, n_videos=3, segments_per_video=5, dim=16)
        m = Manifest.load(manifest)
        for v in m.videos:
            raw = (tmp_path / v.embeddings_file).read_bytes()
            rows = np.frombuffer(raw, "<f4").reshape(-1, 16)
            norms = np.linalg.norm(rows.astype(np.float64), axis=1)
            assert np.all(np.abs(norms - 1.0) < 1e-5)

    def test_ingest_fixture_no_warnings(self, tmp_path):
        manifest = generate_fixture(tmp_path, seed=7, n_videos=4, segments_per_video=5, dim=16)
        engine = Engine(dim=16)
        report = ingest(manifest, engine)
        assert report.warnings == []
        assert report.videos == 4
        assert report.segments == 20

    def test_double_ingest_idempotent(self, tmp_path):
        manifest = generate_fixture(tmp_path, seed=7, n_videos=4, segments_per_video=5, dim=16)
        engine = Engine(dim=16)
        ingest(manifest, engine)
        first = engine.content_hash()
        report = ingest(manifest, engine)
        assert engine.content_hash() == first
        assert report.videos == 4

    def test_fixture_round_trips_through_store(self, tmp_path):
        manifest_path = generate_fixture(tmp_path, seed=3, n_videos=2, segments_per_video=4, dim=16)
        manifest = Manifest.load(manifest_path)
        engine = Engine(dim=16)
        ingest(manifest_path, engine)
        for mv in manifest.videos:
            with (tmp_path / mv.segments_file).open() as fh:
                for line in fh:
                    rec = SegmentRecord.from_json(json.loads(line))
                    doc = engine.store.get_segment(rec.segment_id)
                    assert doc.start_ms == rec.start_ms
                    assert doc.end_ms == rec.end_ms
                    assert doc.annotations == rec.annotations
                    assert doc.keyframe_ref.endswith(rec.keyframe)

    def test_conflicting_revector_rejected(self, tmp_path):
        manifest = generate_fixture(tmp_path, seed=9, n_videos=2, segments_per_video=3, dim=16)
        engine = Engine(dim=16)
        ingest(manifest, engine)
        # rewrite one video's embeddings: same ids, different vectors
        m = Manifest.load(manifest)
        rng = np.random.default_rng(123)
        rows = rng.standard_normal((3, 16)).astype("<f4")
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        (tmp_path / m.videos[0].embeddings_file).write_bytes(rows.tobytes())
        with pytest.raises(DuplicateSegment):
            ingest(manifest, engine)


class TestEnginePersistence:
    def test_save_load_round_trip(self, tmp_path):
        manifest = generate_fixture(
            tmp_path / "corpus", seed=5, n_videos=3, segments_per_video=4, dim=16
        )
        engine = Engine(dim=16)
        ingest(manifest, engine)
        engine.save(tmp_path / "data")
        loaded = Engine.load(tmp_path / "data")
        assert loaded.content_hash() == engine.content_hash()
        assert loaded.dim == 16
        assert loaded.media_root == str((tmp_path / "corpus"))
        # loaded engine answers searches identically
        q = engine.encoder.encode("wedding")
        assert [h.segment_id for h in loaded.index().search(q, 10)] == [
            h.segment_id for h in engine.index().search(q, 10)
        ]
