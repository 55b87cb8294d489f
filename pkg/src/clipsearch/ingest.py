"""Corpus loading: manifests of precomputed analysis outputs, plus a
deterministic synthetic-fixture generator.

The engine never runs video analysis itself; it consumes what some
upstream pipeline exported. The interchange formats (documented in
docs/formats.md) are deliberately primitive:

* manifest.json - dataset, vector dim, and one entry per video pointing
  at its segments file, embeddings file, and keyframe directory.
* segments file - JSON lines, one row per segment with span, keyframe
  filename, and annotations.
* embeddings file - raw little-endian float32, row-major N x dim, row i
  belonging to segment row i. No header.

Raw vectors are normalized at ingest (exporters rarely bother) unless
they are zero, which fails the video. Each video lands atomically: all
validation happens before either the store or the index is touched.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

import numpy as np

from .engine import Engine
from .errors import (
    DuplicateSegment,
    ManifestInvalid,
    NonPositiveDuration,
    VectorCountMismatch,
    ZeroVector,
)
from .fusion import DEFAULT_INDEX
from .model import Annotation, Dataset, Modality, SegmentDoc, VideoDoc
from .textenc import HashedTokenEncoder
from .vectors import IndexEntry, normalize


@dataclass
class SegmentRecord:
    segment_id: str
    start_ms: int
    end_ms: int
    keyframe: str
    annotations: list[Annotation] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "segmentId": self.segment_id,
            "startMs": self.start_ms,
            "endMs": self.end_ms,
            "keyframe": self.keyframe,
            "annotations": [a.to_json() for a in self.annotations],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SegmentRecord":
        return cls(
            segment_id=obj["segmentId"],
            start_ms=int(obj["startMs"]),
            end_ms=int(obj["endMs"]),
            keyframe=obj["keyframe"],
            annotations=[Annotation.from_json(a) for a in obj.get("annotations", [])],
        )


@dataclass
class ManifestVideo:
    video_id: str
    title: str
    duration_ms: int
    segments_file: str
    embeddings_file: str
    keyframe_dir: str


@dataclass
class Manifest:
    dataset: Dataset
    dim: int
    videos: list[ManifestVideo]

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestInvalid(f"cannot read manifest {path}: {exc}") from exc
        try:
            videos = [
                ManifestVideo(
                    video_id=v["videoId"],
                    title=v.get("title", v["videoId"]),
                    duration_ms=int(v["durationMs"]),
                    segments_file=v["segmentsFile"],
                    embeddings_file=v["embeddingsFile"],
                    keyframe_dir=v["keyframeDir"],
                )
                for v in obj["videos"]
            ]
            manifest = cls(dataset=Dataset(obj["dataset"]), dim=int(obj["dim"]), videos=videos)
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestInvalid(f"manifest {path} is malformed: {exc}") from exc
        if manifest.dim <= 0:
            raise ManifestInvalid("manifest dim must be positive")
        seen = set()
        for v in manifest.videos:
            if v.video_id in seen:
                raise ManifestInvalid(f"duplicate video {v.video_id!r} in manifest")
            seen.add(v.video_id)
        return manifest


def uniform_segments(
    duration_ms: int, interval_ms: int = 1000, video_id: str = "video"
) -> list[SegmentRecord]:
    """Tile [0, durationMs) with fixed-length segments; the last one keeps
    the remainder. The keyframe reference is the segment midpoint."""
    if duration_ms <= 0:
        raise NonPositiveDuration(f"durationMs must be positive, got {duration_ms}")
    if interval_ms <= 0:
        raise NonPositiveDuration(f"intervalMs must be positive, got {interval_ms}")
    records = []
    i = 0
    start = 0
    while start < duration_ms:
        end = min(start + interval_ms, duration_ms)
        mid = (start + end) // 2
        records.append(
            SegmentRecord(
                segment_id=f"{video_id}_s{i:05d}",
                start_ms=start,
                end_ms=end,
                keyframe=f"kf_{mid:09d}.bmp",
            )
        )
        i += 1
        start = end
    return records


@dataclass
class IngestReport:
    videos: int = 0
    segments: int = 0
    vectors: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "videos": self.videos,
            "segments": self.segments,
            "vectors": self.vectors,
            "warnings": list(self.warnings),
        }


def _read_segment_records(path: Path) -> list[SegmentRecord]:
    records = []
    try:
        with path.open(encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(SegmentRecord.from_json(json.loads(line)))
                except (KeyError, ValueError) as exc:
                    raise ManifestInvalid(f"{path}:{n}: bad segment row: {exc}") from exc
    except OSError as exc:
        raise ManifestInvalid(f"cannot read segments file {path}: {exc}") from exc
    return records


def _read_embeddings(path: Path, n_rows: int, dim: int, video_id: str) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ManifestInvalid(f"cannot read embeddings file {path}: {exc}") from exc
    if len(raw) % (4 * dim) != 0:
        raise VectorCountMismatch(
            f"video {video_id!r}: embeddings file size {len(raw)} is not a "
            f"multiple of {4 * dim} bytes"
        )
    rows = len(raw) // (4 * dim)
    if rows != n_rows:
        raise VectorCountMismatch(
            f"video {video_id!r}: {rows} embedding rows for {n_rows} segments"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(rows, dim)


def ingest(
    manifest_path: str | Path,
    engine: Engine,
    index_name: str = DEFAULT_INDEX,
) -> IngestReport:
    """Load every video of a manifest into the engine, atomically per
    video. Re-ingesting identical content is a no-op; conflicting content
    for an existing segment id is an error."""
    manifest_path = Path(manifest_path)
    manifest = Manifest.load(manifest_path)
    engine.check_dim(manifest.dim)
    base = manifest_path.parent
    index = engine.index(index_name, create=True)
    report = IngestReport()

    if engine.media_root is None:
        engine.media_root = str(base)
    elif Path(engine.media_root) != base:
        report.warnings.append(
            f"media root changes from {engine.media_root} to {base}; "
            "keyframes of earlier ingests may stop resolving"
        )
        engine.media_root = str(base)

    for mv in manifest.videos:
        records = _read_segment_records(base / mv.segments_file)
        matrix = _read_embeddings(base / mv.embeddings_file, len(records), manifest.dim, mv.video_id)
        if not (base / mv.keyframe_dir).is_dir():
            report.warnings.append(
                f"video {mv.video_id!r}: keyframe directory {mv.keyframe_dir!r} missing"
            )

        segments = []
        entries = []
        for row, rec in enumerate(records):
            try:
                vec = normalize(matrix[row])
            except ZeroVector:
                raise ZeroVector(
                    f"video {mv.video_id!r}: embedding row {row} is a zero vector"
                ) from None
            ref = str(PurePosixPath(mv.keyframe_dir) / rec.keyframe)
            segments.append(
                SegmentDoc(
                    segment_id=rec.segment_id,
                    video_id=mv.video_id,
                    start_ms=rec.start_ms,
                    end_ms=rec.end_ms,
                    keyframe_ref=ref,
                    annotations=rec.annotations,
                )
            )
            entries.append(IndexEntry(rec.segment_id, mv.video_id, vec))
        video = VideoDoc(
            video_id=mv.video_id,
            title=mv.title,
            duration_ms=mv.duration_ms,
            dataset=manifest.dataset,
            segment_ids=[s.segment_id for s in segments],
        )

        # validate everything (store invariants, index duplicates) before
        # mutating either structure: per-video atomicity
        engine.store.check_video(video, segments)
        fresh_entries = []
        for e in entries:
            if index.contains(e.segment_id):
                if not np.array_equal(index.vector_of(e.segment_id), e.vector):
                    raise DuplicateSegment(
                        f"segment {e.segment_id!r} already indexed with a different vector"
                    )
            else:
                fresh_entries.append(e)
        if fresh_entries and len(fresh_entries) != len(entries):
            # partial presence means an earlier ingest died mid-manifest
            # with a different layout; refuse rather than guess
            raise DuplicateSegment(
                f"video {mv.video_id!r}: some segments already indexed, some not"
            )

        engine.store.upsert_video(video, segments)
        index.add_entries(fresh_entries)
        report.videos += 1
        report.segments += len(segments)
        report.vectors += len(entries)
    return report


# -- synthetic fixture ---------------------------------------------------

FIXTURE_VOCAB = {
    "theme": [
        "wedding", "paraglider", "snowstorm", "harbor", "carnival", "orchard",
        "volcano", "library", "aquarium", "derby", "bakery", "glacier",
    ],
    "object": ["person", "dog", "bicycle", "boat", "guitar", "balloon", "car", "kite"],
    "event": ["dancing", "juggling", "surfing", "climbing", "cooking", "racing"],
    "text": ["grand opening", "happy birthday", "welcome home", "main street", "exit"],
}


def _write_bmp(path: Path, rgb: tuple[int, int, int], size: int = 2) -> None:
    """Minimal solid-color 24-bit BMP; fully deterministic bytes."""
    row = bytes(reversed(rgb)) * size
    row += b"\x00" * ((4 - len(row) % 4) % 4)
    pixels = row * size
    header = struct.pack("<2sIHHI", b"BM", 54 + len(pixels), 0, 0, 54)
    dib = struct.pack("<IiiHHIIiiII", 40, size, size, 1, 24, 0, len(pixels), 2835, 2835, 0, 0)
    path.write_bytes(header + dib + pixels)


def _pick_theme_words(encoder, rng: np.random.Generator, n: int) -> list[str]:
    """Greedily keep vocabulary words whose encoder directions are close
    to orthogonal, so cluster centroids are well separated by design."""
    order = list(rng.permutation(len(FIXTURE_VOCAB["theme"])))
    chosen: list[str] = []
    vectors = []
    for idx in order:
        word = FIXTURE_VOCAB["theme"][idx]
        v = encoder.token_vector(word)
        if all(abs(float(v @ u)) <= 0.3 for u in vectors):
            chosen.append(word)
            vectors.append(v)
        if len(chosen) == n:
            return chosen
    raise ValueError(f"could not find {n} separated theme words at this dimension")


def generate_fixture(
    out_dir: str | Path,
    seed: int,
    n_videos: int,
    segments_per_video: int,
    dim: int,
    n_clusters: int = 4,
    encoder_seed: int = 0,
) -> Path:
    """Write a reproducible synthetic corpus and return the manifest path.

    Videos fall into ``n_clusters`` theme groups with near-orthogonal
    centroids; segment vectors are the theme direction plus a pinch of
    that segment's object word and noise, all derived from the same text
    encoder the engine queries with, so free-text search and clustering
    behave meaningfully. ``ground_truth.json`` records the group of each
    video. Identical arguments produce byte-identical directories.
    """
    if min(n_videos, segments_per_video, dim, n_clusters) < 1:
        raise ValueError("all fixture counts must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    encoder = HashedTokenEncoder(dim, seed=encoder_seed)
    themes = _pick_theme_words(encoder, rng, n_clusters)
    theme_vecs = [encoder.token_vector(w) for w in themes]
    noise_scale = 0.5 / np.sqrt(dim)

    manifest_videos = []
    ground_truth = {}
    for v in range(n_videos):
        video_id = f"v{v:04d}"
        cluster = v % n_clusters
        ground_truth[video_id] = cluster
        theme = themes[cluster]
        duration = segments_per_video * 1000
        records = uniform_segments(duration, 1000, video_id=video_id)
        rows = np.empty((len(records), dim), dtype=np.float32)
        for i, rec in enumerate(records):
            obj = FIXTURE_VOCAB["object"][int(rng.integers(len(FIXTURE_VOCAB["object"])))]
            event = FIXTURE_VOCAB["event"][int(rng.integers(len(FIXTURE_VOCAB["event"])))]
            anns = [
                Annotation(Modality.CONCEPT, theme, float(rng.integers(614, 1025)) / 1024.0),
                Annotation(Modality.OBJECT, obj, float(rng.integers(512, 1025)) / 1024.0),
            ]
            if rng.random() < 0.3:
                anns.append(
                    Annotation(Modality.EVENT, event, float(rng.integers(512, 1025)) / 1024.0)
                )
            if rng.random() < 0.15:
                text = FIXTURE_VOCAB["text"][int(rng.integers(len(FIXTURE_VOCAB["text"])))]
                anns.append(Annotation(Modality.TEXT, f"{text} {theme}", 1.0))
            rec.annotations = anns
            raw = (
                theme_vecs[cluster]
                + 0.6 * encoder.token_vector(obj)
                + noise_scale * rng.standard_normal(dim)
            )
            rows[i] = normalize(raw)

        vdir = out / video_id
        kf_dir = vdir / "keyframes"
        kf_dir.mkdir(parents=True, exist_ok=True)
        with (vdir / "segments.jsonl").open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json(), sort_keys=True, separators=(",", ":")))
                fh.write("\n")
        (vdir / "embeddings.f32").write_bytes(rows.astype("<f4").tobytes(order="C"))
        for i, rec in enumerate(records):
            shade = int(rng.integers(0, 256))
            _write_bmp(
                kf_dir / rec.keyframe,
                ((cluster * 67) % 256, shade, (160 + 31 * cluster) % 256),
            )
        manifest_videos.append(
            {
                "videoId": video_id,
                "title": f"{theme} video {v}",
                "durationMs": duration,
                "segmentsFile": f"{video_id}/segments.jsonl",
                "embeddingsFile": f"{video_id}/embeddings.f32",
                "keyframeDir": f"{video_id}/keyframes",
            }
        )

    manifest = {"dataset": "V", "dim": dim, "videos": manifest_videos}
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (out / "ground_truth.json").write_text(
        json.dumps(ground_truth, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return manifest_path
