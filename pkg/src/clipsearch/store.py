"""In-process document store for videos and segment annotations.

Layout: plain dicts keyed by id plus an inverted index mapping
(modality, label) to postings of (segmentId, score). Labels are
case-folded at ingest. The whole store round-trips through a
deterministic JSON-lines dump (videos sorted by id, then segments), so
idempotence checks can compare dump bytes directly.

Concurrency contract: any number of readers, one exclusive writer during
ingest (writes happen before serving).
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .errors import InvariantViolation, UnknownModality, UnknownSegment, UnknownVideo
from .model import Dataset, Modality, SegmentDoc, VideoDoc

META_PREFIX = "__meta__"  # reserved key space for engine-internal documents


class StoredHit:
    """(videoId, segmentId, score) row produced by term lookups, ordered
    by (score desc, videoId asc, segmentId asc)."""

    __slots__ = ("video_id", "segment_id", "score")

    def __init__(self, video_id: str, segment_id: str, score: float):
        self.video_id = video_id
        self.segment_id = segment_id
        self.score = score

    def __repr__(self):
        return f"StoredHit({self.video_id!r}, {self.segment_id!r}, {self.score})"

    def __eq__(self, other):
        return (
            isinstance(other, StoredHit)
            and self.video_id == other.video_id
            and self.segment_id == other.segment_id
            and self.score == other.score
        )


def _check_video(video: VideoDoc, segments: list[SegmentDoc]) -> None:
    if video.duration_ms <= 0:
        raise InvariantViolation(f"video {video.video_id!r}: durationMs must be positive")
    ordered = sorted(segments, key=lambda s: s.start_ms)
    prev_end = None
    for seg in ordered:
        where = f"video {video.video_id!r}, segment {seg.segment_id!r}"
        if seg.video_id != video.video_id:
            raise InvariantViolation(f"{where}: videoId mismatch")
        if seg.start_ms < 0 or seg.end_ms <= seg.start_ms:
            raise InvariantViolation(f"{where}: invalid span [{seg.start_ms}, {seg.end_ms})")
        if seg.end_ms > video.duration_ms:
            raise InvariantViolation(f"{where}: span exceeds video duration")
        if prev_end is not None and seg.start_ms < prev_end:
            raise InvariantViolation(f"{where}: overlaps previous segment")
        prev_end = seg.end_ms
    # uniform datasets tile with a constant interval; only the final
    # segment may be shorter
    if video.dataset is Dataset.M and len(ordered) > 1:
        interval = ordered[0].end_ms - ordered[0].start_ms
        for seg in ordered[:-1]:
            if seg.end_ms - seg.start_ms != interval:
                raise InvariantViolation(
                    f"video {video.video_id!r}, segment {seg.segment_id!r}: "
                    "uniform dataset requires constant segment length except the last"
                )
        last = ordered[-1]
        if last.end_ms - last.start_ms > interval:
            raise InvariantViolation(
                f"video {video.video_id!r}, segment {last.segment_id!r}: "
                "final segment longer than the uniform interval"
            )
    for seg in segments:
        for a in seg.annotations:
            if not a.label:
                raise InvariantViolation(
                    f"segment {seg.segment_id!r}: empty annotation label"
                )
            if not (0.0 <= a.score <= 1.0):
                raise InvariantViolation(
                    f"segment {seg.segment_id!r}: annotation score {a.score} outside [0, 1]"
                )


class MetadataStore:
    def __init__(self):
        self._videos: dict[str, VideoDoc] = {}
        self._segments: dict[str, SegmentDoc] = {}
        # (modality, label) -> {segmentId: best score}
        self._postings: dict[tuple[Modality, str], dict[str, float]] = {}
        self._meta: dict[str, dict] = {}
        self._write_lock = threading.Lock()

    # -- write path ---------------------------------------------------

    def check_video(self, video: VideoDoc, segments: list[SegmentDoc]) -> None:
        """Run all upsert-time invariant checks without mutating."""
        _check_video(video, segments)
        for seg in segments:
            existing = self._segments.get(seg.segment_id)
            if existing is not None and existing.video_id != video.video_id:
                raise InvariantViolation(
                    f"segment {seg.segment_id!r} already stored for video "
                    f"{existing.video_id!r}"
                )

    def upsert_video(self, video: VideoDoc, segments: list[SegmentDoc]) -> tuple[int, int]:
        """Store (or replace) one video and its segments atomically.

        Re-upserting an identical payload leaves the store dump unchanged.
        Returns (videos stored, segments stored) = (1, len(segments)).
        """
        with self._write_lock:
            self.check_video(video, segments)
            old = self._videos.get(video.video_id)
            if old is not None:
                for sid in old.segment_ids:
                    self._drop_segment(sid)
            stored = VideoDoc(
                video_id=video.video_id,
                title=video.title,
                duration_ms=video.duration_ms,
                dataset=video.dataset,
                segment_ids=[s.segment_id for s in sorted(segments, key=lambda s: s.start_ms)],
            )
            self._videos[video.video_id] = stored
            for seg in segments:
                self._segments[seg.segment_id] = seg
                for a in seg.annotations:
                    key = (a.modality, a.label.casefold())
                    posting = self._postings.setdefault(key, {})
                    prev = posting.get(seg.segment_id)
                    if prev is None or a.score > prev:
                        posting[seg.segment_id] = a.score
            return 1, len(segments)

    def _drop_segment(self, segment_id: str) -> None:
        seg = self._segments.pop(segment_id, None)
        if seg is None:
            return
        for a in seg.annotations:
            key = (a.modality, a.label.casefold())
            posting = self._postings.get(key)
            if posting is not None:
                posting.pop(segment_id, None)
                if not posting:
                    del self._postings[key]

    def put_meta(self, key: str, doc: dict) -> None:
        """Persist an engine-internal JSON document under a reserved key."""
        with self._write_lock:
            self._meta[key] = doc

    def get_meta(self, key: str) -> dict | None:
        return self._meta.get(key)

    # -- read path ----------------------------------------------------

    def __len__(self) -> int:
        return len(self._segments)

    @property
    def video_count(self) -> int:
        return len(self._videos)

    def has_video(self, video_id: str) -> bool:
        return video_id in self._videos

    def has_segment(self, segment_id: str) -> bool:
        return segment_id in self._segments

    def video_ids(self) -> list[str]:
        return sorted(self._videos)

    def find_segments(
        self,
        modality: Modality,
        label_query: str,
        min_score: float = 0.0,
        limit: int | None = None,
    ) -> list[StoredHit]:
        """Segments annotated with the term, best matching score first.

        Labels match case-insensitively; the text modality matches by
        substring (OCR strings are long), all others exactly. A segment's
        score is the maximum over its matching annotations.
        """
        if not isinstance(modality, Modality):
            raise UnknownModality(str(modality))
        if not label_query:
            raise ValueError("labelQuery must be non-empty")
        needle = label_query.casefold()
        merged: dict[str, float] = {}
        if modality is Modality.TEXT:
            for (mod, label), posting in self._postings.items():
                if mod is not Modality.TEXT or needle not in label:
                    continue
                for sid, score in posting.items():
                    if score >= min_score and score > merged.get(sid, -1.0):
                        merged[sid] = score
        else:
            posting = self._postings.get((modality, needle), {})
            for sid, score in posting.items():
                if score >= min_score:
                    merged[sid] = score
        hits = [
            StoredHit(self._segments[sid].video_id, sid, score)
            for sid, score in merged.items()
        ]
        hits.sort(key=lambda h: (-h.score, h.video_id, h.segment_id))
        if limit is not None:
            hits = hits[:limit]
        return hits

    def video_ids_for_term(
        self, modality: Modality, label_query: str, min_score: float = 0.0
    ) -> set[str]:
        return {h.video_id for h in self.find_segments(modality, label_query, min_score)}

    def get_video(self, video_id: str) -> tuple[VideoDoc, list[SegmentDoc]]:
        video = self._videos.get(video_id)
        if video is None:
            raise UnknownVideo(video_id)
        segments = [self._segments[sid] for sid in video.segment_ids]
        return video, segments

    def get_segment(self, segment_id: str) -> SegmentDoc:
        seg = self._segments.get(segment_id)
        if seg is None:
            raise UnknownSegment(segment_id)
        return seg

    def segment_span(self, segment_id: str) -> tuple[int, int]:
        seg = self.get_segment(segment_id)
        return seg.start_ms, seg.end_ms

    # -- dump / load ----------------------------------------------------

    def dump_lines(self):
        """Deterministic JSON-lines dump: meta docs, then each video
        followed by its segments in temporal order."""
        for key in sorted(self._meta):
            yield json.dumps({"kind": "meta", "key": key, "doc": self._meta[key]},
                             sort_keys=True, separators=(",", ":"))
        for vid in sorted(self._videos):
            video = self._videos[vid]
            yield json.dumps(video.to_json(), sort_keys=True, separators=(",", ":"))
            for sid in video.segment_ids:
                yield json.dumps(self._segments[sid].to_json(),
                                 sort_keys=True, separators=(",", ":"))

    def dump(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for line in self.dump_lines():
                fh.write(line)
                fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "MetadataStore":
        store = cls()
        pending_video: VideoDoc | None = None
        pending_segments: list[SegmentDoc] = []

        def flush():
            if pending_video is not None:
                store.upsert_video(pending_video, pending_segments)

        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                kind = obj.get("kind")
                if kind == "meta":
                    store.put_meta(obj["key"], obj["doc"])
                elif kind == "video":
                    flush()
                    pending_video = VideoDoc.from_json(obj)
                    pending_segments = []
                elif kind == "segment":
                    pending_segments.append(SegmentDoc.from_json(obj))
                else:
                    raise InvariantViolation(f"unknown dump line kind {kind!r}")
        flush()
        return store
