"""Core domain types shared by the store, parser, and orchestrator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Modality(str, enum.Enum):
    """Annotation channels a segment can carry, each with its one-letter
    search-bar prefix. Prefix letters must stay unique."""

    CONCEPT = "concept"
    OBJECT = "object"
    EVENT = "event"
    TEXT = "text"
    MED_OBJECT = "medObject"
    MED_ACTION = "medAction"

    @property
    def prefix(self) -> str:
        return _PREFIXES[self]

    @classmethod
    def from_prefix(cls, letter: str) -> "Modality":
        try:
            return _BY_PREFIX[letter]
        except KeyError:
            raise KeyError(letter) from None

    @classmethod
    def from_wire(cls, name: str) -> "Modality":
        for m in cls:
            if m.value == name:
                return m
        raise KeyError(name)


_PREFIXES = {
    Modality.CONCEPT: "c",
    Modality.OBJECT: "o",
    Modality.EVENT: "e",
    Modality.TEXT: "t",
    Modality.MED_OBJECT: "m",
    Modality.MED_ACTION: "a",
}
_BY_PREFIX = {v: k for k, v in _PREFIXES.items()}
assert len(_BY_PREFIX) == len(_PREFIXES)


class Dataset(str, enum.Enum):
    V = "V"  # general web video, shot-segmented
    M = "M"  # marine, uniform 1s segments
    S = "S"  # surgical, semantic segments


@dataclass(frozen=True)
class Annotation:
    modality: Modality
    label: str
    score: float

    def to_json(self) -> dict:
        return {"modality": self.modality.value, "label": self.label, "score": self.score}

    @classmethod
    def from_json(cls, obj: dict) -> "Annotation":
        return cls(Modality.from_wire(obj["modality"]), obj["label"], float(obj["score"]))


@dataclass
class SegmentDoc:
    segment_id: str
    video_id: str
    start_ms: int
    end_ms: int
    keyframe_ref: str
    annotations: list[Annotation] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": "segment",
            "segmentId": self.segment_id,
            "videoId": self.video_id,
            "startMs": self.start_ms,
            "endMs": self.end_ms,
            "keyframeRef": self.keyframe_ref,
            "annotations": [a.to_json() for a in self.annotations],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SegmentDoc":
        return cls(
            segment_id=obj["segmentId"],
            video_id=obj["videoId"],
            start_ms=int(obj["startMs"]),
            end_ms=int(obj["endMs"]),
            keyframe_ref=obj["keyframeRef"],
            annotations=[Annotation.from_json(a) for a in obj.get("annotations", [])],
        )


@dataclass
class VideoDoc:
    video_id: str
    title: str
    duration_ms: int
    dataset: Dataset
    segment_ids: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": "video",
            "videoId": self.video_id,
            "title": self.title,
            "durationMs": self.duration_ms,
            "dataset": self.dataset.value,
            "segmentIds": list(self.segment_ids),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VideoDoc":
        return cls(
            video_id=obj["videoId"],
            title=obj["title"],
            duration_ms=int(obj["durationMs"]),
            dataset=Dataset(obj["dataset"]),
            segment_ids=list(obj.get("segmentIds", [])),
        )
