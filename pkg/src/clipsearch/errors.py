"""Exception taxonomy shared across the engine.

Every error carries a stable ``code`` string that travels over the wire
protocol unchanged, so handlers can map exceptions to error responses
without per-call translation tables.
"""

from __future__ import annotations


class EngineError(Exception):
    code = "InternalError"

    def details(self) -> dict:
        return {}


class ZeroVector(EngineError):
    code = "ZeroVector"


class DimensionMismatch(EngineError):
    code = "DimensionMismatch"


class DuplicateSegment(EngineError):
    code = "DuplicateSegment"


class UnknownSegment(EngineError):
    code = "UnknownSegment"


class UnknownVideo(EngineError):
    code = "UnknownVideo"


class UnknownModality(EngineError):
    code = "UnknownModality"


class InvariantViolation(EngineError):
    code = "InvariantViolation"


class QueryParseError(EngineError):
    """Base of all search-bar syntax errors; ``offset`` is a 0-based
    character position into the original input string."""

    code = "ParseError"

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset

    def details(self) -> dict:
        return {"offset": self.offset, "reason": type(self).__name__}


class EmptyStage(QueryParseError):
    pass


class UnknownPrefix(QueryParseError):
    pass


class DanglingPrefix(QueryParseError):
    pass


class UnbalancedQuote(QueryParseError):
    pass


class IndexUnavailable(EngineError):
    code = "IndexUnavailable"

    def __init__(self, name: str):
        super().__init__(f"no index named {name!r}")
        self.name = name

    def details(self) -> dict:
        return {"index": self.name}


class ManifestInvalid(EngineError):
    code = "ManifestInvalid"


class VectorCountMismatch(EngineError):
    code = "VectorCountMismatch"


class NonPositiveDuration(EngineError):
    code = "NonPositiveDuration"


class NoVectors(EngineError):
    code = "NoVectors"


class DegenerateMean(EngineError):
    code = "DegenerateMean"


class TooFewVideos(EngineError):
    code = "TooFewVideos"


class ClustersNotBuilt(EngineError):
    code = "ClustersNotBuilt"


class MissingField(EngineError):
    code = "MissingField"


class UnknownKind(EngineError):
    code = "UnknownKind"


class ConfigMissing(EngineError):
    code = "ConfigMissing"


class UpstreamRejected(EngineError):
    code = "UpstreamRejected"

    def __init__(self, status: int, body: str = ""):
        super().__init__(f"evaluation server rejected submission: HTTP {status}")
        self.status = status
        self.body = body

    def details(self) -> dict:
        return {"status": self.status, "body": self.body}


class UpstreamUnreachable(EngineError):
    code = "UpstreamUnreachable"
