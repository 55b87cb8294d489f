"""HTTP client for a competition evaluation server.

Submissions are precious: a wrong one costs points and a duplicate can
too, so this client never retries a submission, regardless of timeouts
or connection errors. One submit() call performs at most one POST.

Endpoint paths and body field names drift between competition seasons,
so both are configuration (``RouteMap``) rather than constants; the stub
server in the test harness pins the reference mapping.
"""

from __future__ import annotations

import enum
import logging
import threading
import time
from dataclasses import dataclass, field

import httpx

from .errors import ConfigMissing, MissingField, UpstreamRejected, UpstreamUnreachable

log = logging.getLogger(__name__)


class TaskType(str, enum.Enum):
    KIS = "KIS"
    AVS = "AVS"
    QA = "QA"


@dataclass(frozen=True)
class Submission:
    task_type: TaskType
    video_id: str | None = None
    time_ms: int | None = None
    text: str | None = None

    def validate(self) -> None:
        if self.task_type in (TaskType.KIS, TaskType.AVS):
            if not self.video_id:
                raise MissingField(f"{self.task_type.value} submission requires videoId")
            if self.time_ms is None:
                raise MissingField(f"{self.task_type.value} submission requires timeMs")
        else:
            if not self.text or not self.text.strip():
                raise MissingField("QA submission requires non-empty text")


@dataclass(frozen=True)
class RouteMap:
    submit_path: str = "/api/v2/submit"
    session_field: str = "session"
    video_field: str = "videoId"
    time_field: str = "timestampMs"
    text_field: str = "text"
    task_field: str = "taskType"


@dataclass(frozen=True)
class EvalConfig:
    base_url: str
    session_token: str
    timeout_ms: int = 5000
    max_retries: int = 2  # applies to idempotent GETs only, never to submissions
    routes: RouteMap = field(default_factory=RouteMap)


@dataclass(frozen=True)
class Receipt:
    upstream_status: int
    body: str


class EvalClient:
    """Thread-safe: submit() shares nothing mutable but the log list,
    which is append-only under a lock."""

    def __init__(self, config: EvalConfig):
        self.config = config
        self.log: list[dict] = []
        self._log_lock = threading.Lock()
        # pooled connections; httpx never resends a POST on its own, so
        # reuse does not endanger the at-most-once guarantee
        self._http = httpx.Client(timeout=config.timeout_ms / 1000.0)

    def close(self) -> None:
        self._http.close()

    def _record(self, submission: Submission, outcome: str, status: int | None = None):
        entry = {
            "monotonicMs": time.monotonic() * 1000.0,
            "taskType": submission.task_type.value,
            "videoId": submission.video_id,
            "timeMs": submission.time_ms,
            "outcome": outcome,
            "status": status,
        }
        with self._log_lock:
            self.log.append(entry)
        log.info(
            "submission taskType=%s videoId=%s outcome=%s status=%s",
            submission.task_type.value, submission.video_id, outcome, status,
        )

    def submit(self, submission: Submission) -> Receipt:
        """Single POST to the submission route; the upstream response is
        surfaced verbatim. No retries, ever."""
        submission.validate()
        if not self.config.base_url:
            raise ConfigMissing("evaluation server base URL is not configured")
        routes = self.config.routes
        body = {
            routes.session_field: self.config.session_token,
            routes.task_field: submission.task_type.value,
        }
        if submission.video_id is not None:
            body[routes.video_field] = submission.video_id
        if submission.time_ms is not None:
            body[routes.time_field] = submission.time_ms
        if submission.text is not None:
            body[routes.text_field] = submission.text
        url = self.config.base_url.rstrip("/") + routes.submit_path
        try:
            response = self._http.post(url, json=body)
        except httpx.HTTPError as exc:
            self._record(submission, "unreachable")
            raise UpstreamUnreachable(f"POST {url}: {exc}") from exc
        if response.status_code >= 400:
            self._record(submission, "rejected", response.status_code)
            raise UpstreamRejected(response.status_code, response.text)
        self._record(submission, "accepted", response.status_code)
        return Receipt(upstream_status=response.status_code, body=response.text)
