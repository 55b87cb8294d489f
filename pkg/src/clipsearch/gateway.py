"""Websocket gateway: JSON request/response protocol over ``/ws``.

Every frame from the client is a request ``{"v": 1, "requestId", "kind",
"payload"}`` and receives exactly one terminal response echoing its
requestId, ``status`` ok or error - even when a handler blows up.
Requests on one connection are handled concurrently, so responses may
interleave in any order; the requestId is the only correlation key.
Frames that are not valid JSON objects get an error response with
requestId "unknown" and the connection stays open.

Full message schema in docs/protocol.md. Keyframes are served over plain
HTTP at ``/media/...`` (paths are the stored keyframeRef values) and
``/healthz`` reports build info.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .engine import Engine
from .errors import EngineError, MissingField, UnknownKind, UnknownVideo
from .evalclient import EvalClient, Submission, TaskType
from .explore import CLUSTERS_META_KEY, load_clusters, summarize
from .fusion import (
    MergePolicy,
    PolicyKind,
    RankedHit,
    TemporalMatch,
    TemporalParams,
    paginate,
)
from .querylang import parse
from .store import MetadataStore

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
REQUEST_KINDS = ("query", "similar", "summary", "videoDetail", "explore", "submit", "config")


@dataclass
class ServerConfig:
    page_size: int = 40
    similar_k: int = 12
    summary_size: int = 25
    policy: MergePolicy = field(default_factory=MergePolicy)
    temporal: TemporalParams = field(default_factory=TemporalParams)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _require(payload: dict, key: str):
    value = payload.get(key)
    if value is None:
        raise MissingField(f"payload field {key!r} is required")
    return value


def _parse_policy(payload: dict, default: MergePolicy) -> MergePolicy:
    raw = payload.get("policy")
    if raw is None:
        return default
    if isinstance(raw, str):
        raw = {"kind": raw}
    try:
        kind = PolicyKind(raw.get("kind", default.kind.value))
    except ValueError:
        raise MissingField(f"unknown merge policy {raw.get('kind')!r}") from None
    return MergePolicy(kind=kind, k_const=int(raw.get("kConst", default.k_const)))


def _parse_temporal(payload: dict, default: TemporalParams) -> TemporalParams:
    raw = payload.get("temporal")
    if raw is None:
        return default
    return TemporalParams(
        window_ms=int(raw.get("windowMs", default.window_ms)),
        per_stage_depth=int(raw.get("perStageDepth", default.per_stage_depth)),
    )


def _segment_brief(store: MetadataStore, segment_id: str) -> dict:
    seg = store.get_segment(segment_id)
    return {
        "segmentId": seg.segment_id,
        "videoId": seg.video_id,
        "startMs": seg.start_ms,
        "endMs": seg.end_ms,
        "keyframeRef": seg.keyframe_ref,
    }


def _hit_payload(store: MetadataStore, hit: RankedHit) -> dict:
    out = _segment_brief(store, hit.segment_id)
    out["score"] = hit.score
    out["rank"] = hit.rank
    out["source"] = hit.source.value
    return out


def _match_payload(store: MetadataStore, match: TemporalMatch, rank: int) -> dict:
    stages = [_segment_brief(store, sid) for sid in match.segment_ids]
    out = dict(stages[0])
    out["score"] = match.score
    out["rank"] = rank
    out["source"] = "temporal"
    out["stageSegments"] = stages
    return out


class Gateway:
    """Request dispatch shared by every websocket connection. Handlers
    are synchronous; the connection loop runs them on worker threads."""

    def __init__(self, engine: Engine, config: ServerConfig | None = None,
                 eval_client: EvalClient | None = None):
        self.engine = engine
        self.config = config or ServerConfig()
        self.eval_client = eval_client

    def dispatch(self, kind: str, payload: dict) -> dict:
        handler = getattr(self, f"handle_{_snake(kind)}", None)
        if kind not in REQUEST_KINDS or handler is None:
            raise UnknownKind(f"unknown request kind {kind!r}")
        return handler(payload)

    # -- handlers -------------------------------------------------------

    def handle_query(self, payload: dict) -> dict:
        query_string = _require(payload, "queryString")
        page = int(payload.get("page", 0))
        page_size = int(payload.get("pageSize", self.config.page_size))
        policy = _parse_policy(payload, self.config.policy)
        temporal = _parse_temporal(payload, self.config.temporal)
        ast = parse(query_string)
        orch = self.engine.orchestrator
        query_plan = orch.plan(ast, policy, temporal)
        results = orch.execute(query_plan)
        store = self.engine.store
        result_page = paginate(results, page, page_size)
        if ast.is_temporal:
            offset = page * page_size
            hits = [
                _match_payload(store, m, offset + i + 1)
                for i, m in enumerate(result_page.items)
            ]
        else:
            hits = [_hit_payload(store, h) for h in result_page.items]
        return {
            "hits": hits,
            "page": result_page.page,
            "pageSize": result_page.page_size,
            "totalHits": result_page.total_hits,
            "totalPages": result_page.total_pages,
            "temporal": ast.is_temporal,
            "stages": len(ast.stages),
        }

    def handle_similar(self, payload: dict) -> dict:
        segment_id = _require(payload, "segmentId")
        k = int(payload.get("k", self.config.similar_k))
        index = self.engine.index()
        query = index.vector_of(segment_id)
        hits = [h for h in index.search(query, k + 1) if h.segment_id != segment_id][:k]
        store = self.engine.store
        out = []
        for i, h in enumerate(hits):
            brief = _segment_brief(store, h.segment_id)
            brief["score"] = h.score
            brief["rank"] = i + 1
            brief["source"] = "embedding"
            out.append(brief)
        return {
            "querySegmentId": segment_id,
            "hits": out,
            "page": 0,
            "pageSize": k,
            "totalHits": len(out),
            "totalPages": 1 if out else 0,
        }

    def handle_summary(self, payload: dict) -> dict:
        video_id = _require(payload, "videoId")
        n = int(payload.get("n", self.config.summary_size))
        summary = summarize(self.engine.store, self.engine.index(), video_id, n)
        frames = []
        for sid, ref in zip(summary.segment_ids, summary.keyframe_refs):
            seg = self.engine.store.get_segment(sid)
            frames.append({"segmentId": sid, "keyframeRef": ref, "startMs": seg.start_ms})
        return {"videoId": video_id, "keyframes": frames}

    def handle_video_detail(self, payload: dict) -> dict:
        video_id = _require(payload, "videoId")
        video, segments = self.engine.store.get_video(video_id)
        return {
            "videoId": video.video_id,
            "title": video.title,
            "durationMs": video.duration_ms,
            "dataset": video.dataset.value,
            "segments": [
                {
                    "segmentId": s.segment_id,
                    "startMs": s.start_ms,
                    "endMs": s.end_ms,
                    "keyframeRef": s.keyframe_ref,
                    "annotations": [a.to_json() for a in s.annotations],
                }
                for s in segments
            ],
        }

    def handle_explore(self, payload: dict) -> dict:
        doc = load_clusters(self.engine.store)
        store = self.engine.store
        clusters = []
        for c in doc["clusters"]:
            members = []
            for vid in c["memberVideoIds"]:
                try:
                    video, segments = store.get_video(vid)
                except UnknownVideo:
                    continue
                members.append(
                    {
                        "videoId": vid,
                        "title": video.title,
                        "keyframeRef": segments[0].keyframe_ref if segments else None,
                    }
                )
            clusters.append(
                {
                    "clusterId": c["clusterId"],
                    "medoidVideoId": c["medoidVideoId"],
                    "size": len(c["memberVideoIds"]),
                    "members": members,
                }
            )
        return {"k": doc["k"], "seed": doc["seed"], "clusters": clusters}

    def handle_submit(self, payload: dict) -> dict:
        task_raw = _require(payload, "taskType")
        try:
            task = TaskType(task_raw)
        except ValueError:
            raise MissingField(f"unknown taskType {task_raw!r}") from None
        submission = Submission(
            task_type=task,
            video_id=payload.get("videoId"),
            time_ms=payload.get("timeMs"),
            text=payload.get("text"),
        )
        submission.validate()
        if self.eval_client is None:
            raise MissingField("no evaluation server configured (serve --eval-url)")
        receipt = self.eval_client.submit(submission)
        return {"upstreamStatus": receipt.upstream_status, "body": receipt.body}

    def handle_config(self, payload: dict) -> dict:
        engine = self.engine
        return {
            "version": __version__,
            "protocolVersion": PROTOCOL_VERSION,
            "dim": engine.dim,
            "indexes": sorted(engine.indexes),
            "videos": engine.store.video_count,
            "segments": len(engine.store),
            "clustersBuilt": engine.store.get_meta(CLUSTERS_META_KEY) is not None,
            "submissionsEnabled": self.eval_client is not None,
            "defaults": {
                "pageSize": self.config.page_size,
                "policy": self.config.policy.kind.value,
                "kConst": self.config.policy.k_const,
                "windowMs": self.config.temporal.window_ms,
                "perStageDepth": self.config.temporal.per_stage_depth,
                "summarySize": self.config.summary_size,
                "similarK": self.config.similar_k,
            },
        }


def _snake(kind: str) -> str:
    out = []
    for ch in kind:
        if ch.isupper():
            out.append("_")
            out.append(ch.lower())
        else:
            out.append(ch)
    return "".join(out)


def _error_response(request_id: str, exc: Exception) -> dict:
    if isinstance(exc, EngineError):
        error = {"code": exc.code, "message": str(exc)}
        error.update(exc.details())
    else:
        error = {"code": "InternalError", "message": str(exc) or type(exc).__name__}
    return {
        "v": PROTOCOL_VERSION,
        "requestId": request_id,
        "status": "error",
        "error": error,
    }


def _ok_response(request_id: str, payload: dict) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "requestId": request_id,
        "status": "ok",
        "payload": payload,
    }


def create_app(
    engine: Engine,
    config: ServerConfig | None = None,
    eval_client: EvalClient | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    gateway = Gateway(engine, config, eval_client)
    app = FastAPI(title="clipsearch", version=__version__)
    app.state.gateway = gateway

    @app.get("/healthz")
    def healthz():
        return JSONResponse(
            {
                "status": "ok",
                "name": "clipsearch",
                "version": __version__,
                "videos": engine.store.video_count,
                "segments": len(engine.store),
            }
        )

    @app.get("/media/{ref:path}")
    def media(ref: str):
        if engine.media_root is None:
            return JSONResponse({"error": "no media root configured"}, status_code=404)
        root = Path(engine.media_root).resolve()
        target = (root / ref).resolve()
        if root not in target.parents and target != root:
            return JSONResponse({"error": "path escapes media root"}, status_code=403)
        if not target.is_file():
            return JSONResponse({"error": "not found"}, status_code=404)
        return FileResponse(target)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        send_lock = asyncio.Lock()
        tasks: set[asyncio.Task] = set()

        async def respond(obj: dict):
            async with send_lock:
                await ws.send_text(canonical_json(obj))

        async def run_request(request_id: str, kind: str, payload: dict):
            try:
                result = await asyncio.to_thread(gateway.dispatch, kind, payload)
                await respond(_ok_response(request_id, result))
            except Exception as exc:  # one terminal response, no matter what
                if not isinstance(exc, EngineError):
                    log.exception("request %s failed", request_id)
                await respond(_error_response(request_id, exc))

        try:
            while True:
                raw = await ws.receive_text()
                try:
                    frame = json.loads(raw)
                    if not isinstance(frame, dict):
                        raise ValueError("frame is not an object")
                except ValueError:
                    await respond(
                        {
                            "v": PROTOCOL_VERSION,
                            "requestId": "unknown",
                            "status": "error",
                            "error": {
                                "code": "BadFrame",
                                "message": "frame is not a JSON object",
                            },
                        }
                    )
                    continue
                request_id = frame.get("requestId")
                if not isinstance(request_id, str) or not request_id:
                    request_id = "unknown"
                kind = frame.get("kind")
                if not isinstance(kind, str):
                    await respond(
                        _error_response(
                            request_id, MissingField("request kind is required")
                        )
                    )
                    continue
                task = asyncio.create_task(
                    run_request(request_id, kind, frame.get("payload") or {})
                )
                tasks.add(task)
                task.add_done_callback(tasks.discard)
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
