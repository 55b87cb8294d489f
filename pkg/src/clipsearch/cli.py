"""Command line entry points: fixture, ingest, cluster, serve.

All failures exit non-zero and print a machine-readable JSON error object
to stderr. Flags have CLIPSEARCH_* environment variable equivalents; the
flag wins when both are set.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .engine import Engine
from .errors import EngineError
from .fusion import DEFAULT_INDEX


def _env(name: str, default=None):
    return os.environ.get(f"CLIPSEARCH_{name}", default)


def _fail(code: str, message: str) -> int:
    print(json.dumps({"error": {"code": code, "message": message}}), file=sys.stderr)
    return 1


def cmd_fixture(args) -> int:
    from .ingest import generate_fixture

    manifest = generate_fixture(
        out_dir=args.out,
        seed=args.seed,
        n_videos=args.videos,
        segments_per_video=args.segments,
        dim=args.dim,
        n_clusters=args.clusters,
    )
    print(json.dumps({"manifest": str(manifest)}))
    return 0


def cmd_ingest(args) -> int:
    from .ingest import ingest

    data = Path(args.data)
    if (data / "engine.json").exists():
        engine = Engine.load(data)
    else:
        manifest_obj = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        engine = Engine(dim=int(manifest_obj["dim"]))
    report = ingest(args.manifest, engine, index_name=args.index)
    engine.save(data)
    print(json.dumps(report.to_json()))
    return 0


def cmd_cluster(args) -> int:
    from .explore import cluster_videos, default_k, persist_clusters

    engine = Engine.load(args.data)
    k = args.k if args.k is not None else default_k(engine.store.video_count)
    result = cluster_videos(engine.store, engine.index(), k=k, seed=args.seed)
    persist_clusters(engine.store, result, k=k, seed=args.seed)
    engine.save(args.data)
    print(
        json.dumps(
            {
                "k": k,
                "seed": args.seed,
                "iterations": result.iterations,
                "objective": result.objective_history[-1],
                "sizes": [len(c.member_video_ids) for c in result.clusters],
            }
        )
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .evalclient import EvalClient, EvalConfig
    from .gateway import ServerConfig, create_app

    engine = Engine.load(args.data)
    eval_client = None
    if args.eval_url:
        eval_client = EvalClient(
            EvalConfig(base_url=args.eval_url, session_token=args.eval_session or "")
        )
    ui_dir = args.ui if args.ui and Path(args.ui).is_dir() else None
    app = create_app(engine, ServerConfig(), eval_client, ui_dir=ui_dir)
    logging.basicConfig(level=logging.INFO)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clipsearch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="generate a synthetic test corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--videos", type=int, required=True)
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("ingest", help="load a manifest into a data directory")
    p.add_argument("--manifest", required=True)
    p.add_argument("--index", default=DEFAULT_INDEX)
    p.add_argument("--data", default=_env("DATA", "data"))
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="build video similarity clusters")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", default=_env("DATA", "data"))
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("serve", help="run the websocket gateway")
    p.add_argument("--data", default=_env("DATA", "data"))
    p.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(_env("PORT", "8090")))
    p.add_argument("--eval-url", default=_env("EVAL_URL"))
    p.add_argument("--eval-session", default=_env("EVAL_SESSION"))
    p.add_argument("--ui", default=_env("UI"))
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        return _fail(exc.code, str(exc))
    except (OSError, ValueError) as exc:
        return _fail("InternalError", str(exc))


if __name__ == "__main__":
    sys.exit(main())
