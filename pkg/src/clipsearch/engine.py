"""Engine facade: the store, the named vector indexes, and the text
encoder, loadable from / savable to a data directory.

Data directory layout::

    engine.json              dim, encoder seed, index names, media root
    store.jsonl              metadata store dump (deterministic)
    vectors/<name>.f32       raw little-endian float32, row-major N x dim
    vectors/<name>.ids.jsonl one {"segmentId","videoId"} object per row

Everything written here is byte-deterministic for a given ingest history,
so idempotence checks can hash the directory.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ManifestInvalid
from .fusion import DEFAULT_INDEX, Orchestrator
from .store import MetadataStore
from .textenc import HashedTokenEncoder
from .vectors import IndexEntry, VectorIndex

ENGINE_FILE = "engine.json"
STORE_FILE = "store.jsonl"
VECTOR_DIR = "vectors"
FORMAT_VERSION = 1


class Engine:
    def __init__(self, dim: int, encoder_seed: int = 0, media_root: str | None = None):
        self.dim = dim
        self.encoder_seed = encoder_seed
        self.media_root = media_root
        self.store = MetadataStore()
        self.indexes: dict[str, VectorIndex] = {DEFAULT_INDEX: VectorIndex(dim)}
        self.encoder = HashedTokenEncoder(dim, seed=encoder_seed)
        self._orchestrator: Orchestrator | None = None

    @property
    def orchestrator(self) -> Orchestrator:
        if self._orchestrator is None:
            self._orchestrator = Orchestrator(self.indexes, self.store, self.encoder)
        return self._orchestrator

    def index(self, name: str = DEFAULT_INDEX, create: bool = False) -> VectorIndex:
        if name not in self.indexes:
            if not create:
                raise KeyError(name)
            self.indexes[name] = VectorIndex(self.dim)
        return self.indexes[name]

    # -- persistence ----------------------------------------------------

    def save(self, data_dir: str | Path) -> None:
        root = Path(data_dir)
        root.mkdir(parents=True, exist_ok=True)
        (root / VECTOR_DIR).mkdir(exist_ok=True)
        meta = {
            "version": FORMAT_VERSION,
            "dim": self.dim,
            "encoderSeed": self.encoder_seed,
            "indexes": sorted(self.indexes),
            "mediaRoot": self.media_root,
        }
        (root / ENGINE_FILE).write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        self.store.dump(root / STORE_FILE)
        for name in sorted(self.indexes):
            index = self.indexes[name]
            rows = []
            ids = []
            for sid, vid, vec in index.entries():
                rows.append(vec)
                ids.append({"segmentId": sid, "videoId": vid})
            matrix = np.vstack(rows) if rows else np.empty((0, self.dim), np.float32)
            (root / VECTOR_DIR / f"{name}.f32").write_bytes(
                matrix.astype("<f4").tobytes(order="C")
            )
            with (root / VECTOR_DIR / f"{name}.ids.jsonl").open("w", encoding="utf-8") as fh:
                for obj in ids:
                    fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")))
                    fh.write("\n")

    @classmethod
    def load(cls, data_dir: str | Path) -> "Engine":
        root = Path(data_dir)
        meta_path = root / ENGINE_FILE
        if not meta_path.exists():
            raise ManifestInvalid(f"{meta_path} not found; not an engine data directory")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        engine = cls(
            dim=int(meta["dim"]),
            encoder_seed=int(meta.get("encoderSeed", 0)),
            media_root=meta.get("mediaRoot"),
        )
        engine.store = MetadataStore.load(root / STORE_FILE)
        engine.indexes = {}
        for name in meta.get("indexes", [DEFAULT_INDEX]):
            index = VectorIndex(engine.dim)
            raw = (root / VECTOR_DIR / f"{name}.f32").read_bytes()
            matrix = np.frombuffer(raw, dtype="<f4").reshape(-1, engine.dim)
            entries = []
            with (root / VECTOR_DIR / f"{name}.ids.jsonl").open(encoding="utf-8") as fh:
                for i, line in enumerate(fh):
                    obj = json.loads(line)
                    entries.append(
                        IndexEntry(obj["segmentId"], obj["videoId"], matrix[i])
                    )
            if len(entries) != matrix.shape[0]:
                raise ManifestInvalid(
                    f"index {name!r}: id count {len(entries)} != row count {matrix.shape[0]}"
                )
            index.add_entries(entries)
            engine.indexes[name] = index
        return engine

    def content_hash(self) -> str:
        """Order-sensitive digest of store contents plus index rows."""
        h = hashlib.sha256()
        for line in self.store.dump_lines():
            h.update(line.encode("utf-8"))
            h.update(b"\n")
        for name in sorted(self.indexes):
            h.update(name.encode("utf-8"))
            for sid, vid, vec in self.indexes[name].entries():
                h.update(sid.encode("utf-8"))
                h.update(vid.encode("utf-8"))
                h.update(np.asarray(vec, "<f4").tobytes())
        return h.hexdigest()

    def check_dim(self, dim: int) -> None:
        if dim != self.dim:
            raise DimensionMismatch(f"engine dim {self.dim}, got {dim}")
