"""Text-to-vector encoding seam.

The engine ingests precomputed keyframe embeddings and never runs a
neural model itself. Free-text queries still need a vector in the same
space, so the encoder is pluggable: production deployments wrap whatever
model produced the keyframe vectors, while tests and synthetic fixtures
use the deterministic hashed-token encoder below. The fixture generator
derives keyframe vectors from the same encoder, which keeps free-text
search meaningful end to end without any model dependency.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

from .vectors import normalize


class TextEncoder(Protocol):
    dim: int

    def encode(self, text: str) -> np.ndarray: ...


class HashedTokenEncoder:
    """Deterministic bag-of-tokens embedding.

    Each lowercase token maps to a pseudo-random unit direction seeded by
    its SHA-256 digest; a text embeds as the normalized sum of its token
    directions. Distinct tokens are near-orthogonal in high dimensions,
    which is all the structure the engine needs.
    """

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{token.lower()}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return normalize(rng.standard_normal(self.dim))

    def encode(self, text: str) -> np.ndarray:
        tokens = [t for t in text.lower().split() if t]
        if not tokens:
            tokens = ["<empty>"]
        acc = np.zeros(self.dim, dtype=np.float64)
        for t in tokens:
            acc += self.token_vector(t)
        return normalize(acc)
