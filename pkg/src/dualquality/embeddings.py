"""Text embedding backends.

The trainable classifier needs only two things from a backend: a fixed
vector dimension and a deterministic `embed`. Contrastive fine-tuning is an
interface obligation (`finetune`) that real sentence-encoder adapters
implement; the in-package `HashingEmbedding` is a deterministic stand-in
used by tests, simulations and demos.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ArgumentError

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


@runtime_checkable
class EmbeddingBackend(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...

    def descriptor(self) -> dict: ...


class HashingEmbedding:
    """Signed token-hashing bag-of-words, L2-normalized.

    Deterministic across processes: buckets and signs come from keyed
    blake2b digests, not Python's randomized hash(). `finetune` returns the
    backend unchanged; the hashing space has no trainable state.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 2:
            raise ArgumentError("embedding dim must be >= 2")
        self.dim = dim
        self.seed = seed
        self._key = str(seed).encode("utf-8")
        self._cache: dict[str, tuple[int, int]] = {}

    def _slot(self, token: str) -> tuple[int, int]:
        slot = self._cache.get(token)
        if slot is None:
            digest = hashlib.blake2b(token.encode("utf-8"), key=self._key, digest_size=8).digest()
            value = int.from_bytes(digest, "big")
            slot = (value % self.dim, 1 if (value >> 63) & 1 else -1)
            self._cache[token] = slot
        return slot

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        matrix = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.lower()):
                bucket, sign = self._slot(token)
                matrix[row, bucket] += sign
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        np.divide(matrix, norms, out=matrix, where=norms > 0)
        return matrix

    def finetune(self, pairs, config=None) -> "HashingEmbedding":
        return self

    def descriptor(self) -> dict:
        return {"kind": "hashing", "dim": self.dim, "seed": self.seed}


def backend_from_descriptor(descriptor: dict) -> EmbeddingBackend:
    """Reconstruct a backend from its snapshot descriptor."""
    kind = descriptor.get("kind")
    if kind == "hashing":
        return HashingEmbedding(dim=int(descriptor.get("dim", 256)),
                                seed=int(descriptor.get("seed", 0)))
    raise ArgumentError(f"unknown embedding backend kind: {kind!r}")
