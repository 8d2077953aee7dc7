"""Embedding clients: HTTP sidecar access and a deterministic offline mock.

Vectors are always returned L2-normalized as float64 arrays. The mock
derives each vector from a PCG64 stream seeded with sha256(kind, body), so
it is bit-deterministic across processes and platforms.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np
import requests

from .errors import EmbedServiceError

KIND_CODE_DIFF = "code_diff"
KIND_TEXT = "text"


class EmbedClient(Protocol):
    def embed(self, kind: str, body: str) -> np.ndarray: ...

    def model_id(self, kind: str) -> str: ...


def normalize(vector: np.ndarray) -> np.ndarray:
    vec = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmbedServiceError("zero-norm embedding")
    return vec / norm


class HttpEmbedClient:
    """Client for the embed sidecar: POST {base}/embed {kind, body}."""

    def __init__(self, base_url: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()
        self._model_ids: dict[str, str] = {}

    def embed(self, kind: str, body: str) -> np.ndarray:
        try:
            resp = self._session.post(
                f"{self.base_url}/embed",
                json={"kind": kind, "body": body},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise EmbedServiceError(str(exc)) from exc
        if resp.status_code != 200:
            raise EmbedServiceError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
            vector = np.asarray(data["vector"], dtype=np.float64)
            self._model_ids[kind] = data.get("model_id", "unknown")
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbedServiceError(f"bad embed response: {exc}") from exc
        return normalize(vector)

    def model_id(self, kind: str) -> str:
        return self._model_ids.get(kind, "unknown")


class HashEmbedClient:
    """Offline mock embedder with the same surface as the HTTP client."""

    def __init__(self, dim: int = 64):
        self.dim = dim

    def embed(self, kind: str, body: str) -> np.ndarray:
        digest = hashlib.sha256(f"{kind}\x00{body}".encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.default_rng(seed)
        return normalize(rng.standard_normal(self.dim))

    def model_id(self, kind: str) -> str:
        return f"mock-hash-{self.dim}"
