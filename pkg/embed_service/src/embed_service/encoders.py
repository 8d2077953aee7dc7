"""Embedding backends.

Two encoder families share one interface: the dependency-free ``hash``
backend (feature-hashed character n-grams, deterministic, good enough for
offline similarity ordering) and the ``sentence-transformers`` backend that
loads a pretrained code-change encoder and a pretrained sentence encoder.
Every encoder returns an L2-normalized float64 vector.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np


class Encoder(Protocol):
    model_id: str
    dim: int

    def encode(self, body: str) -> np.ndarray: ...


def normalize(vector: np.ndarray) -> np.ndarray:
    vec = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec = np.zeros_like(vec)
        vec[0] = 1.0
        return vec
    return vec / norm


class NgramHashEncoder:
    """Signed feature hashing of character n-grams.

    Texts sharing n-grams land in the same buckets, so lexically similar
    inputs get higher cosine similarity than unrelated ones; hashing keyed
    on ``salt`` keeps the diff and text spaces distinct.
    """

    def __init__(self, salt: str, dim: int = 256, ngram: int = 3):
        self.salt = salt
        self.dim = dim
        self.ngram = ngram
        self.model_id = f"builtin-ngram-{salt}-{dim}"

    def encode(self, body: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        data = body if len(body) >= self.ngram else body + " " * self.ngram
        for i in range(len(data) - self.ngram + 1):
            gram = data[i : i + self.ngram]
            digest = hashlib.blake2b(
                f"{self.salt}\x00{gram}".encode("utf-8"), digest_size=8
            ).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] & 1 else -1.0
            vec[bucket] += sign
        return normalize(vec)


class SentenceTransformerEncoder:
    """Pretrained-model backend; chunks past the encoder window are
    mean-pooled. Imported lazily so the default deployment stays light."""

    def __init__(self, model_id: str, window_chars: int = 4096):
        from sentence_transformers import SentenceTransformer

        self.model_id = model_id
        self.window_chars = window_chars
        self._model = SentenceTransformer(model_id)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, body: str) -> np.ndarray:
        chunks = [
            body[i : i + self.window_chars]
            for i in range(0, len(body), self.window_chars)
        ] or [body]
        vectors = self._model.encode(chunks, normalize_embeddings=True)
        pooled = np.asarray(vectors, dtype=np.float64).mean(axis=0)
        return normalize(pooled)


DEFAULT_DIFF_MODEL = "microsoft/codebert-base"
DEFAULT_TEXT_MODEL = "sentence-transformers/all-mpnet-base-v2"


def build_encoders(
    backend: str,
    diff_model: str | None = None,
    text_model: str | None = None,
) -> dict[str, Encoder]:
    """Encoders keyed by request kind (``code_diff`` and ``text``)."""
    if backend == "hash":
        return {
            "code_diff": NgramHashEncoder(salt="code"),
            "text": NgramHashEncoder(salt="text"),
        }
    if backend == "sentence-transformers":
        return {
            "code_diff": SentenceTransformerEncoder(diff_model or DEFAULT_DIFF_MODEL),
            "text": SentenceTransformerEncoder(text_model or DEFAULT_TEXT_MODEL),
        }
    raise ValueError(f"unknown embed backend {backend!r}")
