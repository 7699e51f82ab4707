"""Text embedding providers.

Two implementations share one interface: a deterministic token-hash
embedder used for offline runs and tests, and an HTTP client for real
embedding endpoints. Providers expose a `provider_id` so indexes can
refuse queries from a mismatched pipeline configuration.
"""

from __future__ import annotations

import os
import time
from typing import Protocol, Sequence

import numpy as np

from .errors import ProviderUnavailable
from .hashing import stable_hash64

__all__ = ["EmbeddingProvider", "TokenHashEmbedder", "HttpEmbeddingProvider"]

EMBED_API_KEY_VAR = "MCF_EMBED_API_KEY"
EMBED_BASE_URL_VAR = "MCF_EMBED_BASE_URL"


class EmbeddingProvider(Protocol):
    provider_id: str
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Embed a batch of texts into unit-norm float32 vectors (n, dim)."""
        ...


class TokenHashEmbedder:
    """Deterministic bag-of-tokens embedding.

    Each whitespace token is hashed into one of `dim` buckets with a
    stable 64-bit hash; bucket counts are accumulated and the vector is
    L2-normalized. Purely local, so offline runs and reruns are
    reproducible bit for bit.
    """

    def __init__(self, dim: int = 256):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.provider_id = f"token-hash-{dim}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in text.lower().split():
                out[row, stable_hash64(token) % self.dim] += 1.0
            norm = np.linalg.norm(out[row])
            if norm > 0:
                out[row] /= norm
        return out.astype(np.float32)


class HttpEmbeddingProvider:
    """Client for an embeddings endpoint speaking the common
    `POST {base}/embeddings {model, input} -> {data: [{embedding}]}` shape.

    The API key is read from the environment on each call and never
    stored on the instance, so nothing secret can leak into manifests
    or audit records.
    """

    def __init__(
        self,
        model: str,
        dim: int,
        base_url: str | None = None,
        timeout: float = 30.0,
        retries: int = 2,
        backoff: float = 0.5,
    ):
        self.model = model
        self.dim = dim
        self.base_url = base_url or os.environ.get(EMBED_BASE_URL_VAR, "")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.provider_id = f"http-embed:{model}:{dim}"
        if not self.base_url:
            raise ProviderUnavailable(
                f"no embedding base URL configured (set {EMBED_BASE_URL_VAR})"
            )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        import httpx

        key = os.environ.get(EMBED_API_KEY_VAR, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        payload = {"model": self.model, "input": list(texts)}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = httpx.post(
                    self.base_url.rstrip("/") + "/embeddings",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                data = resp.json()["data"]
                vectors = np.asarray([d["embedding"] for d in data], dtype=np.float64)
                if vectors.shape != (len(texts), self.dim):
                    raise ProviderUnavailable(
                        f"endpoint returned shape {vectors.shape}, "
                        f"expected ({len(texts)}, {self.dim})"
                    )
                norms = np.linalg.norm(vectors, axis=1, keepdims=True)
                norms[norms == 0] = 1.0
                return (vectors / norms).astype(np.float32)
            except ProviderUnavailable:
                raise
            except Exception as exc:  # transport or payload shape problems
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
        raise ProviderUnavailable(f"embedding endpoint failed: {last_error}")
