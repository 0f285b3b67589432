"""Embedding backends and the shared input templates.

Texts are wrapped as ``passage: <body></s>`` or ``query: <body></s>``
before embedding; query bodies are first truncated to a fixed token
budget.  Two backends are provided: a deterministic hash embedder for
tests and offline experiments, and an HTTP client for a remote
embedding service.
"""

from __future__ import annotations

import enum
import hashlib
import time
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import DimensionMismatch, InvalidResponse, ServiceUnavailable, ZeroVector
from .tokenization import tokenize, truncate_to_tokens

PASSAGE_PREFIX = "passage: "
QUERY_PREFIX = "query: "
DEFAULT_TERMINATOR = "</s>"
DEFAULT_MAX_QUERY_TOKENS = 32
DEFAULT_DIM = 64
DEFAULT_HASH_SEED = 0x9E3779B97F4A7C15


class EmbedderKind(enum.Enum):
    PASSAGE = "passage"
    QUERY = "query"


class Embedder(Protocol):
    """Anything that maps texts to fixed-width vectors."""

    @property
    def dim(self) -> int: ...

    def embed(self, texts: Sequence[str], kind: EmbedderKind) -> np.ndarray: ...


def format_input(
    text: str,
    kind: EmbedderKind,
    *,
    max_query_tokens: int = DEFAULT_MAX_QUERY_TOKENS,
    terminator: str = DEFAULT_TERMINATOR,
) -> str:
    """Apply the passage/query template; query bodies are token-capped."""
    if kind is EmbedderKind.QUERY:
        return QUERY_PREFIX + truncate_to_tokens(text, max_query_tokens) + terminator
    return PASSAGE_PREFIX + text + terminator


def embedding_cost(token_count: int) -> int:
    """Modeled cost of one embedding pass: quadratic in sequence length."""
    return token_count * token_count


class HashEmbedder:
    """Deterministic embedder built from keyed hashes of token strings.

    Each token string maps to ``dim`` pseudo-random reals in [-1, 1]
    (blake2b keyed by a fixed 64-bit seed, counter mode); a text embeds
    as the L2-normalized sum of its token vectors, template prefix and
    terminator tokens included.  Instances are read-only after
    construction apart from an idempotent memo cache, so they are safe
    to share across threads.
    """

    def __init__(
        self,
        dim: int = DEFAULT_DIM,
        seed: int = DEFAULT_HASH_SEED,
        *,
        max_query_tokens: int = DEFAULT_MAX_QUERY_TOKENS,
        terminator: str = DEFAULT_TERMINATOR,
    ):
        if dim < 1:
            raise ValueError("dim must be positive")
        self._dim = dim
        self._key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
        self._max_query_tokens = max_query_tokens
        self._terminator = terminator
        self._cache: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self._dim

    def _token_texts(self, text: str, kind: EmbedderKind) -> list[str]:
        if kind is EmbedderKind.QUERY:
            body = truncate_to_tokens(text, self._max_query_tokens)
            prefix = QUERY_PREFIX
        else:
            body = text
            prefix = PASSAGE_PREFIX
            if not tokenize(body).tokens:
                raise ValueError("passage body has no tokens")
        texts = [t.text for t in tokenize(prefix + body).tokens]
        texts.append(self._terminator)
        return texts

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            raw = token.encode("utf-8")
            words: list[int] = []
            counter = 0
            while len(words) < self._dim:
                digest = hashlib.blake2b(
                    raw + counter.to_bytes(4, "little"), key=self._key, digest_size=64
                ).digest()
                words.extend(
                    int.from_bytes(digest[k : k + 8], "little") for k in range(0, 64, 8)
                )
                counter += 1
            vec = np.array(words[: self._dim], dtype=np.float64) / 2.0**63 - 1.0
            self._cache[token] = vec
        return vec

    def embed(self, texts: Sequence[str], kind: EmbedderKind) -> np.ndarray:
        out = np.empty((len(texts), self._dim), dtype=np.float32)
        for i, text in enumerate(texts):
            total = np.zeros(self._dim, dtype=np.float64)
            for token in self._token_texts(text, kind):
                total += self._token_vector(token)
            norm = float(np.linalg.norm(total))
            if norm == 0.0:
                raise ZeroVector(f"text embeds to the zero vector: {text!r}")
            out[i] = (total / norm).astype(np.float32)
        return out


class QuadraticCostEmbedder(HashEmbedder):
    """Hash embedder that burns work quadratic in the token count.

    Mirrors the cost profile of full self-attention, so wall-clock
    comparisons between blockwise and whole-document embedding are
    meaningful at desk scale.  Vectors are identical to HashEmbedder's.
    """

    def __init__(self, *args, passes: int = 6, **kwargs):
        super().__init__(*args, **kwargs)
        self._passes = passes
        self._sink = 0.0

    def embed(self, texts: Sequence[str], kind: EmbedderKind) -> np.ndarray:
        for text in texts:
            n = len(self._token_texts(text, kind))
            for _ in range(self._passes):
                self._sink = float(np.ones((n, n)).sum())
        return super().embed(texts, kind)


class ServiceEmbedder:
    """HTTP client for a remote embedding service.

    Sends already-formatted texts to ``POST {url}/embed`` and expects
    ``{"dim": int, "vectors": [[...], ...]}`` back.  Transport failures
    and 5xx responses are retried with exponential backoff; client
    errors and malformed payloads are not.
    """

    def __init__(
        self,
        url: str,
        dim: int,
        *,
        timeout: float = 30.0,
        attempts: int = 3,
        backoff: float = 0.2,
        session: requests.Session | None = None,
        max_query_tokens: int = DEFAULT_MAX_QUERY_TOKENS,
        terminator: str = DEFAULT_TERMINATOR,
    ):
        if dim < 1:
            raise ValueError("dim must be positive")
        self._url = url.rstrip("/")
        self._dim = dim
        self._timeout = timeout
        self._attempts = attempts
        self._backoff = backoff
        self._session = session or requests.Session()
        self._max_query_tokens = max_query_tokens
        self._terminator = terminator

    @property
    def dim(self) -> int:
        return self._dim

    def _format(self, text: str, kind: EmbedderKind) -> str:
        if kind is EmbedderKind.PASSAGE and not tokenize(text).tokens:
            raise ValueError("passage body has no tokens")
        return format_input(
            text,
            kind,
            max_query_tokens=self._max_query_tokens,
            terminator=self._terminator,
        )

    def _post(self, payload: dict) -> requests.Response:
        last_error: Exception | None = None
        for attempt in range(self._attempts):
            if attempt:
                time.sleep(self._backoff * 2 ** (attempt - 1))
            try:
                response = self._session.post(
                    self._url + "/embed", json=payload, timeout=self._timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = InvalidResponse(f"HTTP {response.status_code}")
                continue
            return response
        raise ServiceUnavailable(
            f"{self._url}/embed failed after {self._attempts} attempts: {last_error}"
        )

    def embed(self, texts: Sequence[str], kind: EmbedderKind) -> np.ndarray:
        if not texts:
            return np.empty((0, self._dim), dtype=np.float32)
        payload = {
            "texts": [self._format(t, kind) for t in texts],
            "kind": kind.value,
        }
        response = self._post(payload)
        if response.status_code != 200:
            raise InvalidResponse(
                f"HTTP {response.status_code} from service: {response.text[:200]}"
            )
        try:
            data = response.json()
        except ValueError as exc:
            raise InvalidResponse(f"non-JSON response: {exc}") from exc
        if not isinstance(data, dict) or "dim" not in data or "vectors" not in data:
            raise InvalidResponse("response missing 'dim' or 'vectors'")
        if data["dim"] != self._dim:
            raise DimensionMismatch(
                f"service dim {data['dim']} != configured dim {self._dim}"
            )
        vectors = data["vectors"]
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise InvalidResponse(
                f"expected {len(texts)} vectors, got "
                f"{len(vectors) if isinstance(vectors, list) else type(vectors).__name__}"
            )
        try:
            out = np.asarray(vectors, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise InvalidResponse(f"vectors not numeric: {exc}") from exc
        if out.ndim != 2 or out.shape[1] != self._dim:
            raise InvalidResponse(f"vector shape {out.shape} does not match dim")
        if not np.all(np.isfinite(out)):
            raise InvalidResponse("vectors contain non-finite values")
        return out.astype(np.float32)

    def health(self) -> dict:
        try:
            response = self._session.get(self._url + "/health", timeout=self._timeout)
        except requests.RequestException as exc:
            raise ServiceUnavailable(f"{self._url}/health unreachable: {exc}") from exc
        try:
            return response.json()
        except ValueError as exc:
            raise InvalidResponse(f"non-JSON health response: {exc}") from exc
