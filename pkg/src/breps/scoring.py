"""Query-document scoring: temperature-scaled block cosines, top-k aggregation.

A block scores ``cos(query, block) / temperature``; a document scores a
weighted sum of its best k block scores, weights paired in descending
order.  ``rerank`` applies this to a candidate list against a store.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import Embedder, EmbedderKind
from .errors import DimensionMismatch, EmptyScores, NoBlocks, ZeroVector
from .store import Store, StoredDocument

DEFAULT_TEMPERATURE = 0.01


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative aggregation weights, first weight pairs the best block."""

    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) < 1:
            raise ValueError("at least one weight required")
        for w in self.weights:
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"weights must be finite and nonnegative, got {w}")

    @classmethod
    def descending(cls, values: Sequence[float]) -> "WeightVector":
        values = tuple(float(v) for v in values)
        for a, b in zip(values, values[1:]):
            if a < b:
                raise ValueError(f"weights must be non-increasing, got {values}")
        return cls(values)

    @classmethod
    def average(cls, k: int) -> "WeightVector":
        if k < 1:
            raise ValueError("k must be positive")
        return cls((1.0 / k,) * k)

    @classmethod
    def relaxed(cls, values: Sequence[float]) -> "WeightVector":
        """Weights in any order (learned weights may violate descending)."""
        return cls(tuple(float(v) for v in values))

    @property
    def k(self) -> int:
        return len(self.weights)


DEFAULT_WEIGHTS = WeightVector.descending((0.5, 0.3, 0.2))


@dataclass(frozen=True)
class ScoredDocument:
    """One reranked candidate.

    ``top_block_indices`` are the ordinals of the selected blocks, best
    first (ties prefer the lower ordinal); ``block_scores`` are their
    scores in the same order.  ``in_store`` is False for candidates the
    store does not contain; those carry score -inf and empty blocks.
    """

    doc_id: str
    score: float
    top_block_indices: tuple[int, ...]
    block_scores: tuple[float, ...]
    in_store: bool = True


def block_score(
    query_vec: np.ndarray, block_vec: np.ndarray, temperature: float = DEFAULT_TEMPERATURE
) -> float:
    """Cosine similarity divided by the temperature."""
    q = np.asarray(query_vec, dtype=np.float64)
    b = np.asarray(block_vec, dtype=np.float64)
    if q.shape != b.shape:
        raise DimensionMismatch(f"query {q.shape} vs block {b.shape}")
    qn = float(np.linalg.norm(q))
    bn = float(np.linalg.norm(b))
    if qn == 0.0 or bn == 0.0:
        raise ZeroVector("cosine undefined for an all-zero vector")
    return float(np.dot(q, b) / (qn * bn) / temperature)


def aggregate(block_scores: Sequence[float], weights: WeightVector) -> float:
    """Weighted sum of the top ``min(k, len)`` scores, descending pairing.

    With fewer scores than weights, only the first weights apply; no
    renormalization happens.
    """
    if len(block_scores) == 0:
        raise EmptyScores("cannot aggregate zero block scores")
    top = sorted(block_scores, reverse=True)[: weights.k]
    total = 0.0
    for w, s in zip(weights.weights, top):
        total += w * s
    return total


def score_document(
    query_vec: np.ndarray,
    doc: StoredDocument,
    weights: WeightVector = DEFAULT_WEIGHTS,
    *,
    temperature: float = DEFAULT_TEMPERATURE,
    max_blocks: int | None = None,
) -> ScoredDocument:
    """Score one stored document; ``max_blocks`` restricts to the first blocks."""
    if max_blocks is not None and max_blocks < 1:
        raise ValueError("max_blocks must be positive")
    vectors = doc.block_vectors if max_blocks is None else doc.block_vectors[:max_blocks]
    n = vectors.shape[0]
    if n == 0:
        raise NoBlocks(doc.doc_id)
    scores = [block_score(query_vec, vectors[i], temperature) for i in range(n)]
    order = sorted(range(n), key=lambda i: (-scores[i], i))[: min(weights.k, n)]
    selected = tuple(scores[i] for i in order)
    total = 0.0
    for w, s in zip(weights.weights, selected):
        total += w * s
    return ScoredDocument(doc.doc_id, total, tuple(order), selected)


def rerank(
    query_text: str,
    candidates: Sequence[str],
    store: Store,
    embedder: Embedder,
    weights: WeightVector = DEFAULT_WEIGHTS,
    *,
    temperature: float = DEFAULT_TEMPERATURE,
    max_blocks: int | None = None,
) -> list[ScoredDocument]:
    """Order candidates by document score, descending.

    The query is embedded exactly once.  Ties break by doc_id
    ascending; zero-block documents sink below every scored document;
    candidates missing from the store come last, in input order, with
    ``in_store`` False.
    """
    if store.dim != embedder.dim:
        raise DimensionMismatch(f"store dim {store.dim} != embedder dim {embedder.dim}")
    query_vec = embedder.embed([query_text], EmbedderKind.QUERY)[0]
    scored: list[ScoredDocument] = []
    blockless: list[ScoredDocument] = []
    missing: list[ScoredDocument] = []
    for doc_id in candidates:
        doc = store.get(doc_id)
        if doc is None:
            missing.append(ScoredDocument(doc_id, float("-inf"), (), (), in_store=False))
        elif doc.n_blocks == 0:
            blockless.append(ScoredDocument(doc_id, float("-inf"), (), ()))
        else:
            scored.append(
                score_document(
                    query_vec, doc, weights, temperature=temperature, max_blocks=max_blocks
                )
            )
    scored.sort(key=lambda d: (-d.score, d.doc_id))
    blockless.sort(key=lambda d: d.doc_id)
    return scored + blockless + missing
