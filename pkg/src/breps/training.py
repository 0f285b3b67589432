"""Pairwise training of a linear projection head over frozen embeddings.

A triplet (query, positive doc, negative doc) is scored through the
head: every raw vector is projected, blocks are scored by
temperature-scaled cosine, and each document aggregates its top-k
scores.  Hinge or RankNet loss on the two document scores drives plain
SGD with gradient accumulation; gradients are analytic, with the top-k
selection held fixed during differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embedding import Embedder, EmbedderKind
from .errors import (
    BadMagic,
    InvalidTriplet,
    MissingDocument,
    NoBlocks,
    NonFiniteLoss,
    TruncatedFile,
    ZeroVector,
)
from .scoring import DEFAULT_TEMPERATURE, DEFAULT_WEIGHTS, WeightVector

HEAD_MAGIC = b"BREPSPJ1"

HINGE = "hinge"
RANKNET = "ranknet"


@dataclass(frozen=True)
class TrainingTriplet:
    query: str
    positive_doc_id: str
    negative_doc_id: str


@dataclass(frozen=True)
class TrainConfig:
    loss: str = HINGE
    margin: float = 10.0
    sigma: float = 1.0
    learning_rate: float = 5e-5
    steps: int = 100
    accumulation: int = 4
    temperature: float = DEFAULT_TEMPERATURE
    learn_weights: bool = False
    init_noise: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.loss not in (HINGE, RANKNET):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.accumulation < 1:
            raise ValueError("accumulation must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


class ProjectionHead:
    """Linear map applied to raw embeddings before scoring."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("head matrix must be 2-D")
        self.matrix = matrix

    @property
    def dim_in(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim_out(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def identity(cls, dim: int, *, noise: float = 1e-3, seed: int = 0) -> "ProjectionHead":
        """Identity matrix plus small Gaussian noise (the training init)."""
        matrix = np.eye(dim)
        if noise:
            matrix = matrix + noise * np.random.default_rng(seed).standard_normal((dim, dim))
        return cls(matrix)

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.matrix

    def save(self, path: str | Path, weights: Sequence[float] | None = None) -> None:
        """Serialize as magic, u32 dims, row-major f32 matrix, optional weights."""
        parts = [
            HEAD_MAGIC,
            np.array([self.dim_in, self.dim_out], dtype="<u4").tobytes(),
            np.ascontiguousarray(self.matrix, dtype="<f4").tobytes(),
        ]
        if weights is not None:
            parts.append(np.array([len(weights)], dtype="<u4").tobytes())
            parts.append(np.asarray(weights, dtype="<f4").tobytes())
        Path(path).write_bytes(b"".join(parts))

    @classmethod
    def load(cls, path: str | Path) -> tuple["ProjectionHead", tuple[float, ...] | None]:
        raw = Path(path).read_bytes()
        if len(raw) < 16:
            raise TruncatedFile(f"{path}: too short for a head file")
        if raw[:8] != HEAD_MAGIC:
            raise BadMagic(f"{path}: magic {raw[:8]!r}")
        dim_in, dim_out = np.frombuffer(raw, dtype="<u4", count=2, offset=8)
        pos = 16
        need = int(dim_in) * int(dim_out) * 4
        if len(raw) < pos + need:
            raise TruncatedFile(f"{path}: EOF inside matrix")
        matrix = (
            np.frombuffer(raw, dtype="<f4", count=int(dim_in) * int(dim_out), offset=pos)
            .reshape(int(dim_in), int(dim_out))
            .astype(np.float64)
        )
        pos += need
        weights: tuple[float, ...] | None = None
        if pos < len(raw):
            if len(raw) < pos + 4:
                raise TruncatedFile(f"{path}: EOF in weight count")
            (count,) = np.frombuffer(raw, dtype="<u4", count=1, offset=pos)
            pos += 4
            if len(raw) != pos + int(count) * 4:
                raise TruncatedFile(f"{path}: weight section size mismatch")
            weights = tuple(
                float(w) for w in np.frombuffer(raw, dtype="<f4", count=int(count), offset=pos)
            )
        return cls(matrix), weights


def hinge_loss(s_pos: float, s_neg: float, margin: float = 10.0) -> float:
    return max(0.0, margin - s_pos + s_neg)


def ranknet_loss(s_pos: float, s_neg: float, sigma: float = 1.0) -> float:
    x = sigma * (s_pos - s_neg)
    if x >= 0:
        return math.log1p(math.exp(-x))
    return -x + math.log1p(math.exp(x))


def _loss_alphas(config: TrainConfig, s_pos: float, s_neg: float) -> tuple[float, float]:
    """Derivatives of the loss w.r.t. (s_pos, s_neg); 0 at the hinge kink."""
    if config.loss == HINGE:
        if config.margin - s_pos + s_neg > 0:
            return -1.0, 1.0
        return 0.0, 0.0
    x = config.sigma * (s_pos - s_neg)
    if x >= 0:
        e = math.exp(-x)
        slope = e / (1.0 + e)
    else:
        slope = 1.0 / (1.0 + math.exp(x))
    return -config.sigma * slope, config.sigma * slope


@dataclass(frozen=True)
class DocSide:
    doc_id: str
    raw_blocks: np.ndarray  # (n_blocks, dim_in) float64
    block_scores: tuple[float, ...]
    selected: tuple[int, ...]
    selected_scores: tuple[float, ...]


@dataclass(frozen=True)
class TripletState:
    """Forward-pass record, sufficient to evaluate the analytic gradient."""

    triplet: TrainingTriplet
    query_vec: np.ndarray  # (dim_in,) float64
    pos: DocSide
    neg: DocSide
    s_pos: float
    s_neg: float
    loss: float

    @property
    def pos_block_scores(self) -> tuple[float, ...]:
        return self.pos.block_scores

    @property
    def neg_block_scores(self) -> tuple[float, ...]:
        return self.neg.block_scores


def _score_side(
    doc_id: str,
    raw_blocks: np.ndarray,
    query_raw: np.ndarray,
    matrix: np.ndarray,
    weights: WeightVector,
    temperature: float,
) -> tuple[DocSide, float]:
    u = query_raw @ matrix
    projected = raw_blocks @ matrix
    u_norm = float(np.linalg.norm(u))
    block_norms = np.linalg.norm(projected, axis=1)
    if u_norm == 0.0 or np.any(block_norms == 0.0):
        raise ZeroVector(f"projection collapsed a vector to zero for {doc_id}")
    scores = (projected @ u) / (block_norms * u_norm) / temperature
    scores = [float(s) for s in scores]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    selected = tuple(order[: min(weights.k, len(scores))])
    selected_scores = tuple(scores[i] for i in selected)
    total = 0.0
    for w, s in zip(weights.weights, selected_scores):
        total += w * s
    side = DocSide(doc_id, raw_blocks, tuple(scores), selected, selected_scores)
    return side, total


def triplet_forward(
    triplet: TrainingTriplet,
    head: ProjectionHead,
    store,
    embedder: Embedder,
    weights: WeightVector,
    config: TrainConfig,
    *,
    query_cache: dict | None = None,
    doc_cache: dict | None = None,
) -> TripletState:
    """Score one triplet through the head and evaluate the configured loss."""
    if triplet.positive_doc_id == triplet.negative_doc_id:
        raise InvalidTriplet(f"positive == negative: {triplet.positive_doc_id!r}")

    def query_vector(text: str) -> np.ndarray:
        if query_cache is not None and text in query_cache:
            return query_cache[text]
        vec = embedder.embed([text], EmbedderKind.QUERY)[0].astype(np.float64)
        if query_cache is not None:
            query_cache[text] = vec
        return vec

    def doc_blocks(doc_id: str) -> np.ndarray:
        if doc_cache is not None and doc_id in doc_cache:
            return doc_cache[doc_id]
        doc = store.get(doc_id)
        if doc is None:
            raise MissingDocument(doc_id)
        if doc.n_blocks == 0:
            raise NoBlocks(doc_id)
        blocks = doc.block_vectors.astype(np.float64)
        if doc_cache is not None:
            doc_cache[doc_id] = blocks
        return blocks

    query_raw = query_vector(triplet.query)
    pos, s_pos = _score_side(
        triplet.positive_doc_id,
        doc_blocks(triplet.positive_doc_id),
        query_raw,
        head.matrix,
        weights,
        config.temperature,
    )
    neg, s_neg = _score_side(
        triplet.negative_doc_id,
        doc_blocks(triplet.negative_doc_id),
        query_raw,
        head.matrix,
        weights,
        config.temperature,
    )
    if config.loss == HINGE:
        loss = hinge_loss(s_pos, s_neg, margin=config.margin)
    else:
        loss = ranknet_loss(s_pos, s_neg, sigma=config.sigma)
    return TripletState(triplet, query_raw, pos, neg, s_pos, s_neg, loss)


def gradient(
    state: TripletState,
    head: ProjectionHead,
    weights: WeightVector,
    config: TrainConfig,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Analytic d(loss)/d(matrix), and d(loss)/d(weights) when learning them.

    The block selection is treated as fixed, so the gradient is valid
    away from selection ties and the hinge kink.
    """
    matrix = head.matrix
    grad_matrix = np.zeros_like(matrix)
    grad_weights = np.zeros(weights.k) if config.learn_weights else None
    alpha_pos, alpha_neg = _loss_alphas(config, state.s_pos, state.s_neg)
    for side, alpha in ((state.pos, alpha_pos), (state.neg, alpha_neg)):
        if alpha == 0.0:
            continue
        q = state.query_vec
        u = q @ matrix
        u_norm = float(np.linalg.norm(u))
        u_hat = u / u_norm
        for rank, ordinal in enumerate(side.selected):
            if grad_weights is not None:
                grad_weights[rank] += alpha * side.selected_scores[rank]
            w = weights.weights[rank]
            scale = alpha * w / config.temperature
            if scale == 0.0:
                continue
            b = side.raw_blocks[ordinal]
            v = b @ matrix
            v_norm = float(np.linalg.norm(v))
            v_hat = v / v_norm
            cos = float(u_hat @ v_hat)
            dcos_du = (v_hat - cos * u_hat) / u_norm
            dcos_dv = (u_hat - cos * v_hat) / v_norm
            grad_matrix += scale * (np.outer(q, dcos_du) + np.outer(b, dcos_dv))
    return grad_matrix, grad_weights


@dataclass
class TrainResult:
    head: ProjectionHead
    weights: WeightVector
    losses: list[float] = field(default_factory=list)


def train(
    triplets: Sequence[TrainingTriplet],
    store,
    embedder: Embedder,
    *,
    config: TrainConfig,
    weights: WeightVector = DEFAULT_WEIGHTS,
    head: ProjectionHead | None = None,
) -> TrainResult:
    """SGD over the triplet list (cycled in order) with accumulation.

    Deterministic for a given config, head init seed, and triplet
    order.  Learned weights are clamped to stay nonnegative; the
    descending constraint is not enforced during learning.
    """
    if not triplets:
        raise ValueError("no training triplets")
    if head is None:
        head = ProjectionHead.identity(store.dim, noise=config.init_noise, seed=config.seed)
    matrix = head.matrix.astype(np.float64, copy=True)
    learned = np.asarray(weights.weights, dtype=np.float64)
    losses: list[float] = []
    acc_matrix = np.zeros_like(matrix)
    acc_weights = np.zeros_like(learned)
    window = 0
    query_cache: dict = {}
    doc_cache: dict = {}
    for step in range(config.steps):
        triplet = triplets[step % len(triplets)]
        current_head = ProjectionHead(matrix)
        current_weights = WeightVector.relaxed(tuple(float(w) for w in learned))
        state = triplet_forward(
            triplet,
            current_head,
            store,
            embedder,
            current_weights,
            config,
            query_cache=query_cache,
            doc_cache=doc_cache,
        )
        if not math.isfinite(state.loss):
            raise NonFiniteLoss(
                f"step {step}: loss {state.loss} on triplet "
                f"({triplet.query!r}, {triplet.positive_doc_id}, {triplet.negative_doc_id})"
            )
        losses.append(state.loss)
        grad_matrix, grad_weights = gradient(state, current_head, current_weights, config)
        if not np.all(np.isfinite(grad_matrix)):
            raise NonFiniteLoss(f"step {step}: non-finite head gradient")
        acc_matrix += grad_matrix
        if grad_weights is not None:
            acc_weights += grad_weights
        window += 1
        if window == config.accumulation or step == config.steps - 1:
            matrix = matrix - config.learning_rate * acc_matrix / window
            if config.learn_weights:
                learned = np.clip(
                    learned - config.learning_rate * acc_weights / window, 0.0, None
                )
            acc_matrix[...] = 0.0
            acc_weights[...] = 0.0
            window = 0
    final_weights = WeightVector.relaxed(tuple(float(w) for w in learned))
    return TrainResult(ProjectionHead(matrix), final_weights, losses)
