"""Split token sequences into short blocks at punctuation boundaries.

The dynamic-programming strategy maximizes the total weight of the
punctuation marks that end up immediately before a split, subject to a
hard per-block token cap; ties prefer fewer blocks, then earlier split
positions.  A fixed-length strategy is available for comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

from .tokenization import Token, TokenKind, tokenize

DEFAULT_PUNCTUATION_WEIGHTS: Mapping[str, float] = MappingProxyType(
    {
        ".": 3.0,
        "!": 3.0,
        "?": 3.0,
        "。": 3.0,  # 。
        "！": 3.0,  # ！
        "？": 3.0,  # ？
        ";": 2.0,
        ":": 2.0,
        "；": 2.0,  # ；
        "：": 2.0,  # ：
        ",": 1.0,
        "，": 1.0,  # ，
    }
)

DEFAULT_MAX_BLOCK_TOKENS = 63
DEFAULT_MAX_BLOCKS = 20

DYNAMIC = "dynamic"
FIXED = "fixed"


@dataclass(frozen=True)
class SegmentationConfig:
    """Strategy plus limits for :func:`segment`.

    ``max_block_tokens`` caps dynamic-programming blocks; the fixed
    strategy uses its own ``fixed_length`` and ignores punctuation.
    """

    strategy: str = DYNAMIC
    max_block_tokens: int = DEFAULT_MAX_BLOCK_TOKENS
    fixed_length: int | None = None
    punctuation_weights: Mapping[str, float] = field(
        default_factory=lambda: DEFAULT_PUNCTUATION_WEIGHTS
    )

    def __post_init__(self):
        if self.strategy not in (DYNAMIC, FIXED):
            raise ValueError(f"unknown segmentation strategy: {self.strategy!r}")
        if self.max_block_tokens < 1:
            raise ValueError("max_block_tokens must be positive")
        if self.strategy == FIXED and (self.fixed_length is None or self.fixed_length < 1):
            raise ValueError("fixed strategy requires a positive fixed_length")
        for mark, weight in self.punctuation_weights.items():
            if weight < 0:
                raise ValueError(f"negative weight for {mark!r}")


@dataclass(frozen=True)
class Block:
    """A contiguous token span; ``text`` is the exact source substring."""

    index: int
    tokens: tuple[Token, ...]
    text: str

    @property
    def token_count(self) -> int:
        return len(self.tokens)


def _dp_bounds(
    tokens: Sequence[Token], cap: int, weights: Mapping[str, float]
) -> list[tuple[int, int]]:
    n = len(tokens)
    gains = [0.0] * (n + 1)
    for j in range(1, n):
        tok = tokens[j - 1]
        if tok.kind is TokenKind.PUNCT:
            gains[j] = weights.get(tok.text, 0.0)
    # Suffix table: best achievable (score, block count) from position i,
    # with the smallest optimal next cut for earliest-split reconstruction.
    best_score = [0.0] * (n + 1)
    best_blocks = [0] * (n + 1)
    next_cut = [n] * (n + 1)
    for i in range(n - 1, -1, -1):
        top_score = -1.0
        top_blocks = n + 1
        top_j = n
        for j in range(i + 1, min(i + cap, n) + 1):
            gain = gains[j] if j < n else 0.0
            score = gain + best_score[j]
            blocks = 1 + best_blocks[j]
            if score > top_score or (score == top_score and blocks < top_blocks):
                top_score, top_blocks, top_j = score, blocks, j
        best_score[i], best_blocks[i], next_cut[i] = top_score, top_blocks, top_j
    bounds = []
    i = 0
    while i < n:
        j = next_cut[i]
        bounds.append((i, j))
        i = j
    return bounds


def _fixed_bounds(n: int, length: int) -> list[tuple[int, int]]:
    return [(i, min(i + length, n)) for i in range(0, n, length)]


def segment(text: str, config: SegmentationConfig | None = None) -> list[Block]:
    """Segment ``text`` into blocks; empty/whitespace input yields none.

    Blocks partition the token sequence in order, and each block's text
    is the exact source substring from its first to its last token.
    """
    config = config or SegmentationConfig()
    tokens = tokenize(text).tokens
    if not tokens:
        return []
    if config.strategy == FIXED:
        bounds = _fixed_bounds(len(tokens), config.fixed_length)
    else:
        bounds = _dp_bounds(tokens, config.max_block_tokens, config.punctuation_weights)
    blocks = []
    for index, (i, j) in enumerate(bounds):
        span = tokens[i:j]
        blocks.append(Block(index, tuple(span), text[span[0].start : span[-1].end]))
    return blocks


def truncate_blocks(blocks: Sequence[Block], max_blocks: int) -> list[Block]:
    """Keep the first ``max_blocks`` blocks (all of them if fewer)."""
    if max_blocks < 0:
        raise ValueError("max_blocks must be nonnegative")
    return list(blocks[:max_blocks])
