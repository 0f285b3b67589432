"""Deterministic rule-based tokenizer with exact round-trip reconstruction.

Whitespace-delimited chunks become Word tokens; characters from a fixed
punctuation alphabet are detached from chunk edges as Punct tokens; CJK
text is split per character.  All inter-token separators are recorded,
so the original string can be rebuilt byte for byte.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

# ASCII sentence/clause marks plus their fullwidth CJK counterparts.
PUNCTUATION_CHARS = frozenset(".!?;:,") | frozenset("。！？；：，")

# Unified ideographs, extension A, and the compatibility block.
_CJK_RANGES = ((0x4E00, 0x9FFF), (0x3400, 0x4DBF), (0xF900, 0xFAFF))

_CHUNK = re.compile(r"\S+")


class TokenKind(enum.Enum):
    WORD = "word"
    PUNCT = "punct"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    start: int
    end: int


@dataclass(frozen=True)
class TokenizedText:
    """Tokens plus the separator strings between them.

    ``separators`` has one more element than ``tokens``: the text before
    the first token, between each adjacent pair, and after the last.
    """

    tokens: tuple[Token, ...]
    separators: tuple[str, ...]


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def _emit(out: list[Token], text: str, kind: TokenKind, start: int) -> None:
    out.append(Token(text, kind, start, start + len(text)))


def _split_chunk(chunk: str, base: int, out: list[Token]) -> None:
    lo, hi = 0, len(chunk)
    while lo < hi and chunk[lo] in PUNCTUATION_CHARS:
        _emit(out, chunk[lo], TokenKind.PUNCT, base + lo)
        lo += 1
    mid_hi = hi
    while mid_hi > lo and chunk[mid_hi - 1] in PUNCTUATION_CHARS:
        mid_hi -= 1
    middle = chunk[lo:mid_hi]
    if any(_is_cjk(ch) for ch in middle):
        run_start = None
        for i, ch in enumerate(middle):
            if _is_cjk(ch) or ch in PUNCTUATION_CHARS:
                if run_start is not None:
                    _emit(out, middle[run_start:i], TokenKind.WORD, base + lo + run_start)
                    run_start = None
                kind = TokenKind.PUNCT if ch in PUNCTUATION_CHARS else TokenKind.WORD
                _emit(out, ch, kind, base + lo + i)
            elif run_start is None:
                run_start = i
        if run_start is not None:
            _emit(out, middle[run_start:], TokenKind.WORD, base + lo + run_start)
    elif middle:
        _emit(out, middle, TokenKind.WORD, base + lo)
    for i in range(mid_hi, hi):
        _emit(out, chunk[i], TokenKind.PUNCT, base + i)


def tokenize(text: str) -> TokenizedText:
    """Split ``text`` into Word/Punct tokens, recording separators."""
    tokens: list[Token] = []
    for match in _CHUNK.finditer(text):
        _split_chunk(match.group(), match.start(), tokens)
    separators = []
    prev_end = 0
    for tok in tokens:
        separators.append(text[prev_end : tok.start])
        prev_end = tok.end
    separators.append(text[prev_end:])
    return TokenizedText(tuple(tokens), tuple(separators))


def count_tokens(text: str) -> int:
    return len(tokenize(text).tokens)


def detokenize(tokenized: TokenizedText) -> str:
    """Rebuild the source string from tokens and separators."""
    parts = [tokenized.separators[0]]
    for tok, sep in zip(tokenized.tokens, tokenized.separators[1:]):
        parts.append(tok.text)
        parts.append(sep)
    return "".join(parts)


def truncate_to_tokens(text: str, max_tokens: int) -> str:
    """Return the exact source prefix covering the first ``max_tokens`` tokens."""
    if max_tokens <= 0:
        return ""
    tokens = tokenize(text).tokens
    if len(tokens) <= max_tokens:
        return text
    return text[: tokens[max_tokens - 1].end]
