"""Tokenizer unit tests: splitting rules, offsets, and exact reconstruction."""

import hypothesis
import hypothesis.strategies as st
import pytest

from breps.tokenization import (
    Token,
    TokenKind,
    count_tokens,
    detokenize,
    tokenize,
    truncate_to_tokens,
)


def token_texts(text):
    return [t.text for t in tokenize(text).tokens]


def token_kinds(text):
    return [t.kind for t in tokenize(text).tokens]


class TestSplittingRules:
    def test_plain_words(self):
        assert token_texts("the quick fox") == ["the", "quick", "fox"]
        assert token_kinds("the quick fox") == [TokenKind.WORD] * 3

    def test_trailing_punctuation_detached(self):
        assert token_texts("end.") == ["end", "."]
        assert token_kinds("end.") == [TokenKind.WORD, TokenKind.PUNCT]

    def test_hello_world_token_count(self):
        assert count_tokens("Hello, world!") == 4
        assert token_texts("Hello, world!") == ["Hello", ",", "world", "!"]

    def test_leading_punctuation_detached(self):
        assert token_texts(":colon first") == [":", "colon", "first"]

    def test_multiple_trailing_marks_become_individual_tokens(self):
        assert token_texts("wait...") == ["wait", ".", ".", "."]

    def test_interior_punctuation_stays_inside_word(self):
        # Only leading/trailing marks are detached from Latin chunks.
        assert token_texts("pi is 3.14") == ["pi", "is", "3.14"]
        assert token_texts("don't") == ["don't"]

    def test_cjk_split_per_character(self):
        assert token_texts("你好。") == ["你", "好", "。"]
        assert token_kinds("你好。") == [
            TokenKind.WORD,
            TokenKind.WORD,
            TokenKind.PUNCT,
        ]

    def test_cjk_interior_punctuation_detached(self):
        assert token_texts("你好。世界") == ["你", "好", "。", "世", "界"]

    def test_mixed_cjk_latin_chunk(self):
        assert token_texts("abc你好def") == ["abc", "你", "好", "def"]

    def test_punctuation_only_chunk(self):
        assert token_texts("?!") == ["?", "!"]
        assert token_kinds("?!") == [TokenKind.PUNCT, TokenKind.PUNCT]

    def test_fullwidth_marks_are_punct(self):
        assert token_kinds("好，") == [TokenKind.WORD, TokenKind.PUNCT]

    def test_empty_and_whitespace_only(self):
        assert token_texts("") == []
        assert token_texts("  \t\n") == []


class TestOffsetsAndReconstruction:
    def test_offsets_slice_back_to_token_text(self):
        text = "Hi,  there... 你好。"
        for tok in tokenize(text).tokens:
            assert text[tok.start : tok.end] == tok.text

    def test_round_trip_examples(self):
        cases = [
            "",
            "   ",
            "a  b\tc\n",
            "Hello, world!",
            "你好。世界！",
            "mixed 你好 and English.",
            "\n\nleading and trailing\t\t",
            "..::!!",
        ]
        for text in cases:
            assert detokenize(tokenize(text)) == text

    def test_separator_metadata_shape(self):
        tt = tokenize("a b")
        assert len(tt.separators) == len(tt.tokens) + 1
        assert tt.separators == ("", " ", "")

    @hypothesis.given(st.text(max_size=200))
    def test_round_trip_property(self, text):
        assert detokenize(tokenize(text)) == text

    @hypothesis.given(
        st.text(
            alphabet=st.sampled_from(list("ab .,!?;:，。你好 \t\n")),
            max_size=120,
        )
    )
    def test_round_trip_punctuation_heavy(self, text):
        assert detokenize(tokenize(text)) == text

    def test_deterministic(self):
        text = "Same input, same tokens. 每次一样。"
        assert tokenize(text) == tokenize(text)


class TestTruncation:
    def test_truncate_keeps_exact_prefix(self):
        text = "one two three four five"
        assert truncate_to_tokens(text, 3) == "one two three"

    def test_truncate_counts_punct_tokens(self):
        assert truncate_to_tokens("a, b c", 2) == "a,"

    def test_truncate_noop_when_short(self):
        assert truncate_to_tokens("a b", 32) == "a b"

    def test_truncate_preserves_interior_separators(self):
        text = "a   b\tc d"
        assert truncate_to_tokens(text, 3) == "a   b\tc"

    def test_truncate_zero(self):
        assert truncate_to_tokens("a b", 0) == ""


class TestTokenType:
    def test_tokens_are_immutable(self):
        tok = tokenize("x").tokens[0]
        assert tok == Token("x", TokenKind.WORD, 0, 1)
        with pytest.raises(AttributeError):
            tok.text = "y"
