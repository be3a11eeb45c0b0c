"""Vocabulary, tokenization, assembly, and decode round trips."""

import numpy as np
import pytest

from dynapre.corpus import generate_corpus, render_testcase_prompt
from dynapre.tokenizer import (
    BOS,
    ENCODER_ONLY,
    EOS,
    SEP,
    SPECIAL_TOKENS,
    UNK,
    AssemblyError,
    UnknownId,
    Vocab,
    assemble,
    build_vocab,
    decode,
    tokenize,
)


class TestTokenize:
    def test_code_split(self):
        assert tokenize("x = 1 ;") == ["x", "=", "1", ";"]

    def test_punctuation_single_chars(self):
        assert tokenize("print(a+b);") == ["print", "(", "a", "+", "b", ")", ";"]

    def test_two_char_operators_split(self):
        assert tokenize("a <= b") == ["a", "<", "=", "b"]

    def test_large_literal_becomes_surrogate(self):
        assert tokenize("print(12345)") == ["print", "(", "<NUM>", ")"]

    def test_threshold_literal_kept(self):
        assert tokenize("x = 999 ;") == ["x", "=", "999", ";"]
        assert tokenize("x = 1000 ;") == ["x", "=", "<NUM>", ";"]

    def test_special_literal_matched_atomically(self):
        assert tokenize("5<SEP>Input is: 3") == ["5", "<SEP>", "Input", "is:", "3"]

    def test_negative_number_splits_sign(self):
        assert tokenize("-7") == ["-", "7"]
        assert tokenize("-4000") == ["-", "<NUM>"]


class TestBuildVocab:
    def test_contains_corpus_tokens_and_specials(self):
        vocab = build_vocab(["x = 1 ;"])
        for tok in ["x", "=", "1", ";", *SPECIAL_TOKENS, "<NUM>"]:
            assert tok in vocab.token_to_id

    def test_special_ids_fixed(self):
        vocab = build_vocab(["x = 1 ;"])
        for i, tok in enumerate(SPECIAL_TOKENS):
            assert vocab.token_to_id[tok] == i

    def test_ids_dense(self):
        vocab = build_vocab(["a b c a b a"])
        assert sorted(vocab.token_to_id.values()) == list(range(vocab.size))

    def test_frequency_then_lexicographic_order(self):
        vocab = build_vocab(["b a a c c c"])
        first = len(SPECIAL_TOKENS)
        assert vocab.id_to_token[first] == "c"  # freq 3
        assert vocab.id_to_token[first + 1] == "a"  # freq 2
        # freq-1 tokens: "b" then the always-present zero-count "<NUM>"
        assert vocab.id_to_token[first + 2] == "b"
        assert vocab.id_to_token[first + 3] == "<NUM>"

    def test_deterministic(self):
        texts = ["x = 1 ;", "y = x + 2 ;"]
        assert build_vocab(texts) == build_vocab(texts)

    def test_unseen_token_maps_to_unk(self):
        vocab = build_vocab(["x = 1 ;"])
        assert vocab.encode("zebra") == [UNK]

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            build_vocab([])

    def test_save_load_round_trip(self, tmp_path):
        vocab = build_vocab(["x = 1 ;", "while ( x < 3 ) { x = x + 1 ; }"])
        path = tmp_path / "vocab.json"
        vocab.save(path)
        loaded = Vocab.load(path)
        assert loaded == vocab
        assert loaded.content_hash() == vocab.content_hash()


class TestAssemble:
    @pytest.fixture()
    def vocab(self):
        return build_vocab(["x = 1 ;", "Input is: 2 3 ; Output is: 5"])

    def test_bert_style_layout(self, vocab):
        out = assemble("x = 1 ;", "", vocab, mode="bert-style", max_len=16, code_budget=8)
        x, eq, one, semi = vocab.encode("x = 1 ;")
        assert out.ids.tolist() == [BOS, x, eq, one, semi, SEP, EOS]

    def test_unix_style_prefix(self, vocab):
        out = assemble("x = 1 ;", "", vocab, mode="unix-style", max_len=16, code_budget=8)
        x, eq, one, semi = vocab.encode("x = 1 ;")
        assert out.ids.tolist() == [BOS, ENCODER_ONLY, SEP, x, eq, one, semi, SEP, EOS]

    def test_code_truncated_to_budget(self, vocab):
        code = " ".join(["x"] * 500)
        out = assemble(code, "", vocab, max_len=200, code_budget=160)
        start, end = out.code_span
        assert end - start == 160

    def test_length_never_exceeds_max_len(self, vocab):
        code = " ".join(["x"] * 300)
        prompt = " ".join(["5"] * 300)
        for max_len in (24, 64, 128):
            out = assemble(code, prompt, vocab, max_len=max_len, code_budget=16)
            assert len(out) <= max_len

    def test_testcase_span_covers_prompt(self, vocab):
        out = assemble("x = 1 ;", "Input is: 2 3 ; Output is: 5", vocab, max_len=64, code_budget=16)
        start, end = out.testcase_span
        assert decode(out.ids[start:end], vocab).startswith("Input is:")

    def test_maskable_excludes_specials_and_prefix(self, vocab):
        out = assemble("x = 1 ;", "Input is: 2 3 ; Output is: 5", vocab, max_len=64, code_budget=16)
        specials = set(range(len(SPECIAL_TOKENS)))
        for pos in range(len(out)):
            in_span = (
                out.code_span[0] <= pos < out.code_span[1]
                or out.testcase_span[0] <= pos < out.testcase_span[1]
            )
            expected = in_span and int(out.ids[pos]) not in specials
            assert out.maskable[pos] == expected

    def test_sep_inside_prompt_not_maskable(self, vocab):
        prompt = "Input is: 2 ; Output is: 5<SEP>Input is: 3 ; Output is: 5"
        out = assemble("x = 1 ;", prompt, vocab, max_len=64, code_budget=16)
        sep_positions = [i for i in range(*out.testcase_span) if out.ids[i] == SEP]
        assert sep_positions
        assert not any(out.maskable[i] for i in sep_positions)

    def test_empty_code_rejected(self, vocab):
        with pytest.raises(AssemblyError):
            assemble("", "prompt", vocab, max_len=32, code_budget=8)

    def test_budget_precondition(self, vocab):
        with pytest.raises(ValueError):
            assemble("x", "", vocab, max_len=10, code_budget=8)


class TestDecode:
    def test_round_trip_simple(self):
        vocab = build_vocab(["x = 1 ;"])
        assert decode(vocab.encode("x = 1 ;"), vocab) == "x = 1 ;"

    def test_unknown_id_raises(self):
        vocab = build_vocab(["x"])
        with pytest.raises(UnknownId):
            decode([99999], vocab)

    def test_unk_id_decodes_to_literal_unk(self):
        vocab = build_vocab(["x = 1 ;"])
        assert "<UNK>" in decode(vocab.encode("x = zebra ;"), vocab)

    def test_operator_merge(self):
        vocab = build_vocab(
            ["while ( a <= b ) { a = a + 1 ; }", "x = ( a == b ) ;", "y = a >= b ;", "z = a != b ;"]
        )
        for text in ["a <= b", "x = a == b ;", "while ( a >= b ) { }", "a != b"]:
            assert decode(vocab.encode(text), vocab) == text

    def test_round_trip_whitespace_collapse(self):
        vocab = build_vocab(["x = 1 ;\n  y = 2 ;"])
        text = "x = 1 ;\n  y = 2 ;"
        assert decode(vocab.encode(text), vocab) == "x = 1 ; y = 2 ;"

    def test_round_trip_over_generated_corpus(self):
        records = generate_corpus(12, 2, 0, rng_seed=3, fuzz_budget=300)
        sources = [r.source for r in records]
        prompts = [render_testcase_prompt(r.suite, 4) for r in records]
        vocab = build_vocab(sources + prompts)
        for src in sources:
            collapsed = " ".join(src.split())
            assert decode(vocab.encode(src), vocab) == collapsed
