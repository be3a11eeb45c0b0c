"""Word-level tokenizer, vocabulary, and encoder-input assembly.

Text splits on whitespace and on single punctuation characters; special
tokens are matched atomically anywhere in the text.  Integer literals with
magnitude above 999 collapse to the `<NUM>` surrogate so fuzzer-generated
constants cannot blow up the vocabulary.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np

BOS, EOS, SEP, MASK, PAD, UNK, ENCODER_ONLY = range(7)

SPECIAL_TOKENS = ("<BOS>", "<EOS>", "<SEP>", "<MASK>", "<PAD>", "<UNK>", "<ENCODER-ONLY>")
NUM_TOKEN = "<NUM>"
NUM_THRESHOLD = 999

PUNCT = "(),;{}=<>!+-*/%"
_PUNCT_SET = frozenset(PUNCT)

_ATOMIC = SPECIAL_TOKENS + (NUM_TOKEN,)
_ATOMIC_RE = re.compile("(" + "|".join(re.escape(t) for t in _ATOMIC) + ")")

MODE_BERT = "bert-style"
MODE_UNIX = "unix-style"

# Default desk-scale budgets: the 400-of-512 code share scaled to length 256.
DEFAULT_MAX_LEN = 256
DEFAULT_CODE_BUDGET = 160


class AssemblyError(ValueError):
    pass


class UnknownId(KeyError):
    pass


def _split_piece(piece):
    tokens = []
    run = []
    for ch in piece:
        if ch in _PUNCT_SET:
            if run:
                tokens.append("".join(run))
                run = []
            tokens.append(ch)
        else:
            run.append(ch)
    if run:
        tokens.append("".join(run))
    return tokens


def tokenize(text):
    """Split into word-level tokens; large integer literals become <NUM>."""
    tokens = []
    for part in _ATOMIC_RE.split(text):
        if not part:
            continue
        if part in _ATOMIC:
            tokens.append(part)
            continue
        for word in part.split():
            tokens.extend(_split_piece(word))
    return [
        NUM_TOKEN if tok.isdigit() and int(tok) > NUM_THRESHOLD else tok
        for tok in tokens
    ]


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict
    id_to_token: tuple

    @property
    def size(self):
        return len(self.id_to_token)

    def encode_tokens(self, tokens):
        get = self.token_to_id.get
        return [get(tok, UNK) for tok in tokens]

    def encode(self, text):
        return self.encode_tokens(tokenize(text))

    def to_json(self):
        return json.dumps(self.token_to_id, sort_keys=True)

    def content_hash(self):
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_token_ids(cls, token_to_id):
        ids = sorted(token_to_id.values())
        if ids != list(range(len(ids))):
            raise ValueError("vocabulary ids must be dense 0..V-1")
        for i, tok in enumerate(SPECIAL_TOKENS):
            if token_to_id.get(tok) != i:
                raise ValueError(f"special token {tok} must have id {i}")
        id_to_token = [None] * len(token_to_id)
        for tok, idx in token_to_id.items():
            id_to_token[idx] = tok
        return cls(dict(token_to_id), tuple(id_to_token))

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_token_ids(json.load(fh))


def build_vocab(corpus_texts):
    """Frequency-then-lexicographic vocabulary over word-level tokens.

    Special tokens get the fixed low ids; <NUM> is always present so the
    encode-time surrogate stays encodable.
    """
    texts = list(corpus_texts)
    if not texts:
        raise ValueError("corpus must be non-empty")
    counts = {}
    for text in texts:
        for tok in tokenize(text):
            counts[tok] = counts.get(tok, 0) + 1
    counts.setdefault(NUM_TOKEN, 0)
    for special in SPECIAL_TOKENS:
        counts.pop(special, None)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    token_to_id = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
    for offset, (tok, _) in enumerate(ordered):
        token_to_id[tok] = len(SPECIAL_TOKENS) + offset
    return Vocab.from_token_ids(token_to_id)


_MERGE_LEFT = frozenset("<>=!")


def decode(ids, vocab):
    """Inverse of encoding up to whitespace normalization.

    Adjacent single-character pairs forming <=, >=, ==, != are re-merged;
    on canonically rendered sources this makes decode(encode(t)) == t with
    whitespace runs collapsed.
    """
    tokens = []
    for idx in ids:
        idx = int(idx)
        if idx < 0 or idx >= vocab.size:
            raise UnknownId(idx)
        tokens.append(vocab.id_to_token[idx])
    merged = []
    i = 0
    while i < len(tokens):
        if i + 1 < len(tokens) and tokens[i] in _MERGE_LEFT and tokens[i + 1] == "=":
            merged.append(tokens[i] + "=")
            i += 2
        else:
            merged.append(tokens[i])
            i += 1
    return " ".join(merged)


@dataclass(frozen=True)
class AssembledInput:
    """Token ids plus span bookkeeping for one encoder input.

    code_span and testcase_span are half-open [start, end) index ranges;
    maskable marks exactly the span positions that hold non-special tokens.
    """

    ids: np.ndarray
    code_span: tuple
    testcase_span: tuple
    maskable: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, AssembledInput)
            and np.array_equal(self.ids, other.ids)
            and self.code_span == other.code_span
            and self.testcase_span == other.testcase_span
            and np.array_equal(self.maskable, other.maskable)
        )

    def __len__(self):
        return len(self.ids)


def assemble_ids(
    code_ids,
    prompt_ids,
    mode=MODE_BERT,
    max_len=DEFAULT_MAX_LEN,
    code_budget=DEFAULT_CODE_BUDGET,
):
    """Layout pre-encoded pieces: prefix + code + <SEP> + test cases + <EOS>.

    No padding happens here; batching pads with <PAD> and tracks a mask.
    """
    if max_len < code_budget + 8:
        raise ValueError("max_len must be at least code_budget + 8")
    if mode == MODE_BERT:
        prefix = [BOS]
    elif mode == MODE_UNIX:
        prefix = [BOS, ENCODER_ONLY, SEP]
    else:
        raise ValueError(f"unknown assembly mode {mode!r}")

    if not code_ids:
        raise AssemblyError("code tokenizes to zero tokens")
    code_ids = list(code_ids)[:code_budget]

    code_start = len(prefix)
    code_end = code_start + len(code_ids)

    remaining = max_len - code_end - 1  # the separator after the code
    prompt_ids = list(prompt_ids)[: max(remaining - 1, 0)]
    tc_start = code_end + 1
    tc_end = tc_start + len(prompt_ids)

    ids = np.array(prefix + code_ids + [SEP] + prompt_ids + [EOS], dtype=np.int32)
    maskable = np.zeros(len(ids), dtype=bool)
    for start, end in ((code_start, code_end), (tc_start, tc_end)):
        for pos in range(start, end):
            maskable[pos] = ids[pos] >= len(SPECIAL_TOKENS)
    return AssembledInput(ids, (code_start, code_end), (tc_start, tc_end), maskable)


def assemble(
    code_text,
    prompt_text,
    vocab,
    mode=MODE_BERT,
    max_len=DEFAULT_MAX_LEN,
    code_budget=DEFAULT_CODE_BUDGET,
):
    """Tokenize, encode, and lay out one encoder input; see assemble_ids."""
    return assemble_ids(
        vocab.encode(code_text),
        vocab.encode(prompt_text),
        mode=mode,
        max_len=max_len,
        code_budget=code_budget,
    )
