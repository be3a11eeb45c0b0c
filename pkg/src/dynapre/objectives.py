"""Training objectives: masked-token prediction (SIM), code/test-case
matching (DIM), and contrastive distillation against an EMA teacher (DID),
plus the mask planner, negative-suite sampling, and the FIFO negative queue.

Losses are written over autodiff Tensors; batched cores carry training,
single-example wrappers express the per-operation contracts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, gather_positions, log_softmax, logsumexp
from .corpus import render_testcase_prompt
from .model import dim_score, forward_tokens, mlm_logits, pad_batch, pool
from .tokenizer import MASK, SPECIAL_TOKENS

MASK_RATE = 0.15
MASK_FRACTION = 0.8
RANDOM_FRACTION = 0.1
PROB_CLAMP = 1e-7
DEFAULT_TEMPERATURE = 0.07

ACTION_MASK, ACTION_RANDOM, ACTION_KEEP = 0, 1, 2


class NoMaskable(ValueError):
    pass


# ---------------------------------------------------------------------------
# Mask planning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaskPlan:
    positions: np.ndarray  # selected positions, in draw order
    actions: np.ndarray  # ACTION_* per selected position
    replacements: np.ndarray  # replacement id per position (ACTION_RANDOM only)


def make_mask_plan(assembled, rng, vocab_size, mask_rate=MASK_RATE):
    """Select ~mask_rate of maskable positions; 80/10/10 mask/random/keep."""
    maskable = np.flatnonzero(assembled.maskable)
    if maskable.size == 0:
        raise NoMaskable("input has no maskable positions")
    k = int(np.floor(mask_rate * maskable.size + 0.5))  # round half up
    k = max(1, min(k, maskable.size))
    order = rng.permutation(maskable.size)[:k]
    positions = maskable[order]
    n_mask = int(MASK_FRACTION * k)
    n_random = int(RANDOM_FRACTION * k)
    actions = np.full(k, ACTION_KEEP, dtype=np.int8)
    actions[:n_mask] = ACTION_MASK
    actions[n_mask : n_mask + n_random] = ACTION_RANDOM
    replacements = np.zeros(k, dtype=np.int32)
    if n_random:
        low = len(SPECIAL_TOKENS)
        replacements[n_mask : n_mask + n_random] = rng.integers(
            low, vocab_size, size=n_random
        )
    return MaskPlan(positions, actions, replacements)


def apply_mask_plan(ids, plan):
    corrupted = ids.copy()
    corrupted[plan.positions[plan.actions == ACTION_MASK]] = MASK
    random_at = plan.actions == ACTION_RANDOM
    corrupted[plan.positions[random_at]] = plan.replacements[random_at]
    return corrupted


# ---------------------------------------------------------------------------
# SIM: masked-token prediction
# ---------------------------------------------------------------------------


def masked_nll(logits, labels):
    """Mean negative log-likelihood of `labels` under softmax(logits)."""
    labels = np.asarray(labels)
    logp = log_softmax(logits, axis=-1)
    picked = gather_positions(logp, np.arange(labels.size), labels)
    return -picked.mean()


def sim_loss_batch(encoder, params, assembled_list, plans, train_mode=False, rng=None):
    corrupted = [apply_mask_plan(a.ids, p) for a, p in zip(assembled_list, plans)]
    ids, pad_mask = pad_batch(corrupted)
    features = forward_tokens(params, encoder.config, ids, pad_mask, train_mode, rng)
    batch_idx = np.concatenate(
        [np.full(len(p.positions), i) for i, p in enumerate(plans)]
    )
    pos_idx = np.concatenate([p.positions for p in plans])
    labels = np.concatenate(
        [a.ids[p.positions] for a, p in zip(assembled_list, plans)]
    )
    selected = gather_positions(features, batch_idx, pos_idx)
    return masked_nll(mlm_logits(params, selected), labels)


def loss_sim(encoder, assembled, plan):
    """Mean NLL of the original tokens at the plan's positions."""
    params = encoder.student_tensors()
    return sim_loss_batch(encoder, params, [assembled], [plan])


# ---------------------------------------------------------------------------
# DIM: dynamic information matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DIMExample:
    code_text: str
    suite_used: object
    label: int


def sample_dim_example(record, corpus_records, p_match, rng, representation="source"):
    """Pair a record's code with its own suite (y=1) or another sample's (y=0).

    The negative is never the record itself but may share its problem.
    """
    if len(corpus_records) < 2:
        raise ValueError("need at least two records to sample negatives")
    code_text = record.source if representation == "source" else record.ast_text
    if rng.random() < p_match:
        return DIMExample(code_text, record.suite, 1)
    others = [r for r in corpus_records if r.sample_id != record.sample_id]
    pick = others[int(rng.integers(0, len(others)))]
    return DIMExample(code_text, pick.suite, 0)


def binary_cross_entropy(probs, labels):
    """Mean BCE with probabilities clamped to [1e-7, 1 - 1e-7]."""
    labels = np.asarray(labels, dtype=probs.data.dtype)
    clamped = probs.clip(PROB_CLAMP, 1.0 - PROB_CLAMP)
    losses = -(labels * clamped.log() + (1.0 - labels) * (1.0 - clamped).log())
    return losses.mean()


def dim_loss_batch(encoder, params, assembled_list, labels, train_mode=False, rng=None):
    _, pooled, _ = encoder.forward_pooled(params, assembled_list, train_mode, rng)
    return binary_cross_entropy(dim_score(params, pooled), labels)


def loss_dim(encoder, example, max_cases=4):
    """BCE of the match head on code ++ rendered test cases against the label."""
    prompt = render_testcase_prompt(example.suite_used, max_cases)
    assembled = encoder.assemble(example.code_text, prompt)
    params = encoder.student_tensors()
    return dim_loss_batch(encoder, params, [assembled], [example.label])


# ---------------------------------------------------------------------------
# DID: dynamic information distillation
# ---------------------------------------------------------------------------


class NegativeQueue:
    """Fixed-capacity FIFO ring of unit-normalized teacher embeddings."""

    def __init__(self, capacity, dim, dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.buffer = np.zeros((capacity, dim), dtype=dtype)
        self.head = 0
        self.count = 0

    def __len__(self):
        return self.count

    def push(self, vector):
        vector = np.asarray(vector, dtype=self.buffer.dtype)
        norm = float(np.sqrt((vector * vector).sum()))
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("queue vectors must be finite and nonzero")
        self.buffer[self.head] = vector / norm
        self.head = (self.head + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)
        return self

    def as_matrix(self):
        """Entries oldest-first, shape [count, dim]."""
        if self.count < self.capacity:
            return self.buffer[: self.count].copy()
        return np.roll(self.buffer, -self.head, axis=0).copy()


def queue_push(queue, vector):
    return queue.push(vector)


def _normalize_rows(t):
    norm2 = (t * t).sum(axis=-1, keepdims=True)
    if np.any(norm2.data <= 0.0):
        raise ValueError("cannot normalize a zero vector")
    return t / norm2.sqrt()


def cosine_similarity(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    return float(a @ b / (na * nb))


def did_loss_from_vectors(student_pooled, teacher_pooled, negatives, temperature):
    """InfoNCE over cosine similarities; empty negatives give exactly zero.

    `student_pooled` may be a Tensor (gradients flow through it only);
    the teacher vectors and queue negatives are constants.
    """
    if not isinstance(student_pooled, Tensor):
        student_pooled = Tensor(np.asarray(student_pooled))
    xs = _normalize_rows(student_pooled)
    dtype = xs.data.dtype
    teacher = np.asarray(teacher_pooled, dtype=dtype)
    teacher = teacher / np.linalg.norm(teacher, axis=-1, keepdims=True)
    positive = (xs * teacher).sum(axis=-1, keepdims=True)
    negatives = np.asarray(negatives, dtype=dtype)
    if negatives.size:
        sims = concat([positive, xs @ negatives.T], axis=1)
    else:
        sims = positive
    scaled = sims * (1.0 / temperature)
    per_sample = logsumexp(scaled, axis=-1) - scaled[:, 0]
    return per_sample.mean()


def did_loss_batch(
    encoder,
    params,
    code_assembled,
    holistic_assembled,
    queue,
    temperature=DEFAULT_TEMPERATURE,
    train_mode=False,
    rng=None,
):
    """Batched DID: student encodes code alone, teacher encodes the holistic
    input; returns (loss, teacher vectors for later queue insertion)."""
    _, student_pooled, _ = encoder.forward_pooled(params, code_assembled, train_mode, rng)
    teacher_params = encoder.teacher_tensors(dtype=student_pooled.data.dtype)
    _, teacher_pooled, _ = encoder.forward_pooled(teacher_params, holistic_assembled)
    loss = did_loss_from_vectors(
        student_pooled, teacher_pooled.data, queue.as_matrix(), temperature
    )
    return loss, teacher_pooled.data


def loss_did(encoder, code_assembled, holistic_assembled, queue, temperature=DEFAULT_TEMPERATURE):
    """Single-example DID; returns (loss, teacher vector x-hat)."""
    params = encoder.student_tensors()
    loss, teacher = did_loss_batch(
        encoder, params, [code_assembled], [holistic_assembled], queue, temperature
    )
    return loss, teacher[0]
