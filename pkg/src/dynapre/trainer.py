"""Alternating-objective pre-training with Adam, EMA updates, and resume.

One objective fires per step, round-robin over the enabled losses in SIM ->
DIM -> DID order (a `sum` mode is available for comparison).  The whole
trajectory is a pure function of (corpus bytes, config, seed): batch order,
mask plans, negative sampling, and dropout all derive from (rng_seed, step).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .corpus import render_testcase_prompt
from .model import (
    CHECKPOINT_VERSION,
    Encoder,
    HashError,
    ModelConfig,
    ModelState,
    VersionError,
    ema_update,
    init,
    param_shapes,
    read_blob,
    wrap_params,
    write_blob,
)
from .objectives import (
    NegativeQueue,
    did_loss_from_vectors,
    dim_loss_batch,
    make_mask_plan,
    sample_dim_example,
    sim_loss_batch,
)
from .tokenizer import (
    DEFAULT_CODE_BUDGET,
    DEFAULT_MAX_LEN,
    MODE_BERT,
    MODE_UNIX,
    Vocab,
    assemble_ids,
    build_vocab,
)

SIM, DIM, DID = "sim", "dim", "did"

# rng stream tags, combined with (rng_seed, step) for per-step determinism
_STREAM_EPOCH = 100
_STREAM_MASK = 200
_STREAM_DIM = 300
_STREAM_DROPOUT = 400
_STREAM_CONTRAST = 500


class ConfigError(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    def __init__(self, step, loss_name, param_norms):
        super().__init__(f"non-finite {loss_name} loss at step {step}")
        self.step = step
        self.loss_name = loss_name
        self.param_norms = param_norms


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 32
    lr: float = 3e-4
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    temperature: float = 0.07
    momentum: float = 0.999
    queue_capacity: int = 1024
    p_match: float = 0.5
    mask_rate: float = 0.15
    use_sim: bool = True
    use_dim: bool = True
    use_did: bool = True
    sim_span: str = "code-only"  # or "code+tests"
    did_positive: str = "holistic"  # or "execution"
    contrast_aug: bool = False
    loss_mode: str = "round-robin"  # or "sum"
    representation: str = "source"  # or "ast"
    pooling: str = "bos"  # or "mean"
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.use_sim or self.use_dim or self.use_did):
            raise ConfigError("at least one objective must be enabled")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if not 0.0 <= self.momentum <= 1.0:
            raise ConfigError("momentum must be in [0, 1]")
        if self.sim_span not in ("code-only", "code+tests"):
            raise ConfigError(f"unknown sim_span {self.sim_span!r}")
        if self.did_positive not in ("holistic", "execution"):
            raise ConfigError(f"unknown did_positive {self.did_positive!r}")
        if self.loss_mode not in ("round-robin", "sum"):
            raise ConfigError(f"unknown loss_mode {self.loss_mode!r}")
        if self.representation not in ("source", "ast"):
            raise ConfigError(f"unknown representation {self.representation!r}")
        object.__setattr__(self, "adam_betas", tuple(self.adam_betas))

    @classmethod
    def paper_defaults(cls):
        """Hyperparameters as published: lr 2e-5, t 0.07, m 0.999, l^n 2^16."""
        return cls(
            steps=10_000,
            batch_size=1024,
            lr=2e-5,
            temperature=0.07,
            momentum=0.999,
            queue_capacity=2**16,
        )

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["adam_betas"] = list(self.adam_betas)
        return out

    @classmethod
    def from_dict(cls, obj):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)


def enabled_objectives(config):
    order = []
    if config.use_sim:
        order.append(SIM)
    if config.use_dim:
        order.append(DIM)
    if config.use_did:
        order.append(DID)
    return order


def prefix_mode_for(pooling):
    # bos pooling pairs with the plain prefix, mean pooling with the
    # encoder-only prefix, following the two base-model identities.
    return MODE_BERT if pooling == "bos" else MODE_UNIX


@dataclass
class Checkpoint:
    state: ModelState
    model_config: ModelConfig
    config: TrainConfig
    vocab: Vocab
    opt_m: dict
    opt_v: dict
    opt_t: dict
    queue_buffer: np.ndarray
    queue_head: int
    queue_count: int
    step: int
    metrics: list = field(default_factory=list)


class Trainer:
    """Owns model state, optimizer moments, and the negative queue."""

    def __init__(
        self,
        records,
        split,
        config,
        model_config=None,
        max_len=DEFAULT_MAX_LEN,
        code_budget=DEFAULT_CODE_BUDGET,
        max_cases=4,
        resume_from=None,
    ):
        self.config = config
        self.max_cases = max_cases
        self.records = [r for r in records if r.problem_id in split.train_problem_ids]
        if not self.records:
            raise ValueError("training split selects no records")

        if resume_from is None:
            texts = []
            for r in self.records:
                texts.append(r.source if config.representation == "source" else r.ast_text)
                texts.append(render_testcase_prompt(r.suite, max_cases))
            self.vocab = build_vocab(texts)
            if model_config is None:
                model_config = ModelConfig(vocab_size=self.vocab.size, pooling=config.pooling)
            else:
                model_config = dataclasses.replace(
                    model_config, vocab_size=self.vocab.size, pooling=config.pooling
                )
            self.model_config = model_config
            state = init(model_config, config.rng_seed)
            self.opt_m = {k: np.zeros_like(v) for k, v in state.params.items()}
            self.opt_v = {k: np.zeros_like(v) for k, v in state.params.items()}
            self.opt_t = {k: 0 for k in state.params}
            self.queue = NegativeQueue(config.queue_capacity, model_config.dim)
            self.step = 0
            self.metrics = []
        else:
            self.vocab = resume_from.vocab
            self.model_config = resume_from.model_config
            state = resume_from.state
            self.opt_m = resume_from.opt_m
            self.opt_v = resume_from.opt_v
            self.opt_t = resume_from.opt_t
            self.queue = NegativeQueue(config.queue_capacity, self.model_config.dim)
            self.queue.buffer = resume_from.queue_buffer.copy()
            self.queue.head = resume_from.queue_head
            self.queue.count = resume_from.queue_count
            self.step = resume_from.step
            self.metrics = list(resume_from.metrics)

        max_len = min(max_len, self.model_config.max_len)
        code_budget = min(code_budget, max_len - 8)
        self.encoder = Encoder(
            state,
            self.model_config,
            self.vocab,
            prefix_mode_for(config.pooling),
            max_len,
            code_budget,
        )
        self._code_ids = {}
        self._prompt_ids = {}
        for r in self.records:
            text = r.source if config.representation == "source" else r.ast_text
            self._code_ids[r.sample_id] = self.vocab.encode(text)
            self._prompt_ids[r.sample_id] = self.vocab.encode(
                render_testcase_prompt(r.suite, max_cases)
            )

    # -- deterministic plumbing ----------------------------------------------

    def _rng(self, stream, step):
        return np.random.default_rng([self.config.rng_seed, stream, step])

    def _batch_records(self, step):
        n = len(self.records)
        per_epoch = -(-n // self.config.batch_size)  # ceil
        epoch, chunk = divmod(step, per_epoch)
        perm = self._rng(_STREAM_EPOCH, epoch).permutation(n)
        lo = chunk * self.config.batch_size
        return [self.records[i] for i in perm[lo : lo + self.config.batch_size]]

    def _assemble(self, code_ids, prompt_ids=()):
        return assemble_ids(
            code_ids,
            prompt_ids,
            mode=self.encoder.prefix_mode,
            max_len=self.encoder.max_len,
            code_budget=self.encoder.code_budget,
        )

    def _code_assembled(self, record):
        return self._assemble(self._code_ids[record.sample_id])

    def _holistic_assembled(self, record):
        return self._assemble(
            self._code_ids[record.sample_id], self._prompt_ids[record.sample_id]
        )

    # -- objectives ------------------------------------------------------------

    def _sim_loss(self, params, batch, step):
        mask_rng = self._rng(_STREAM_MASK, step)
        drop_rng = self._rng(_STREAM_DROPOUT, step)
        assembled, plans = [], []
        for record in batch:
            if self.config.sim_span == "code-only":
                a = self._code_assembled(record)
            else:
                a = self._holistic_assembled(record)
            assembled.append(a)
            plans.append(
                make_mask_plan(a, mask_rng, self.vocab.size, self.config.mask_rate)
            )
        return sim_loss_batch(
            self.encoder, params, assembled, plans, train_mode=True, rng=drop_rng
        )

    def _dim_loss(self, params, batch, step):
        dim_rng = self._rng(_STREAM_DIM, step)
        drop_rng = self._rng(_STREAM_DROPOUT, step)
        assembled, labels = [], []
        for record in batch:
            example = sample_dim_example(
                record, self.records, self.config.p_match, dim_rng,
                representation=self.config.representation,
            )
            prompt_ids = self.vocab.encode(
                render_testcase_prompt(example.suite_used, self.max_cases)
            )
            assembled.append(self._assemble(self._code_ids[record.sample_id], prompt_ids))
            labels.append(example.label)
        return dim_loss_batch(
            self.encoder, params, assembled, labels, train_mode=True, rng=drop_rng
        )

    def _did_loss(self, params, batch, step):
        drop_rng = self._rng(_STREAM_DROPOUT, step)
        code_assembled = [self._code_assembled(r) for r in batch]
        if self.config.did_positive == "holistic":
            target_assembled = [self._holistic_assembled(r) for r in batch]
        else:
            # Execution positives: the teacher sees the test cases alone,
            # passed through the code slot (assembly rejects empty code).
            target_assembled = [
                self._assemble(self._prompt_ids[r.sample_id]) for r in batch
            ]

        _, student_pooled, _ = self.encoder.forward_pooled(
            params, code_assembled, train_mode=True, rng=drop_rng
        )
        teacher_params = self.encoder.teacher_tensors()
        _, teacher_pooled, _ = self.encoder.forward_pooled(teacher_params, target_assembled)
        negatives = self.queue.as_matrix()
        loss = did_loss_from_vectors(
            student_pooled, teacher_pooled.data, negatives, self.config.temperature
        )
        if self.config.contrast_aug:
            # Second view of the same code under an independent dropout mask,
            # detached: an extra InfoNCE positive against the same negatives.
            view_rng = self._rng(_STREAM_CONTRAST, step)
            frozen = wrap_params(self.encoder.state.params, requires_grad=False)
            _, second_pooled, _ = self.encoder.forward_pooled(
                frozen, code_assembled, train_mode=True, rng=view_rng
            )
            loss = loss + did_loss_from_vectors(
                student_pooled, second_pooled.data, negatives, self.config.temperature
            )
        return loss, teacher_pooled.data

    # -- optimization -----------------------------------------------------------

    def _adam_apply(self, grads):
        beta1, beta2 = self.config.adam_betas
        lr, eps, wd = self.config.lr, self.config.adam_eps, self.config.weight_decay
        params = self.encoder.state.params
        for name, grad in grads.items():
            if grad is None:
                continue
            grad = grad.astype(np.float32)
            self.opt_t[name] += 1
            t = self.opt_t[name]
            m = self.opt_m[name]
            v = self.opt_v[name]
            m *= beta1
            m += (1 - beta1) * grad
            v *= beta2
            v += (1 - beta2) * grad * grad
            m_hat = m / (1 - beta1**t)
            v_hat = v / (1 - beta2**t)
            update = lr * m_hat / (np.sqrt(v_hat) + eps)
            if wd:
                update = update + lr * wd * params[name]
            params[name] -= update.astype(np.float32)

    def train_step(self):
        """One optimizer step; returns the recorded metric entry."""
        step = self.step
        order = enabled_objectives(self.config)
        batch = self._batch_records(step)
        params = self.encoder.student_tensors()

        teacher_vecs = None
        if self.config.loss_mode == "sum":
            name = "+".join(order)
            loss = None
            for objective in order:
                part, vecs = self._objective_loss(objective, params, batch, step)
                teacher_vecs = vecs if vecs is not None else teacher_vecs
                loss = part if loss is None else loss + part
        else:
            objective = order[step % len(order)]
            name = objective
            loss, teacher_vecs = self._objective_loss(objective, params, batch, step)

        value = loss.item()
        if not np.isfinite(value):
            norms = {k: float(np.linalg.norm(v)) for k, v in self.encoder.state.params.items()}
            raise NonFiniteLoss(step, name, norms)

        loss.backward()
        self._adam_apply({k: t.grad for k, t in params.items()})
        ema_update(self.encoder.state, self.config.momentum)
        if teacher_vecs is not None:
            for vec in teacher_vecs:  # batch order
                self.queue.push(vec)

        self.step += 1
        entry = {"step": step, "objective": name, "loss": value}
        self.metrics.append(entry)
        return entry

    def _objective_loss(self, objective, params, batch, step):
        if objective == SIM:
            return self._sim_loss(params, batch, step), None
        if objective == DIM:
            return self._dim_loss(params, batch, step), None
        loss, vecs = self._did_loss(params, batch, step)
        return loss, vecs

    def run(self):
        while self.step < self.config.steps:
            self.train_step()
        return self.checkpoint()

    def checkpoint(self):
        return Checkpoint(
            state=self.encoder.state,
            model_config=self.model_config,
            config=self.config,
            vocab=self.vocab,
            opt_m=self.opt_m,
            opt_v=self.opt_v,
            opt_t=self.opt_t,
            queue_buffer=self.queue.buffer.copy(),
            queue_head=self.queue.head,
            queue_count=self.queue.count,
            step=self.step,
            metrics=self.metrics,
        )


def train(records, split, config, model_config=None, resume_from=None, **kwargs):
    """Run config.steps optimizer steps and return the final Checkpoint."""
    trainer = Trainer(
        records, split, config, model_config=model_config, resume_from=resume_from, **kwargs
    )
    return trainer.run()


# ---------------------------------------------------------------------------
# Checkpoint persistence (model format plus optimizer and queue sections)
# ---------------------------------------------------------------------------


def save_checkpoint(ckpt, directory):
    os.makedirs(directory, exist_ok=True)
    names = list(param_shapes(ckpt.model_config))
    ordered = [(n, ckpt.state.params[n]) for n in names]
    ordered += [(f"teacher.{n}", ckpt.state.teacher[n]) for n in names]
    ordered += [(f"adam_m.{n}", ckpt.opt_m[n]) for n in names]
    ordered += [(f"adam_v.{n}", ckpt.opt_v[n]) for n in names]
    ordered.append(("queue.buffer", ckpt.queue_buffer))
    entries = write_blob(os.path.join(directory, "weights.bin"), ordered)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "config": dataclasses.asdict(ckpt.model_config),
        "vocab_hash": ckpt.vocab.content_hash(),
        "tensors": entries,
        "trainer": {
            "step": ckpt.step,
            "adam_t": ckpt.opt_t,
            "queue_head": ckpt.queue_head,
            "queue_count": ckpt.queue_count,
            "train_config": ckpt.config.to_dict(),
        },
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    ckpt.vocab.save(os.path.join(directory, "vocab.json"))


def load_checkpoint(directory, expected_vocab_hash=None):
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise VersionError(f"unsupported checkpoint version {manifest.get('format_version')}")
    vocab = Vocab.load(os.path.join(directory, "vocab.json"))
    if manifest["vocab_hash"] != vocab.content_hash():
        raise HashError("vocabulary hash does not match the checkpoint")
    if expected_vocab_hash is not None and manifest["vocab_hash"] != expected_vocab_hash:
        raise HashError("vocabulary hash does not match the expectation")
    model_config = ModelConfig(**manifest["config"])
    arrays = read_blob(os.path.join(directory, "weights.bin"), manifest["tensors"])
    names = list(param_shapes(model_config))
    trainer_info = manifest["trainer"]
    return Checkpoint(
        state=ModelState(
            {n: arrays[n] for n in names},
            {n: arrays[f"teacher.{n}"] for n in names},
        ),
        model_config=model_config,
        config=TrainConfig.from_dict(trainer_info["train_config"]),
        vocab=vocab,
        opt_m={n: arrays[f"adam_m.{n}"] for n in names},
        opt_v={n: arrays[f"adam_v.{n}"] for n in names},
        opt_t={n: int(trainer_info["adam_t"][n]) for n in names},
        queue_buffer=arrays["queue.buffer"],
        queue_head=int(trainer_info["queue_head"]),
        queue_count=int(trainer_info["queue_count"]),
        step=int(trainer_info["step"]),
    )
