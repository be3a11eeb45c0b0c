"""Transformer encoder, pooling, MLM/matching heads, and the EMA teacher.

Parameters live in plain float32 numpy arrays keyed by name; forward passes
wrap them in autodiff Tensors on demand, so the same code serves float32
training and float64 finite-difference verification.  The student and the
teacher share one architecture; the teacher is updated only by EMA and its
forward passes never build gradient tape.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, gather_rows, layer_norm_core, softmax
from .tokenizer import PAD, assemble

CHECKPOINT_VERSION = 1
LN_EPS = 1e-5

POOL_BOS = "bos"
POOL_MEAN = "mean"


class LengthError(ValueError):
    pass


class VersionError(RuntimeError):
    pass


class HashError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    layers: int = 4
    heads: int = 4
    ffn_mult: int = 4
    max_len: int = 256
    vocab_size: int = 2000
    pooling: str = POOL_BOS
    dropout: float = 0.1

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ValueError("dim must be divisible by heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.pooling not in (POOL_BOS, POOL_MEAN):
            raise ValueError(f"unknown pooling {self.pooling!r}")


def param_shapes(config):
    """Parameter name -> shape, in the canonical construction order."""
    d, f = config.dim, config.ffn_mult * config.dim
    shapes = {
        "tok_emb": (config.vocab_size, d),
        "pos_emb": (config.max_len, d),
    }
    for i in range(config.layers):
        shapes[f"layer{i}.ln1.gain"] = (d,)
        shapes[f"layer{i}.ln1.bias"] = (d,)
        for proj in ("wq", "wk", "wv", "wo"):
            shapes[f"layer{i}.attn.{proj}"] = (d, d)
        for proj in ("bq", "bk", "bv", "bo"):
            shapes[f"layer{i}.attn.{proj}"] = (d,)
        shapes[f"layer{i}.ln2.gain"] = (d,)
        shapes[f"layer{i}.ln2.bias"] = (d,)
        shapes[f"layer{i}.ffn.w1"] = (d, f)
        shapes[f"layer{i}.ffn.b1"] = (f,)
        shapes[f"layer{i}.ffn.w2"] = (f, d)
        shapes[f"layer{i}.ffn.b2"] = (d,)
    shapes["final_ln.gain"] = (d,)
    shapes["final_ln.bias"] = (d,)
    shapes["mlm.w"] = (d, config.vocab_size)
    shapes["mlm.b"] = (config.vocab_size,)
    shapes["dim_fc.w"] = (d, d)
    shapes["dim_fc.b"] = (d,)
    shapes["dim_cls.w"] = (d,)
    shapes["dim_cls.b"] = (1,)
    return shapes


def parameter_count(config):
    return sum(int(np.prod(s)) for s in param_shapes(config).values())


@dataclass
class ModelState:
    params: dict
    teacher: dict

    def copy(self):
        return ModelState(
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.teacher.items()},
        )


def _is_gain(name):
    return name.endswith(".gain")


def _is_bias(name):
    tail = name.rsplit(".", 1)[-1]
    return tail in ("bias", "bq", "bk", "bv", "bo", "b1", "b2", "b") or name in (
        "mlm.b",
        "dim_fc.b",
        "dim_cls.b",
    )


def init(config, rng_seed):
    """N(0, 0.02) weights, unit normalization gains, zero biases; teacher = student."""
    rng = np.random.default_rng(rng_seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if _is_gain(name):
            params[name] = np.ones(shape, dtype=np.float32)
        elif _is_bias(name):
            params[name] = np.zeros(shape, dtype=np.float32)
        else:
            params[name] = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
    teacher = {k: v.copy() for k, v in params.items()}
    return ModelState(params, teacher)


def wrap_params(arrays, requires_grad=False, dtype=None):
    """Wrap raw parameter arrays as autodiff Tensors (optionally recast)."""
    out = {}
    for name, arr in arrays.items():
        data = arr if dtype is None else arr.astype(dtype)
        out[name] = Tensor(data, requires_grad=requires_grad)
    return out


def ema_update(state, m):
    """theta_hat <- m * theta_hat + (1 - m) * theta, elementwise.

    Computed as theta_hat + (1-m)(theta - theta_hat) with the endpoints
    special-cased, so m=1 is a bitwise fixed point, m=0 is a bitwise copy,
    and equal tensors stay equal at any momentum.
    """
    if not 0.0 <= m <= 1.0:
        raise ValueError("momentum must be in [0, 1]")
    if m == 1.0:
        return state
    for name, student in state.params.items():
        if m == 0.0:
            state.teacher[name] = student.copy()
        else:
            teacher = state.teacher[name]
            state.teacher[name] = (teacher + (1.0 - m) * (student - teacher)).astype(
                teacher.dtype
            )
    return state


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


def _layer_norm(x, gain, bias):
    return layer_norm_core(x, LN_EPS) * gain + bias


def _linear(x, w, b, batch, length):
    # One large GEMM instead of a leading-dim batched loop.
    flat = x.reshape(batch * length, x.shape[-1])
    return (flat @ w + b).reshape(batch, length, w.shape[-1])


def _dropout(x, rate, rng):
    if rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype)
    return x * (keep / np.asarray(1.0 - rate, dtype=x.data.dtype))


def pad_batch(id_arrays):
    """Right-pad to the in-batch maximum with <PAD>; returns (ids, pad_mask)."""
    length = max(len(a) for a in id_arrays)
    ids = np.full((len(id_arrays), length), PAD, dtype=np.int32)
    for i, arr in enumerate(id_arrays):
        ids[i, : len(arr)] = arr
    return ids, ids != PAD


def forward_tokens(params, config, ids, pad_mask, train_mode=False, rng=None, attn_sink=None):
    """Token features [B, L, D] for padded id batch under the given params.

    attn_sink, when given, receives each layer's attention weights (ndarray).
    """
    batch, length = ids.shape
    if length > config.max_len:
        raise LengthError(f"sequence length {length} exceeds max_len {config.max_len}")
    dtype = params["tok_emb"].data.dtype
    rate = config.dropout if train_mode else 0.0
    if rate > 0.0 and rng is None:
        raise ValueError("train_mode dropout needs an rng")

    x = gather_rows(params["tok_emb"], ids) + params["pos_emb"][:length]
    # Additive key mask: padded keys get a large negative attention bias.
    bias = np.where(pad_mask, 0.0, -1e9).astype(dtype)[:, None, None, :]
    heads, dim = config.heads, config.dim
    head_dim = dim // heads
    scale = np.asarray(1.0 / np.sqrt(head_dim), dtype=dtype)

    def split_heads(t):
        return t.reshape(batch, length, heads, head_dim).transpose((0, 2, 1, 3))

    for i in range(config.layers):
        p = f"layer{i}"
        h = _layer_norm(x, params[f"{p}.ln1.gain"], params[f"{p}.ln1.bias"])
        q = split_heads(_linear(h, params[f"{p}.attn.wq"], params[f"{p}.attn.bq"], batch, length))
        k = split_heads(_linear(h, params[f"{p}.attn.wk"], params[f"{p}.attn.bk"], batch, length))
        v = split_heads(_linear(h, params[f"{p}.attn.wv"], params[f"{p}.attn.bv"], batch, length))
        scores = q @ k.transpose((0, 1, 3, 2)) * scale + bias
        attn = softmax(scores, axis=-1)
        if attn_sink is not None:
            attn_sink.append(attn.data)
        ctx = (attn @ v).transpose((0, 2, 1, 3)).reshape(batch, length, dim)
        proj = _linear(ctx, params[f"{p}.attn.wo"], params[f"{p}.attn.bo"], batch, length)
        x = x + _dropout(proj, rate, rng)

        h2 = _layer_norm(x, params[f"{p}.ln2.gain"], params[f"{p}.ln2.bias"])
        inner = _linear(h2, params[f"{p}.ffn.w1"], params[f"{p}.ffn.b1"], batch, length).gelu()
        out = _linear(inner, params[f"{p}.ffn.w2"], params[f"{p}.ffn.b2"], batch, length)
        x = x + _dropout(out, rate, rng)

    return _layer_norm(x, params["final_ln.gain"], params["final_ln.bias"])


def pool(features, pad_mask, pooling):
    """Aggregate token features to one vector per sequence."""
    if pooling == POOL_BOS:
        return features[:, 0, :]
    dtype = features.data.dtype
    weights = pad_mask.astype(dtype)
    counts = weights.sum(axis=1, keepdims=True)
    return (features * weights[:, :, None]).sum(axis=1) * (1.0 / counts).astype(dtype)


def mlm_logits(params, features):
    """Linear map to vocabulary logits (untied from input embeddings)."""
    return features @ params["mlm.w"] + params["mlm.b"]


def dim_score(params, pooled):
    """Match probability in (0, 1): logistic(classifier(projection(pooled)))."""
    projected = pooled @ params["dim_fc.w"] + params["dim_fc.b"]
    logit = (projected * params["dim_cls.w"]).sum(axis=-1) + params["dim_cls.b"][0]
    return logit.sigmoid()


@dataclass(frozen=True)
class EncodeResult:
    token_features: np.ndarray  # [L, D]
    pooled: np.ndarray  # [D]


def encode(state, side, assembled, config, train_mode=False, rng=None):
    """Single-input convenience wrapper around the batched forward pass."""
    if side not in ("student", "teacher"):
        raise ValueError(f"unknown side {side!r}")
    arrays = state.params if side == "student" else state.teacher
    params = wrap_params(arrays)
    ids, pad_mask = pad_batch([assembled.ids])
    features = forward_tokens(params, config, ids, pad_mask, train_mode, rng)
    pooled = pool(features, pad_mask, config.pooling)
    return EncodeResult(features.data[0], pooled.data[0])


# ---------------------------------------------------------------------------
# Encoder facade: state + config + tokenizer settings in one handle
# ---------------------------------------------------------------------------


@dataclass
class Encoder:
    state: ModelState
    config: ModelConfig
    vocab: object
    prefix_mode: str
    max_len: int
    code_budget: int

    def assemble(self, code_text, prompt_text=""):
        return assemble(
            code_text,
            prompt_text,
            self.vocab,
            mode=self.prefix_mode,
            max_len=self.max_len,
            code_budget=self.code_budget,
        )

    def student_tensors(self, dtype=None):
        return wrap_params(self.state.params, requires_grad=True, dtype=dtype)

    def teacher_tensors(self, dtype=None):
        return wrap_params(self.state.teacher, requires_grad=False, dtype=dtype)

    def forward_pooled(self, params, assembled_list, train_mode=False, rng=None):
        ids, pad_mask = pad_batch([a.ids for a in assembled_list])
        features = forward_tokens(params, self.config, ids, pad_mask, train_mode, rng)
        return features, pool(features, pad_mask, self.config.pooling), pad_mask


# ---------------------------------------------------------------------------
# Checkpoint blob format
# ---------------------------------------------------------------------------


def write_blob(path, named_arrays):
    """Write arrays as one little-endian float32 blob; returns the manifest list."""
    entries = []
    offset = 0
    with open(path, "wb") as fh:
        for name, arr in named_arrays:
            data = np.ascontiguousarray(arr, dtype="<f4")
            fh.write(data.tobytes())
            entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
            offset += data.nbytes
    return entries


def read_blob(path, entries):
    arrays = {}
    with open(path, "rb") as fh:
        raw = fh.read()
    for entry in entries:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=start)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float32)
    return arrays


def save_model(state, config, vocab_hash, directory):
    """Manifest JSON plus a single float32 blob; save->load is bitwise exact."""
    os.makedirs(directory, exist_ok=True)
    ordered = [(name, state.params[name]) for name in param_shapes(config)]
    ordered += [(f"teacher.{name}", state.teacher[name]) for name in param_shapes(config)]
    entries = write_blob(os.path.join(directory, "weights.bin"), ordered)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "vocab_hash": vocab_hash,
        "tensors": entries,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(directory, expected_vocab_hash=None):
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise VersionError(f"unsupported checkpoint version {manifest.get('format_version')}")
    if expected_vocab_hash is not None and manifest["vocab_hash"] != expected_vocab_hash:
        raise HashError("vocabulary hash does not match the checkpoint")
    config = ModelConfig(**manifest["config"])
    arrays = read_blob(os.path.join(directory, "weights.bin"), manifest["tensors"])
    params, teacher = {}, {}
    for name in param_shapes(config):
        params[name] = arrays[name]
        teacher[name] = arrays[f"teacher.{name}"]
    return ModelState(params, teacher), config, manifest["vocab_hash"]
