"""Frozen-embedding evaluation: retrieval mAP, clone mAP@R, defect probe,
and the ablation runner that trains one model per mode and tabulates all
three metrics.

Embeddings are produced from code (or AST) alone; test suites are never
read at embedding time.  Rankings are deterministic: cosine descending,
ties broken by sample id ascending.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import Encoder, wrap_params
from .trainer import TrainConfig, prefix_mode_for, train

CLONE_R_CAP = 50

ABLATION_MODES = (
    "full",
    "mlm-only",
    "wo-dim",
    "wo-did",
    "mask",
    "match",
    "both",
    "holistic",
    "execution",
    "contrast",
)

METRIC_NAMES = ("code_search_map", "clone_map_at_r", "defect_acc")

# (use_sim, use_dim, use_did, sim_span, did_positive, contrast_aug)
_MODE_FLAGS = {
    "full": (True, True, True, "code-only", "holistic", False),
    "mlm-only": (True, False, False, "code-only", "holistic", False),
    "wo-dim": (True, False, True, "code-only", "holistic", False),
    "wo-did": (True, True, False, "code-only", "holistic", False),
    "mask": (True, False, True, "code+tests", "holistic", False),
    "match": (True, True, True, "code-only", "holistic", False),
    "both": (True, True, True, "code+tests", "holistic", False),
    "holistic": (True, True, True, "code-only", "holistic", False),
    "execution": (True, True, True, "code-only", "execution", False),
    "contrast": (True, True, True, "code-only", "holistic", True),
}


class DegenerateLabels(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingSet:
    ids: tuple
    problem_ids: tuple
    is_defective: np.ndarray
    vectors: np.ndarray  # [n, D], unit rows

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("embedding ids must be unique")

    def subset(self, keep):
        keep = np.asarray(keep)
        return EmbeddingSet(
            tuple(np.asarray(self.ids)[keep]),
            tuple(np.asarray(self.problem_ids)[keep]),
            self.is_defective[keep],
            self.vectors[keep],
        )


@dataclass(frozen=True)
class RankingResult:
    average_precisions: np.ndarray
    mean: float
    truncate_r: object  # int or None


def normalize_rows(matrix):
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize zero embedding rows")
    return matrix / norms


def embed_corpus(checkpoint, records, representation="source", batch_size=64):
    """Pooled student features of code (or AST) only, unit-normalized.

    Test suites are ignored by construction: only the source/ast text is
    encoded, with an empty test-case segment.
    """
    from .tokenizer import DEFAULT_CODE_BUDGET, DEFAULT_MAX_LEN

    config = checkpoint.config
    max_len = min(DEFAULT_MAX_LEN, checkpoint.model_config.max_len)
    code_budget = min(DEFAULT_CODE_BUDGET, max_len - 8)  # mirrors the trainer
    encoder = Encoder(
        checkpoint.state,
        checkpoint.model_config,
        checkpoint.vocab,
        prefix_mode_for(config.pooling),
        max_len,
        code_budget,
    )
    vectors = np.zeros((len(records), checkpoint.model_config.dim), dtype=np.float32)
    params = wrap_params(checkpoint.state.params)
    for start in range(0, len(records), batch_size):
        chunk = records[start : start + batch_size]
        assembled = [
            encoder.assemble(r.source if representation == "source" else r.ast_text)
            for r in chunk
        ]
        _, pooled, _ = encoder.forward_pooled(params, assembled)
        vectors[start : start + len(chunk)] = pooled.data
    return EmbeddingSet(
        tuple(r.sample_id for r in records),
        tuple(r.problem_id for r in records),
        np.array([r.is_defective for r in records], dtype=bool),
        normalize_rows(vectors.astype(np.float64)),
    )


def mean_ap(embedding_set, truncate_r=None):
    """Every sample queries all others; relevance = same problem, both clean.

    Cosine descending with id-ascending tie-breaks; queries without any
    relevant candidate contribute AP = 0 and are counted.
    """
    n = len(embedding_set.ids)
    if n < 2:
        raise ValueError("need at least two samples to rank")
    sims = embedding_set.vectors @ embedding_set.vectors.T
    problem_ids = np.asarray(embedding_set.problem_ids)
    clean = ~embedding_set.is_defective
    id_rank = np.argsort(np.argsort(np.asarray(embedding_set.ids)))

    ap_values = np.zeros(n)
    for q in range(n):
        candidates = np.concatenate([np.arange(0, q), np.arange(q + 1, n)])
        order = candidates[np.lexsort((id_rank[candidates], -sims[q, candidates]))]
        relevant = (problem_ids[order] == problem_ids[q]) & clean[order] & clean[q]
        n_relevant = int(relevant.sum())
        if n_relevant == 0:
            continue
        if truncate_r is not None:
            order_rel = relevant[:truncate_r]
            denom = min(n_relevant, truncate_r)
        else:
            order_rel = relevant
            denom = n_relevant
        hits = np.flatnonzero(order_rel)
        if hits.size == 0:
            continue
        precisions = np.arange(1, hits.size + 1) / (hits + 1)
        ap_values[q] = precisions.sum() / denom
    return RankingResult(ap_values, float(ap_values.mean()), truncate_r)


def clone_truncation_r(embedding_set, cap=CLONE_R_CAP):
    """min over problems of (clean count - 1), capped; the paper's R scaled."""
    problem_ids = np.asarray(embedding_set.problem_ids)
    clean = ~embedding_set.is_defective
    counts = [
        int((clean & (problem_ids == p)).sum()) for p in sorted(set(problem_ids))
    ]
    smallest = min(counts)
    return max(1, min(smallest - 1, cap))


def linear_probe_defect(train_set, test_set, lr=0.1, iterations=500, l2=1e-4):
    """Logistic regression on frozen vectors; accuracy at threshold 0.5.

    Full-batch gradient descent from zero initialization: deterministic.
    """
    y_train = train_set.is_defective.astype(np.float64)
    if y_train.min() == y_train.max():
        raise DegenerateLabels("probe training set has a single class")
    x_train = train_set.vectors.astype(np.float64)
    n, dim = x_train.shape
    w = np.zeros(dim)
    b = 0.0
    for _ in range(iterations):
        p = 1.0 / (1.0 + np.exp(-(x_train @ w + b)))
        err = p - y_train
        w -= lr * (x_train.T @ err / n + 2.0 * l2 * w)
        b -= lr * float(err.mean())
    p_test = 1.0 / (1.0 + np.exp(-(test_set.vectors.astype(np.float64) @ w + b)))
    predicted = p_test >= 0.5
    return float((predicted == test_set.is_defective).mean())


# ---------------------------------------------------------------------------
# Ablation runner
# ---------------------------------------------------------------------------


def config_for_mode(base_config, mode):
    if mode not in _MODE_FLAGS:
        raise ValueError(f"unknown ablation mode {mode!r}")
    use_sim, use_dim, use_did, sim_span, did_positive, contrast_aug = _MODE_FLAGS[mode]
    return TrainConfig.from_dict(
        {
            **base_config.to_dict(),
            "use_sim": use_sim,
            "use_dim": use_dim,
            "use_did": use_did,
            "sim_span": sim_span,
            "did_positive": did_positive,
            "contrast_aug": contrast_aug,
        }
    )


def evaluate_checkpoint(checkpoint, records, split):
    """The three frozen-embedding metrics for one trained model."""
    representation = checkpoint.config.representation
    eval_records = [r for r in records if r.problem_id in split.eval_problem_ids]
    train_records = [r for r in records if r.problem_id in split.train_problem_ids]
    eval_set = embed_corpus(checkpoint, eval_records, representation)
    train_set = embed_corpus(checkpoint, train_records, representation)
    r = clone_truncation_r(eval_set)
    return {
        "code_search_map": mean_ap(eval_set).mean,
        "clone_map_at_r": mean_ap(eval_set, truncate_r=r).mean,
        "defect_acc": linear_probe_defect(train_set, eval_set),
    }, r


def ablation_run(records, split, base_config, modes, model_config=None, **train_kwargs):
    """Train one model per mode under a shared seed and tabulate metrics."""
    rows = {}
    truncate_r = None
    for mode in modes:
        config = config_for_mode(base_config, mode)
        checkpoint = train(records, split, config, model_config=model_config, **train_kwargs)
        rows[mode], truncate_r = evaluate_checkpoint(checkpoint, records, split)
    return {
        "rows": rows,
        "truncate_r": truncate_r,
        "seed": base_config.rng_seed,
        "config": base_config.to_dict(),
    }


def render_report_table(report):
    """Plain-text aligned table of the report rows."""
    width = max(len(m) for m in list(report["rows"]) + ["mode"])
    header = f"{'mode':<{width}}  " + "  ".join(f"{m:>16}" for m in METRIC_NAMES)
    lines = [header, "-" * len(header)]
    for mode, metrics in report["rows"].items():
        cells = "  ".join(f"{metrics[m]:>16.6f}" for m in METRIC_NAMES)
        lines.append(f"{mode:<{width}}  {cells}")
    return "\n".join(lines) + "\n"


def write_report(report, json_path, text_path=None):
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if text_path is not None:
        with open(text_path, "w", encoding="utf-8") as fh:
            fh.write(render_report_table(report))


def write_embeddings(embedding_set, path):
    """JSONL export: {id, problem_id, is_defective, vector} per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, sample_id in enumerate(embedding_set.ids):
            fh.write(
                json.dumps(
                    {
                        "id": sample_id,
                        "problem_id": embedding_set.problem_ids[i],
                        "is_defective": bool(embedding_set.is_defective[i]),
                        "vector": [float(v) for v in embedding_set.vectors[i]],
                    }
                )
            )
            fh.write("\n")


def read_embeddings(path):
    ids, problem_ids, defective, vectors = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            ids.append(obj["id"])
            problem_ids.append(obj["problem_id"])
            defective.append(obj["is_defective"])
            vectors.append(obj["vector"])
    return EmbeddingSet(
        tuple(ids),
        tuple(problem_ids),
        np.array(defective, dtype=bool),
        np.asarray(vectors, dtype=np.float64),
    )
