"""Frozen-embedding evaluation: code search mAP, clone mAP@R, defect probe.

Run:  python3 demos/05_evaluate_embeddings.py   (about a minute)
"""

import numpy as np

from dynapre.corpus import generate_corpus, split_by_problem
from dynapre.evalkit import (
    clone_truncation_r,
    embed_corpus,
    linear_probe_defect,
    mean_ap,
)
from dynapre.model import ModelConfig
from dynapre.trainer import TrainConfig, train

records = generate_corpus(8, 4, 1, rng_seed=0, fuzz_budget=800)
split = split_by_problem(records, 0.25, rng_seed=0)

model_config = ModelConfig(dim=16, layers=2, heads=2, ffn_mult=2, max_len=192)
config = TrainConfig(steps=90, batch_size=8, lr=1e-3, queue_capacity=64, rng_seed=0)
checkpoint = train(records, split, config, model_config=model_config)

# Embeddings come from code alone: suites are never read at embedding time.
eval_records = [r for r in records if r.problem_id in split.eval_problem_ids]
train_records = [r for r in records if r.problem_id in split.train_problem_ids]
eval_set = embed_corpus(checkpoint, eval_records)
train_set = embed_corpus(checkpoint, train_records)
print(f"embedded {len(eval_set.ids)} held-out records "
      f"(unit rows: {np.allclose(np.linalg.norm(eval_set.vectors, axis=1), 1.0)})")

# Code search: every sample queries the rest; relevant = same problem, both
# clean. Queries without relevant candidates (mutants) count as AP = 0.
search = mean_ap(eval_set)
print(f"\ncode_search_map = {search.mean:.4f} over {len(search.average_precisions)} queries")

# Clone protocol truncates each ranking to R, scaled to corpus size.
r = clone_truncation_r(eval_set)
clone = mean_ap(eval_set, truncate_r=r)
print(f"clone_map_at_r  = {clone.mean:.4f} (R={r})")

# Defect probe: logistic regression on frozen vectors, threshold 0.5.
accuracy = linear_probe_defect(train_set, eval_set)
majority = max(np.mean(eval_set.is_defective), 1 - np.mean(eval_set.is_defective))
print(f"defect_acc      = {accuracy:.4f} (majority baseline {majority:.4f})")
