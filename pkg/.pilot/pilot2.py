import os, sys, time, json
os.environ["OMP_NUM_THREADS"] = "2"
import numpy as np
from dynapre.corpus import generate_corpus, split_by_problem
from dynapre.trainer import TrainConfig, train
from dynapre.evalkit import evaluate_checkpoint, config_for_mode

t0 = time.perf_counter()
records = generate_corpus(12, 6, 2, rng_seed=0, fuzz_budget=2000)
split = split_by_problem(records, 0.25, rng_seed=0)
print(f"corpus in {time.perf_counter()-t0:.0f}s; eval={sorted(split.eval_problem_ids)}", flush=True)

base = TrainConfig(steps=600, batch_size=32, lr=3e-4, rng_seed=0, queue_capacity=256)
out = {}
for mode in ["mlm-only", "full", "wo-dim", "wo-did"]:
    cfg = config_for_mode(base, mode)
    t0 = time.perf_counter()
    ckpt = train(records, split, cfg)
    sims = [m["loss"] for m in ckpt.metrics if m["objective"]=="sim"]
    metrics, r = evaluate_checkpoint(ckpt, records, split)
    out[mode] = metrics
    print(f"{mode}: {json.dumps(metrics)} R={r} sim0={sims[0]:.3f} simEnd={np.mean(sims[-10:]):.3f} ({time.perf_counter()-t0:.0f}s)", flush=True)
print(json.dumps(out, indent=1))
