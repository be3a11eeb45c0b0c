import os, time
os.environ.setdefault("OMP_NUM_THREADS", "2")
import numpy as np
from dynapre.corpus import generate_corpus, split_by_problem
from dynapre.trainer import TrainConfig, Trainer, train
from dynapre.evalkit import evaluate_checkpoint, ablation_run

t0 = time.perf_counter()
records = generate_corpus(12, 6, 2, rng_seed=0, fuzz_budget=2000)
print(f"corpus: {len(records)} records in {time.perf_counter()-t0:.1f}s", flush=True)
split = split_by_problem(records, 0.25, rng_seed=0)
print("eval problems:", sorted(split.eval_problem_ids), flush=True)

base = TrainConfig(steps=300, batch_size=32, lr=3e-4, rng_seed=0, queue_capacity=256)
# timing probe
tr = Trainer(records, split, base)
t0 = time.perf_counter()
for _ in range(6):
    e = tr.train_step()
    print(f"  step {e['step']} {e['objective']}: loss={e['loss']:.4f} ({time.perf_counter()-t0:.2f}s cum)", flush=True)
per_step = (time.perf_counter()-t0)/6
print(f"~{per_step:.2f}s/step -> 2000 steps ~ {per_step*2000/60:.0f} min", flush=True)

for mode in ["mlm-only", "full"]:
    from dynapre.evalkit import config_for_mode
    cfg = config_for_mode(base, mode)
    t0 = time.perf_counter()
    ckpt = train(records, split, cfg)
    metrics, r = evaluate_checkpoint(ckpt, records, split)
    print(f"{mode}: {metrics} (R={r}) in {time.perf_counter()-t0:.0f}s", flush=True)
