"""Pre-training in miniature: alternating SIM -> DIM -> DID with an EMA
teacher and a FIFO negative queue.

Run:  python3 demos/04_pretrain_tiny.py   (about a minute)
"""

import numpy as np

from dynapre.corpus import generate_corpus, split_by_problem
from dynapre.model import ModelConfig
from dynapre.trainer import TrainConfig, Trainer

records = generate_corpus(8, 4, 1, rng_seed=0, fuzz_budget=800)
split = split_by_problem(records, 0.25, rng_seed=0)

# A deliberately tiny encoder so the demo runs fast; the desk-scale default
# is D=64 with 4 layers (see TrainConfig / ModelConfig defaults).
model_config = ModelConfig(dim=16, layers=2, heads=2, ffn_mult=2, max_len=192)
config = TrainConfig(steps=60, batch_size=8, lr=1e-3, queue_capacity=64, rng_seed=0)

trainer = Trainer(records, split, config, model_config=model_config)
print(f"vocabulary: {trainer.vocab.size} tokens; "
      f"training on {len(trainer.records)} records\n")

for _ in range(config.steps):
    entry = trainer.train_step()
    if entry["step"] % 12 == 0:
        print(f"step {entry['step']:3d}  {entry['objective']:3}  "
              f"loss={entry['loss']:.4f}  queue={len(trainer.queue)}")

# The objectives alternate in a fixed order; each loss should be trending
# down on its own subsequence.
for name in ("sim", "dim", "did"):
    series = [m["loss"] for m in trainer.metrics if m["objective"] == name]
    print(f"\n{name}: first={series[0]:.4f} last={series[-1]:.4f} "
          f"(n={len(series)})")

# The teacher is the EMA shadow of the student: never updated by gradients,
# always trailing the student by the momentum factor.
state = trainer.encoder.state
gap = sum(float(np.sum((state.teacher[k] - state.params[k]) ** 2)) for k in state.params)
print(f"\n||teacher - student||^2 after training: {gap:.6f} (momentum "
      f"{config.momentum})")
