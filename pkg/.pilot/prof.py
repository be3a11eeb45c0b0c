import cProfile, pstats, io, os
import numpy as np
from dynapre.corpus import generate_corpus, split_by_problem
from dynapre.trainer import TrainConfig, Trainer

records = generate_corpus(12, 6, 2, rng_seed=0, fuzz_budget=300)
split = split_by_problem(records, 0.25, rng_seed=0)
base = TrainConfig(steps=300, batch_size=32, lr=3e-4, rng_seed=0, queue_capacity=256)
tr = Trainer(records, split, base)
for _ in range(3):
    tr.train_step()  # warm
pr = cProfile.Profile()
pr.enable()
for _ in range(6):
    tr.train_step()
pr.disable()
s = io.StringIO()
pstats.Stats(pr, stream=s).sort_stats("cumulative").print_stats(28)
print(s.getvalue())
