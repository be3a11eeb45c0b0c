"""A miniature ablation: train one model per mode, tabulate the metrics.

The interesting comparisons are `full` (all three objectives) against
`mlm-only`, `wo-dim`, and `wo-did`. At this demo scale the numbers are
noisy; the acceptance suite runs the full desk-scale protocol.

Run:  python3 demos/06_ablation_mini.py   (a few minutes)
"""

from dynapre.corpus import generate_corpus, split_by_problem
from dynapre.evalkit import ablation_run, render_report_table
from dynapre.model import ModelConfig
from dynapre.trainer import TrainConfig

records = generate_corpus(8, 5, 1, rng_seed=0, fuzz_budget=1000)
split = split_by_problem(records, 0.25, rng_seed=0)

model_config = ModelConfig(dim=16, layers=2, heads=2, ffn_mult=2, max_len=192)
base = TrainConfig(steps=150, batch_size=8, lr=1e-3, queue_capacity=64, rng_seed=0)

report = ablation_run(
    records, split, base, ["full", "mlm-only", "wo-dim", "wo-did"],
    model_config=model_config,
)
print(render_report_table(report))
print(f"(held-out problems: {sorted(split.eval_problem_ids)}; "
      f"clone truncation R={report['truncate_r']})")
