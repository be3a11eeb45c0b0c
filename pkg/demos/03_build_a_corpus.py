"""Corpus synthesis: variants, mutants, prompts, files, and splits.

Run:  python3 demos/03_build_a_corpus.py
"""

import tempfile
from pathlib import Path

from dynapre.corpus import (
    generate_corpus,
    read_corpus,
    render_testcase_prompt,
    split_by_problem,
    write_corpus,
)
from dynapre.minilang import execute, parse

# Each problem is one template instance with randomized constants: one base
# program, semantics-preserving variants, and behavior-changing mutants.
records = generate_corpus(
    n_problems=4, variants_per_problem=4, mutants_per_problem=2,
    rng_seed=0, fuzz_budget=1500,
)
print(f"{len(records)} records over 4 problems")

problem = records[0].problem_id
group = [r for r in records if r.problem_id == problem]
print(f"\nproblem {problem}:")
for r in group:
    tag = "DEFECTIVE" if r.is_defective else "clean"
    print(f"  {r.sample_id:34} {r.variant_kind:18} {tag:9} "
          f"{len(r.suite.cases)} cases")

# Non-mutant variants of a problem agree on every recorded input; mutants
# disagree with their base on at least one.
base = group[0]
renamed = next(r for r in group if r.variant_kind == "renamed")
mutant = next(r for r in group if r.is_defective)
base_prog, mutant_prog = parse(base.source), parse(mutant.source)
recorded = [c.input for c in base.suite.cases] + [c.input for c in mutant.suite.cases]
witness = next(
    i for i in recorded
    if execute(base_prog, i).output != execute(mutant_prog, i).output
    or execute(base_prog, i).status != execute(mutant_prog, i).status
)
print(f"\non recorded input {witness!r}:")
for r in (base, renamed, mutant):
    out = execute(parse(r.source), witness)
    print(f"  {r.variant_kind:18} -> {out.output!r} ({out.status})")

# Test cases render as the natural-language prompt the encoder consumes.
print("\nprompt for the base program:")
print(" ", render_testcase_prompt(base.suite, max_cases=3))

# JSONL persistence round-trips exactly; splits are by problem so evaluation
# problems are never seen in pre-training.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "corpus.jsonl"
    write_corpus(records, path)
    assert read_corpus(path) == records
    print(f"\nwrote and re-read {path.name}: {len(records)} records intact")

split = split_by_problem(records, eval_fraction=0.25, rng_seed=0)
print(f"split: train={sorted(split.train_problem_ids)} "
      f"eval={sorted(split.eval_problem_ids)}")
