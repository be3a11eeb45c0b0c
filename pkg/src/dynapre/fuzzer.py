"""Coverage-guided mutation fuzzing for MiniLang programs.

An input earns a place in the test suite iff it covers a branch edge nobody
covered before or ends with a status nobody produced before; retained inputs
seed further mutation, round-robin.  The whole run is a pure function of
(program, budget, rng_seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .minilang import DEFAULT_STEP_LIMIT, STATUSES, execute

BUILTIN_SEEDS = ("", "0", "1 2 3")
DEFAULT_BUDGET = 5_000

# Stop after this many consecutive iterations without an admission; keeps
# programs that hang on every input (step-limit mutants) from burning the
# whole budget at 100k steps per execution.
DEFAULT_STALL = 1_000

_PERTURBATIONS = (1, -1, 2, -2, 16, -16, 256, -256)


@dataclass(frozen=True)
class TestCase:
    input: str
    output: str
    status: str


@dataclass(frozen=True)
class TestSuite:
    cases: tuple
    covered_edges: frozenset
    program_id: str = ""

    def statuses(self):
        return {c.status for c in self.cases}


@dataclass
class SeedPool:
    seeds: list = field(default_factory=list)  # (input, covered_edges) pairs
    rng_seed: int = 0


def _random_int_token(rng):
    # Mostly small magnitudes; occasionally up to ~1000.
    exponent = int(rng.integers(0, 11))
    value = int(rng.integers(0, 2**exponent + 1))
    if rng.integers(0, 4) == 0:
        value = -value
    return str(value)


def mutate_input(input_text, rng):
    """One mutation operator, drawn uniformly; no-op where inapplicable."""
    tokens = input_text.split()
    op = int(rng.integers(0, 6))
    if op == 0:  # append
        tokens.append(_random_int_token(rng))
    elif not tokens:
        pass  # delete/replace/duplicate/perturb/negate degrade to no-ops
    elif op == 1:  # delete
        del tokens[int(rng.integers(0, len(tokens)))]
    elif op == 2:  # replace
        tokens[int(rng.integers(0, len(tokens)))] = _random_int_token(rng)
    elif op == 3:  # duplicate
        i = int(rng.integers(0, len(tokens)))
        tokens.insert(i, tokens[i])
    elif op == 4:  # arithmetic perturbation
        i = int(rng.integers(0, len(tokens)))
        delta = _PERTURBATIONS[int(rng.integers(0, len(_PERTURBATIONS)))]
        tokens[i] = str(int(tokens[i]) + delta)
    else:  # negate
        i = int(rng.integers(0, len(tokens)))
        tokens[i] = str(-int(tokens[i]))
    return " ".join(tokens)


def fuzz_program(
    program,
    budget,
    rng_seed,
    program_id="",
    step_limit=DEFAULT_STEP_LIMIT,
    stall=DEFAULT_STALL,
):
    """Fuzz one program and return its deterministic TestSuite.

    Runs at most `budget` iterations.  Iterations that re-draw an input seen
    earlier are counted but not re-executed.  Zero-branch programs get
    exactly the first built-in seed execution.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")

    if program.branch_count == 0:
        outcome = execute(program, BUILTIN_SEEDS[0], step_limit)
        case = TestCase(BUILTIN_SEEDS[0], outcome.output, outcome.status)
        return TestSuite((case,), frozenset(outcome.covered_edges), program_id)

    rng = np.random.default_rng(rng_seed)
    pool = SeedPool(rng_seed=rng_seed)
    all_edges = frozenset(range(program.branch_count))
    covered = set()
    statuses_seen = set()
    cases = []
    tried = set()
    since_admission = 0
    mutation_round = 0

    for iteration in range(budget):
        if iteration < len(BUILTIN_SEEDS):
            candidate = BUILTIN_SEEDS[iteration]
        else:
            base = pool.seeds[mutation_round % len(pool.seeds)][0]
            mutation_round += 1
            candidate = mutate_input(base, rng)

        if candidate in tried:
            since_admission += 1
            if since_admission >= stall:
                break
            continue
        tried.add(candidate)

        outcome = execute(program, candidate, step_limit)
        new_edges = outcome.covered_edges - covered
        new_status = outcome.status not in statuses_seen
        if new_edges or new_status:
            cases.append(TestCase(candidate, outcome.output, outcome.status))
            pool.seeds.append((candidate, outcome.covered_edges))
            covered |= outcome.covered_edges
            statuses_seen.add(outcome.status)
            since_admission = 0
        else:
            since_admission += 1

        if covered == all_edges and len(statuses_seen) == len(STATUSES):
            break
        if since_admission >= stall:
            break

    return TestSuite(tuple(cases), frozenset(covered), program_id)


def replay_verify(program, suite, step_limit=DEFAULT_STEP_LIMIT):
    """True iff every recorded case reproduces its output and status."""
    for case in suite.cases:
        outcome = execute(program, case.input, step_limit)
        if outcome.output != case.output or outcome.status != case.status:
            return False
    return True
