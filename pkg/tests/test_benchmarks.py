"""Shipped fuzzing benchmark: reachability table and coverage floor."""

from itertools import product

import pytest

from dynapre.benchmarks import BENCH_SOURCES, REACHABLE_EDGES, bench_programs
from dynapre.fuzzer import fuzz_program, replay_verify
from dynapre.minilang import execute, parse

# Enumeration grid: covers every constant band the benchmark programs test.
ORACLE_VALUES = (
    "-256", "-101", "-100", "-7", "-2", "-1", "0", "1", "2", "3", "5", "7",
    "11", "100", "101", "256",
)


def enumerate_reachable(program, max_tokens=3):
    """Brute-force reachable edges over the small-input grid."""
    covered = set()
    for n in range(max_tokens + 1):
        for combo in product(ORACLE_VALUES, repeat=n):
            covered |= execute(program, " ".join(combo)).covered_edges
    return frozenset(covered)


class TestReachabilityTable:
    def test_ten_programs_with_two_to_six_branches(self):
        programs = bench_programs()
        assert len(programs) == 10
        for program in programs.values():
            assert 2 <= program.branch_count <= 6

    @pytest.mark.parametrize("name", sorted(BENCH_SOURCES))
    def test_shipped_table_matches_enumeration_oracle(self, name):
        program = parse(BENCH_SOURCES[name])
        assert enumerate_reachable(program) == REACHABLE_EDGES[name]

    def test_unreachable_edge_is_really_static_dead(self):
        program = parse(BENCH_SOURCES["unreachable_if"])
        assert program.branch_count == 4
        assert 0 not in REACHABLE_EDGES["unreachable_if"]


class TestFuzzerOnBenchmark:
    @pytest.mark.parametrize("name", sorted(BENCH_SOURCES))
    def test_coverage_and_replay(self, name):
        program = parse(BENCH_SOURCES[name])
        suite = fuzz_program(program, 5000, rng_seed=0, program_id=name)
        reachable = REACHABLE_EDGES[name]
        covered = suite.covered_edges & reachable
        assert len(covered) >= 0.9 * len(reachable)
        assert replay_verify(program, suite)
