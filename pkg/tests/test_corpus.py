"""Corpus generation, prompt rendering, persistence, and split contracts."""

import json

import numpy as np
import pytest

from dynapre import corpus as corpus_mod
from dynapre import fuzzer
from dynapre.corpus import (
    FormatError,
    GenerationError,
    generate_corpus,
    read_corpus,
    read_split,
    render_testcase_prompt,
    split_by_problem,
    write_corpus,
    write_split,
)
from dynapre.minilang import execute, parse, serialize_ast
from dynapre.fuzzer import replay_verify


@pytest.fixture(scope="module")
def small_corpus():
    return generate_corpus(14, 4, 2, rng_seed=0, fuzz_budget=1500)


class TestGenerateCorpus:
    def test_counts(self, small_corpus):
        assert len(small_corpus) == 14 * 6
        defective = [r for r in small_corpus if r.is_defective]
        assert len(defective) == 14 * 2

    def test_single_problem_counts(self):
        records = generate_corpus(1, 3, 1, rng_seed=5, fuzz_budget=500)
        assert len(records) == 4
        assert sum(r.is_defective for r in records) == 1

    def test_defective_iff_mutant_kind(self, small_corpus):
        for r in small_corpus:
            assert r.is_defective == r.variant_kind.startswith("mutant-")

    def test_ast_text_matches_source(self, small_corpus):
        for r in small_corpus:
            assert r.ast_text == serialize_ast(parse(r.source))

    def test_every_record_has_fuzzed_suite(self, small_corpus):
        for r in small_corpus:
            assert len(r.suite.cases) >= 1
            assert r.suite.program_id == r.sample_id

    def test_suites_replay(self, small_corpus):
        for r in small_corpus:
            assert replay_verify(parse(r.source), r.suite)

    def test_variants_agree_on_union_of_suite_inputs(self, small_corpus):
        by_problem = {}
        for r in small_corpus:
            by_problem.setdefault(r.problem_id, []).append(r)
        for problem_records in by_problem.values():
            healthy = [r for r in problem_records if not r.is_defective]
            inputs = sorted({c.input for r in healthy for c in r.suite.cases})
            programs = [parse(r.source) for r in healthy]
            for text in inputs:
                outcomes = [(execute(p, text).output, execute(p, text).status) for p in programs]
                assert len(set(outcomes)) == 1, f"variants disagree on {text!r}"

    def test_mutants_diverge_on_recorded_input(self, small_corpus):
        by_problem = {}
        for r in small_corpus:
            by_problem.setdefault(r.problem_id, []).append(r)
        for problem_records in by_problem.values():
            base = next(r for r in problem_records if r.variant_kind == "base")
            base_prog = parse(base.source)
            for r in problem_records:
                if not r.is_defective:
                    continue
                mutant_prog = parse(r.source)
                inputs = {c.input for c in base.suite.cases} | {c.input for c in r.suite.cases}
                diverged = any(
                    (execute(base_prog, i).output, execute(base_prog, i).status)
                    != (execute(mutant_prog, i).output, execute(mutant_prog, i).status)
                    for i in inputs
                )
                assert diverged, f"mutant {r.sample_id} matches its base everywhere"

    def test_same_template_problems_behave_differently(self, small_corpus):
        bases = [r for r in small_corpus if r.variant_kind == "base"]
        by_template = {}
        for r in bases:
            by_template.setdefault(r.problem_id.split("-", 1)[1], []).append(r)
        for group in by_template.values():
            if len(group) < 2:
                continue
            a, b = group[0], group[1]
            pa, pb = parse(a.source), parse(b.source)
            inputs = {c.input for c in a.suite.cases} | {"4 9", "7", "12 3 5"}
            assert any(execute(pa, i).output != execute(pb, i).output for i in inputs)

    def test_determinism(self):
        a = generate_corpus(3, 3, 1, rng_seed=9, fuzz_budget=500)
        b = generate_corpus(3, 3, 1, rng_seed=9, fuzz_budget=500)
        assert a == b

    def test_op_swap_mutant_example(self):
        # A plus-to-minus mutant is kept because outputs differ on "2 3".
        base = parse("a = read ( ) ;\nb = read ( ) ;\nprint ( a + b ) ;")
        mutant = parse("a = read ( ) ;\nb = read ( ) ;\nprint ( a - b ) ;")
        assert execute(base, "2 3").output == "5"
        assert execute(mutant, "2 3").output == "-1"
        inputs = ["2 3"]
        assert corpus_mod._behavior_on(base, inputs, 100_000) != corpus_mod._behavior_on(
            mutant, inputs, 100_000
        )

    def test_exhausted_template_constants_raise(self):
        with pytest.raises(GenerationError):
            generate_corpus(12 * 6 + 1, 1, 0, rng_seed=0, fuzz_budget=100)


class TestRenderPrompt:
    def _suite(self, cases):
        return fuzzer.TestSuite(tuple(fuzzer.TestCase(*c) for c in cases), frozenset())

    def test_single_case(self):
        suite = self._suite([("2 3", "5", "OK")])
        assert render_testcase_prompt(suite, 4) == "Input is: 2 3 ; Output is: 5"

    def test_two_cases_joined_by_sep(self):
        suite = self._suite([("2 3", "5", "OK"), ("0 0", "0", "OK")])
        assert (
            render_testcase_prompt(suite, 4)
            == "Input is: 2 3 ; Output is: 5<SEP>Input is: 0 0 ; Output is: 0"
        )

    def test_empty_input_renders_empty_string(self):
        suite = self._suite([("", "0", "OK")])
        assert render_testcase_prompt(suite, 1) == "Input is:  ; Output is: 0"

    def test_truncates_to_max_cases(self):
        suite = self._suite([(str(i), str(i), "OK") for i in range(6)])
        assert render_testcase_prompt(suite, 2).count("<SEP>") == 1

    def test_max_cases_validation(self):
        with pytest.raises(ValueError):
            render_testcase_prompt(self._suite([]), 0)


class TestCorpusIO:
    def test_round_trip(self, small_corpus, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(small_corpus, path)
        assert read_corpus(path) == list(small_corpus)

    def test_round_trip_byte_stable(self, small_corpus, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_corpus(small_corpus, p1)
        write_corpus(read_corpus(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert read_corpus(path) == []

    def test_truncated_last_line(self, small_corpus, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(small_corpus[:3], path)
        data = path.read_text()
        path.write_text(data[: len(data) // 2])
        with pytest.raises(FormatError) as info:
            read_corpus(path)
        assert info.value.line >= 1

    def test_wrong_keys(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text(json.dumps({"sample_id": "x"}) + "\n")
        with pytest.raises(FormatError) as info:
            read_corpus(path)
        assert info.value.line == 1

    def test_keys_exactly_as_specified(self, small_corpus, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(small_corpus[:1], path)
        obj = json.loads(path.read_text().splitlines()[0])
        assert list(obj) == [
            "sample_id", "problem_id", "variant_kind", "is_defective",
            "source", "ast_text", "suite",
        ]
        assert list(obj["suite"]) == ["cases", "covered_edges"]
        assert list(obj["suite"]["cases"][0]) == ["input", "output", "status"]


class TestSplit:
    def test_sizes_and_disjointness(self, small_corpus):
        split = split_by_problem(small_corpus, 0.25, rng_seed=1)
        assert len(split.eval_problem_ids) == int(np.ceil(14 * 0.25))
        assert not (split.train_problem_ids & split.eval_problem_ids)
        assert len(split.train_problem_ids) + len(split.eval_problem_ids) == 14

    def test_determinism(self, small_corpus):
        a = split_by_problem(small_corpus, 0.25, rng_seed=7)
        b = split_by_problem(small_corpus, 0.25, rng_seed=7)
        assert a == b

    def test_degenerate_split_warns(self, small_corpus):
        one_problem = [r for r in small_corpus if r.problem_id == small_corpus[0].problem_id]
        with pytest.warns(UserWarning):
            split = split_by_problem(one_problem, 0.5, rng_seed=0)
        assert len(split.eval_problem_ids) == 1
        assert not split.train_problem_ids

    def test_fraction_validation(self, small_corpus):
        with pytest.raises(ValueError):
            split_by_problem(small_corpus, 0.0, rng_seed=0)

    def test_file_round_trip(self, small_corpus, tmp_path):
        split = split_by_problem(small_corpus, 0.3, rng_seed=2)
        path = tmp_path / "split.json"
        write_split(split, path)
        assert read_split(path) == split
