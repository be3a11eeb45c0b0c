"""Synthetic multi-variant corpus: generation, prompts, persistence, splits.

Each problem is a (template, constants) instance; its records are one base
program, semantics-preserving variants, and behavior-changing mutants, each
carrying a fuzzed test suite.  Functional equivalence of non-mutant variants
and behavioral divergence of mutants hold by construction and are re-checked
by the test suite through the interpreter.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import templates as tpl
from .fuzzer import DEFAULT_BUDGET, TestCase, TestSuite, fuzz_program
from .minilang import execute, parse, serialize_ast, serialize_source

SEP_TOKEN = "<SEP>"
DEFAULT_MAX_CASES = 4

VARIANT_KINDS = ("renamed", "loop-restructured", "algebraic", "dead-code")
MUTANT_KINDS = ("mutant-off-by-one", "mutant-op-swap")
MUTANT_REDRAWS = 20


class GenerationError(RuntimeError):
    pass


class FormatError(ValueError):
    """Malformed corpus file; carries the 1-based offending line number."""

    def __init__(self, message, line):
        super().__init__(f"{message} (line {line})")
        self.line = line


@dataclass(frozen=True)
class CorpusRecord:
    sample_id: str
    problem_id: str
    variant_kind: str
    is_defective: bool
    source: str
    ast_text: str
    suite: TestSuite


@dataclass(frozen=True)
class SplitSpec:
    train_problem_ids: frozenset
    eval_problem_ids: frozenset
    rng_seed: int


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _behavior_on(program, inputs, step_limit):
    return tuple(
        (o.output, o.status) for o in (execute(program, i, step_limit) for i in inputs)
    )


def _variant_ast(base_ast, kind, rng):
    if kind == "renamed":
        return tpl.rename_variables(base_ast, rng)
    if kind == "loop-restructured":
        restructured = tpl.loop_restructure(base_ast, rng)
    elif kind == "algebraic":
        restructured = tpl.algebraic_rewrite(base_ast, rng)
    elif kind == "dead-code":
        restructured = tpl.dead_code_insert(base_ast, rng)
    else:
        raise ValueError(kind)
    return tpl.rename_variables(restructured, rng)


def generate_corpus(
    n_problems,
    variants_per_problem,
    mutants_per_problem,
    rng_seed,
    fuzz_budget=DEFAULT_BUDGET,
    step_limit=None,
):
    """Emit n_problems x (variants + mutants) records, each with a suite.

    Deterministic in all arguments.  Raises GenerationError when a template
    runs out of distinct constants or a behavior-changing mutant cannot be
    drawn within the redraw allowance.
    """
    from .minilang import DEFAULT_STEP_LIMIT

    if n_problems < 1:
        raise ValueError("n_problems must be >= 1")
    if variants_per_problem < 1:
        raise ValueError("variants_per_problem must be >= 1")
    step_limit = DEFAULT_STEP_LIMIT if step_limit is None else step_limit

    records = []
    for prob_idx in range(n_problems):
        template = tpl.TEMPLATES[prob_idx % len(tpl.TEMPLATES)]
        instance = prob_idx // len(tpl.TEMPLATES)
        param_rng = np.random.default_rng([rng_seed, 1, prob_idx % len(tpl.TEMPLATES)])
        param_order = param_rng.permutation(len(template.params))
        if instance >= len(template.params):
            raise GenerationError(
                f"template {template.name} has only {len(template.params)} "
                f"constant sets; cannot build problem #{prob_idx}"
            )
        params = template.params[param_order[instance]]

        problem_id = f"p{prob_idx:03d}-{template.name}"
        fuzz_seed = [rng_seed, 2, prob_idx]

        base_ast = template.build(params)
        base_source = serialize_source(base_ast)
        base_program = parse(base_source)

        def make_record(sample_tag, kind, program, source):
            sample_id = f"{problem_id}/{sample_tag}"
            suite = fuzz_program(
                program, fuzz_budget, fuzz_seed, program_id=sample_id, step_limit=step_limit
            )
            return CorpusRecord(
                sample_id=sample_id,
                problem_id=problem_id,
                variant_kind=kind,
                is_defective=kind.startswith("mutant-"),
                source=source,
                ast_text=serialize_ast(program),
                suite=suite,
            )

        base_record = make_record("v00-base", "base", base_program, base_source)
        records.append(base_record)
        base_inputs = [c.input for c in base_record.suite.cases]
        base_behavior = _behavior_on(base_program, base_inputs, step_limit)

        applicable = [
            k
            for k in VARIANT_KINDS
            if k != "loop-restructured" or tpl.has_while(base_ast)
        ]
        for v_idx in range(1, variants_per_problem):
            kind = applicable[(v_idx - 1) % len(applicable)]
            rng = np.random.default_rng([rng_seed, 3, prob_idx, v_idx])
            ast = _variant_ast(base_ast, kind, rng)
            source = serialize_source(ast)
            program = parse(source)
            if _behavior_on(program, base_inputs, step_limit) != base_behavior:
                raise GenerationError(
                    f"variant {kind} of {problem_id} diverged from its base"
                )
            records.append(make_record(f"v{v_idx:02d}-{kind}", kind, program, source))

        for m_idx in range(mutants_per_problem):
            kind = MUTANT_KINDS[m_idx % len(MUTANT_KINDS)]
            mutator = tpl.mutate_off_by_one if kind == "mutant-off-by-one" else tpl.mutate_op_swap
            accepted = None
            for draw in range(MUTANT_REDRAWS):
                rng = np.random.default_rng([rng_seed, 4, prob_idx, m_idx, draw])
                ast = mutator(base_ast, rng)
                source = serialize_source(ast)
                program = parse(source)
                if _behavior_on(program, base_inputs, step_limit) != base_behavior:
                    accepted = (program, source)
                    break
            if accepted is None:
                raise GenerationError(
                    f"no behavior-changing {kind} found for {problem_id} "
                    f"within {MUTANT_REDRAWS} draws"
                )
            records.append(make_record(f"m{m_idx:02d}-{kind}", kind, *accepted))

    return records


# ---------------------------------------------------------------------------
# Test-case prompt rendering
# ---------------------------------------------------------------------------


def render_testcase_prompt(suite, max_cases=DEFAULT_MAX_CASES):
    """First max_cases cases as `Input is: I ; Output is: O`, <SEP>-joined."""
    if max_cases < 1:
        raise ValueError("max_cases must be >= 1")
    rendered = [
        f"Input is: {case.input} ; Output is: {case.output}"
        for case in suite.cases[:max_cases]
    ]
    return SEP_TOKEN.join(rendered)


# ---------------------------------------------------------------------------
# Persistence (JSON Lines)
# ---------------------------------------------------------------------------

_RECORD_KEYS = ("sample_id", "problem_id", "variant_kind", "is_defective", "source", "ast_text", "suite")
_SUITE_KEYS = ("cases", "covered_edges")
_CASE_KEYS = ("input", "output", "status")


def record_to_obj(record):
    return {
        "sample_id": record.sample_id,
        "problem_id": record.problem_id,
        "variant_kind": record.variant_kind,
        "is_defective": record.is_defective,
        "source": record.source,
        "ast_text": record.ast_text,
        "suite": {
            "cases": [
                {"input": c.input, "output": c.output, "status": c.status}
                for c in record.suite.cases
            ],
            "covered_edges": sorted(record.suite.covered_edges),
        },
    }


def write_corpus(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_obj(record), sort_keys=False))
            fh.write("\n")


def _obj_to_record(obj, line):
    if not isinstance(obj, dict) or set(obj) != set(_RECORD_KEYS):
        raise FormatError("record keys do not match the corpus schema", line)
    suite_obj = obj["suite"]
    if not isinstance(suite_obj, dict) or set(suite_obj) != set(_SUITE_KEYS):
        raise FormatError("suite keys do not match the corpus schema", line)
    cases = []
    for case_obj in suite_obj["cases"]:
        if not isinstance(case_obj, dict) or set(case_obj) != set(_CASE_KEYS):
            raise FormatError("case keys do not match the corpus schema", line)
        cases.append(TestCase(case_obj["input"], case_obj["output"], case_obj["status"]))
    suite = TestSuite(tuple(cases), frozenset(suite_obj["covered_edges"]), obj["sample_id"])
    return CorpusRecord(
        sample_id=obj["sample_id"],
        problem_id=obj["problem_id"],
        variant_kind=obj["variant_kind"],
        is_defective=obj["is_defective"],
        source=obj["source"],
        ast_text=obj["ast_text"],
        suite=suite,
    )


def read_corpus(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip() == "":
                raise FormatError("blank line in corpus file", line_no)
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise FormatError(f"invalid JSON: {err.msg}", line_no) from err
            records.append(_obj_to_record(obj, line_no))
    return records


# ---------------------------------------------------------------------------
# Problem-level splits
# ---------------------------------------------------------------------------


def split_by_problem(records, eval_fraction, rng_seed):
    """Shuffle problems, assign the last ceil(fraction*n) to evaluation."""
    if not 0 < eval_fraction < 1:
        raise ValueError("eval_fraction must be in (0, 1)")
    problems = sorted({r.problem_id for r in records})
    rng = np.random.default_rng(rng_seed)
    order = [problems[i] for i in rng.permutation(len(problems))]
    n_eval = int(np.ceil(len(problems) * eval_fraction))
    eval_ids = frozenset(order[len(order) - n_eval :])
    train_ids = frozenset(order[: len(order) - n_eval])
    if not train_ids:
        warnings.warn("degenerate split: no training problems", stacklevel=2)
    return SplitSpec(train_ids, eval_ids, rng_seed)


def write_split(split, path):
    obj = {
        "train_problem_ids": sorted(split.train_problem_ids),
        "eval_problem_ids": sorted(split.eval_problem_ids),
        "rng_seed": split.rng_seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_split(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as err:
            raise FormatError(f"invalid JSON: {err.msg}", err.lineno) from err
    try:
        return SplitSpec(
            frozenset(obj["train_problem_ids"]),
            frozenset(obj["eval_problem_ids"]),
            obj["rng_seed"],
        )
    except (KeyError, TypeError) as err:
        raise FormatError("split file keys do not match the schema", 1) from err
