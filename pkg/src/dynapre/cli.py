"""dynapre command line: corpus generation, fuzzing, pre-training, embedding,
evaluation, and ablation, with reproducibility manifests.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 training abort.
Diagnostics go to stderr; machine-readable output goes only to files.  The
DYNAPRE_THREADS variable (default 1, for bit-reproducibility) caps numeric
thread pools and must be applied before numpy loads, so heavyweight imports
happen inside the command handlers.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

from . import __version__

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINING = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _apply_thread_cap():
    threads = os.environ.get("DYNAPRE_THREADS", "1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, threads)


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(out_target, subcommand, resolved_config, input_paths, seeds, started):
    """Atomic run manifest next to the produced artifact."""
    if os.path.isdir(out_target):
        path = os.path.join(out_target, "run-manifest.json")
    else:
        path = f"{out_target}.manifest.json"
    manifest = {
        "subcommand": subcommand,
        "config": resolved_config,
        "input_hashes": {p: _sha256_file(p) for p in input_paths},
        "tool_version": __version__,
        "rng_seeds": seeds,
        "duration_s": round(time.monotonic() - started, 3),
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _log(message):
    print(message, file=sys.stderr)


def _load_train_config(path, seed_override):
    from .trainer import TrainConfig

    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    config = TrainConfig.from_dict(obj)
    if seed_override is not None:
        config = TrainConfig.from_dict({**config.to_dict(), "rng_seed": seed_override})
    return config


def _model_config_from_args(args, pooling):
    from .model import ModelConfig

    return ModelConfig(
        dim=args.dim,
        layers=args.layers,
        heads=args.heads,
        ffn_mult=args.ffn_mult,
        max_len=args.model_max_len,
        pooling=pooling,
        dropout=args.dropout,
    )


def _add_model_flags(parser):
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--layers", type=int, default=4)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--ffn-mult", type=int, default=4, dest="ffn_mult")
    parser.add_argument("--model-max-len", type=int, default=256, dest="model_max_len")
    parser.add_argument("--dropout", type=float, default=0.1)


def build_parser():
    parser = _Parser(prog="dynapre", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dynapre {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-corpus", help="generate the multi-variant program corpus")
    p.add_argument("--problems", type=int, required=True)
    p.add_argument("--variants", type=int, required=True)
    p.add_argument("--mutants", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--fuzz-budget", type=int, default=5000, dest="fuzz_budget")
    p.add_argument("--split-out", dest="split_out")
    p.add_argument("--eval-fraction", type=float, default=0.25, dest="eval_fraction")

    p = sub.add_parser("fuzz", help="re-fuzz corpus programs and attach suites")
    p.add_argument("--corpus", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (defaults to rewriting --corpus)")

    p = sub.add_parser("pretrain", help="pre-train the encoder")
    p.add_argument("--config", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config rng_seed")
    _add_model_flags(p)

    p = sub.add_parser("embed", help="export frozen code embeddings")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split")
    p.add_argument("--subset", choices=["train", "eval", "all"], default="all")

    p = sub.add_parser("eval-search", help="code-to-code search mAP")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval-clone", help="clone-detection mAP@R")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--r", type=int, default=None)

    p = sub.add_parser("eval-defect", help="defect-detection linear probe")
    p.add_argument("--train-embeddings", required=True, dest="train_embeddings")
    p.add_argument("--test-embeddings", required=True, dest="test_embeddings")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ablate", help="train and evaluate a set of ablation modes")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--modes", required=True, help="comma-separated mode names")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config rng_seed")
    _add_model_flags(p)

    return parser


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


def _cmd_gen_corpus(args, started):
    from .corpus import generate_corpus, split_by_problem, write_corpus, write_split

    records = generate_corpus(
        args.problems, args.variants, args.mutants, args.seed, fuzz_budget=args.fuzz_budget
    )
    write_corpus(records, args.out)
    _log(f"wrote {len(records)} records to {args.out}")
    if args.split_out:
        split = split_by_problem(records, args.eval_fraction, args.seed)
        write_split(split, args.split_out)
        _log(
            f"wrote split ({len(split.train_problem_ids)} train / "
            f"{len(split.eval_problem_ids)} eval problems) to {args.split_out}"
        )
    _write_manifest(
        args.out,
        "gen-corpus",
        {
            "problems": args.problems,
            "variants": args.variants,
            "mutants": args.mutants,
            "fuzz_budget": args.fuzz_budget,
        },
        [],
        {"seed": args.seed},
        started,
    )
    return EXIT_OK


def _cmd_fuzz(args, started):
    import dataclasses

    from .corpus import read_corpus, write_corpus
    from .fuzzer import fuzz_program
    from .minilang import parse

    records = read_corpus(args.corpus)
    out = args.out or args.corpus
    input_hash_paths = [args.corpus]
    refreshed = []
    for record in records:
        suite = fuzz_program(
            parse(record.source), args.budget, [args.seed, hash_id(record.sample_id)],
            program_id=record.sample_id,
        )
        refreshed.append(dataclasses.replace(record, suite=suite))
    write_corpus(refreshed, out)
    _log(f"re-fuzzed {len(refreshed)} records into {out}")
    _write_manifest(
        out, "fuzz", {"budget": args.budget}, input_hash_paths, {"seed": args.seed}, started
    )
    return EXIT_OK


def hash_id(sample_id):
    """Stable non-negative 32-bit stream id for a sample identifier."""
    digest = hashlib.sha256(sample_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def _cmd_pretrain(args, started):
    from .corpus import read_corpus, read_split
    from .trainer import save_checkpoint, train

    config = _load_train_config(args.config, args.seed)
    records = read_corpus(args.corpus)
    split = read_split(args.split)
    model_config = _model_config_from_args(args, config.pooling)
    _log(f"pretraining for {config.steps} steps (seed {config.rng_seed})")
    checkpoint = train(records, split, config, model_config=model_config)
    save_checkpoint(checkpoint, args.out)
    _log(f"saved checkpoint at step {checkpoint.step} to {args.out}")
    _write_manifest(
        args.out,
        "pretrain",
        config.to_dict(),
        [args.config, args.corpus, args.split],
        {"rng_seed": config.rng_seed},
        started,
    )
    return EXIT_OK


def _cmd_embed(args, started):
    from .corpus import read_corpus, read_split
    from .evalkit import embed_corpus, write_embeddings
    from .trainer import load_checkpoint

    checkpoint = load_checkpoint(args.ckpt)
    records = read_corpus(args.corpus)
    inputs = [args.corpus]
    if args.subset != "all":
        if not args.split:
            raise _UsageError("--subset train/eval requires --split")
        split = read_split(args.split)
        keep = (
            split.train_problem_ids if args.subset == "train" else split.eval_problem_ids
        )
        records = [r for r in records if r.problem_id in keep]
        inputs.append(args.split)
    embeddings = embed_corpus(checkpoint, records, checkpoint.config.representation)
    write_embeddings(embeddings, args.out)
    _log(f"wrote {len(embeddings.ids)} embeddings to {args.out}")
    _write_manifest(
        args.out,
        "embed",
        {"subset": args.subset, "representation": checkpoint.config.representation},
        inputs,
        {"rng_seed": checkpoint.config.rng_seed},
        started,
    )
    return EXIT_OK


def _cmd_eval_search(args, started):
    from .evalkit import mean_ap, read_embeddings

    embeddings = read_embeddings(args.embeddings)
    result = mean_ap(embeddings)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(
            {"code_search_map": result.mean, "n_queries": len(embeddings.ids)},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    _log(f"code_search_map={result.mean:.6f}")
    _write_manifest(args.out, "eval-search", {}, [args.embeddings], {}, started)
    return EXIT_OK


def _cmd_eval_clone(args, started):
    from .evalkit import clone_truncation_r, mean_ap, read_embeddings

    embeddings = read_embeddings(args.embeddings)
    r = args.r if args.r is not None else clone_truncation_r(embeddings)
    result = mean_ap(embeddings, truncate_r=r)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"clone_map_at_r": result.mean, "r": r}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _log(f"clone_map_at_r={result.mean:.6f} (R={r})")
    _write_manifest(args.out, "eval-clone", {"r": r}, [args.embeddings], {}, started)
    return EXIT_OK


def _cmd_eval_defect(args, started):
    from .evalkit import linear_probe_defect, read_embeddings

    train_set = read_embeddings(args.train_embeddings)
    test_set = read_embeddings(args.test_embeddings)
    accuracy = linear_probe_defect(train_set, test_set)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"defect_acc": accuracy}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _log(f"defect_acc={accuracy:.6f}")
    _write_manifest(
        args.out, "eval-defect", {}, [args.train_embeddings, args.test_embeddings], {}, started
    )
    return EXIT_OK


def _cmd_ablate(args, started):
    from .corpus import read_corpus, read_split
    from .evalkit import ABLATION_MODES, ablation_run, write_report
    from .trainer import train  # noqa: F401  (re-exported path used by ablation_run)

    config = _load_train_config(args.config, args.seed)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    unknown = [m for m in modes if m not in ABLATION_MODES]
    if unknown:
        raise _UsageError(f"unknown ablation modes: {unknown}")
    records = read_corpus(args.corpus)
    split = read_split(args.split)
    model_config = _model_config_from_args(args, config.pooling)
    os.makedirs(args.out, exist_ok=True)
    _log(f"ablating modes {modes} at seed {config.rng_seed}")
    report = ablation_run(records, split, config, modes, model_config=model_config)
    write_report(
        report, os.path.join(args.out, "report.json"), os.path.join(args.out, "report.txt")
    )
    _log(f"wrote report to {args.out}")
    _write_manifest(
        args.out,
        "ablate",
        {**config.to_dict(), "modes": modes},
        [args.config, args.corpus, args.split],
        {"rng_seed": config.rng_seed},
        started,
    )
    return EXIT_OK


_HANDLERS = {
    "gen-corpus": _cmd_gen_corpus,
    "fuzz": _cmd_fuzz,
    "pretrain": _cmd_pretrain,
    "embed": _cmd_embed,
    "eval-search": _cmd_eval_search,
    "eval-clone": _cmd_eval_clone,
    "eval-defect": _cmd_eval_defect,
    "ablate": _cmd_ablate,
}


def cli_dispatch(argv):
    """Parse argv and run the matching subcommand; returns the exit code."""
    _apply_thread_cap()
    parser = build_parser()
    started = time.monotonic()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.subcommand](args, started)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as err:
        print(f"missing input: {err}", file=sys.stderr)
        return EXIT_DATA
    except Exception as err:  # classified below
        from .corpus import FormatError, GenerationError
        from .model import HashError, LengthError, VersionError
        from .tokenizer import AssemblyError, UnknownId
        from .trainer import ConfigError, NonFiniteLoss

        if isinstance(err, NonFiniteLoss):
            print(f"training aborted: {err}", file=sys.stderr)
            worst = sorted(err.param_norms.items(), key=lambda kv: -kv[1])[:5]
            for name, norm in worst:
                print(f"  |{name}| = {norm:.4g}", file=sys.stderr)
            return EXIT_TRAINING
        if isinstance(
            err,
            (
                FormatError,
                GenerationError,
                ConfigError,
                HashError,
                VersionError,
                AssemblyError,
                UnknownId,
                LengthError,
                json.JSONDecodeError,
                ValueError,
                KeyError,
            ),
        ):
            print(f"data error: {err}", file=sys.stderr)
            return EXIT_DATA
        raise


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
