"""CLI subcommands, exit codes, and run manifests."""

import json

import pytest

from dynapre.cli import cli_dispatch

CFG = {
    "steps": 2,
    "batch_size": 4,
    "queue_capacity": 8,
    "rng_seed": 0,
}

MODEL_FLAGS = [
    "--dim", "8", "--layers", "1", "--heads", "2", "--ffn-mult", "2",
    "--model-max-len", "128", "--dropout", "0.0",
]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.jsonl"
    split = root / "split.json"
    code = cli_dispatch(
        [
            "gen-corpus", "--problems", "4", "--variants", "3", "--mutants", "1",
            "--seed", "0", "--out", str(corpus), "--fuzz-budget", "300",
            "--split-out", str(split), "--eval-fraction", "0.25",
        ]
    )
    assert code == 0
    return root, corpus, split


class TestGenCorpus:
    def test_record_count(self, workspace):
        _, corpus, _ = workspace
        assert len(corpus.read_text().splitlines()) == 4 * 4

    def test_manifest_written(self, workspace):
        _, corpus, _ = workspace
        manifest = json.loads((corpus.parent / "corpus.jsonl.manifest.json").read_text())
        assert manifest["subcommand"] == "gen-corpus"
        assert manifest["rng_seeds"] == {"seed": 0}
        assert "duration_s" in manifest

    def test_split_written(self, workspace):
        _, _, split = workspace
        obj = json.loads(split.read_text())
        assert set(obj) == {"train_problem_ids", "eval_problem_ids", "rng_seed"}


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        assert cli_dispatch(["gen-corpus", "--bogus", "1"]) == 1

    def test_unknown_subcommand_is_usage_error(self):
        assert cli_dispatch(["frobnicate"]) == 1

    def test_missing_corpus_is_data_error(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(CFG))
        code = cli_dispatch(
            ["pretrain", "--config", str(cfg), "--corpus", str(tmp_path / "nope.jsonl"),
             "--split", str(tmp_path / "nope.json"), "--out", str(tmp_path / "ckpt")]
        )
        assert code == 2

    def test_malformed_corpus_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"not": "a record"}\n')
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(CFG))
        code = cli_dispatch(
            ["pretrain", "--config", str(cfg), "--corpus", str(bad),
             "--split", str(tmp_path / "s.json"), "--out", str(tmp_path / "ckpt")]
        )
        assert code == 2

    def test_unknown_config_key_is_data_error(self, workspace, tmp_path):
        _, corpus, split = workspace
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({**CFG, "warmup_steps": 5}))
        code = cli_dispatch(
            ["pretrain", "--config", str(cfg), "--corpus", str(corpus),
             "--split", str(split), "--out", str(tmp_path / "ckpt")]
        )
        assert code == 2

    def test_unknown_ablate_mode_is_usage_error(self, workspace, tmp_path):
        _, corpus, split = workspace
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(CFG))
        code = cli_dispatch(
            ["ablate", "--corpus", str(corpus), "--split", str(split),
             "--config", str(cfg), "--modes", "nonsense", "--out", str(tmp_path / "abl")]
        )
        assert code == 1


class TestPipeline:
    def test_pretrain_embed_eval(self, workspace, tmp_path):
        _, corpus, split = workspace
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(CFG))
        ckpt = tmp_path / "ckpt"
        assert (
            cli_dispatch(
                ["pretrain", "--config", str(cfg), "--corpus", str(corpus),
                 "--split", str(split), "--out", str(ckpt), *MODEL_FLAGS]
            )
            == 0
        )
        assert (ckpt / "manifest.json").exists()
        assert (ckpt / "run-manifest.json").exists()

        emb = tmp_path / "emb.jsonl"
        assert (
            cli_dispatch(
                ["embed", "--ckpt", str(ckpt), "--corpus", str(corpus),
                 "--out", str(emb), "--split", str(split), "--subset", "eval"]
            )
            == 0
        )
        assert emb.exists()

        search_out = tmp_path / "search.json"
        assert cli_dispatch(["eval-search", "--embeddings", str(emb), "--out", str(search_out)]) == 0
        result = json.loads(search_out.read_text())
        assert 0.0 <= result["code_search_map"] <= 1.0

        clone_out = tmp_path / "clone.json"
        assert cli_dispatch(["eval-clone", "--embeddings", str(emb), "--out", str(clone_out)]) == 0
        assert json.loads(clone_out.read_text())["r"] >= 1

        emb_train = tmp_path / "emb_train.jsonl"
        assert (
            cli_dispatch(
                ["embed", "--ckpt", str(ckpt), "--corpus", str(corpus),
                 "--out", str(emb_train), "--split", str(split), "--subset", "train"]
            )
            == 0
        )
        defect_out = tmp_path / "defect.json"
        assert (
            cli_dispatch(
                ["eval-defect", "--train-embeddings", str(emb_train),
                 "--test-embeddings", str(emb), "--out", str(defect_out)]
            )
            == 0
        )
        assert 0.0 <= json.loads(defect_out.read_text())["defect_acc"] <= 1.0

    def test_fuzz_rewrites_suites(self, workspace, tmp_path):
        _, corpus, _ = workspace
        out = tmp_path / "refuzzed.jsonl"
        assert (
            cli_dispatch(
                ["fuzz", "--corpus", str(corpus), "--budget", "200", "--seed", "7",
                 "--out", str(out)]
            )
            == 0
        )
        assert len(out.read_text().splitlines()) == len(corpus.read_text().splitlines())

    def test_ablate_writes_reports(self, workspace, tmp_path):
        _, corpus, split = workspace
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(CFG))
        out = tmp_path / "ablation"
        code = cli_dispatch(
            ["ablate", "--corpus", str(corpus), "--split", str(split),
             "--config", str(cfg), "--modes", "mlm-only", "--out", str(out), *MODEL_FLAGS]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert list(report["rows"]) == ["mlm-only"]
        assert (out / "report.txt").exists()
        assert (out / "run-manifest.json").exists()
