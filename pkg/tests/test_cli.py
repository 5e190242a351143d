import json

import pandas as pd
import pytest
from click.testing import CliRunner

from fovregress.app import cli

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def invoke(*args):
    return CliRunner().invoke(cli, ["--log-level", "WARNING", *[str(a) for a in args]])


def small_config(path, **train):
    assert invoke("init-config", path, "--seed", 3).exit_code == 0
    doc = json.loads(path.read_text(encoding="utf-8"))
    doc["world"].update(n_landmarks=800, landmark_feature_dim=16, n_map=40, n_query=10, trajectory_length=100.0,
                        amplitude=10.0, heading_jitter_deg=0.0, lateral_jitter=0.0, d_in=16)
    doc["pairs"]["n_pairs"] = 600
    doc["train"].update(total_iterations=40, snapshot_period=20, hidden=[16], d_out=8, log_every=0, **train)
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = small_config(root / "experiment.json")
    assert invoke("synth", "--config", config, "--out", root / "data").exit_code == 0
    assert invoke("gt", "--poses", root / "data" / "poses.csv", "--out", root / "gt.json").exit_code == 0
    result = invoke("train", "--config", config, "--data", root / "data", "--out", root / "run")
    assert result.exit_code == 0, result.output
    return root


def eval_args(ws, *extra):
    return ("eval", "--checkpoint", ws / "run" / "checkpoint.json", "--data", ws / "data",
            "--gt", ws / "gt.json", *extra)


class TestSynth:
    def test_outputs(self, workspace):
        for name in ("poses.csv", "observations.fovr", "pairs.jsonl"):
            assert (workspace / "data" / name).exists()
        pairs = (workspace / "data" / "pairs.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(pairs) == 600

    def test_summary(self, tmp_path):
        config = small_config(tmp_path / "experiment.json")
        result = invoke("synth", "--config", config, "--out", tmp_path / "data")
        assert result.exit_code == 0
        assert "map images: 40, query images: 10" in result.output
        assert "pairs: 600" in result.output
        assert "psi histogram" in result.output

    def test_refuses_overwrite_then_regenerates_identically(self, workspace):
        before = {n: (workspace / "data" / n).read_bytes() for n in ("poses.csv", "observations.fovr", "pairs.jsonl")}
        result = invoke("synth", "--config", workspace / "experiment.json", "--out", workspace / "data")
        assert result.exit_code == 2
        assert "already exists" in result.output
        result = invoke("synth", "--config", workspace / "experiment.json", "--out", workspace / "data", "--force")
        assert result.exit_code == 0
        for name, data in before.items():
            assert (workspace / "data" / name).read_bytes() == data

    def test_missing_seed(self, tmp_path):
        config = small_config(tmp_path / "experiment.json")
        doc = json.loads(config.read_text(encoding="utf-8"))
        del doc["world"]["seed"]
        config.write_text(json.dumps(doc), encoding="utf-8")
        result = invoke("synth", "--config", config, "--out", tmp_path / "data")
        assert result.exit_code == 2
        assert "world.seed" in result.output

    def test_too_many_pairs(self, tmp_path):
        config = small_config(tmp_path / "experiment.json")
        doc = json.loads(config.read_text(encoding="utf-8"))
        doc["pairs"]["n_pairs"] = 10 ** 6
        config.write_text(json.dumps(doc), encoding="utf-8")
        assert invoke("synth", "--config", config, "--out", tmp_path / "data").exit_code == 2


class TestGroundTruth:
    def test_every_query_listed(self, workspace):
        gt = json.loads((workspace / "gt.json").read_text(encoding="utf-8"))
        poses = pd.read_csv(workspace / "data" / "poses.csv")
        queries = poses.loc[poses["role"] == "query", "id"]
        assert sorted(int(q) for q in gt) == sorted(int(q) for q in queries)

    def test_zero_thresholds(self, workspace, tmp_path):
        result = invoke("gt", "--poses", workspace / "data" / "poses.csv", "--dist-m", 0, "--angle-deg", 0,
                        "--out", tmp_path / "gt.json")
        assert result.exit_code == 0
        gt = json.loads((tmp_path / "gt.json").read_text(encoding="utf-8"))
        assert all(v == [] for v in gt.values())

    def test_missing_poses(self, tmp_path):
        result = invoke("gt", "--poses", tmp_path / "nope.csv", "--out", tmp_path / "gt.json")
        assert result.exit_code == 2


class TestTrain:
    def test_run_directory(self, workspace):
        run = workspace / "run"
        manifest = json.loads((run / "run.json").read_text(encoding="utf-8"))
        assert [s["iteration"] for s in manifest["snapshots"]] == [0, 20, 40]
        for s in manifest["snapshots"]:
            assert (run / s["path"]).exists()
        assert manifest["train"]["loss"] == "mse"
        assert len(pd.read_csv(run / "loss_log.csv")) == 40
        assert (run / "checkpoint.json").exists()

    def test_refuses_existing_run(self, workspace):
        result = invoke("train", "--config", workspace / "experiment.json", "--data", workspace / "data",
                        "--out", workspace / "run")
        assert result.exit_code == 2

    def test_loss_override(self, workspace, tmp_path):
        result = invoke("train", "--config", workspace / "experiment.json", "--data", workspace / "data",
                        "--out", tmp_path / "run", "--loss", "gcl", "--iterations", 10, "--step-period", 5)
        assert result.exit_code == 0, result.output
        manifest = json.loads((tmp_path / "run" / "run.json").read_text(encoding="utf-8"))
        assert manifest["train"]["loss"] == "gcl"
        assert manifest["train"]["sgd"]["schedule"] == "step"
        assert manifest["train"]["sgd"]["step_period"] == 5
        assert [s["iteration"] for s in manifest["snapshots"]] == [0, 10]


class TestEval:
    def test_report_is_reproducible(self, workspace, tmp_path):
        out = tmp_path / "report.json"
        assert invoke(*eval_args(workspace, "--out", out)).exit_code == 0
        first = out.read_bytes()
        assert invoke(*eval_args(workspace, "--out", out)).exit_code == 2
        assert invoke(*eval_args(workspace, "--out", out, "--force")).exit_code == 0
        assert out.read_bytes() == first
        report = json.loads(first)
        assert report["iteration"] == 40
        assert report["dim"] == 8
        assert 0.0 <= report["r_at_1"] <= report["r_at_5"] <= report["r_at_10"] <= 1.0

    def test_whitening_with_reduction(self, workspace, tmp_path):
        result = invoke(*eval_args(workspace, "--whiten", "--pca-dim", 4, "--out", tmp_path / "report.json"))
        assert result.exit_code == 0, result.output
        assert json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))["dim"] == 4
        assert (tmp_path / "whitening.json").exists()

    def test_extra_outputs(self, workspace, tmp_path):
        result = invoke(*eval_args(workspace, "--out", tmp_path / "report.json", "--covariance",
                                   "--descriptors-out", tmp_path / "desc", "--k", 1, "--k", 3))
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert report["k_values"] == [1, 3]
        cov = pd.read_csv(tmp_path / "covariance.csv", header=None)
        assert cov.shape == (8, 8)
        assert (tmp_path / "desc" / "map.fovr").exists()
        assert (tmp_path / "desc" / "query.fovr").exists()

        png = tmp_path / "cov.png"
        assert invoke("plot", "covariance", tmp_path / "covariance.csv", "--out", png).exit_code == 0
        assert png.read_bytes()[:8] == PNG_MAGIC

    def test_saved_whitening_is_reused(self, workspace, tmp_path):
        fitted, reused = tmp_path / "fitted", tmp_path / "reused"
        fitted.mkdir()
        reused.mkdir()
        assert invoke(*eval_args(workspace, "--whiten", "--pca-dim", 4, "--out", fitted / "report.json")).exit_code == 0
        result = invoke(*eval_args(workspace, "--whitening", fitted / "whitening.json",
                                   "--out", reused / "report.json"))
        assert result.exit_code == 0, result.output
        assert not (reused / "whitening.json").exists()
        first = json.loads((fitted / "report.json").read_text(encoding="utf-8"))
        second = json.loads((reused / "report.json").read_text(encoding="utf-8"))
        assert second == first

        result = invoke(*eval_args(workspace, "--whitening", fitted / "whitening.json", "--whiten",
                                   "--out", reused / "other.json"))
        assert result.exit_code == 2

    def test_missing_checkpoint(self, workspace, tmp_path):
        result = invoke("eval", "--checkpoint", tmp_path / "nope.json", "--data", workspace / "data",
                        "--gt", workspace / "gt.json", "--out", tmp_path / "report.json")
        assert result.exit_code == 2


class TestCurve:
    def test_curve_and_plot(self, workspace, tmp_path):
        out = tmp_path / "curve.csv"
        result = invoke("curve", "--run", workspace / "run", "--data", workspace / "data", "--gt",
                        workspace / "gt.json", "--workers", 2, "--out", out)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["iteration", "r_at_1", "r_at_5", "r_at_10", "mrr5", "kldiv"]
        assert list(frame["iteration"]) == [0, 20, 40]

        png = tmp_path / "curve.png"
        assert invoke("plot", "curves", out, "--metric", "kldiv", "--out", png).exit_code == 0
        assert png.read_bytes()[:8] == PNG_MAGIC

    def test_missing_snapshot(self, workspace, tmp_path):
        run = tmp_path / "run"
        result = invoke("train", "--config", workspace / "experiment.json", "--data", workspace / "data",
                        "--out", run)
        assert result.exit_code == 0
        (run / "checkpoints" / "ckpt_00000020.json").unlink()
        result = invoke("curve", "--run", run, "--data", workspace / "data", "--gt", workspace / "gt.json",
                        "--out", tmp_path / "curve.csv")
        assert result.exit_code == 3
        assert "iteration 20" in result.output

    def test_loss_plot(self, workspace, tmp_path):
        png = tmp_path / "loss.png"
        result = invoke("plot", "loss", workspace / "run" / "loss_log.csv", "--window", 5, "--out", png)
        assert result.exit_code == 0, result.output
        assert png.read_bytes()[:8] == PNG_MAGIC


class TestSweepAndBenchmark:
    def test_sweep(self, workspace, tmp_path):
        out = tmp_path / "pca_sweep.csv"
        result = invoke("sweep", "--checkpoint", workspace / "run" / "checkpoint.json", "--data", workspace / "data",
                        "--gt", workspace / "gt.json", "--dim", 4, "--dim", 2, "--out", out)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out)
        assert list(frame["dim"]) == [2, 2, 4, 4]
        png = tmp_path / "sweep.png"
        assert invoke("plot", "sweep", out, "--out", png).exit_code == 0
        assert png.read_bytes()[:8] == PNG_MAGIC

    def test_benchmark(self, workspace, tmp_path):
        out = tmp_path / "bench"
        result = invoke("benchmark", "--config", workspace / "experiment.json", "--seed", 0, "--seed", 1,
                        "--loss", "mse", "--iterations", 20, "--out", out)
        assert result.exit_code == 0, result.output
        table = pd.read_csv(out / "benchmark.csv")
        assert len(table) == 2
        assert list(pd.read_csv(out / "curves_mse_agg.csv")["iteration"]) == [0, 20]
        png = tmp_path / "bands.png"
        assert invoke("plot", "bands", out / "curves_mse_agg.csv", "--out", png).exit_code == 0
        assert png.read_bytes()[:8] == PNG_MAGIC

    def test_benchmark_on_default_config(self, tmp_path):
        config = tmp_path / "experiment.json"
        assert invoke("init-config", config, "--seed", 0).exit_code == 0
        result = invoke("benchmark", "--config", config, "--seed", 0, "--loss", "mse", "--iterations", 10,
                        "--out", tmp_path / "bench")
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(tmp_path / "bench" / "benchmark.csv")) == 1

    def test_benchmark_rejects_pairs_beyond_map_pool(self, workspace, tmp_path):
        doc = json.loads((workspace / "experiment.json").read_text(encoding="utf-8"))
        doc["pairs"]["n_pairs"] = 40 * 39 // 2 + 1
        config = tmp_path / "experiment.json"
        config.write_text(json.dumps(doc), encoding="utf-8")
        result = invoke("benchmark", "--config", config, "--seed", 0, "--out", tmp_path / "bench")
        assert result.exit_code == 2
        assert "pairs.n_pairs" in result.output
