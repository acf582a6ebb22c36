"""End-to-end command-line pipeline: configs, artifacts, exit codes."""

import json

import numpy as np
import pytest

from fourspin import cli, datasets, dynamics, hobm, pbf, rbm

CONFIG_TOML = """\
output_dir = "run"

[dataset]
n_sites = 5
beta = 0.5
n_samples = 400
seed = 3

[model]
kind = "hobm"
max_order = 3

[optimizer]
mode = "backtracking"
n_steps = 3000
log_every = 50
tolerance = 1e-9

[tracking]
max_order = 3
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "experiment.toml").write_text(CONFIG_TOML)
    return tmp_path


def run(*argv):
    return cli.main(list(argv))


class TestConfigHandling:
    def test_toml_and_json_agree(self, tmp_path):
        toml_path = tmp_path / "a.toml"
        toml_path.write_text('output_dir = "x"\n[dataset]\nn_sites = 4\n')
        json_path = tmp_path / "a.json"
        json_path.write_text('{"output_dir": "x", "dataset": {"n_sites": 4}}')
        assert cli.load_config(toml_path) == cli.load_config(json_path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(cli.ConfigError, match="not found"):
            cli.load_config(tmp_path / "absent.toml")

    def test_invalid_toml_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("output_dir = \n")
        with pytest.raises(cli.ConfigError, match="invalid TOML"):
            cli.load_config(path)

    def test_overrides_parse_json_literals(self):
        merged = cli.apply_overrides(
            {"dataset": {"beta": 0.5}},
            ["dataset.beta=0.75", "dataset.sampler=exact", "flag=true"],
        )
        assert merged["dataset"]["beta"] == 0.75
        assert merged["dataset"]["sampler"] == "exact"
        assert merged["flag"] is True

    def test_overrides_do_not_mutate_input(self):
        original = {"dataset": {"beta": 0.5}}
        cli.apply_overrides(original, ["dataset.beta=0.9"])
        assert original["dataset"]["beta"] == 0.5

    def test_malformed_override_rejected(self):
        with pytest.raises(cli.ConfigError, match="key=value"):
            cli.apply_overrides({}, ["dataset.beta"])


class TestGenerate:
    def test_writes_all_artifacts(self, workdir):
        assert run("generate", "--config", "experiment.toml") == 0
        out = workdir / "run"
        data = datasets.load_samples(out / "data.txt")
        assert data.samples.shape == (400, 5)
        sidecar = datasets.load_sidecar(out / "data.txt")
        assert sidecar["generator"] == "three_body_chain"
        echoed = json.loads((out / "config.json").read_text())
        assert echoed["dataset"]["n_samples"] == 400
        cov = datasets.covariance_from_csv((out / "covariance.csv").read_text())
        assert cov.shape == (5, 5)

    def test_output_dir_flag_is_echoed(self, workdir):
        assert run("generate", "--config", "experiment.toml",
                   "--output-dir", "elsewhere") == 0
        echoed = json.loads((workdir / "elsewhere" / "config.json").read_text())
        assert echoed["output_dir"] == "elsewhere"

    def test_set_override_changes_artifact(self, workdir):
        assert run("generate", "--config", "experiment.toml",
                   "--set", "dataset.n_samples=25") == 0
        data = datasets.load_samples(workdir / "run" / "data.txt")
        assert data.n_samples == 25

    def test_missing_config_is_exit_1(self, workdir, capsys):
        assert run("generate", "--config", "absent.toml") == 1
        assert "error" in capsys.readouterr().err

    def test_bad_dataset_section_is_exit_1(self, workdir):
        assert run("generate", "--config", "experiment.toml",
                   "--set", "dataset.generator=ising2d") == 1

    def test_enumeration_refusal_is_exit_3(self, workdir):
        code = run("generate", "--config", "experiment.toml",
                   "--set", "dataset.n_sites=25")
        assert code == 3


class TestTrain:
    def test_pipeline_artifacts(self, workdir):
        run("generate", "--config", "experiment.toml")
        assert run("train", "--config", "experiment.toml") == 0
        out = workdir / "run"
        trajectory = dynamics.TrainingTrajectory.from_csv(
            (out / "trajectory.csv").read_text()
        )
        assert trajectory.loglik[-1] > trajectory.loglik[0]
        model = cli.load_model(out / "checkpoint.json")
        assert isinstance(model, hobm.HigherOrderModel)
        report = dynamics.DsbReport.from_json((out / "dsb.json").read_text())
        assert len(report.orders) == 3

    def test_converges_to_empirical_moments(self, workdir):
        run("generate", "--config", "experiment.toml")
        run("train", "--config", "experiment.toml")
        model = cli.load_model(workdir / "run" / "checkpoint.json")
        data = datasets.load_samples(workdir / "run" / "data.txt")
        assert hobm.nll_gradient(model, data).sup_norm() < 1e-9

    def test_missing_dataset_is_exit_1(self, workdir, capsys):
        assert run("train", "--config", "experiment.toml") == 1
        assert "generate" in capsys.readouterr().err

    def test_unknown_optimizer_key_is_exit_1(self, workdir):
        run("generate", "--config", "experiment.toml")
        assert run("train", "--config", "experiment.toml",
                   "--set", "optimizer.momentum=0.9") == 1

    def test_numeric_failure_is_exit_2(self, workdir):
        run("generate", "--config", "experiment.toml")
        with np.errstate(over="ignore", invalid="ignore"):
            code = run(
                "train", "--config", "experiment.toml",
                "--set", "model.kind=rbm",
                "--set", "model.n_hidden=4",
                "--set", "model.weight_std=1.0",
                "--set", "optimizer.mode=fixed",
                "--set", "optimizer.step_size=1e308",
                "--set", "optimizer.n_steps=20",
                "--set", "optimizer.tolerance=1e-12",
            )
        assert code == 2

    def test_rbm_training_runs(self, workdir):
        run("generate", "--config", "experiment.toml")
        code = run(
            "train", "--config", "experiment.toml",
            "--set", "model.kind=rbm",
            "--set", "model.n_hidden=8",
            "--set", "optimizer.mode=fixed",
            "--set", "optimizer.step_size=0.05",
            "--set", "optimizer.n_steps=200",
            "--set", "optimizer.tolerance=1e-12",
        )
        assert code == 0
        model = cli.load_model(workdir / "run" / "checkpoint.json")
        assert isinstance(model, rbm.SpinRbm)

    def test_rerun_is_byte_identical(self, tmp_path, monkeypatch):
        outputs = {}
        for name in ("a", "b"):
            base = tmp_path / name
            base.mkdir()
            monkeypatch.chdir(base)
            (base / "experiment.toml").write_text(CONFIG_TOML)
            run("generate", "--config", "experiment.toml")
            run("train", "--config", "experiment.toml")
            outputs[name] = {
                p.name: p.read_bytes() for p in sorted((base / "run").iterdir())
            }
        assert outputs["a"].keys() == outputs["b"].keys()
        for key in outputs["a"]:
            assert outputs["a"][key] == outputs["b"][key], key


class TestExtract:
    def test_hobm_checkpoint_json(self, workdir):
        run("generate", "--config", "experiment.toml")
        run("train", "--config", "experiment.toml")
        assert run("extract", "--checkpoint", "run/checkpoint.json",
                   "--output", "couplings.json") == 0
        couplings = pbf.SubsetVector.from_json(
            (workdir / "couplings.json").read_text()
        )
        model = cli.load_model(workdir / "run" / "checkpoint.json")
        for mask in couplings.masks:
            assert couplings.get(int(mask)) == pytest.approx(
                model.couplings.get(int(mask))
            )

    def test_rbm_exact_matches_library(self, workdir):
        model = rbm.initialize(5, 3, seed=0, weight_std=0.3)
        (workdir / "ckpt.json").write_text(model.to_json())
        assert run("extract", "--checkpoint", "ckpt.json",
                   "--output", "out.csv", "--format", "csv",
                   "--max-order", "5") == 0
        couplings = pbf.SubsetVector.from_csv((workdir / "out.csv").read_text())
        direct = rbm.extract_couplings_exact(model, max_order=5)
        assert np.allclose(couplings.values, direct.values, atol=1e-12)

    def test_monte_carlo_mode(self, workdir):
        model = rbm.initialize(4, 3, seed=1, weight_std=0.3)
        (workdir / "ckpt.json").write_text(model.to_json())
        assert run("extract", "--checkpoint", "ckpt.json",
                   "--output", "out.json", "--mode", "monte_carlo",
                   "--max-order", "1", "--n-samples", "2000") == 0
        couplings = pbf.SubsetVector.from_json((workdir / "out.json").read_text())
        direct = rbm.extract_couplings_exact(model, max_order=1)
        assert np.abs(couplings.values - direct.values).max() < 0.1

    def test_binary_checkpoint_converted(self, workdir, rng):
        binary = rbm.BinaryRbm(
            rng.standard_normal((4, 2)), rng.standard_normal(2),
            rng.standard_normal(4),
        )
        (workdir / "ckpt.json").write_text(binary.to_json())
        assert run("extract", "--checkpoint", "ckpt.json",
                   "--output", "out.json") == 0
        couplings = pbf.SubsetVector.from_json((workdir / "out.json").read_text())
        direct = rbm.extract_couplings_exact(binary.to_spin(), max_order=3)
        assert np.allclose(couplings.values, direct.values, atol=1e-12)

    def test_oversize_exact_is_exit_3(self, workdir, capsys):
        model = rbm.initialize(25, 2, seed=0)
        (workdir / "big.json").write_text(model.to_json())
        assert run("extract", "--checkpoint", "big.json",
                   "--output", "out.json") == 3
        assert "monte_carlo" in capsys.readouterr().err

    def test_unrecognized_checkpoint_is_exit_1(self, workdir):
        (workdir / "junk.json").write_text('{"kind": "mystery"}')
        assert run("extract", "--checkpoint", "junk.json",
                   "--output", "out.json") == 1


class TestAnalyze:
    def test_converged_fit_is_data_consistent(self, workdir, capsys):
        run("generate", "--config", "experiment.toml")
        run("train", "--config", "experiment.toml")
        assert run("analyze", "--checkpoint", "run/checkpoint.json",
                   "--dataset", "run/data.txt",
                   "--output", "report.json") == 0
        report = dynamics.FixedPointReport.from_json(
            (workdir / "report.json").read_text()
        )
        assert report.classification == "data_consistent"
        assert "data_consistent" in capsys.readouterr().out

    def test_random_rbm_not_stationary(self, workdir):
        run("generate", "--config", "experiment.toml")
        model = rbm.initialize(5, 3, seed=4, weight_std=0.5)
        (workdir / "ckpt.json").write_text(model.to_json())
        assert run("analyze", "--checkpoint", "ckpt.json",
                   "--dataset", "run/data.txt",
                   "--output", "report.json") == 0
        report = dynamics.FixedPointReport.from_json(
            (workdir / "report.json").read_text()
        )
        assert report.classification == "not_stationary"

    def test_missing_dataset_is_exit_1(self, workdir):
        model = rbm.initialize(5, 3, seed=4)
        (workdir / "ckpt.json").write_text(model.to_json())
        assert run("analyze", "--checkpoint", "ckpt.json",
                   "--dataset", "absent.txt", "--output", "r.json") == 1


class TestTrack:
    def test_report_from_trajectory(self, workdir, capsys):
        run("generate", "--config", "experiment.toml")
        run("train", "--config", "experiment.toml")
        assert run("track", "--trajectory", "run/trajectory.csv",
                   "--output", "dsb2.json") == 0
        assert "t_1" in capsys.readouterr().out
        report = dynamics.DsbReport.from_json((workdir / "dsb2.json").read_text())
        saved = dynamics.DsbReport.from_json(
            (workdir / "run" / "dsb.json").read_text()
        )
        assert report == saved

    def test_missing_trajectory_is_exit_1(self, workdir):
        assert run("track", "--trajectory", "absent.csv",
                   "--output", "out.json") == 1

    def test_bad_fraction_is_exit_1(self, workdir):
        run("generate", "--config", "experiment.toml")
        run("train", "--config", "experiment.toml")
        assert run("track", "--trajectory", "run/trajectory.csv",
                   "--output", "out.json", "--fraction", "0") == 1


class TestCheck:
    def test_all_invariants_pass(self, capsys):
        assert run("check") == 0
        out = capsys.readouterr().out
        assert "all 8 checks passed" in out
        assert "FAIL" not in out


class TestParser:
    def test_no_arguments_is_exit_1(self, capsys):
        assert run() == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_flag_is_exit_1(self, workdir):
        assert run("generate", "--config", "experiment.toml", "--bogus") == 1

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit):
            run("--help")
        out = capsys.readouterr().out
        for name in ("generate", "train", "extract", "analyze", "track", "check"):
            assert name in out
