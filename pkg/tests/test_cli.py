"""End-to-end command-line behavior: artifacts, output text, exit codes."""

import json

import pytest

from calibkit import __version__
from calibkit.cli import run_cli

ARTIFACTS = ("run.json", "report.json", "reliability.svg", "predictions.jsonl")


def write_two_record_log(path):
    path.write_text('{"probs": [0.9, 0.1], "label": 0}\n'
                    '{"probs": [0.2, 0.8], "label": 1}\n')
    return path


def train_args(out, *extra):
    """A deliberately tiny linear run so CLI tests stay fast."""
    return ["train", "--classes", "3", "--per-class", "30", "--dim", "4",
            "--overlap", "1.0", "--epochs", "3", "--batch-size", "16",
            "--hidden-dim", "0", "--gamma", "0.5", "--seed", "0",
            "--out", str(out), *extra]


class TestEval:
    def test_two_record_log_scores_point_fifteen(self, tmp_path, capsys):
        log = write_two_record_log(tmp_path / "p.jsonl")
        code = run_cli(["eval", "--predictions", str(log), "--bins", "2"])
        out = capsys.readouterr().out
        assert code == 0
        assert "ece (M = 2): 0.150000" in out
        assert "accuracy: 1.0000" in out
        assert "n: 2" in out

    def test_missing_log_is_a_clean_failure(self, tmp_path, capsys):
        code = run_cli(["eval", "--predictions", str(tmp_path / "nope.jsonl")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_probability_sum_names_the_line(self, tmp_path, capsys):
        log = tmp_path / "p.jsonl"
        log.write_text('{"probs": [0.9, 0.9], "label": 0}\n')
        code = run_cli(["eval", "--predictions", str(log)])
        assert code == 1
        assert "line 1" in capsys.readouterr().err

    def test_optional_diagram_output(self, tmp_path, capsys):
        log = write_two_record_log(tmp_path / "p.jsonl")
        svg = tmp_path / "plots" / "rel.svg"
        code = run_cli(["eval", "--predictions", str(log), "--bins", "2",
                        "--diagram", str(svg)])
        assert code == 0
        assert svg.exists() and svg.read_bytes().startswith(b"<?xml")
        manifest = json.loads(svg.with_suffix(".run.json").read_text())
        assert manifest["version"] == __version__

    def test_csv_format_flag(self, tmp_path, capsys):
        log = tmp_path / "p.csv"
        log.write_text("p0,p1,label\n0.9,0.1,0\n0.2,0.8,1\n")
        code = run_cli(["eval", "--predictions", str(log), "--format", "csv",
                        "--bins", "2"])
        assert code == 0
        assert "ece (M = 2): 0.150000" in capsys.readouterr().out


class TestTrain:
    def test_writes_all_artifacts(self, tmp_path, capsys):
        out_dir = tmp_path / "run"
        code = run_cli(train_args(out_dir, "--mode", "vanilla"))
        assert code == 0
        for name in ARTIFACTS:
            assert (out_dir / name).exists(), name
        stdout = capsys.readouterr().out
        assert "mode: vanilla" in stdout
        assert "gamma_e: 0.500000 (explicit)" in stdout
        assert "test ece (M = 15)" in stdout

    def test_manifest_records_the_configuration(self, tmp_path):
        out_dir = tmp_path / "run"
        run_cli(train_args(out_dir, "--mode", "curriculum"))
        manifest = json.loads((out_dir / "run.json").read_text())
        assert manifest["version"] == __version__
        assert manifest["kernel_backend"] in ("numba", "numpy")
        assert manifest["train"]["mode"] == "curriculum"
        assert manifest["train"]["epochs"] == 3
        assert manifest["loss"]["gamma_e"] == 0.5
        assert manifest["loss"]["gamma_source"] == "explicit"
        assert manifest["data"]["classes"] == 3
        assert manifest["seed"] == 0

    def test_vanilla_epochs_never_weight_calibration(self, tmp_path):
        out_dir = tmp_path / "run"
        run_cli(train_args(out_dir, "--mode", "vanilla"))
        report = json.loads((out_dir / "report.json").read_text())
        epochs = report["epochs"]
        assert len(epochs) == 3
        assert all(e["ece_weight"] == 0.0 for e in epochs)
        assert all("seconds" not in e for e in epochs)
        assert set(report) >= {"epochs", "eval_bins", "val", "test"}

    def test_reruns_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(train_args(a, "--mode", "curriculum")) == 0
        assert run_cli(train_args(b, "--mode", "curriculum")) == 0
        for name in ARTIFACTS:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_auto_gamma_runs_a_warm_pass(self, tmp_path, capsys):
        out_dir = tmp_path / "run"
        args = train_args(out_dir, "--mode", "fixed")
        args[args.index("--gamma") + 1] = "auto"
        code = run_cli(args)
        assert code == 0
        assert "(auto)" in capsys.readouterr().out
        manifest = json.loads((out_dir / "run.json").read_text())
        assert manifest["loss"]["gamma_source"] == "auto"
        assert manifest["loss"]["gamma_e"] > 0

    def test_seed_env_fallback(self, tmp_path, monkeypatch):
        out_dir = tmp_path / "run"
        monkeypatch.setenv("CALIB_SEED", "7")
        args = train_args(out_dir, "--mode", "vanilla")
        del args[args.index("--seed"):args.index("--seed") + 2]
        assert run_cli(args) == 0
        assert json.loads((out_dir / "run.json").read_text())["seed"] == 7

    def test_invalid_seed_env_fails_cleanly(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("CALIB_SEED", "many")
        args = train_args(tmp_path / "run", "--mode", "vanilla")
        del args[args.index("--seed"):args.index("--seed") + 2]
        assert run_cli(args) == 1
        assert "error:" in capsys.readouterr().err


class TestCompareAndDiagram:
    def test_compare_renders_a_table_over_runs(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(train_args(a, "--mode", "vanilla"))
        run_cli(train_args(b, "--mode", "fixed"))
        capsys.readouterr()
        code = run_cli(["compare", str(a), str(b)])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("| Model | P(%) | R(%) | F1(%) | ACC(%) | ECE |")
        assert len(out.splitlines()) == 4

    def test_compare_missing_run_dir(self, tmp_path, capsys):
        assert run_cli(["compare", str(tmp_path / "ghost")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_diagram_writes_svg_and_manifest(self, tmp_path, capsys):
        log = write_two_record_log(tmp_path / "p.jsonl")
        svg = tmp_path / "rel.svg"
        code = run_cli(["diagram", "--predictions", str(log), "--bins", "2",
                        "--out", str(svg)])
        assert code == 0
        assert svg.exists()
        assert "Confidence (M = 2 bins)" in svg.read_text()
        assert svg.with_suffix(".run.json").exists()


class TestExperiment:
    def test_three_arms_plus_comparison(self, tmp_path, capsys):
        out_dir = tmp_path / "exp"
        args = train_args(out_dir)
        args[0] = "experiment"  # same flags, no --mode: it runs all three
        code = run_cli(args)
        stdout = capsys.readouterr().out
        assert code == 0
        for arm in ("vanilla", "curriculum", "fixed"):
            for name in ARTIFACTS:
                assert (out_dir / arm / name).exists(), f"{arm}/{name}"
            assert f"{arm}: accuracy" in stdout
        table = (out_dir / "comparison.md").read_text()
        assert table.splitlines()[0] == "| Model | P(%) | R(%) | F1(%) | ACC(%) | ECE |"
        assert len(table.splitlines()) == 5
        top = json.loads((out_dir / "run.json").read_text())
        assert top["train"]["mode"] is None
        # arm manifests agree with the top-level one apart from the mode
        arm_manifest = json.loads((out_dir / "vanilla" / "run.json").read_text())
        assert arm_manifest["train"]["mode"] == "vanilla"
        assert arm_manifest["loss"] == top["loss"]


class TestUsage:
    def test_version_flag(self, capsys):
        assert run_cli(["--version"]) == 0
        assert f"calibkit {__version__}" in capsys.readouterr().out

    def test_unknown_flag_is_usage_error(self, capsys):
        assert run_cli(["train", "--does-not-exist"]) == 2

    def test_no_command_is_usage_error(self, capsys):
        assert run_cli([]) == 2

    def test_bad_gamma_value(self, capsys):
        assert run_cli(["train", "--gamma", "fast", "--out", "x"]) == 2

    def test_bad_split_ratios(self, capsys):
        assert run_cli(["train", "--split", "0.5,0.5", "--out", "x"]) == 2
