import csv
import json
import subprocess
import sys

import pytest

from nle_adapt import config as cfgmod
from nle_adapt.cli import run_command

FAST = {
    "task": "small",
    "source_train": {"optimizer": "adam", "learning_rate": 3e-3, "batch_size": 64,
                     "max_epochs": 4, "convergence_tol": 1e-6, "seed": 0},
    "adapt_train": {"optimizer": "adam", "learning_rate": 1e-3, "batch_size": 32,
                    "max_epochs": 2, "convergence_tol": 1e-9, "seed": 0},
    "centroid": {"max_epochs": 50},
}


@pytest.fixture
def workdir(tmp_path):
    cfg = dict(FAST, paths={k: str(tmp_path / k) for k in ("data_dir", "model_dir", "report_dir")})
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return tmp_path, str(path)


def _error_line(err):
    lines = [ln for ln in err.splitlines() if ln.startswith("error:")]
    assert len(lines) == 1
    return lines[0]


class TestExitCodes:
    def test_ok(self, workdir, capsys):
        _, cfg = workdir
        assert run_command(["validate-config", "--config", cfg]) == 0
        assert "config_hash=" in capsys.readouterr().out

    def test_unknown_subcommand(self, capsys):
        assert run_command(["frobnicate"]) == 2
        err = capsys.readouterr().err
        assert "Usage:" in err
        assert _error_line(err).startswith("error: kind=UsageError")

    def test_missing_required_option(self, capsys):
        assert run_command(["distill"]) == 2

    def test_console_script_exit_code(self):
        proc = subprocess.run([sys.executable, "-m", "nle_adapt.cli", "frobnicate"],
                              capture_output=True, text=True)
        assert proc.returncode == 2
        assert "Usage:" in proc.stderr

    @pytest.mark.parametrize("doc", [
        "{not json",
        json.dumps({"methods": ["one_hot", "lda"]}),
        json.dumps({"num_seeds": 0}),
        json.dumps({"uncovered": "skip"}),
        json.dumps({"shift": {"num_classes": 1}}),
        json.dumps({"shift": {"colour": 3}}),
        json.dumps({"source_train": {"optimizer": "lbfgs"}}),
        json.dumps({"network": {"hidden": []}}),
        json.dumps({"bogus_key": 1}),
    ])
    def test_invalid_config(self, tmp_path, capsys, doc):
        path = tmp_path / "bad.json"
        path.write_text(doc)
        assert run_command(["validate-config", "--config", str(path)]) == 3
        assert _error_line(capsys.readouterr().err).startswith("error: kind=ConfigError")

    def test_unresolvable_path(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"paths": {"data_dir": str(blocker / "data")}}))
        assert run_command(["validate-config", "--config", str(path)]) == 3

    def test_missing_config_file(self, tmp_path):
        assert run_command(["validate-config", "--config", str(tmp_path / "none.json")]) == 3

    def test_runtime_failure(self, workdir, capsys):
        tmp, cfg = workdir
        assert run_command(["generate", "--config", cfg]) == 0
        assert run_command(["train-source", "--config", cfg]) == 0
        cb = json.loads((tmp / "model_dir").joinpath("source.json").read_text())
        assert cb["layer_dims"][-1] == 10
        # codebook learned on two classes only: adapting to ten must fail
        src = (tmp / "data_dir" / "source.csv").read_text().splitlines()
        keep = [src[0]] + [ln for ln in src[1:] if ln.rsplit(",", 1)[1] in ("0", "1")]
        (tmp / "two.csv").write_text("\n".join(keep) + "\n")
        assert run_command(["distill", "--config", cfg, "--method", "l2", "--data",
                            str(tmp / "two.csv")]) == 0
        capsys.readouterr()
        code = run_command(["adapt", "--config", cfg, "--codebook",
                            str(tmp / "model_dir" / "codebook_l2.json")])
        assert code == 1
        line = _error_line(capsys.readouterr().err)
        assert line.startswith("error: kind=MissingEmbeddingError")
        assert run_command(["adapt", "--config", cfg, "--one-hot-uncovered", "--codebook",
                            str(tmp / "model_dir" / "codebook_l2.json")]) == 0


class TestValidateConfig:
    def test_full_scale_class_count_warns(self, tmp_path, capsys):
        path = tmp_path / "big.json"
        path.write_text(json.dumps({"shift": {"num_classes": 9404, "feature_dim": 8},
                                    "network": {"hidden": [8]}}))
        assert run_command(["validate-config", "--config", str(path)]) == 0
        err = capsys.readouterr().err
        assert "9404" in err and "senone" in err and "desk-scale" in err

    def test_dump_round_trip(self, workdir, tmp_path, capsys):
        _, cfg = workdir
        assert run_command(["validate-config", "--config", cfg, "--dump"]) == 0
        dumped = capsys.readouterr().out
        again = tmp_path / "again.json"
        again.write_text(dumped)
        assert cfgmod.load(again) == cfgmod.load(cfg)
        assert cfgmod.load(again).digest() == cfgmod.load(cfg).digest()


class TestCompare:
    def test_row_count(self, workdir, capsys):
        tmp, cfg = workdir
        out = tmp / "r.csv"
        code = run_command(["compare", "--config", cfg, "--methods", "one_hot,nle_skl",
                            "--num-seeds", "10", "--out-csv", str(out)])
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 22
        assert [r["seed"] for r in rows].count("mean") == 2
        assert [r["method"] for r in rows[:10]] == ["one_hot"] * 10
        table = capsys.readouterr().out
        assert "rel_reduction_pct" in table
        summary = list(csv.DictReader((tmp / "r_summary.csv").open()))
        assert [r["method"] for r in summary] == ["one_hot", "nle_skl"]
        doc = json.loads((tmp / "report_dir" / "compare.json").read_text())
        assert set(doc["provenance"]) >= {"git_describe", "config_hash"}

    def test_repeat_is_byte_identical(self, workdir):
        tmp, cfg = workdir
        for name in ("a.csv", "b.csv"):
            assert run_command(["compare", "--config", cfg, "--methods", "one_hot,nle_kl",
                                "--num-seeds", "2", "--out-csv", str(tmp / name)]) == 0
        assert (tmp / "a.csv").read_bytes() == (tmp / "b.csv").read_bytes()

    def test_flag_overrides_config(self, workdir):
        tmp, cfg = workdir
        assert run_command(["compare", "--config", cfg, "--methods", "unadapted",
                            "--num-seeds", "1", "--out-csv", str(tmp / "u.csv")]) == 0
        rows = list(csv.DictReader((tmp / "u.csv").open()))
        assert [r["method"] for r in rows] == ["unadapted", "unadapted"]

    def test_bad_method_flag(self, workdir):
        _, cfg = workdir
        assert run_command(["compare", "--config", cfg, "--methods", "lda"]) == 3


def test_stagewise_flow_reproduces_compare_run_zero(workdir, capsys):
    tmp, cfg = workdir
    assert run_command(["generate", "--config", cfg]) == 0
    assert sorted(p.name for p in (tmp / "data_dir").glob("*.csv")) == \
        ["source.csv", "target_adapt.csv", "target_test.csv"]
    assert run_command(["train-source", "--config", cfg]) == 0
    assert run_command(["distill", "--config", cfg, "--method", "skl"]) == 0
    assert run_command(["adapt", "--config", cfg, "--codebook",
                        str(tmp / "model_dir" / "codebook_skl.json")]) == 0
    capsys.readouterr()
    assert run_command(["evaluate", "--config", cfg, "--model",
                        str(tmp / "model_dir" / "adapted_nle_skl.json"),
                        "--out", str(tmp / "eval.json")]) == 0
    line = capsys.readouterr().out.strip()
    staged = json.loads((tmp / "eval.json").read_text())["reports"][0]["error_rate"]
    assert f"error_rate={staged:.6f}" in line

    assert run_command(["compare", "--config", cfg, "--methods", "nle_skl",
                        "--num-seeds", "1", "--out-csv", str(tmp / "c.csv")]) == 0
    rows = list(csv.DictReader((tmp / "c.csv").open()))
    assert float(rows[0]["error_rate"]) == staged
