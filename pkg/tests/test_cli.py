import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from prodfreq.cli import run_cli

DATA = Path(__file__).parent / "data"
PATHS = "A_SUBMITTED:A_CANCELLED,A_SUBMITTED:A_REGISTERED,A_SUBMITTED:A_DECLINED"


def snapshot(d: Path) -> dict[str, bytes]:
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def cli(capsys, *argv):
    code = run_cli([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def synth_log(tmp_path, capsys):
    d = tmp_path / "synth"
    code, _, _ = cli(capsys, "synth", "--seed", 7, "--cases", 100, "--out", d)
    assert code == 0
    return d / "log.csv"


@pytest.fixture
def network_file(tmp_path):
    doc = {
        "tasks": {
            "A_SUBMITTED": {"kind": "Initial", "ln_A": 0.0, "alpha": 0.5},
            "A_PREACCEPTED": {"kind": "NonAutomated", "ln_A": -0.18, "alpha": 0.02},
            "A_CANCELLED": {"kind": "NonAutomated", "ln_A": -3.29, "alpha": 0.17},
            "A_DECLINED": {"kind": "NonAutomated", "ln_A": -0.5, "alpha": 0.1},
        },
        "edges": [["A_SUBMITTED", "A_PREACCEPTED"], ["A_PREACCEPTED", "A_CANCELLED"], ["A_SUBMITTED", "A_DECLINED"]],
        "paths": {"A": ["A_SUBMITTED", "A_PREACCEPTED", "A_CANCELLED"], "C": ["A_SUBMITTED", "A_DECLINED"]},
        "entry": "A_SUBMITTED",
    }
    p = tmp_path / "net.json"
    p.write_text(json.dumps(doc))
    return p


def twice(capsys, tmp_path, *argv):
    snaps = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        code, _, err = cli(capsys, *argv, "--out", out)
        assert code == 0, err
        snaps.append(snapshot(out))
    return snaps


class TestSynth:
    def test_deterministic(self, capsys, tmp_path):
        a, b = twice(capsys, tmp_path, "synth", "--seed", 7, "--cases", 100)
        assert a == b and set(a) == {"log.csv", "truth.json"}

    def test_seed_matters(self, capsys, tmp_path):
        a = twice(capsys, tmp_path / "x", "synth", "--seed", 7)[0]
        b = twice(capsys, tmp_path / "y", "synth", "--seed", 8)[0]
        assert a["log.csv"] != b["log.csv"]

    def test_spec_file(self, capsys, tmp_path, three_path_spec):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(three_path_spec))
        code, out, _ = cli(capsys, "synth", "--spec", spec, "--cases", 20, "--out", tmp_path / "o")
        assert code == 0 and json.loads(out)["cases"] == 20

    def test_bad_spec(self, capsys, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"seed": 1}))
        code, _, err = cli(capsys, "synth", "--spec", spec, "--out", tmp_path / "o")
        assert code == 1 and "error" in json.loads(err)


class TestAnalyze:
    def test_happy_path(self, capsys, tmp_path, synth_log):
        code, _, err = cli(capsys, "analyze", "--log", synth_log, "--paths", "A_SUBMITTED:A_DECLINED", "--epoch", 0, "--out", tmp_path / "a")
        assert code == 0, err
        files = snapshot(tmp_path / "a")
        assert "summary.json" in files and any(f.startswith("spectrum_") for f in files)
        summary = json.loads(files["summary.json"])
        assert summary["generated_at"].startswith("1970-01-01")
        block = next(iter(summary["paths"].values()))["f_m"]
        assert set(block) == {"cycles_per_sample", "rad_per_sample", "paper_hz", "requests_per_hour"}

    def test_before_after(self, capsys, tmp_path, synth_log):
        code, _, err = cli(
            capsys, "analyze", "--log", synth_log, "--after-log", synth_log, "--paths", PATHS,
            "--manual", "A_PREACCEPTED", "--epoch", 0, "--out", tmp_path / "a",
        )
        assert code == 0, err
        rows = json.loads((tmp_path / "a" / "comparison.json").read_text())
        plain = [r for r in rows if not r["filtered_variant"]]
        assert len(plain) == 3 and all(r["kappa_m"] in (0.0, None) for r in plain)
        assert any(r["filtered_variant"] for r in rows)

    def test_deterministic(self, capsys, tmp_path, synth_log):
        a, b = twice(capsys, tmp_path, "analyze", "--log", synth_log, "--paths", PATHS, "--epoch", 5)
        assert a == b

    def test_bad_pairs_usage(self, capsys, tmp_path, synth_log):
        code, _, err = cli(capsys, "analyze", "--log", synth_log, "--paths", "nocolon", "--out", tmp_path)
        assert code == 2 and json.loads(err)["error"] == "usage_error"

    def test_unknown_activity(self, capsys, tmp_path, synth_log):
        code, _, err = cli(capsys, "analyze", "--log", synth_log, "--paths", "NOPE:A_DECLINED", "--out", tmp_path)
        assert code == 1 and json.loads(err)["error"]

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = cli(capsys, "analyze", "--log", tmp_path / "none.csv", "--paths", "A:B", "--out", tmp_path)
        assert code == 1 and "message" in json.loads(err)


class TestFit:
    def test_outputs(self, capsys, tmp_path, synth_log):
        code, out, err = cli(capsys, "fit", "--log", synth_log, "--ts", "1h", "--out", tmp_path / "f")
        assert code == 0, err
        doc = json.loads((tmp_path / "f" / "fits.json").read_text())
        assert doc["sample_period_seconds"] == 3600 and doc["sample_period_rounding"] == "override"
        assert len(doc["fits"]) + len(doc["failures"]) == 6
        assert (tmp_path / "f" / "fits.csv").read_text().startswith("activity,ln_A,alpha")

    def test_deterministic(self, capsys, tmp_path, synth_log):
        a, b = twice(capsys, tmp_path, "fit", "--log", synth_log, "--activities", "A_PREACCEPTED,A_DECLINED", "--epoch", 0)
        assert a == b

    def test_bad_duration(self, capsys, tmp_path, synth_log):
        code, _, err = cli(capsys, "fit", "--log", synth_log, "--ts", "5 fortnights", "--out", tmp_path)
        assert code == 1 and json.loads(err)


class TestStability:
    def test_operating_point(self, capsys, tmp_path):
        code, _, err = cli(capsys, "stability", "--tau", 20, "--r0", 0.99, "--ts", "5m", "--out", tmp_path)
        assert code == 0, err
        doc = json.loads((tmp_path / "stability.json").read_text())
        assert doc["report"]["stable"] is True
        assert doc["report"]["max_pole_magnitude"] == pytest.approx(0.97531, abs=1e-4)
        assert set(doc["report"]["resonance"]) >= {"rad_per_sample", "paper_hz", "requests_per_hour"}
        assert len((tmp_path / "pz.csv").read_text().splitlines()) == 5
        assert len((tmp_path / "response.csv").read_text().splitlines()) == 1026

    def test_deterministic(self, capsys, tmp_path):
        a, b = twice(capsys, tmp_path, "stability", "--tau", 5, "--r0", 0.5, "--epoch", 0)
        assert a == b

    def test_domain_error(self, capsys, tmp_path):
        code, _, err = cli(capsys, "stability", "--tau", -1, "--r0", 0.5, "--out", tmp_path)
        assert code == 1 and json.loads(err)["error"] == "parameter_error"

    def test_missing_flag(self, capsys, tmp_path):
        code, _, err = cli(capsys, "stability", "--tau", 20, "--out", tmp_path)
        assert code == 2 and json.loads(err)["error"] == "usage_error"


class TestSimulate:
    def test_from_log(self, capsys, tmp_path, synth_log, network_file):
        code, out, err = cli(capsys, "simulate", "--network", network_file, "--log", synth_log, "--ts", "1h", "--out", tmp_path / "s")
        assert code == 0, err
        rep = json.loads((tmp_path / "s" / "report.json").read_text())
        assert {r["path"] for r in rep["paths"]} == {"A", "C"}
        assert (tmp_path / "s" / "signals" / "A_CANCELLED.csv").exists()

    def test_from_inputs_dir(self, capsys, tmp_path, network_file):
        d = tmp_path / "inputs"
        d.mkdir()
        for name in ("A_SUBMITTED", "A_PREACCEPTED", "A_CANCELLED", "A_DECLINED"):
            rows = ["bin_index,L,K"] + [f"{i},{1 + i % 3},{1 + i % 2}" for i in range(32)]
            (d / f"{name}.csv").write_text("\n".join(rows) + "\n")
        code, _, err = cli(capsys, "simulate", "--network", network_file, "--inputs", d, "--ts", "5m", "--format", "markdown", "--out", tmp_path / "s")
        assert code == 0, err
        assert (tmp_path / "s" / "report.md").read_text().startswith("# Simulation report")

    def test_inputs_need_ts(self, capsys, tmp_path, network_file):
        code, _, _ = cli(capsys, "simulate", "--network", network_file, "--inputs", tmp_path, "--out", tmp_path)
        assert code == 2

    def test_deterministic(self, capsys, tmp_path, synth_log, network_file):
        a, b = twice(capsys, tmp_path, "simulate", "--network", network_file, "--log", synth_log, "--ts", "1h", "--format", "csv", "--epoch", 0)
        assert a == b

    def test_bad_network(self, capsys, tmp_path, synth_log):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"tasks": {}, "entry": "x"}))
        code, _, err = cli(capsys, "simulate", "--network", bad, "--log", synth_log, "--out", tmp_path)
        assert code == 1 and json.loads(err)["error"] == "schema_error"


class TestWhatIf:
    def test_automate(self, capsys, tmp_path, synth_log, network_file):
        code, out, err = cli(
            capsys, "whatif", "--network", network_file, "--log", synth_log, "--ts", "1h",
            "--task", "A_PREACCEPTED", "--kind", "Automated", "--kappa", 0.5, "--f-m", 0.05,
            "--tau", 20, "--r0", 0.99, "--out", tmp_path / "w",
        )
        assert code == 0, err
        rep = json.loads((tmp_path / "w" / "whatif.json").read_text())
        assert rep["meta"]["edit"]["task"] == "A_PREACCEPTED"
        assert rep["stability"][0]["stable"] is True
        assert "resonance_proximity" in json.loads(out)

    @pytest.mark.filterwarnings("ignore::prodfreq.ltitasks.AliasingWarning")
    def test_deterministic(self, capsys, tmp_path, synth_log, network_file):
        a, b = twice(
            capsys, tmp_path, "whatif", "--network", network_file, "--log", synth_log, "--ts", "1h",
            "--task", "A_DECLINED", "--kind", "Automated", "--kappa", 1.0, "--epoch", 0,
        )
        assert a == b

    def test_half_metric(self, capsys, tmp_path, synth_log, network_file):
        code, _, _ = cli(capsys, "whatif", "--network", network_file, "--log", synth_log, "--task", "A_DECLINED", "--tau", 20, "--out", tmp_path)
        assert code == 2


def test_unknown_subcommand(capsys):
    code, _, err = cli(capsys, "frobnicate")
    assert code == 2 and json.loads(err)["error"] == "usage_error"


def test_console_script(tmp_path):
    exe = shutil.which("prodfreq")
    cmd = [exe] if exe else [sys.executable, "-m", "prodfreq.cli"]
    proc = subprocess.run(cmd + ["stability", "--tau", "20", "--r0", "0.99", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["stable"] is True


def test_log_level_env(tmp_path):
    env = {"PRODFREQ_LOG_LEVEL": "debug", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run(
        [sys.executable, "-m", "prodfreq.cli", "stability", "--tau", "20", "--r0", "0.99", "--out", str(tmp_path)],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0
