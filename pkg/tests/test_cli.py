import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
GOLDEN_CONFIG = DATA / "golden_config.yaml"
GOLDEN_RESULTS = DATA / "golden_results.csv"

RESULTS_HEADER = ("n,d,alpha,gamma,kernel,design,m,delta,coverage,length_mean,"
                  "length_sd,rmse,nlpd_mean,nlpd_sd,seed")


def run_cli(*args, env_extra=None):
    env = dict(os.environ)
    env.pop("SGPR_SEED", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run([sys.executable, "-m", "eigengp.cli", *args],
                          capture_output=True, text=True, env=env)


def write_config(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


MINIMAL = """\
master_seed: 2024
replicates: 10
design: {kind: regular_grid, n: 50}
"""


class TestRun:
    def test_minimal_run_row_count_and_exit_code(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        out = tmp_path / "out"
        proc = run_cli("run", "--config", str(cfg), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        lines = (out / "results.csv").read_text().splitlines()
        assert lines[0] == RESULTS_HEADER
        assert len(lines) == 2
        assert (out / "replicates.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["artifact_version"]
        assert len(manifest["config_hash"]) == 64

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", str(cfg), "--out", str(out1)).returncode == 0
        assert run_cli("run", "--config", str(cfg), "--out", str(out2)).returncode == 0
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
        assert (out1 / "replicates.csv").read_bytes() == (out2 / "replicates.csv").read_bytes()

    def test_workers_do_not_change_output(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        assert run_cli("run", "--config", str(cfg), "--out", str(out1),
                       "--workers", "1").returncode == 0
        assert run_cli("run", "--config", str(cfg), "--out", str(out2),
                       "--workers", "4").returncode == 0
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()

    def test_config_hash_stable_under_key_reordering(self, tmp_path):
        reordered = """\
replicates: 10
design: {n: 50, kind: regular_grid}
master_seed: 2024
"""
        out1, out2 = tmp_path / "h1", tmp_path / "h2"
        run_cli("run", "--config", str(write_config(tmp_path, MINIMAL, "a.yaml")),
                "--out", str(out1))
        run_cli("run", "--config", str(write_config(tmp_path, reordered, "b.yaml")),
                "--out", str(out2))
        h1 = json.loads((out1 / "manifest.json").read_text())["config_hash"]
        h2 = json.loads((out2 / "manifest.json").read_text())["config_hash"]
        assert h1 == h2

    def test_full_override_equals_explicit_n(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        out1, out2 = tmp_path / "full", tmp_path / "expl"
        assert run_cli("run", "--config", str(cfg), "--out", str(out1),
                       "--set", "m_rule=full").returncode == 0
        assert run_cli("run", "--config", str(cfg), "--out", str(out2),
                       "--set", "m_rule=50").returncode == 0
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()

    def test_env_seed_override_matches_set(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        out1, out2, out3 = tmp_path / "e1", tmp_path / "e2", tmp_path / "e3"
        run_cli("run", "--config", str(cfg), "--out", str(out1),
                env_extra={"SGPR_SEED": "777"})
        run_cli("run", "--config", str(cfg), "--out", str(out2),
                "--set", "master_seed=777")
        run_cli("run", "--config", str(cfg), "--out", str(out3))
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
        assert (out1 / "results.csv").read_bytes() != (out3 / "results.csv").read_bytes()

    def test_fixed_sigma2_flag(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        out = tmp_path / "fs"
        proc = run_cli("run", "--config", str(cfg), "--out", str(out),
                       "--fixed-sigma2", "1.0")
        assert proc.returncode == 0
        rows = (out / "replicates.csv").read_text().splitlines()[1:]
        sigma2_col = [row.split(",")[9] for row in rows]
        assert set(sigma2_col) == {"1"}

    def test_runs_list_emits_one_row_each(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL + """\
runs:
  - m_rule: full
  - m_rule: 10
  - kernel: {gamma: 1.0}
""")
        out = tmp_path / "runs"
        proc = run_cli("run", "--config", str(cfg), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        lines = (out / "results.csv").read_text().splitlines()
        assert len(lines) == 4

    def test_golden_results_file(self, tmp_path):
        out = tmp_path / "golden"
        proc = run_cli("run", "--config", str(GOLDEN_CONFIG), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        assert (out / "results.csv").read_bytes() == GOLDEN_RESULTS.read_bytes()


class TestRunErrors:
    def test_missing_config_exits_2(self, tmp_path):
        proc = run_cli("run", "--config", str(tmp_path / "nope.yaml"),
                       "--out", str(tmp_path / "o"))
        assert proc.returncode == 2
        assert "not found" in proc.stderr

    def test_parse_error_reports_line_and_column(self, tmp_path):
        cfg = write_config(tmp_path, "design: {kind: regular_grid\nreplicates: 3\n")
        proc = run_cli("run", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert proc.returncode == 2
        assert "line" in proc.stderr and "column" in proc.stderr

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL + "bogus_key: 1\n")
        proc = run_cli("run", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert proc.returncode == 2
        assert "bogus_key" in proc.stderr

    def test_unknown_set_key_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        proc = run_cli("run", "--config", str(cfg), "--out", str(tmp_path / "o"),
                       "--set", "kernel.nope=1")
        assert proc.returncode == 2
        assert "kernel.nope" in proc.stderr

    def test_runtime_failure_exits_1_with_replicate_seed(self, tmp_path):
        features = tmp_path / "const.csv"
        features.write_text("\n".join("1.0,1.0" for _ in range(30)))
        cfg = write_config(tmp_path, f"""\
master_seed: 5
replicates: 2
kernel: {{family: se, gamma: 0.5}}
design: {{kind: external, n: 10, d: 2, path: {features}}}
truth: {{kind: norm_power, alpha: 1.0, center: 0.0}}
""")
        proc = run_cli("run", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert proc.returncode == 1
        assert "replicate 0" in proc.stderr and "master_seed=5" in proc.stderr

    def test_usage_error_exits_2(self):
        proc = run_cli("run", "--config")
        assert proc.returncode == 2


class TestGridMode:
    def test_grid_mode_schema(self, tmp_path):
        cfg = write_config(tmp_path, """\
master_seed: 11
delta: 0.05
design: {kind: regular_grid, n: 60}
grid:
  points: 11
  methods:
    - {label: m5, m: 5}
    - {label: mstar, m: threshold_alpha_gamma}
    - {label: full, m: full}
""")
        out = tmp_path / "grid"
        proc = run_cli("run", "--config", str(cfg), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        lines = (out / "replicates.csv").read_text().splitlines()
        assert lines[0] == "series,m,x,mean,variance,lower,upper,truth"
        assert len(lines) == 1 + 3 * 11
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["mode"] == "grid"


class TestPredict:
    def test_undersmoothing_values(self):
        proc = run_cli("predict", "1.0", "0.5", "0.1", "1000", "1")
        assert proc.returncode == 0
        assert "regime=Undersmoothing" in proc.stdout
        assert "predicted_coverage=0.980" in proc.stdout
        assert "m_star=178" in proc.stdout
        assert "contraction_exponent=0.25" in proc.stdout
        assert "kl_regime=DivergentKLBand" in proc.stdout

    def test_correct_smoothing_has_no_coverage(self):
        proc = run_cli("predict", "0.5", "0.5", "0.1", "1000", "1")
        assert proc.returncode == 0
        assert "regime=CorrectSmoothing" in proc.stdout
        assert "predicted_coverage=none" in proc.stdout

    def test_tighter_level(self):
        proc = run_cli("predict", "1.0", "0.5", "0.05", "1000", "1")
        assert "predicted_coverage=0.994" in proc.stdout

    def test_bad_arguments_exit_2(self):
        proc = run_cli("predict", "1.0", "0.5", "not-a-number", "1000")
        assert proc.returncode == 2


class TestProfile:
    def test_profile_reports_timings(self, tmp_path):
        cfg = write_config(tmp_path, """\
master_seed: 3
replicates: 1
design: {kind: regular_grid, n: 400}
m_rule: 40
fixed_sigma2: 1.0
""")
        proc = run_cli("profile", "--config", str(cfg))
        assert proc.returncode == 0, proc.stderr
        assert "time_full_s=" in proc.stdout
        assert "time_sgpr_s=" in proc.stdout
        assert "ratio_full_over_sgpr=" in proc.stdout

    def test_missing_config_exits_2(self, tmp_path):
        proc = run_cli("profile", "--config", str(tmp_path / "absent.yaml"))
        assert proc.returncode == 2
