"""Command-line front end: run experiments, print theory, profile paths.

Subcommands
-----------
run      execute a YAML-configured experiment; writes results.csv,
         replicates.csv and manifest.json into the output directory
predict  print the asymptotic regime, limiting coverage, inducing-count
         threshold, contraction exponent and KL regime for (alpha, gamma,
         delta, n, d)
profile  wall-clock comparison of the dense full-GP path against the
         truncated eigenbasis path for the configured (n, m)

Exit codes: 0 success, 1 runtime failure (message carries the replicate
seed), 2 usage or configuration/parse errors.  The environment variable
SGPR_SEED overrides the configured master seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import __version__, theory
from .eigen import _brownian_leading, symmetric_eigensystem, truncate
from .errors import ConfigurationError, EigenGPError
from .experiments import (DEFAULT_CONFIG, ExperimentConfig, GridMethod, MetricsReport,
                          ReplicateRecord, _DESIGN_STAGE, _NOISE_STAGE, _m_rule_from,
                          aggregate, config_from_mapping, deep_merge, generate_dataset,
                          generate_design, replicate_rng, resolve_m, run_grid,
                          run_replicates, truth_alpha, truth_value)
from .gp import _posterior_core
from .kernels import (DesignKind, KernelFamily, kernel_matrix, kernel_value,
                      kernel_vector, resolve_kernel)

RESULTS_COLUMNS = ["n", "d", "alpha", "gamma", "kernel", "design", "m", "delta",
                   "coverage", "length_mean", "length_sd", "rmse",
                   "nlpd_mean", "nlpd_sd", "seed"]
REPLICATE_COLUMNS = ["run", "replicate", "m", "mean", "variance", "lower", "upper",
                     "covered", "nlpd", "sigma2", "sigma2_boundary", "lengthscale"]
GRID_COLUMNS = ["series", "m", "x", "mean", "variance", "lower", "upper", "truth"]

SEED_ENV_VAR = "SGPR_SEED"


def _fmt(value) -> str:
    """CSV cell formatting; floats carry 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _canonical(value):
    """Canonical form for hashing: sorted keys, numbers normalized to floats."""
    if isinstance(value, dict):
        return {str(k): _canonical(value[k]) for k in sorted(value, key=str)}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        return repr(float(value))
    return str(value)


def config_hash(mapping: Dict[str, object]) -> str:
    """Hex digest of the canonicalized config; stable under key reordering."""
    blob = json.dumps(_canonical(mapping), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _load_yaml(path: str) -> Dict[str, object]:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = (f"line {mark.line + 1}, column {mark.column + 1}"
                 if mark is not None else "unknown location")
        raise ConfigurationError(f"{path}: parse error at {where}: {exc.problem or exc}")
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: parse error: {exc}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return data


def _apply_override(cfg: Dict[str, object], assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigurationError(f"--set expects KEY=VALUE, got {assignment!r}")
    key, _, raw = assignment.partition("=")
    try:
        value = yaml.safe_load(raw) if raw != "" else None
    except yaml.YAMLError:
        value = raw
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigurationError(f"--set references unknown key: {key}")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigurationError(f"--set references unknown key: {key}")
    node[parts[-1]] = value


def _grid_methods(grid_map: Dict[str, object]) -> List[GridMethod]:
    methods_raw = grid_map.get("methods")
    if not isinstance(methods_raw, list) or not methods_raw:
        raise ConfigurationError("grid.methods must be a non-empty list of "
                                 "{label, m} mappings")
    methods = []
    for entry in methods_raw:
        if not isinstance(entry, dict) or "label" not in entry or "m" not in entry:
            raise ConfigurationError(f"grid method entries need label and m, got {entry!r}")
        methods.append(GridMethod(label=str(entry["label"]), m_rule=_m_rule_from(entry["m"])))
    return methods


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(cell) for cell in row) + "\n")


def _results_row(cfg: ExperimentConfig, report: MetricsReport) -> List[object]:
    return [cfg.design.n, cfg.design.d, truth_alpha(cfg.truth), cfg.kernel.gamma,
            cfg.kernel.family.value, cfg.design.kind.value, report.m_used, cfg.delta,
            report.coverage, report.length_mean, report.length_sd, report.rmse,
            report.nlpd_mean, report.nlpd_sd, cfg.master_seed]


def _replicate_rows(run_index: int, records: Sequence[ReplicateRecord]) -> List[List[object]]:
    return [[run_index, r.index, r.m, r.mean, r.variance, r.lower, r.upper,
             r.covered, r.nlpd, r.sigma2, r.sigma2_boundary, r.lengthscale]
            for r in records]


def cmd_run(args: argparse.Namespace) -> int:
    mapping = deep_merge(DEFAULT_CONFIG, _load_yaml(args.config))
    for assignment in args.overrides:
        _apply_override(mapping, assignment)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            mapping["master_seed"] = int(env_seed)
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}")
    if args.fixed_sigma2 is not None:
        mapping["fixed_sigma2"] = args.fixed_sigma2

    digest = config_hash(mapping)
    started = datetime.now(timezone.utc).isoformat()

    workers = args.workers
    if workers is None:
        workers = mapping.get("workers") or os.cpu_count() or 1
    workers = max(1, int(workers))

    runs_raw = mapping.get("runs")
    grid_map = mapping.get("grid")
    if runs_raw is not None and grid_map is not None:
        raise ConfigurationError("grid mode does not combine with a runs list")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    replicates_path = out_dir / "replicates.csv"
    manifest_path = out_dir / "manifest.json"

    base = {k: v for k, v in mapping.items() if k not in ("runs", "grid", "workers")}
    if grid_map is not None:
        if not isinstance(grid_map, dict):
            raise ConfigurationError("grid must be a mapping with points and methods")
        cfg = config_from_mapping(base)
        points = int(grid_map.get("points", 101))
        rows = run_grid(cfg, points, _grid_methods(grid_map))
        _write_csv(replicates_path, GRID_COLUMNS,
                   [[row[c] for c in GRID_COLUMNS] for row in rows])
        outputs = {"replicates": str(replicates_path)}
        mode = "grid"
    else:
        run_maps = [base]
        if runs_raw is not None:
            if not isinstance(runs_raw, list):
                raise ConfigurationError("runs must be a list of override mappings")
            run_maps = [deep_merge(base, entry or {}) for entry in runs_raw]
        result_rows = []
        replicate_rows: List[List[object]] = []
        for run_index, run_map in enumerate(run_maps):
            cfg = config_from_mapping(run_map)
            records = run_replicates(cfg, workers=workers)
            report = aggregate(records, truth_value(cfg.truth, cfg.query_point))
            result_rows.append(_results_row(cfg, report))
            replicate_rows.extend(_replicate_rows(run_index, records))
        _write_csv(results_path, RESULTS_COLUMNS, result_rows)
        _write_csv(replicates_path, REPLICATE_COLUMNS, replicate_rows)
        outputs = {"results": str(results_path), "replicates": str(replicates_path)}
        mode = "monte_carlo"

    manifest = {
        "artifact_version": __version__,
        "config_hash": digest,
        "config_path": str(args.config),
        "mode": mode,
        "workers": workers,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    report = theory.predicted_asymptotic_coverage(args.alpha, args.gamma, args.delta)
    m_star = theory.inducing_threshold(args.n, args.alpha, args.gamma, args.d)
    exponent = theory.contraction_exponent(args.alpha, args.gamma)
    regime_at_m = theory.kl_regime(args.n, min(max(m_star, 1), args.n), args.gamma)
    print(f"regime={report.regime.value}")
    if report.predicted_coverage is None:
        print("predicted_coverage=none")
    else:
        print(f"predicted_coverage={report.predicted_coverage:.3f}")
    print(f"m_star={m_star}")
    print(f"contraction_exponent={exponent:.6g}")
    print(f"kl_regime={regime_at_m.value}")
    return 0


def cmd_profile(args: argparse.Namespace) -> int:
    mapping = deep_merge(DEFAULT_CONFIG, _load_yaml(args.config))
    base = {k: v for k, v in mapping.items() if k not in ("runs", "grid", "workers")}
    cfg = config_from_mapping(base)
    m = resolve_m(cfg)
    n = cfg.design.n
    rk = resolve_kernel(cfg.kernel, n)
    design = generate_design(cfg.design, replicate_rng(cfg.master_seed, 0, _DESIGN_STAGE))
    y = generate_dataset(design, cfg.truth, cfg.noise,
                         replicate_rng(cfg.master_seed, 0, _NOISE_STAGE))
    sigma2 = cfg.fixed_sigma2 if cfg.fixed_sigma2 is not None else 1.0
    x0 = cfg.query_point
    kx = kernel_vector(rk, design, x0)
    kxx = kernel_value(rk, x0, x0)

    t0 = time.perf_counter()
    K = kernel_matrix(rk, design)
    sol = np.linalg.solve(K + sigma2 * np.eye(n), np.column_stack([y, kx]))
    mean_full = float(kx @ sol[:, 0])
    var_full = kxx - float(kx @ sol[:, 1])
    time_full = time.perf_counter() - t0

    closed = (design.kind is DesignKind.REGULAR_GRID_1D
              and rk.family is KernelFamily.RESCALED_BROWNIAN_MOTION)
    t0 = time.perf_counter()
    if closed:
        es = _brownian_leading(n, cfg.kernel.gamma, m)
    else:
        es = truncate(symmetric_eigensystem(kernel_matrix(rk, design)), m)
    mean_sgpr, var_sgpr = _posterior_core(es, m, kxx, kx, y, sigma2)
    time_sgpr = time.perf_counter() - t0

    print(f"n={n}")
    print(f"m={m}")
    print(f"eigensystem_path={'closed_form' if closed else 'numeric'}")
    print(f"time_full_s={time_full:.6f}")
    print(f"time_sgpr_s={time_sgpr:.6f}")
    print(f"ratio_full_over_sgpr={time_full / time_sgpr:.3f}")
    print(f"mean_abs_difference={abs(mean_full - mean_sgpr):.3e}")
    print(f"variance_abs_difference={abs(var_full - var_sgpr):.3e}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigengp",
        description="GP regression with eigenvector inducing variables: "
                    "coverage experiments, theory predictions, profiling.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("--config", required=True, help="YAML configuration file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (repeatable)")
    p_run.add_argument("--workers", type=int, default=None,
                       help="parallel replicate workers (default: available cores)")
    p_run.add_argument("--fixed-sigma2", type=float, default=None,
                       help="skip noise estimation and use this variance")
    p_run.set_defaults(func=cmd_run)

    p_pred = sub.add_parser("predict", help="print asymptotic predictions")
    p_pred.add_argument("alpha", type=float)
    p_pred.add_argument("gamma", type=float)
    p_pred.add_argument("delta", type=float)
    p_pred.add_argument("n", type=int)
    p_pred.add_argument("d", type=int, nargs="?", default=1)
    p_pred.set_defaults(func=cmd_predict)

    p_prof = sub.add_parser("profile", help="time full vs sparse posterior construction")
    p_prof.add_argument("--config", required=True, help="YAML configuration file")
    p_prof.set_defaults(func=cmd_profile)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EigenGPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # last resort: keep the contract on exit codes
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
