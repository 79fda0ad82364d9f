"""Monte-Carlo experiment harness for pointwise coverage studies.

A configuration fixes a kernel, a design, a ground-truth function, a noise
model, an inducing-count rule and a credibility level.  Each replicate
draws a dataset, estimates the noise variance by marginal likelihood
(unless held fixed), forms the rank-m posterior at the query point and
records whether the credible interval covers the truth.  Aggregation over
replicates yields coverage, interval length, RMSE and NLPD with dispersion
estimates.

Reproducibility contract: replicate j draws from counter-based streams
keyed by (master_seed, j, stage), so results are bit-identical regardless
of execution order or worker count.  Gaussian noise is generated by
Box-Muller and Laplace noise by inverse CDF from those uniform streams.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import theory
from .eigen import EigenSystem, eigensystem_for
from .errors import (ArgumentError, ConfigurationError, EigenGPError, IngestionError,
                     ReplicateError)
from .gp import DEFAULT_SIGMA2_BOUNDS, estimate_noise_variance, fit_hyperparameters
from .kernels import (Design, DesignKind, KernelFamily, KernelSpec, ResolvedKernel,
                      regular_grid, resolve_kernel)
from .sgpr import credible_interval, sgpr_posterior_at

LOG_2PI = math.log(2.0 * math.pi)

_DESIGN_STAGE = 0
_NOISE_STAGE = 1


class TruthKind(Enum):
    ABS_POWER = "abs_power"
    SIGNED_SQUARE = "signed_square"
    NORM_POWER = "norm_power"


@dataclass(frozen=True, eq=False)
class TruthSpec:
    """Ground-truth function family.

    abs_power: |x - center|^alpha on the line; signed_square:
    sign(x - center) (x - center)^2 (alpha is 2); norm_power:
    ||x - center||^alpha in any dimension.
    """

    kind: TruthKind
    alpha: float = 1.0
    center: Union[float, np.ndarray] = 0.5

    def __post_init__(self) -> None:
        if self.kind is TruthKind.SIGNED_SQUARE:
            if self.alpha != 2.0:
                raise ConfigurationError("signed_square has smoothness exactly 2.0")
        elif not self.alpha > 0:
            raise ConfigurationError(f"truth smoothness must be positive, got {self.alpha}")


class NoiseKind(Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ConfigurationError(f"noise sigma must be nonnegative, got {self.sigma}")
        if self.kind is NoiseKind.LAPLACE and self.sigma != 1.0:
            raise ConfigurationError("Laplace noise is standard (scale 1); sigma must be 1.0")


class MRuleKind(Enum):
    EXPLICIT = "explicit"
    THRESHOLD_ALPHA_GAMMA = "threshold_alpha_gamma"
    THRESHOLD_D = "threshold_d"
    THRESHOLD_LOG_BELOW = "threshold_log_below"
    THRESHOLD_LOG_ABOVE = "threshold_log_above"
    FULL = "full"


@dataclass(frozen=True)
class MRule:
    kind: MRuleKind
    m: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is MRuleKind.EXPLICIT and self.m is None:
            raise ConfigurationError("explicit m_rule needs an inducing count")


@dataclass(frozen=True)
class DesignSpec:
    kind: DesignKind
    n: int
    d: int = 1
    rho: float = 0.0
    path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.d < 1:
            raise ConfigurationError(f"d must be >= 1, got {self.d}")
        if self.kind is DesignKind.REGULAR_GRID_1D and self.d != 1:
            raise ConfigurationError("the regular grid design is one-dimensional")
        if self.kind is DesignKind.GAUSSIAN_EQUICORRELATED and not 0.0 <= self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in [0, 1), got {self.rho}")
        if self.kind is DesignKind.EXTERNAL and not self.path:
            raise ConfigurationError("external designs need a feature file path")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    kernel: KernelSpec
    design: DesignSpec
    truth: TruthSpec
    noise: NoiseSpec
    m_rule: MRule
    delta: float = 0.1
    query: Optional[Union[float, Sequence[float]]] = None
    replicates: int = 500
    master_seed: int = 0
    sigma2_bounds: Tuple[float, float] = DEFAULT_SIGMA2_BOUNDS
    fixed_sigma2: Optional[float] = None
    fit_lengthscale: bool = False

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ConfigurationError(f"replicates must be >= 1, got {self.replicates}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.master_seed < 0:
            raise ConfigurationError(f"master_seed must be a nonnegative integer, got {self.master_seed}")
        if self.kernel.dimension != self.design.d:
            raise ConfigurationError(f"kernel dimension {self.kernel.dimension} does not "
                                     f"match design dimension {self.design.d}")
        if self.truth.kind in (TruthKind.ABS_POWER, TruthKind.SIGNED_SQUARE) and self.design.d != 1:
            raise ConfigurationError(f"{self.truth.kind.value} truth is one-dimensional")
        if self.kernel.family is KernelFamily.RESCALED_BROWNIAN_MOTION:
            if self.design.kind not in (DesignKind.REGULAR_GRID_1D, DesignKind.UNIFORM_RANDOM):
                raise ConfigurationError("rescaled Brownian motion needs design points in "
                                         "[0, 1]: use the regular grid or uniform design")
            if self.fit_lengthscale:
                raise ConfigurationError("rescaled Brownian motion has no lengthscale to fit")
        lo, hi = self.sigma2_bounds
        if not 0.0 < lo < hi:
            raise ConfigurationError(f"sigma2_bounds must satisfy 0 < lo < hi, got {self.sigma2_bounds}")
        if self.fixed_sigma2 is not None and not self.fixed_sigma2 > 0:
            raise ConfigurationError(f"fixed_sigma2 must be positive, got {self.fixed_sigma2}")
        if self.m_rule.kind is MRuleKind.EXPLICIT and not 1 <= self.m_rule.m <= self.design.n:
            raise ConfigurationError(f"explicit m must lie in [1, {self.design.n}], got {self.m_rule.m}")
        q = self.query_point
        if (self.kernel.family is KernelFamily.RESCALED_BROWNIAN_MOTION
                and not 0.0 <= q[0] <= 1.0):
            raise ConfigurationError(f"query point {q[0]} outside [0, 1]")

    @property
    def query_point(self) -> np.ndarray:
        """Configured query point, defaulting to 0.5 (d=1) or the origin."""
        if self.query is None:
            if self.design.d == 1:
                return np.array([0.5])
            return np.zeros(self.design.d)
        q = np.atleast_1d(np.asarray(self.query, dtype=float))
        if q.shape != (self.design.d,):
            raise ConfigurationError(f"query point must have dimension {self.design.d}, "
                                     f"got shape {q.shape}")
        return q


@dataclass(frozen=True)
class ReplicateRecord:
    index: int
    m: int
    mean: float
    variance: float
    lower: float
    upper: float
    covered: bool
    nlpd: float
    sigma2: float
    sigma2_boundary: Optional[str]
    lengthscale: Optional[float] = None


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    sd: float
    minimum: float
    maximum: float
    boundary_warnings: int


@dataclass(frozen=True)
class MetricsReport:
    coverage: float
    length_mean: float
    length_sd: float
    rmse: float
    nlpd_mean: float
    nlpd_sd: float
    m_used: int
    sigma2_estimates: SummaryStats
    replicates: int


def replicate_rng(master_seed: int, replicate_index: int, stage: int) -> np.random.Generator:
    """Counter-based stream keyed by (master_seed, replicate, stage)."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(replicate_index, stage))
    return np.random.Generator(np.random.Philox(seq))


def _as_rng(seed: Union[int, np.random.Generator]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def standard_normals(rng: np.random.Generator, n: int) -> np.ndarray:
    """n standard normal draws via Box-Muller on the uniform stream."""
    half = (n + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    ang = 2.0 * np.pi * u2
    return np.concatenate([r * np.cos(ang), r * np.sin(ang)])[:n]


def standard_laplace(rng: np.random.Generator, n: int) -> np.ndarray:
    """n standard Laplace draws (scale 1, variance 2) via inverse CDF."""
    u = rng.random(n) - 0.5
    t = np.maximum(1.0 - 2.0 * np.abs(u), np.finfo(float).tiny)
    return -np.sign(u) * np.log(t)


def load_feature_matrix(path: str) -> np.ndarray:
    """Read an external feature file: CSV, one row per observation.

    A header is auto-detected from a non-numeric first row.  Malformed rows
    raise with their (1-based) line number.
    """
    rows: List[List[float]] = []
    width: Optional[int] = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, raw in enumerate(reader, start=1):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            try:
                values = [float(cell) for cell in raw]
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise IngestionError(f"{path}: row {lineno}: non-numeric value in {raw!r}")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise IngestionError(f"{path}: row {lineno}: expected {width} columns, "
                                     f"got {len(values)}")
            rows.append(values)
    if not rows:
        raise IngestionError(f"{path}: no numeric rows found")
    return np.asarray(rows, dtype=float)


def _sample_external(features: np.ndarray, spec: DesignSpec,
                     rng: np.random.Generator) -> np.ndarray:
    rows, cols = features.shape
    if cols < spec.d:
        raise IngestionError(f"feature file has {cols} columns, need d={spec.d}")
    if rows < spec.n:
        raise IngestionError(f"feature file has {rows} rows, need n={spec.n}")
    idx = rng.choice(rows, size=spec.n, replace=False)
    sample = features[idx, :spec.d].astype(float)
    mean = sample.mean(axis=0)
    sd = sample.std(axis=0)
    if np.any(sd == 0):
        bad = int(np.flatnonzero(sd == 0)[0])
        raise IngestionError(f"feature column {bad} is constant in the sampled rows")
    return (sample - mean) / sd


def generate_design(spec: DesignSpec, seed: Union[int, np.random.Generator],
                    features: Optional[np.ndarray] = None) -> Design:
    """Draw a design of n points; deterministic given the seed/stream.

    The uniform design is U(0, 1) on the line and U([-1/2, 1/2]^d) in
    higher dimension.  The equicorrelated Gaussian design uses the
    construction sqrt(rho) z 1 + sqrt(1 - rho) g.  External designs sample
    rows without replacement and standardize columns to zero mean and unit
    variance.
    """
    if spec.kind is DesignKind.REGULAR_GRID_1D:
        return regular_grid(spec.n)
    rng = _as_rng(seed)
    if spec.kind is DesignKind.UNIFORM_RANDOM:
        pts = rng.random((spec.n, spec.d))
        if spec.d > 1:
            pts -= 0.5
        return Design(points=pts, kind=spec.kind)
    if spec.kind is DesignKind.GAUSSIAN_EQUICORRELATED:
        z = standard_normals(rng, spec.n)
        g = standard_normals(rng, spec.n * spec.d).reshape(spec.n, spec.d)
        pts = math.sqrt(spec.rho) * z[:, None] + math.sqrt(1.0 - spec.rho) * g
        return Design(points=pts, kind=spec.kind)
    if features is None:
        features = load_feature_matrix(spec.path)
    return Design(points=_sample_external(features, spec, rng), kind=spec.kind)


def truth_values(truth: TruthSpec, points: np.ndarray) -> np.ndarray:
    """Evaluate the truth at an (n, d) array of points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if truth.kind is TruthKind.ABS_POWER:
        return np.abs(pts[:, 0] - float(truth.center)) ** truth.alpha
    if truth.kind is TruthKind.SIGNED_SQUARE:
        s = pts[:, 0] - float(truth.center)
        return np.sign(s) * s * s
    center = np.atleast_1d(np.asarray(truth.center, dtype=float))
    if center.size == 1 and pts.shape[1] > 1:
        center = np.full(pts.shape[1], float(center[0]))
    if center.shape != (pts.shape[1],):
        raise ArgumentError(f"truth center has shape {center.shape}, "
                            f"points have dimension {pts.shape[1]}")
    diff = pts - center[None, :]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff)) ** truth.alpha


def truth_value(truth: TruthSpec, x) -> float:
    """Evaluate the truth at a single point."""
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    return float(truth_values(truth, pt[None, :])[0])


def generate_dataset(design: Design, truth: TruthSpec, noise: NoiseSpec,
                     seed: Union[int, np.random.Generator]) -> np.ndarray:
    """y_i = f0(x_i) + eps_i with the configured noise; deterministic."""
    rng = _as_rng(seed)
    f0 = truth_values(truth, design.points)
    if noise.kind is NoiseKind.GAUSSIAN:
        eps = noise.sigma * standard_normals(rng, design.n)
    else:
        eps = standard_laplace(rng, design.n)
    return f0 + eps


def truth_alpha(truth: TruthSpec) -> float:
    return 2.0 if truth.kind is TruthKind.SIGNED_SQUARE else truth.alpha


def resolve_m(cfg: ExperimentConfig) -> int:
    """Inducing count implied by the configured rule, clamped to [1, n]."""
    n = cfg.design.n
    rule = cfg.m_rule
    if rule.kind is MRuleKind.EXPLICIT:
        return rule.m
    if rule.kind is MRuleKind.FULL:
        return n
    alpha = truth_alpha(cfg.truth)
    gamma = cfg.kernel.gamma
    if rule.kind is MRuleKind.THRESHOLD_ALPHA_GAMMA:
        m = theory.inducing_count(n, alpha, gamma, d=1)
    elif rule.kind is MRuleKind.THRESHOLD_D:
        m = theory.inducing_count(n, alpha, gamma, d=cfg.design.d)
    elif rule.kind is MRuleKind.THRESHOLD_LOG_BELOW:
        m = theory.inducing_count(n, alpha, gamma, d=cfg.design.d, log_adjust="below")
    else:
        m = theory.inducing_count(n, alpha, gamma, d=cfg.design.d, log_adjust="above")
    return max(1, min(n, m))


@dataclass(frozen=True, eq=False)
class _Shared:
    """Per-run immutable state reused across replicates."""

    m: int
    rk: ResolvedKernel
    features: Optional[np.ndarray] = None
    design: Optional[Design] = None
    eigensystem: Optional[EigenSystem] = None
    f0_values: Optional[np.ndarray] = None
    truth_at_query: float = 0.0


def _prepare_shared(cfg: ExperimentConfig) -> _Shared:
    m = resolve_m(cfg)
    rk = resolve_kernel(cfg.kernel, cfg.design.n)
    truth_at_query = truth_value(cfg.truth, cfg.query_point)
    if cfg.design.kind is DesignKind.REGULAR_GRID_1D:
        design = generate_design(cfg.design, 0)
        return _Shared(m=m, rk=rk, design=design,
                       eigensystem=eigensystem_for(rk, design),
                       f0_values=truth_values(cfg.truth, design.points),
                       truth_at_query=truth_at_query)
    features = (load_feature_matrix(cfg.design.path)
                if cfg.design.kind is DesignKind.EXTERNAL else None)
    return _Shared(m=m, rk=rk, features=features, truth_at_query=truth_at_query)


def _nlpd(truth_at_query: float, mean: float, variance: float) -> float:
    if variance <= 0.0:
        return math.inf
    return 0.5 * math.log(2.0 * math.pi * variance) \
        + (truth_at_query - mean) ** 2 / (2.0 * variance)


def run_replicate(cfg: ExperimentConfig, replicate_index: int,
                  shared: Optional[_Shared] = None) -> ReplicateRecord:
    """Run one replicate end to end and record the pointwise outcome."""
    if shared is None:
        shared = _prepare_shared(cfg)
    try:
        rk = shared.rk
        if shared.design is not None:
            design = shared.design
            es = shared.eigensystem
        else:
            design = generate_design(
                cfg.design, replicate_rng(cfg.master_seed, replicate_index, _DESIGN_STAGE),
                features=shared.features)
            es = None
        y = generate_dataset(design, cfg.truth, cfg.noise,
                             replicate_rng(cfg.master_seed, replicate_index, _NOISE_STAGE))
        lengthscale = None
        if cfg.fit_lengthscale:
            fit = fit_hyperparameters(cfg.kernel, design, y, sigma2_bounds=cfg.sigma2_bounds)
            rk, es, est = fit.kernel, fit.eigensystem, fit.noise
            sigma2, boundary = est.sigma2, est.boundary
            lengthscale = fit.lengthscale
        else:
            if es is None:
                es = eigensystem_for(rk, design)
            if cfg.fixed_sigma2 is not None:
                sigma2, boundary = cfg.fixed_sigma2, None
            else:
                est = estimate_noise_variance(es, y, cfg.sigma2_bounds)
                sigma2, boundary = est.sigma2, est.boundary
        ps = sgpr_posterior_at(es, shared.m, rk, design, y, sigma2, cfg.query_point)
        ci = credible_interval(ps, cfg.delta)
        truth_at_query = shared.truth_at_query
        return ReplicateRecord(
            index=replicate_index, m=shared.m, mean=ps.mean, variance=ps.variance,
            lower=ci.lower, upper=ci.upper, covered=ci.contains(truth_at_query),
            nlpd=_nlpd(truth_at_query, ps.mean, ps.variance),
            sigma2=sigma2, sigma2_boundary=boundary, lengthscale=lengthscale)
    except EigenGPError as exc:
        raise ReplicateError(
            f"replicate {replicate_index} failed (master_seed={cfg.master_seed}, "
            f"stream key ({replicate_index}, stage)): {exc}") from exc


def run_replicates(cfg: ExperimentConfig, workers: int = 1) -> List[ReplicateRecord]:
    """All replicates, in index order regardless of execution order."""
    shared = _prepare_shared(cfg)
    indices = range(cfg.replicates)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda j: run_replicate(cfg, j, shared), indices))
    else:
        records = [run_replicate(cfg, j, shared) for j in indices]
    return records


def _sd(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def aggregate(records: Sequence[ReplicateRecord], truth_at_query: float) -> MetricsReport:
    """Fold replicate records into the Monte-Carlo metric estimates."""
    if not records:
        raise ArgumentError("cannot aggregate zero replicates")
    records = sorted(records, key=lambda r: r.index)
    means = np.array([r.mean for r in records])
    lengths = np.array([r.upper - r.lower for r in records])
    nlpds = np.array([r.nlpd for r in records])
    sigma2s = np.array([r.sigma2 for r in records])
    covered = np.array([r.covered for r in records], dtype=float)
    return MetricsReport(
        coverage=float(covered.mean()),
        length_mean=float(lengths.mean()), length_sd=_sd(lengths),
        rmse=float(np.sqrt(np.mean((means - truth_at_query) ** 2))),
        nlpd_mean=float(nlpds.mean()), nlpd_sd=_sd(nlpds),
        m_used=records[0].m,
        sigma2_estimates=SummaryStats(
            mean=float(sigma2s.mean()), sd=_sd(sigma2s),
            minimum=float(sigma2s.min()), maximum=float(sigma2s.max()),
            boundary_warnings=sum(1 for r in records if r.sigma2_boundary)),
        replicates=len(records))


def run_monte_carlo(cfg: ExperimentConfig, workers: int = 1) -> MetricsReport:
    """Run all replicates and aggregate; deterministic given the config."""
    records = run_replicates(cfg, workers=workers)
    return aggregate(records, truth_value(cfg.truth, cfg.query_point))


@dataclass(frozen=True)
class GridMethod:
    """One posterior curve to evaluate on the query grid."""

    label: str
    m_rule: MRule


def run_grid(cfg: ExperimentConfig, points: int,
             methods: Sequence[GridMethod]) -> List[Dict[str, object]]:
    """Posterior curves over a query grid for one seeded dataset.

    Uses the replicate-0 streams to draw a single dataset, then evaluates
    each method's posterior mean/variance and credible band on an
    equispaced grid over [0, 1].  Rows are dictionaries matching the grid
    CSV schema: series, m, x, mean, variance, lower, upper, truth.
    """
    if cfg.design.d != 1:
        raise ConfigurationError("grid evaluation is one-dimensional")
    if points < 2:
        raise ArgumentError(f"grid needs at least 2 points, got {points}")
    if not methods:
        raise ArgumentError("grid evaluation needs at least one method")
    shared = _prepare_shared(cfg)
    rk = shared.rk
    if shared.design is not None:
        design, es = shared.design, shared.eigensystem
    else:
        design = generate_design(cfg.design, replicate_rng(cfg.master_seed, 0, _DESIGN_STAGE),
                                 features=shared.features)
        es = eigensystem_for(rk, design)
    y = generate_dataset(design, cfg.truth, cfg.noise,
                         replicate_rng(cfg.master_seed, 0, _NOISE_STAGE))
    if cfg.fixed_sigma2 is not None:
        sigma2 = cfg.fixed_sigma2
    else:
        sigma2 = estimate_noise_variance(es, y, cfg.sigma2_bounds).sigma2
    xs = np.linspace(0.0, 1.0, points)
    rows: List[Dict[str, object]] = []
    for method in methods:
        method_cfg_m = resolve_m(_with_m_rule(cfg, method.m_rule))
        for x in xs:
            ps = sgpr_posterior_at(es, method_cfg_m, rk, design, y, sigma2, float(x))
            ci = credible_interval(ps, cfg.delta)
            rows.append({"series": method.label, "m": method_cfg_m, "x": float(x),
                         "mean": ps.mean, "variance": ps.variance,
                         "lower": ci.lower, "upper": ci.upper,
                         "truth": truth_value(cfg.truth, float(x))})
    return rows


def _with_m_rule(cfg: ExperimentConfig, rule: MRule) -> ExperimentConfig:
    return replace(cfg, m_rule=rule)


# ---------------------------------------------------------------------------
# plain-mapping configuration interface (shared with the CLI)
# ---------------------------------------------------------------------------

#: Documented configuration keys with their defaults.  "grid", "runs" and
#: "workers" are orchestration-level keys consumed by the CLI.
DEFAULT_CONFIG: Dict[str, object] = {
    "master_seed": 20260810,
    "replicates": 500,
    "delta": 0.1,
    "kernel": {"family": "rbm", "gamma": 0.5, "lengthscale": None,
               "fit_lengthscale": False},
    "design": {"kind": "regular_grid", "n": 1000, "d": 1, "rho": 0.0, "path": None},
    "truth": {"kind": "abs_power", "alpha": 1.0, "center": 0.5},
    "noise": {"kind": "gaussian", "sigma": 1.0},
    "m_rule": "threshold_alpha_gamma",
    "query": None,
    "sigma2_bounds": [1e-4, 1e2],
    "fixed_sigma2": None,
    "grid": None,
    "runs": None,
    "workers": None,
}


def deep_merge(base: Dict[str, object], override: Dict[str, object],
               path: str = "") -> Dict[str, object]:
    """Merge override into base, rejecting keys absent from base."""
    merged = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigurationError(f"unknown configuration key: {here}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            merged[key] = deep_merge(base[key], value, here)
        else:
            merged[key] = value
    return merged


def _enum_from(value: str, enum_cls, label: str):
    for member in enum_cls:
        if member.value == value:
            return member
    valid = ", ".join(member.value for member in enum_cls)
    raise ConfigurationError(f"{label} must be one of: {valid}; got {value!r}")


def _m_rule_from(value: object) -> MRule:
    if isinstance(value, bool):
        raise ConfigurationError(f"m_rule must be an integer or rule name, got {value!r}")
    if isinstance(value, int):
        return MRule(kind=MRuleKind.EXPLICIT, m=value)
    if isinstance(value, str):
        if value == "full":
            return MRule(kind=MRuleKind.FULL)
        for kind in (MRuleKind.THRESHOLD_ALPHA_GAMMA, MRuleKind.THRESHOLD_D,
                     MRuleKind.THRESHOLD_LOG_BELOW, MRuleKind.THRESHOLD_LOG_ABOVE):
            if value == kind.value:
                return MRule(kind=kind)
    raise ConfigurationError(
        "m_rule must be an integer, 'full', or one of threshold_alpha_gamma, "
        f"threshold_d, threshold_log_below, threshold_log_above; got {value!r}")


def config_from_mapping(mapping: Dict[str, object]) -> ExperimentConfig:
    """Build a validated ExperimentConfig from a plain nested mapping.

    The mapping is merged over :data:`DEFAULT_CONFIG`, so partial
    configurations are fine; unknown keys anywhere raise.
    """
    cfg = deep_merge(DEFAULT_CONFIG, mapping)
    kernel_map = cfg["kernel"]
    design_map = cfg["design"]
    truth_map = cfg["truth"]
    noise_map = cfg["noise"]
    truth_kind = _enum_from(truth_map["kind"], TruthKind, "truth.kind")
    truth_alpha_value = 2.0 if truth_kind is TruthKind.SIGNED_SQUARE else float(truth_map["alpha"])
    kernel = KernelSpec(
        family=_enum_from(kernel_map["family"], KernelFamily, "kernel.family"),
        gamma=float(kernel_map["gamma"]),
        lengthscale_override=(None if kernel_map["lengthscale"] is None
                              else float(kernel_map["lengthscale"])),
        dimension=int(design_map["d"]))
    design = DesignSpec(
        kind=_enum_from(design_map["kind"], DesignKind, "design.kind"),
        n=int(design_map["n"]), d=int(design_map["d"]),
        rho=float(design_map["rho"]), path=design_map["path"])
    truth = TruthSpec(kind=truth_kind, alpha=truth_alpha_value,
                      center=truth_map["center"])
    noise = NoiseSpec(kind=_enum_from(noise_map["kind"], NoiseKind, "noise.kind"),
                      sigma=float(noise_map["sigma"]))
    bounds = cfg["sigma2_bounds"]
    if not (isinstance(bounds, (list, tuple)) and len(bounds) == 2):
        raise ConfigurationError(f"sigma2_bounds must be a [lo, hi] pair, got {bounds!r}")
    return ExperimentConfig(
        kernel=kernel, design=design, truth=truth, noise=noise,
        m_rule=_m_rule_from(cfg["m_rule"]), delta=float(cfg["delta"]),
        query=cfg["query"], replicates=int(cfg["replicates"]),
        master_seed=int(cfg["master_seed"]),
        sigma2_bounds=(float(bounds[0]), float(bounds[1])),
        fixed_sigma2=(None if cfg["fixed_sigma2"] is None else float(cfg["fixed_sigma2"])),
        fit_lengthscale=bool(kernel_map["fit_lengthscale"]))
