"""Full Gaussian-process posterior, marginal likelihood and noise fitting.

All posterior quantities are evaluated in the eigenbasis of the kernel
matrix: with eigenpairs (mu_j, v_j) of K and eta_j = 1/(sigma^2 + mu_j),

    mean(x)     = k_n(x)' [sum_j eta_j v_j v_j'] y,
    variance(x) = k(x, x) - k_n(x)' [sum_j eta_j v_j v_j'] k_n(x),

which is the usual (K + sigma^2 I)^{-1} solve with the inverse expanded in
the eigenbasis.  The sparse approximation in :mod:`eigengp.sgpr` is the same
sum truncated after m terms, so both share one code path and their exact
algebraic relationships hold to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .eigen import EigenSystem, symmetric_eigensystem
from .errors import ArgumentError, ConditioningError, ConfigurationError
from .kernels import (Design, KernelFamily, KernelSpec, ResolvedKernel, kernel_matrix,
                      kernel_value, kernel_vector, resolve_kernel)

LOG_2PI = math.log(2.0 * math.pi)

#: default bracket for the noise-variance search
DEFAULT_SIGMA2_BOUNDS = (1e-4, 1e2)

# posterior variances more negative than this (relative to the prior
# variance) indicate inconsistent inputs rather than round-off
_VARIANCE_BAND = 1e-12

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Pointwise posterior mean and variance at a query location."""

    point: np.ndarray
    mean: float
    variance: float
    rank: int


@dataclass(frozen=True)
class NoiseEstimate:
    """Maximizer of the log marginal likelihood over the noise variance.

    ``boundary`` is "lower"/"upper" when the maximizer sits on the search
    bracket (within the search tolerance), None otherwise.
    """

    sigma2: float
    boundary: Optional[str]
    log_marginal: float


def _posterior_core(es: EigenSystem, rank: int, kxx: float, kx: np.ndarray,
                    y: np.ndarray, sigma2: float) -> Tuple[float, float]:
    Vr = es.eigenvectors[:, :rank]
    w = Vr.T @ kx
    p = Vr.T @ y
    eta = 1.0 / (sigma2 + es.eigenvalues[:rank])
    mean = float(np.dot(eta * w, p))
    raw = kxx - float(np.dot(eta, w * w))
    if raw < -_VARIANCE_BAND * max(kxx, 0.0):
        raise ConditioningError(
            f"posterior variance {raw:.6e} fell below the round-off band "
            f"{-_VARIANCE_BAND * kxx:.3e}; eigensystem and kernel are inconsistent")
    return mean, max(raw, 0.0)


def _check_inputs(es: EigenSystem, y: np.ndarray, sigma2: float,
                  need_full: bool = True) -> np.ndarray:
    if not sigma2 > 0:
        raise ArgumentError(f"sigma2 must be positive, got {sigma2}")
    y = np.asarray(y, dtype=float)
    if y.shape != (es.n,):
        raise ArgumentError(f"y must have shape ({es.n},), got {y.shape}")
    if need_full and not es.is_full:
        raise ArgumentError(f"a full eigensystem is required (k = n), got k={es.k} < n={es.n}")
    return y


def posterior_at(es: EigenSystem, rank: int, rk: ResolvedKernel, design: Design,
                 y: np.ndarray, sigma2: float, x) -> PosteriorSummary:
    """Posterior summary using the leading ``rank`` eigenpairs.

    A truncated eigensystem is accepted as long as it retains at least
    ``rank`` pairs.
    """
    y = _check_inputs(es, y, sigma2, need_full=False)
    if not 1 <= rank <= es.k:
        raise ArgumentError(f"rank must lie in [1, {es.k}], got {rank}")
    if design.n != es.n:
        raise ArgumentError(f"design has {design.n} points but eigensystem has n={es.n}")
    kx = kernel_vector(rk, design, x)
    kxx = kernel_value(rk, x, x)
    mean, var = _posterior_core(es, rank, kxx, kx, y, sigma2)
    return PosteriorSummary(point=np.atleast_1d(np.asarray(x, dtype=float)),
                            mean=mean, variance=var, rank=rank)


def full_posterior_at(es: EigenSystem, rk: ResolvedKernel, design: Design,
                      y: np.ndarray, sigma2: float, x) -> PosteriorSummary:
    """Mean and variance of the full GP posterior at x."""
    _check_inputs(es, y, sigma2)
    return posterior_at(es, es.k, rk, design, y, sigma2, x)


def log_marginal_likelihood(es: EigenSystem, y: np.ndarray, sigma2: float) -> float:
    """Log density of y under the prior-plus-noise Gaussian model."""
    y = _check_inputs(es, y, sigma2)
    p = es.eigenvectors.T @ y
    denom = es.eigenvalues + sigma2
    return float(-0.5 * np.sum(p * p / denom) - 0.5 * np.sum(np.log(denom))
                 - 0.5 * es.n * LOG_2PI)


def _golden_section_max(f, lo: float, hi: float, tol: float) -> Tuple[float, float]:
    """Maximize a unimodal f on [lo, hi] to absolute tolerance tol."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, max(fc, fd)


def estimate_noise_variance(es: EigenSystem, y: np.ndarray,
                            bounds: Tuple[float, float] = DEFAULT_SIGMA2_BOUNDS,
                            tol: float = 1e-6) -> NoiseEstimate:
    """Maximize the log marginal likelihood over log sigma^2 in ``bounds``.

    Golden-section search with absolute tolerance ``tol`` in log sigma^2.
    An estimate within ``tol`` of a bracket end is snapped to that end and
    flagged via ``boundary``.
    """
    lo, hi = bounds
    if not (0.0 < lo < hi):
        raise ArgumentError(f"bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")
    y = _check_inputs(es, y, lo)
    p2 = (es.eigenvectors.T @ y) ** 2
    mu = es.eigenvalues
    n = es.n

    def objective(t: float) -> float:
        denom = mu + math.exp(t)
        val = float(-0.5 * np.sum(p2 / denom) - 0.5 * np.sum(np.log(denom))
                    - 0.5 * n * LOG_2PI)
        if not math.isfinite(val):
            raise ConditioningError(f"log marginal likelihood is not finite at sigma2={math.exp(t)}")
        return val

    t_lo, t_hi = math.log(lo), math.log(hi)
    t_hat, f_hat = _golden_section_max(objective, t_lo, t_hi, tol)
    if t_hat - t_lo <= tol:
        return NoiseEstimate(sigma2=lo, boundary="lower", log_marginal=objective(t_lo))
    if t_hi - t_hat <= tol:
        return NoiseEstimate(sigma2=hi, boundary="upper", log_marginal=objective(t_hi))
    return NoiseEstimate(sigma2=math.exp(t_hat), boundary=None, log_marginal=f_hat)


@dataclass(frozen=True, eq=False)
class HyperparameterFit:
    """Result of the coordinate-wise (sigma^2, lengthscale) fit."""

    kernel: ResolvedKernel
    eigensystem: EigenSystem
    noise: NoiseEstimate
    lengthscale: float


def fit_hyperparameters(spec: KernelSpec, design: Design, y: np.ndarray,
                        sigma2_bounds: Tuple[float, float] = DEFAULT_SIGMA2_BOUNDS,
                        lengthscale_bounds: Tuple[float, float] = (1e-2, 1e2),
                        sweeps: int = 5,
                        lengthscale_tol: float = 1e-3) -> HyperparameterFit:
    """Joint maximum-likelihood fit of noise variance and lengthscale.

    Coordinate-wise golden-section search, ``sweeps`` passes: each pass
    re-estimates sigma^2 at the current lengthscale, then the lengthscale at
    the current sigma^2.  Each lengthscale evaluation costs a dense
    eigendecomposition, so this is meant for desk-scale n.  Only stationary
    families have a lengthscale to fit.
    """
    if spec.family is KernelFamily.RESCALED_BROWNIAN_MOTION:
        raise ConfigurationError("Brownian motion has no free lengthscale; its scaling "
                                 "is fixed by the sample size")
    lo, hi = lengthscale_bounds
    if not (0.0 < lo < hi):
        raise ArgumentError(f"lengthscale bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")
    y = np.asarray(y, dtype=float)

    def with_ell(ell: float) -> ResolvedKernel:
        base = KernelSpec(family=spec.family, gamma=spec.gamma,
                          lengthscale_override=ell, dimension=spec.dimension)
        return resolve_kernel(base, design.n)

    rk = resolve_kernel(spec, design.n)
    ell = rk.lengthscale
    es = symmetric_eigensystem(kernel_matrix(rk, design))
    est = estimate_noise_variance(es, y, sigma2_bounds)
    for _ in range(sweeps):
        s2 = est.sigma2

        def objective(t: float) -> float:
            cand = with_ell(math.exp(t))
            es_t = symmetric_eigensystem(kernel_matrix(cand, design))
            return log_marginal_likelihood(es_t, y, s2)

        t_hat, _ = _golden_section_max(objective, math.log(lo), math.log(hi),
                                       lengthscale_tol)
        ell = math.exp(t_hat)
        rk = with_ell(ell)
        es = symmetric_eigensystem(kernel_matrix(rk, design))
        est = estimate_noise_variance(es, y, sigma2_bounds)
    return HyperparameterFit(kernel=rk, eigensystem=es, noise=est, lengthscale=ell)
