"""Sparse variational GP regression with eigenvector inducing variables.

The inducing variables are u_j = v_j' f over the leading eigenvectors v_j of
the kernel matrix, the optimal rank-m choice.  The resulting approximate
posterior replaces the full eigen-sum of :mod:`eigengp.gp` with its leading
m terms; at m = n it coincides with the full posterior exactly.

Besides the posterior itself, this module exposes the quantities that
connect the rank-m posterior back to the full one: the rank-gap vector

    r_m(x) = [sum_{j>m} eta_j v_j v_j'] k_n(x),

the frequentist bias/variance decomposition of the posterior mean under a
known truth, pointwise credible intervals, and the KL divergence between
the rank-m and full posteriors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import normal
from .eigen import EigenSystem
from .errors import ArgumentError
from .gp import PosteriorSummary, _check_inputs, _posterior_core, posterior_at
from .kernels import Design, ResolvedKernel, kernel_value, kernel_vector


@dataclass(frozen=True)
class FrequentistDecomposition:
    """Bias, sampling variance and posterior variance at a point.

    ``bias`` is the expectation of the rank-m posterior mean minus the
    truth; ``sampling_variance`` is its variance over the noise
    distribution; ``posterior_variance`` is the rank-m posterior variance.
    """

    bias: float
    sampling_variance: float
    posterior_variance: float
    rank: int


@dataclass(frozen=True)
class CredibleInterval:
    """Symmetric pointwise credible interval center +- half_width."""

    center: float
    half_width: float
    level: float

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    @property
    def length(self) -> float:
        return 2.0 * self.half_width

    def contains(self, value: float) -> bool:
        return abs(value - self.center) <= self.half_width


def _check_rank(es: EigenSystem, m: int) -> None:
    if not 1 <= m <= es.k:
        raise ArgumentError(f"m must lie in [1, {es.k}], got {m}")


def sgpr_posterior_at(es: EigenSystem, m: int, rk: ResolvedKernel, design: Design,
                      y: np.ndarray, sigma2: float, x) -> PosteriorSummary:
    """Rank-m posterior mean and variance at x."""
    _check_rank(es, m)
    return posterior_at(es, m, rk, design, y, sigma2, x)


def rank_gap_vector(es: EigenSystem, m: int, sigma2: float, kx: np.ndarray) -> np.ndarray:
    """r_m(x): the discarded-spectrum image of the kernel vector k_n(x)."""
    _check_rank(es, m)
    if not sigma2 > 0:
        raise ArgumentError(f"sigma2 must be positive, got {sigma2}")
    if not es.is_full:
        raise ArgumentError("the rank gap is defined against the full spectrum; "
                            f"got a truncated eigensystem (k={es.k} < n={es.n})")
    kx = np.asarray(kx, dtype=float)
    if kx.shape != (es.n,):
        raise ArgumentError(f"kernel vector must have shape ({es.n},), got {kx.shape}")
    Vt = es.eigenvectors[:, m:]
    eta = 1.0 / (sigma2 + es.eigenvalues[m:])
    return Vt @ (eta * (Vt.T @ kx))


def frequentist_decomposition(es: EigenSystem, m: int, rk: ResolvedKernel,
                              design: Design, f0_values: np.ndarray, sigma2: float,
                              x, f0_at_x: float) -> FrequentistDecomposition:
    """Bias/variance of the rank-m posterior mean under a known truth.

    ``f0_values`` is the truth evaluated at the design points; ``sigma2``
    doubles as the model noise variance in eta and the noise variance of
    the data-generating distribution.
    """
    _check_rank(es, m)
    f0_values = _check_inputs(es, np.asarray(f0_values, dtype=float), sigma2,
                              need_full=False)
    kx = kernel_vector(rk, design, x)
    kxx = kernel_value(rk, x, x)
    Vm = es.eigenvectors[:, :m]
    w = Vm.T @ kx
    q = Vm.T @ f0_values
    eta = 1.0 / (sigma2 + es.eigenvalues[:m])
    bias = float(np.dot(eta * w, q)) - float(f0_at_x)
    sampling_variance = sigma2 * float(np.dot(eta * w, eta * w))
    _, post_var = _posterior_core(es, m, kxx, kx, f0_values, sigma2)
    return FrequentistDecomposition(bias=bias, sampling_variance=sampling_variance,
                                    posterior_variance=post_var, rank=m)


def credible_interval(ps: PosteriorSummary, delta: float) -> CredibleInterval:
    """Smallest centered interval of posterior probability 1 - delta."""
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    if ps.variance < 0:
        raise ArgumentError(f"posterior variance must be nonnegative, got {ps.variance}")
    z = normal.two_sided_quantile(delta)
    return CredibleInterval(center=ps.mean, half_width=z * math.sqrt(ps.variance),
                            level=1.0 - delta)


def kl_to_full_posterior(es: EigenSystem, m: int, y: np.ndarray, sigma2: float) -> float:
    """KL divergence from the rank-m posterior to the full posterior.

    Computed from the discarded spectrum:

        0.5 * [ y' (sigma^-2 sum_{j>m} (mu_j/(mu_j+sigma^2)) v_j v_j') y
                + sum_{j>m} log(sigma^2/(sigma^2+mu_j))
                + sigma^-2 sum_{j>m} mu_j ].

    Exactly zero at m = n, nonnegative and nonincreasing in m otherwise.
    """
    _check_rank(es, m)
    y = _check_inputs(es, y, sigma2)
    if m == es.k:
        return 0.0
    mu = es.eigenvalues[m:]
    p = es.eigenvectors[:, m:].T @ y
    quad = float(np.sum(p * p * mu / (mu + sigma2))) / sigma2
    logdet = float(np.sum(np.log(sigma2 / (sigma2 + mu))))
    trace = float(np.sum(mu)) / sigma2
    return 0.5 * (quad + logdet + trace)
