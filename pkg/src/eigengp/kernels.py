"""Prior covariance kernels and their matrices.

Three families are supported:

* rescaled Brownian motion on [0, 1], ``k(x, x') = c_n * min(x, x')`` with a
  sample-size-dependent scaling ``c_n = (n + 1/2)^((1-2*gamma)/(1+2*gamma))``
  that plays the role of a lengthscale;
* Matern kernels with half-integer smoothness 1/2, 3/2, 5/2 (closed forms,
  no Bessel functions needed);
* the squared exponential with lengthscale ``n^(-1/(1+2*gamma))`` in one
  dimension and ``n^(-1/(d+2*gamma))`` otherwise.

The Brownian scaling and the SE lengthscale are resolved against the sample
size ``n``; the Matern lengthscale defaults to 1.0 unless overridden (or
fitted, see :mod:`eigengp.gp`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ArgumentError, ConfigurationError, DomainError

PointLike = Union[float, Sequence[float], np.ndarray]

# row block size for pairwise-distance assembly; bounds peak memory at
# _CHUNK * n * d floats
_CHUNK = 256


class KernelFamily(Enum):
    RESCALED_BROWNIAN_MOTION = "rbm"
    MATERN = "matern"
    SQUARED_EXPONENTIAL = "se"


#: Matern smoothness values with closed-form kernels.
MATERN_SMOOTHNESS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class KernelSpec:
    """A prior covariance family before the sample size is known."""

    family: KernelFamily
    gamma: float
    lengthscale_override: Optional[float] = None
    dimension: int = 1

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.dimension < 1:
            raise ConfigurationError(f"dimension must be >= 1, got {self.dimension}")
        if self.family is KernelFamily.RESCALED_BROWNIAN_MOTION:
            if not 0.0 < self.gamma <= 1.0:
                raise ConfigurationError(
                    f"rescaled Brownian motion requires gamma in (0, 1], got {self.gamma}")
            if self.dimension != 1:
                raise ConfigurationError("rescaled Brownian motion is defined on [0, 1] only")
        if self.family is KernelFamily.MATERN and self.gamma not in MATERN_SMOOTHNESS:
            raise ConfigurationError(
                f"Matern smoothness must be one of {MATERN_SMOOTHNESS}, got {self.gamma}")
        if self.lengthscale_override is not None and not self.lengthscale_override > 0:
            raise ConfigurationError(
                f"lengthscale override must be positive, got {self.lengthscale_override}")


class DesignKind(Enum):
    REGULAR_GRID_1D = "regular_grid"
    UNIFORM_RANDOM = "uniform"
    GAUSSIAN_EQUICORRELATED = "gaussian"
    EXTERNAL = "external"


@dataclass(frozen=True, eq=False)
class Design:
    """An ordered set of design points, stored as an (n, d) array."""

    points: np.ndarray
    kind: DesignKind

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ConfigurationError(f"design points must form an (n, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("design points must all be finite")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def regular_grid(n: int) -> Design:
    """The one-dimensional design x_i = i / (n + 1/2), i = 1..n."""
    if n < 1:
        raise ArgumentError(f"grid size must be >= 1, got {n}")
    x = np.arange(1, n + 1, dtype=float) / (n + 0.5)
    return Design(points=x[:, None], kind=DesignKind.REGULAR_GRID_1D)


@dataclass(frozen=True)
class ResolvedKernel:
    """A kernel spec with its sample-size-dependent scale filled in.

    Exactly one of ``c_n`` (Brownian scaling) and ``lengthscale``
    (Matern/SE) is set.
    """

    spec: KernelSpec
    n: int
    c_n: Optional[float] = None
    lengthscale: Optional[float] = None

    @property
    def family(self) -> KernelFamily:
        return self.spec.family


def resolve_kernel(spec: KernelSpec, n: int) -> ResolvedKernel:
    """Fix the kernel's scale for a sample of size ``n``.

    Brownian motion gets ``c_n = (n + 1/2)^((1-2g)/(1+2g))`` (exactly 1.0 at
    g = 1/2); the squared exponential gets ``n^(-1/(1+2g))`` for d = 1 and
    ``n^(-1/(d+2g))`` otherwise unless overridden; Matern uses the override
    if present, else 1.0.
    """
    if n < 1:
        raise ArgumentError(f"sample size must be >= 1, got {n}")
    g = spec.gamma
    if spec.family is KernelFamily.RESCALED_BROWNIAN_MOTION:
        c_n = (n + 0.5) ** ((1.0 - 2.0 * g) / (1.0 + 2.0 * g))
        return ResolvedKernel(spec=spec, n=n, c_n=c_n)
    if spec.family is KernelFamily.SQUARED_EXPONENTIAL:
        if spec.lengthscale_override is not None:
            ell = spec.lengthscale_override
        elif spec.dimension == 1:
            ell = float(n) ** (-1.0 / (1.0 + 2.0 * g))
        else:
            ell = float(n) ** (-1.0 / (spec.dimension + 2.0 * g))
        return ResolvedKernel(spec=spec, n=n, lengthscale=ell)
    ell = spec.lengthscale_override if spec.lengthscale_override is not None else 1.0
    return ResolvedKernel(spec=spec, n=n, lengthscale=ell)


def _as_point(x: PointLike, d: int) -> np.ndarray:
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.shape != (d,):
        raise ArgumentError(f"expected a point of dimension {d}, got shape {pt.shape}")
    if not np.all(np.isfinite(pt)):
        raise ArgumentError("point coordinates must be finite")
    return pt


def _check_unit_interval(values: np.ndarray) -> None:
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise DomainError("rescaled Brownian motion is defined on [0, 1]; "
                          f"got values in [{values.min()}, {values.max()}]")


def _matern_of_r(r: np.ndarray, gamma: float, ell: float) -> np.ndarray:
    s = r / ell
    if gamma == 0.5:
        return np.exp(-s)
    if gamma == 1.5:
        t = math.sqrt(3.0) * s
        return (1.0 + t) * np.exp(-t)
    # gamma == 2.5, enforced by KernelSpec
    t = math.sqrt(5.0) * s
    return (1.0 + t + t * t / 3.0) * np.exp(-t)


def _se_of_r2(r2: np.ndarray, ell: float) -> np.ndarray:
    return np.exp(-0.5 * r2 / (ell * ell))


def kernel_value(rk: ResolvedKernel, x: PointLike, x2: PointLike) -> float:
    """Evaluate k(x, x'). Symmetric in its arguments by construction."""
    d = rk.spec.dimension
    a = _as_point(x, d)
    b = _as_point(x2, d)
    if rk.family is KernelFamily.RESCALED_BROWNIAN_MOTION:
        _check_unit_interval(a)
        _check_unit_interval(b)
        return rk.c_n * min(a[0], b[0])
    r2 = float(np.sum((a - b) ** 2))
    if rk.family is KernelFamily.SQUARED_EXPONENTIAL:
        return float(_se_of_r2(np.asarray(r2), rk.lengthscale))
    return float(_matern_of_r(np.sqrt(np.asarray(r2)), rk.spec.gamma, rk.lengthscale))


def _pairwise_sq_dists(pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def kernel_matrix(rk: ResolvedKernel, design: Design) -> np.ndarray:
    """The n x n matrix [k(x_i, x_j)] over the design, exactly symmetric."""
    if design.d != rk.spec.dimension:
        raise ArgumentError(f"design dimension {design.d} does not match kernel "
                            f"dimension {rk.spec.dimension}")
    if rk.family is KernelFamily.RESCALED_BROWNIAN_MOTION:
        x = design.points[:, 0]
        _check_unit_interval(x)
        K = rk.c_n * np.minimum.outer(x, x)
    else:
        r2 = _pairwise_sq_dists(design.points)
        if rk.family is KernelFamily.SQUARED_EXPONENTIAL:
            K = _se_of_r2(r2, rk.lengthscale)
        else:
            K = _matern_of_r(np.sqrt(r2), rk.spec.gamma, rk.lengthscale)
    # mirror the upper triangle so symmetry holds bit for bit
    K = np.triu(K) + np.triu(K, 1).T
    return K


def kernel_vector(rk: ResolvedKernel, design: Design, x: PointLike) -> np.ndarray:
    """The n-vector (k(x, x_1), ..., k(x, x_n))."""
    if design.d != rk.spec.dimension:
        raise ArgumentError(f"design dimension {design.d} does not match kernel "
                            f"dimension {rk.spec.dimension}")
    pt = _as_point(x, rk.spec.dimension)
    if rk.family is KernelFamily.RESCALED_BROWNIAN_MOTION:
        xs = design.points[:, 0]
        _check_unit_interval(xs)
        _check_unit_interval(pt)
        return rk.c_n * np.minimum(xs, pt[0])
    diff = design.points - pt[None, :]
    r2 = np.einsum("ij,ij->i", diff, diff)
    if rk.family is KernelFamily.SQUARED_EXPONENTIAL:
        return _se_of_r2(r2, rk.lengthscale)
    return _matern_of_r(np.sqrt(r2), rk.spec.gamma, rk.lengthscale)
