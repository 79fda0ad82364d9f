"""Eigendecomposition of kernel matrices.

For the rescaled Brownian motion kernel on the regular grid
x_i = i/(n + 1/2) the eigenpairs are available in closed form: with
N = (n + 1/2)/c_n and angles psi_j = (j - 1/2) * pi / (n + 1/2),

    mu_j   = 1 / (2 N (1 - cos psi_j)),
    v_j[l] = 2 sin(l psi_j) / sqrt(2n + 1),

which is what :func:`brownian_eigensystem_closed_form` evaluates (via
sin^2(psi/2) to avoid cancellation in 1 - cos).  Everything else goes
through the dense symmetric solver.

Both paths normalize to the same conventions: eigenvalues descending,
tiny negative eigenvalues clamped to zero, each eigenvector's first
non-negligible component positive, and ties ordered by the sign-fixed
vectors themselves so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ArgumentError, ConditioningError, ConfigurationError, ContractViolationError
from .kernels import Design, DesignKind, KernelFamily, ResolvedKernel, kernel_matrix

# relative band below zero inside which eigenvalues are treated as round-off
_CLAMP_BAND = 1e-10
# relative magnitude below which a component does not determine the sign
_SIGN_EPS = 1e-12
# relative asymmetry beyond which an input matrix is rejected
_SYMMETRY_TOL = 1e-12


class EigenSource(Enum):
    CLOSED_FORM = "closed_form"
    NUMERIC = "numeric"


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Leading-k eigenpairs of an n x n kernel matrix.

    ``eigenvalues`` has shape (k,), sorted descending; ``eigenvectors`` has
    shape (n, k) with orthonormal columns.  A full decomposition has k = n.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source: EigenSource

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def k(self) -> int:
        return self.eigenvectors.shape[1]

    @property
    def is_full(self) -> bool:
        return self.k == self.n


def _fix_signs(V: np.ndarray) -> np.ndarray:
    for j in range(V.shape[1]):
        col = V[:, j]
        nrm = np.linalg.norm(col)
        big = np.flatnonzero(np.abs(col) > _SIGN_EPS * nrm)
        if big.size and col[big[0]] < 0:
            V[:, j] = -col
    return V


def _order_ties(vals: np.ndarray, V: np.ndarray) -> None:
    # among exactly equal eigenvalues, order columns lexicographically
    j = 0
    k = vals.size
    while j < k:
        i = j
        while i + 1 < k and vals[i + 1] == vals[j]:
            i += 1
        if i > j:
            cols = sorted(range(j, i + 1), key=lambda c: tuple(V[:, c]))
            V[:, j:i + 1] = V[:, cols]
        j = i + 1


def brownian_eigensystem_closed_form(n: int, gamma: float) -> EigenSystem:
    """Closed-form eigenpairs of the rescaled Brownian motion grid matrix."""
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if not 0.0 < gamma <= 1.0:
        raise ConfigurationError(f"gamma must lie in (0, 1], got {gamma}")
    j = np.arange(1, n + 1, dtype=float)
    psi = (j - 0.5) * np.pi / (n + 0.5)
    c_n = (n + 0.5) ** ((1.0 - 2.0 * gamma) / (1.0 + 2.0 * gamma))
    N = (n + 0.5) / c_n
    mu = 1.0 / (4.0 * N * np.sin(0.5 * psi) ** 2)
    V = 2.0 * np.sin(np.outer(j, psi)) / np.sqrt(2.0 * n + 1.0)
    # sin(l * psi_j) > 0 at l = 1 for every j, so the sign convention already holds
    return EigenSystem(eigenvalues=mu, eigenvectors=V, source=EigenSource.CLOSED_FORM)


def symmetric_eigensystem(K: np.ndarray) -> EigenSystem:
    """Dense decomposition of a symmetric PSD matrix into an EigenSystem."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise ArgumentError("matrix entries must be finite")
    scale = float(np.max(np.abs(K))) if K.size else 0.0
    asym = float(np.max(np.abs(K - K.T))) if K.size else 0.0
    if asym > _SYMMETRY_TOL * max(scale, 1e-300):
        raise ContractViolationError(
            f"matrix is not symmetric: max asymmetry {asym:.3e} exceeds "
            f"{_SYMMETRY_TOL:.0e} * max|K| = {_SYMMETRY_TOL * scale:.3e}")

    vals, V = np.linalg.eigh(K)
    vals = vals[::-1].copy()
    V = np.ascontiguousarray(V[:, ::-1])

    top = max(vals[0], 0.0) if vals.size else 0.0
    floor = -_CLAMP_BAND * top
    if np.any(vals < floor):
        worst = float(vals.min())
        raise ConditioningError(
            f"eigenvalue {worst:.3e} below the PSD round-off band {floor:.3e}; "
            "input is not positive semi-definite to working precision")
    np.maximum(vals, 0.0, out=vals)

    _fix_signs(V)
    _order_ties(vals, V)
    return EigenSystem(eigenvalues=vals, eigenvectors=V, source=EigenSource.NUMERIC)


def truncate(es: EigenSystem, m: int) -> EigenSystem:
    """Restrict to the leading m eigenpairs."""
    if not 1 <= m <= es.k:
        raise ArgumentError(f"m must lie in [1, {es.k}], got {m}")
    if m == es.k:
        return es
    return EigenSystem(eigenvalues=es.eigenvalues[:m].copy(),
                       eigenvectors=es.eigenvectors[:, :m].copy(),
                       source=es.source)


def eigensystem_for(rk: ResolvedKernel, design: Design) -> EigenSystem:
    """Decompose the kernel matrix of a design, closed form when exact.

    The closed-form path is taken only on the exact flag match of a regular
    1-D grid with the rescaled Brownian motion family, never on a
    floating-point comparison of coordinates.
    """
    if (design.kind is DesignKind.REGULAR_GRID_1D
            and rk.family is KernelFamily.RESCALED_BROWNIAN_MOTION):
        return brownian_eigensystem_closed_form(design.n, rk.spec.gamma)
    return symmetric_eigensystem(kernel_matrix(rk, design))


def _brownian_leading(n: int, gamma: float, m: int) -> EigenSystem:
    """Leading m closed-form eigenpairs in O(n m) work (profiling helper)."""
    if not 1 <= m <= n:
        raise ArgumentError(f"m must lie in [1, {n}], got {m}")
    j = np.arange(1, m + 1, dtype=float)
    psi = (j - 0.5) * np.pi / (n + 0.5)
    c_n = (n + 0.5) ** ((1.0 - 2.0 * gamma) / (1.0 + 2.0 * gamma))
    N = (n + 0.5) / c_n
    mu = 1.0 / (4.0 * N * np.sin(0.5 * psi) ** 2)
    rows = np.arange(1, n + 1, dtype=float)
    V = 2.0 * np.sin(np.outer(rows, psi)) / np.sqrt(2.0 * n + 1.0)
    return EigenSystem(eigenvalues=mu, eigenvectors=V, source=EigenSource.CLOSED_FORM)
