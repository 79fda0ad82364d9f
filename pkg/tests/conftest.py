"""Shared fixtures and independent oracles for the test suite.

The oracles deliberately avoid the library's eigenbasis code path: the
posterior oracle solves the dense linear system directly, the sparse-
posterior oracle assembles the inducing-variable block matrices and
inverts them, and the KL oracle works from the dense covariance matrices.
"""

import numpy as np
import pytest

import eigengp as eg


def dense_posterior_oracle(K, kx, kxx, y, sigma2):
    """Mean/variance from a direct solve of (K + sigma2 I)."""
    A = K + sigma2 * np.eye(K.shape[0])
    sol = np.linalg.solve(A, np.column_stack([y, kx]))
    mean = float(kx @ sol[:, 0])
    var = float(kxx - kx @ sol[:, 1])
    return mean, var


def sgpr_matrix_oracle(K, kx, kxx, y, sigma2, m):
    """Rank-m posterior via the inducing-variable block matrices.

    Uses K_mm = diag(mu_1..mu_m), K_nm = V_m K_mm, K_xm = kx' V_m and the
    generic sparse-posterior formulas with explicit matrix inverses.
    """
    vals, vecs = np.linalg.eigh(K)
    order = np.argsort(vals)[::-1]
    mu = vals[order][:m]
    Vm = vecs[:, order][:, :m]
    Kmm = np.diag(mu)
    Knm = Vm * mu[None, :]
    Kxm = kx @ Vm
    A = sigma2 * Kmm + Knm.T @ Knm
    mean = float(Kxm @ np.linalg.solve(A, Knm.T @ y))
    B = Kmm + Knm.T @ Knm / sigma2
    var = float(kxx - Kxm @ np.linalg.solve(Kmm, Kxm) + Kxm @ np.linalg.solve(B, Kxm))
    return mean, var


def dense_kl_oracle(K, y, sigma2, m):
    """Gaussian KL between rank-m and full models from dense matrices."""
    n = K.shape[0]
    vals, vecs = np.linalg.eigh(K)
    order = np.argsort(vals)[::-1]
    mu = vals[order]
    V = vecs[:, order]
    Q = (V[:, :m] * mu[:m]) @ V[:, :m].T
    Kf = K + sigma2 * np.eye(n)
    Qf = Q + sigma2 * np.eye(n)
    quad = float(y @ (np.linalg.solve(Qf, y) - np.linalg.solve(Kf, y)))
    logdet = float(np.linalg.slogdet(Qf)[1] - np.linalg.slogdet(Kf)[1])
    trace = float(np.trace(Kf) - np.trace(Qf)) / sigma2
    return 0.5 * (quad + logdet + trace)


def random_instance(rng, n, families=("rbm", "matern", "se")):
    """A random (spec, rk, design, K, es) tuple for property sweeps."""
    fam = families[int(rng.integers(len(families)))]
    if fam == "rbm":
        spec = eg.KernelSpec(family=eg.KernelFamily.RESCALED_BROWNIAN_MOTION,
                             gamma=float(rng.uniform(0.2, 1.0)))
        pts = rng.uniform(0.02, 1.0, size=(n, 1))
    elif fam == "matern":
        spec = eg.KernelSpec(family=eg.KernelFamily.MATERN,
                             gamma=float(rng.choice([0.5, 1.5, 2.5])),
                             lengthscale_override=float(rng.uniform(0.2, 2.0)))
        pts = rng.uniform(0.0, 1.0, size=(n, 1))
    else:
        spec = eg.KernelSpec(family=eg.KernelFamily.SQUARED_EXPONENTIAL,
                             gamma=float(rng.uniform(0.3, 1.5)),
                             lengthscale_override=float(rng.uniform(0.2, 2.0)))
        pts = rng.uniform(0.0, 1.0, size=(n, 1))
    design = eg.Design(points=pts, kind=eg.DesignKind.UNIFORM_RANDOM)
    rk = eg.resolve_kernel(spec, n)
    K = eg.kernel_matrix(rk, design)
    es = eg.symmetric_eigensystem(K)
    return spec, rk, design, K, es


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
