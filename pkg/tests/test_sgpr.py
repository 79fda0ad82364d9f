import math

import numpy as np
import pytest
from scipy.special import ndtri

import eigengp as eg
from eigengp import ArgumentError
from conftest import dense_kl_oracle, random_instance, sgpr_matrix_oracle


def rbm_setup(n, gamma=0.5):
    spec = eg.KernelSpec(family=eg.KernelFamily.RESCALED_BROWNIAN_MOTION, gamma=gamma)
    rk = eg.resolve_kernel(spec, n)
    design = eg.regular_grid(n)
    es = eg.eigensystem_for(rk, design)
    return rk, design, es


class TestSparsePosterior:
    def test_full_rank_equals_full_posterior(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 30))
            _, rk, design, _, es = random_instance(rng, n)
            y = rng.standard_normal(n)
            x = float(rng.uniform(0, 1))
            full = eg.full_posterior_at(es, rk, design, y, 1.0, x)
            sparse = eg.sgpr_posterior_at(es, n, rk, design, y, 1.0, x)
            assert sparse.mean == pytest.approx(full.mean, abs=1e-12)
            assert sparse.variance == pytest.approx(full.variance, abs=1e-12)

    def test_dropping_last_pair_adds_one_variance_term(self, rng):
        n = 12
        _, rk, design, _, es = random_instance(rng, n)
        y = rng.standard_normal(n)
        x = 0.37
        kx = eg.kernel_vector(rk, design, x)
        v_last = es.eigenvectors[:, -1]
        eta_last = 1.0 / (1.0 + es.eigenvalues[-1])
        expected_gap = eta_last * float(v_last @ kx) ** 2
        var_m = eg.sgpr_posterior_at(es, n - 1, rk, design, y, 1.0, x).variance
        var_n = eg.sgpr_posterior_at(es, n, rk, design, y, 1.0, x).variance
        assert expected_gap >= 0
        assert var_m - var_n == pytest.approx(expected_gap, rel=1e-10, abs=1e-14)

    def test_rank_one_closed_form_case(self):
        # two grid points, keep only the top eigenpair
        rk, design, es = rbm_setup(2)
        y = np.array([1.0, 1.0])
        x = 0.8
        kx = eg.kernel_vector(rk, design, x)
        mu1 = es.eigenvalues[0]
        v1 = es.eigenvectors[:, 0]
        eta1 = 1.0 / (1.0 + mu1)
        mean_ref = eta1 * float(v1 @ kx) * float(v1 @ y)
        var_ref = eg.kernel_value(rk, x, x) - eta1 * float(v1 @ kx) ** 2
        ps = eg.sgpr_posterior_at(es, 1, rk, design, y, 1.0, x)
        assert ps.mean == pytest.approx(mean_ref, rel=1e-12)
        assert ps.variance == pytest.approx(var_ref, rel=1e-12)

    def test_matches_block_matrix_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 31))
            _, rk, design, K, es = random_instance(rng, n)
            # keep the oracle's explicit K_mm inverse well posed
            usable = int(np.sum(es.eigenvalues > 1e-6 * es.eigenvalues[0]))
            m = int(rng.integers(1, max(2, usable)))
            y = rng.standard_normal(n)
            sigma2 = float(rng.uniform(0.2, 2.0))
            x = float(rng.uniform(0, 1))
            kx = eg.kernel_vector(rk, design, x)
            kxx = eg.kernel_value(rk, x, x)
            mean_ref, var_ref = sgpr_matrix_oracle(K, kx, kxx, y, sigma2, m)
            ps = eg.sgpr_posterior_at(es, m, rk, design, y, sigma2, x)
            assert ps.mean == pytest.approx(mean_ref, rel=1e-8, abs=1e-8)
            assert ps.variance == pytest.approx(var_ref, rel=1e-8, abs=1e-8)

    def test_rank_out_of_range(self):
        rk, design, es = rbm_setup(4)
        for m in (0, 5):
            with pytest.raises(ArgumentError):
                eg.sgpr_posterior_at(es, m, rk, design, np.zeros(4), 1.0, 0.5)

    def test_truncated_eigensystem_is_sufficient(self, rng):
        # only the leading m pairs are needed for the rank-m posterior
        n, m = 18, 4
        _, rk, design, _, es = random_instance(rng, n)
        y = rng.standard_normal(n)
        full_path = eg.sgpr_posterior_at(es, m, rk, design, y, 1.0, 0.3)
        trunc_path = eg.sgpr_posterior_at(eg.truncate(es, m), m, rk, design, y, 1.0, 0.3)
        assert trunc_path.mean == full_path.mean
        assert trunc_path.variance == full_path.variance
        # the rank gap, by contrast, needs the discarded spectrum
        kx = eg.kernel_vector(rk, design, 0.3)
        with pytest.raises(ArgumentError):
            eg.rank_gap_vector(eg.truncate(es, m), m, 1.0, kx)


class TestRankGap:
    def test_full_rank_gap_is_zero(self):
        rk, design, es = rbm_setup(6)
        kx = eg.kernel_vector(rk, design, 0.3)
        r = eg.rank_gap_vector(es, 6, 1.0, kx)
        assert np.all(r == 0.0)

    def test_m_zero_rejected(self):
        rk, design, es = rbm_setup(6)
        kx = eg.kernel_vector(rk, design, 0.3)
        with pytest.raises(ArgumentError):
            eg.rank_gap_vector(es, 0, 1.0, kx)

    def test_two_point_single_term(self):
        rk, design, es = rbm_setup(2)
        kx = eg.kernel_vector(rk, design, 0.45)
        v2 = es.eigenvectors[:, 1]
        eta2 = 1.0 / (1.0 + es.eigenvalues[1])
        expected = eta2 * float(v2 @ kx) * v2
        np.testing.assert_allclose(eg.rank_gap_vector(es, 1, 1.0, kx), expected,
                                   rtol=1e-13)

    def test_against_dense_projector(self, rng):
        n = 17
        _, rk, design, _, es = random_instance(rng, n)
        kx = eg.kernel_vector(rk, design, 0.61)
        m = 5
        eta = 1.0 / (0.8 + es.eigenvalues)
        dense = np.zeros((n, n))
        for j in range(m, n):
            v = es.eigenvectors[:, j]
            dense += eta[j] * np.outer(v, v)
        np.testing.assert_allclose(eg.rank_gap_vector(es, m, 0.8, kx), dense @ kx,
                                   rtol=1e-10, atol=1e-12)


class TestFrequentistDecomposition:
    def test_zero_truth_gives_zero_bias(self, rng):
        n = 10
        _, rk, design, _, es = random_instance(rng, n)
        dec = eg.frequentist_decomposition(es, 4, rk, design, np.zeros(n), 1.0, 0.5, 0.0)
        assert dec.bias == 0.0
        assert dec.sampling_variance >= 0.0

    def test_full_rank_matches_full_posterior_quantities(self, rng):
        n = 14
        _, rk, design, _, es = random_instance(rng, n)
        f0 = rng.standard_normal(n)
        x, f0x = 0.52, 0.3
        full = eg.frequentist_decomposition(es, n, rk, design, f0, 1.0, x, f0x)
        # recompute through the posterior surface
        ps = eg.full_posterior_at(es, rk, design, f0, 1.0, x)
        assert full.bias == pytest.approx(ps.mean - f0x, abs=1e-12)
        assert full.posterior_variance == pytest.approx(ps.variance, abs=1e-14)

    def test_lemma_identities_unit_noise(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 51))
            _, rk, design, _, es = random_instance(rng, n)
            f0 = rng.standard_normal(n)
            m = int(rng.integers(1, n + 1))
            x = float(rng.uniform(0, 1))
            f0x = float(rng.standard_normal())
            kx = eg.kernel_vector(rk, design, x)
            r = eg.rank_gap_vector(es, m, 1.0, kx)
            dm = eg.frequentist_decomposition(es, m, rk, design, f0, 1.0, x, f0x)
            dn = eg.frequentist_decomposition(es, n, rk, design, f0, 1.0, x, f0x)
            assert dm.bias == pytest.approx(dn.bias - float(r @ f0), abs=1e-10)
            assert dm.sampling_variance == pytest.approx(
                dn.sampling_variance - float(r @ r), abs=1e-10)
            assert dm.posterior_variance == pytest.approx(
                dn.posterior_variance + float(r @ kx), abs=1e-10)

    def test_scaled_identity_for_general_noise(self, rng):
        n = 24
        _, rk, design, _, es = random_instance(rng, n)
        f0 = rng.standard_normal(n)
        sigma2 = 0.37
        x = 0.44
        kx = eg.kernel_vector(rk, design, x)
        r = eg.rank_gap_vector(es, 7, sigma2, kx)
        dm = eg.frequentist_decomposition(es, 7, rk, design, f0, sigma2, x, 0.0)
        dn = eg.frequentist_decomposition(es, n, rk, design, f0, sigma2, x, 0.0)
        assert dm.sampling_variance == pytest.approx(
            dn.sampling_variance - sigma2 * float(r @ r), abs=1e-10)

    def test_orderings_across_ranks(self, rng):
        for _ in range(3):
            n = int(rng.integers(2, 41))
            _, rk, design, _, es = random_instance(rng, n)
            f0 = rng.standard_normal(n)
            decs = {}
            for x in np.linspace(0.0, 1.0, 101):
                dn = eg.frequentist_decomposition(es, n, rk, design, f0, 1.0, float(x), 0.0)
                for m in range(1, n + 1):
                    dm = eg.frequentist_decomposition(es, m, rk, design, f0, 1.0,
                                                      float(x), 0.0)
                    assert dm.posterior_variance >= dn.posterior_variance - 1e-12
                    assert dm.sampling_variance <= dn.sampling_variance + 1e-12

    def test_length_mismatch(self):
        rk, design, es = rbm_setup(5)
        with pytest.raises(ArgumentError):
            eg.frequentist_decomposition(es, 2, rk, design, np.zeros(4), 1.0, 0.5, 0.0)


class TestCredibleInterval:
    def test_example_interval(self):
        ps = eg.PosteriorSummary(point=np.array([0.5]), mean=0.4, variance=0.4, rank=1)
        ci = eg.credible_interval(ps, 0.10)
        z = float(ndtri(0.95))
        assert ci.half_width == pytest.approx(z * math.sqrt(0.4), rel=1e-9)
        assert ci.lower == pytest.approx(-0.6403, abs=5e-5)
        assert ci.upper == pytest.approx(1.4403, abs=5e-5)
        assert ci.level == pytest.approx(0.9)

    def test_zero_variance_degenerates(self):
        ps = eg.PosteriorSummary(point=np.array([0.5]), mean=0.2, variance=0.0, rank=1)
        ci = eg.credible_interval(ps, 0.05)
        assert ci.half_width == 0.0
        assert ci.contains(0.2)
        assert not ci.contains(0.2000001)

    def test_quantile_ratio(self):
        ps = eg.PosteriorSummary(point=np.array([0.5]), mean=0.0, variance=1.0, rank=1)
        wide = eg.credible_interval(ps, 0.05)
        narrow = eg.credible_interval(ps, 0.10)
        assert wide.half_width / narrow.half_width == pytest.approx(1.19158, abs=1e-5)

    def test_invalid_delta(self):
        ps = eg.PosteriorSummary(point=np.array([0.5]), mean=0.0, variance=1.0, rank=1)
        for delta in (0.0, 1.0, -0.1, 2.0):
            with pytest.raises(ArgumentError):
                eg.credible_interval(ps, delta)


class TestKLDivergence:
    def test_zero_at_full_rank(self, rng):
        n = 9
        _, _, _, _, es = random_instance(rng, n)
        y = rng.standard_normal(n)
        assert eg.kl_to_full_posterior(es, n, y, 1.0) == 0.0

    def test_nonnegative_and_nonincreasing(self, rng):
        n = 20
        _, _, _, _, es = random_instance(rng, n)
        y = rng.standard_normal(n)
        values = [eg.kl_to_full_posterior(es, m, y, 0.9) for m in range(1, n + 1)]
        assert all(v >= 0.0 for v in values)
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_small_case_dense_oracle(self, rng):
        _, _, _, K, es = random_instance(rng, 3)
        y = rng.standard_normal(3)
        got = eg.kl_to_full_posterior(es, 1, y, 1.0)
        ref = dense_kl_oracle(K, y, 1.0, 1)
        assert got == pytest.approx(ref, abs=1e-9)

    def test_rank_out_of_range(self, rng):
        _, _, _, _, es = random_instance(rng, 5)
        with pytest.raises(ArgumentError):
            eg.kl_to_full_posterior(es, 0, np.zeros(5), 1.0)
        with pytest.raises(ArgumentError):
            eg.kl_to_full_posterior(es, 6, np.zeros(5), 1.0)
