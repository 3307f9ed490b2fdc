"""Unit and property tests for the categorical / special-function kernels.

Expected values marked "frozen" were computed with an independent
high-precision evaluation (mpmath at 40 digits / adaptive quadrature)
and pasted in verbatim.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from actinf.errors import (
    AllNegInfError,
    DimMismatchError,
    InvalidJointError,
    NonPositiveArgError,
)
from actinf.probkit import (
    CategoricalDist,
    ConcentrationVec,
    LogWeights,
    cross_entropy,
    digamma,
    dirichlet_kl,
    elementwise_log,
    entropy,
    kl,
    kl_chain_parts,
    log_beta,
    log_gamma,
    log_matvec,
    quad_form_log,
    softmax,
    weighted_logs,
)

INF = math.inf


def rand_dist(rng, k):
    return rng.dirichlet(np.ones(k))


# --- domain types -----------------------------------------------------------


class TestCategoricalDist:
    def test_valid(self):
        d = CategoricalDist([0.25, 0.75])
        assert d.K == 2

    def test_rejects_negative(self):
        with pytest.raises(InvalidJointError):
            CategoricalDist([1.1, -0.1])

    def test_rejects_bad_sum(self):
        with pytest.raises(InvalidJointError):
            CategoricalDist([0.5, 0.4])

    def test_point_mass_and_uniform(self):
        assert CategoricalDist.point_mass(1, 3).weights[1] == 1.0
        assert np.allclose(CategoricalDist.uniform(4).weights, 0.25)

    def test_immutability(self):
        d = CategoricalDist([0.5, 0.5])
        with pytest.raises(ValueError):
            d.weights[0] = 0.9


class TestLogWeights:
    def test_allows_neg_inf(self):
        LogWeights([-INF, 0.0])

    def test_rejects_all_neg_inf(self):
        with pytest.raises(AllNegInfError):
            LogWeights([-INF, -INF])


class TestConcentrationVec:
    def test_alpha0_cached(self):
        cv = ConcentrationVec([2.0, 3.0])
        assert cv.alpha0 == 5.0

    def test_rejects_nonpositive(self):
        with pytest.raises(NonPositiveArgError):
            ConcentrationVec([1.0, 0.0])


# --- softmax ----------------------------------------------------------------


class TestSoftmax:
    def test_symmetry(self):
        assert np.allclose(softmax([0.0, 0.0]).weights, [0.5, 0.5], atol=1e-15)

    def test_point_mass_limit(self):
        w = softmax([-INF, 0.0]).weights
        assert w[0] == 0.0 and w[1] == 1.0

    def test_log_ratio(self):
        w = softmax([math.log(1.0), math.log(3.0)]).weights
        assert np.allclose(w, [0.25, 0.75], atol=1e-14)

    def test_all_neg_inf_raises(self):
        with pytest.raises(AllNegInfError):
            softmax([-INF, -INF])

    def test_accepts_logweights(self):
        assert softmax(LogWeights([0.0, 0.0])).K == 2

    @given(st.lists(st.floats(-30, 30), min_size=1, max_size=8),
           st.floats(-50, 50))
    def test_shift_invariance(self, vals, c):
        v = np.array(vals)
        assert np.allclose(softmax(v).weights, softmax(v + c).weights, atol=1e-12)

    @given(st.integers(1, 7), st.integers(0, 2**32 - 1))
    @settings(max_examples=60)
    def test_log_roundtrip_identity(self, k, seed):
        p = rand_dist(np.random.default_rng(seed), k)
        p = np.maximum(p, 1e-12)
        p /= p.sum()
        assert np.allclose(softmax(np.log(p)).weights, p, atol=1e-12)

    def test_huge_values_stable(self):
        w = softmax([1000.0, 1000.0 + math.log(3)]).weights
        assert np.allclose(w, [0.25, 0.75], atol=1e-14)


# --- entropy / cross entropy / KL -------------------------------------------


class TestEntropy:
    def test_uniform_max(self):
        assert entropy(CategoricalDist.uniform(2)) == pytest.approx(math.log(2), abs=1e-15)

    def test_point_mass_zero(self):
        assert entropy(CategoricalDist.point_mass(0, 3)) == 0.0

    def test_frozen_value(self):
        assert entropy([0.25, 0.75]) == pytest.approx(0.5623351446188084, abs=1e-12)

    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    @settings(max_examples=80)
    def test_bounds(self, k, seed):
        p = rand_dist(np.random.default_rng(seed), k)
        h = entropy(p)
        assert -1e-12 <= h <= math.log(k) + 1e-12


class TestCrossEntropy:
    def test_equals_entropy_when_equal(self):
        u = CategoricalDist.uniform(4)
        assert cross_entropy(u, u) == pytest.approx(math.log(4), abs=1e-14)

    def test_support_violation(self):
        assert cross_entropy([1.0, 0.0], [0.0, 1.0]) == INF

    def test_frozen_value(self):
        assert cross_entropy([0.5, 0.5], [0.25, 0.75]) == pytest.approx(
            0.8369882167858358, abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            cross_entropy([1.0], [0.5, 0.5])


class TestKl:
    def test_identity_of_indiscernibles(self):
        d = CategoricalDist([0.3, 0.7])
        assert kl(d, d) == 0.0

    def test_point_vs_uniform(self):
        assert kl([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-14)

    def test_frozen_value(self):
        assert kl([0.3, 0.7], [0.6, 0.4]) == pytest.approx(0.1837868973868122, abs=1e-12)

    def test_support_violation_inf(self):
        assert kl([0.5, 0.5], [1.0, 0.0]) == INF

    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    @settings(max_examples=100)
    def test_nonnegative(self, k, seed):
        rng = np.random.default_rng(seed)
        q, p = rand_dist(rng, k), rand_dist(rng, k)
        assert kl(q, p) >= -1e-12

    def test_zero_iff_equal(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            q = rand_dist(rng, 4)
            p = rand_dist(rng, 4)
            if np.abs(q - p).max() > 1e-12:
                assert kl(q, p) > 0.0


class TestKlChainParts:
    def test_equal_joints(self):
        j = np.full((2, 2), 0.25)
        assert kl_chain_parts(j, j) == (0.0, 0.0)

    def test_independent_joints(self):
        a = np.array([0.3, 0.7])
        b = np.array([0.4, 0.6])
        c = np.array([0.9, 0.1])
        marg, cond = kl_chain_parts(np.outer(a, b), np.outer(a, c))
        assert marg == pytest.approx(0.0, abs=1e-14)
        assert cond == pytest.approx(kl(b, c), abs=1e-12)

    def test_parts_sum_to_total_1000_random(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            k1 = rng.integers(2, 4)
            k2 = rng.integers(2, 4)
            qj = rng.dirichlet(np.ones(k1 * k2)).reshape(k1, k2)
            pj = rng.dirichlet(np.ones(k1 * k2)).reshape(k1, k2)
            marg, cond = kl_chain_parts(qj, pj)
            total = kl(qj.ravel(), pj.ravel())
            assert marg + cond == pytest.approx(total, abs=1e-10)

    def test_invalid_joint(self):
        with pytest.raises(InvalidJointError):
            kl_chain_parts(np.full((2, 2), 0.3), np.full((2, 2), 0.25))

    def test_shape_mismatch(self):
        with pytest.raises(DimMismatchError):
            kl_chain_parts(np.full((2, 2), 0.25), np.full((4,), 0.25))


# --- masked log-domain kernels ----------------------------------------------


class TestLogKernels:
    def test_weighted_logs_ignores_zero_mass(self):
        assert weighted_logs([0.0, 1.0], [-INF, -2.0]) == -2.0

    def test_weighted_logs_propagates_supported_inf(self):
        assert weighted_logs([0.5, 0.5], [-INF, 0.0]) == -INF

    def test_log_matvec(self):
        ln_m = elementwise_log(np.array([[1.0, 0.0], [0.5, 0.5]]))
        out = log_matvec(ln_m, [0.0, 1.0])
        assert out[0] == -INF and out[1] == pytest.approx(math.log(0.5))

    def test_quad_form_matches_dense_when_finite(self):
        rng = np.random.default_rng(3)
        u, v = rand_dist(rng, 3), rand_dist(rng, 3)
        m = rng.dirichlet(np.ones(3), size=3)
        assert quad_form_log(u, np.log(m), v) == pytest.approx(u @ np.log(m) @ v, abs=1e-12)


# --- digamma ----------------------------------------------------------------


class TestDigamma:
    def test_psi_one(self):
        assert digamma(1.0) == pytest.approx(-0.5772156649015329, abs=1e-12)

    def test_psi_two_recurrence(self):
        assert digamma(2.0) == pytest.approx(1.0 - 0.5772156649015329, abs=1e-12)

    def test_psi_half_frozen(self):
        assert digamma(0.5) == pytest.approx(-1.9635100260214235, abs=1e-12)

    @pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 2.0, 10.0])
    def test_recurrence_identity(self, x):
        assert digamma(x + 1.0) - digamma(x) == pytest.approx(1.0 / x, abs=1e-10)

    def test_against_scipy_grid(self):
        xs = np.concatenate([np.linspace(0.01, 2, 97), np.linspace(2, 60, 59)])
        for x in xs:
            ref = float(special.psi(x))
            assert digamma(float(x)) == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_domain_error(self):
        with pytest.raises(NonPositiveArgError):
            digamma(0.0)
        with pytest.raises(NonPositiveArgError):
            digamma(-1.5)


# --- log gamma / log beta ----------------------------------------------------


class TestLogBeta:
    def test_ones(self):
        assert log_beta(ConcentrationVec([1.0, 1.0])) == pytest.approx(0.0, abs=1e-12)

    def test_twos(self):
        assert log_beta(ConcentrationVec([2.0, 2.0])) == pytest.approx(
            math.log(1.0 / 6.0), abs=1e-12)

    def test_halves_frozen(self):
        assert log_beta(ConcentrationVec([0.5, 0.5, 0.5])) == pytest.approx(
            1.8378770664093456, abs=1e-11)

    def test_log_gamma_against_scipy(self):
        for x in np.concatenate([np.linspace(0.05, 3, 60), np.linspace(3, 40, 38)]):
            assert log_gamma(float(x)) == pytest.approx(
                float(special.gammaln(x)), rel=1e-11, abs=1e-11)

    def test_log_gamma_domain(self):
        with pytest.raises(NonPositiveArgError):
            log_gamma(0.0)


# --- Dirichlet KL ------------------------------------------------------------


class TestDirichletKl:
    def test_equal_is_exactly_zero(self):
        cv = ConcentrationVec([3.0, 5.0])
        assert dirichlet_kl(cv, cv) == 0.0

    def test_frozen_forward(self):
        v = dirichlet_kl(ConcentrationVec([2.0, 1.0]), ConcentrationVec([1.0, 1.0]))
        assert v == pytest.approx(0.19314718055994531, abs=1e-12)

    def test_frozen_reverse_asymmetry(self):
        v = dirichlet_kl(ConcentrationVec([1.0, 1.0]), ConcentrationVec([2.0, 1.0]))
        assert v == pytest.approx(0.3068528194400547, abs=1e-12)
        assert v != pytest.approx(0.19314718055994531, abs=1e-6)

    def test_nonnegative_1000_random(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            k = rng.integers(2, 5)
            ap = ConcentrationVec(rng.uniform(0.2, 8.0, size=k))
            a = ConcentrationVec(rng.uniform(0.2, 8.0, size=k))
            assert dirichlet_kl(ap, a) >= -1e-10

    def test_quadrature_oracle_k2(self):
        rng = np.random.default_rng(5)
        for _ in range(8):
            ap = rng.uniform(0.5, 6.0, size=2)
            a = rng.uniform(0.5, 6.0, size=2)
            qd = stats.beta(ap[0], ap[1])
            pd = stats.beta(a[0], a[1])
            ref, _ = integrate.quad(
                lambda x: qd.pdf(x) * (qd.logpdf(x) - pd.logpdf(x)), 0.0, 1.0, limit=200)
            got = dirichlet_kl(ConcentrationVec(ap), ConcentrationVec(a))
            assert got == pytest.approx(ref, abs=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            dirichlet_kl(ConcentrationVec([1.0]), ConcentrationVec([1.0, 1.0]))
