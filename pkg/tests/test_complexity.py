import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riglab import complexity as cx
from riglab.errors import DomainError, InvalidInputError
from riglab.kernel_core import EigenSpectrum, KernelSpec, build_kernel_matrix, eigenvalues_sym, grid_design
from riglab.spectral_synth import DecayParams, SpectralKernelSpec, make_spectrum, split_kernel_matrices


def _random_spd(rng, n):
    B = rng.standard_normal((n, n))
    return B @ B.T / n + 1e-3 * np.eye(n)


class TestEffectiveDimension:
    def test_empty(self):
        assert cx.effective_dimension(EigenSpectrum([]), 1.0) == 0.0

    def test_unit_spectrum(self):
        assert cx.effective_dimension([1, 1, 1], 1.0) == pytest.approx(1.5)

    def test_hand_value(self):
        val = cx.effective_dimension([2.0, 0.5], 4.0)
        assert val == pytest.approx(8 / 9 + 2 / 3, rel=1e-15)
        assert val == pytest.approx(1.555556, abs=1e-6)

    def test_matrix_identity(self):
        assert cx.effective_dimension_matrix(np.eye(2), 1.0) == pytest.approx(1.0)

    def test_matrix_hand_value(self):
        assert cx.effective_dimension_matrix([[2.0, 1.0], [1.0, 2.0]], 1.0) == pytest.approx(1.25, rel=1e-14)

    def test_matrix_zero(self):
        assert cx.effective_dimension_matrix(np.zeros((3, 3)), 2.0) == 0.0

    def test_eigen_matrix_agree(self):
        rng = np.random.default_rng(0)
        for n in (1, 5, 30):
            K = _random_spd(rng, n)
            for eta in (0.01, 1.0, 50.0):
                assert cx.effective_dimension_matrix(K, eta) == pytest.approx(
                    cx.effective_dimension(eigenvalues_sym(K), eta), rel=1e-8)

    def test_bounded_by_n(self):
        assert 0 <= cx.effective_dimension([1e6] * 4, 1e6) <= 4

    def test_rejects_bad_eta(self):
        with pytest.raises(InvalidInputError):
            cx.effective_dimension([1.0], 0.0)


class TestInformationGain:
    def test_zero_rate(self):
        assert cx.information_gain([1.0, 2.0], 0.0) == 0.0

    def test_hand_values(self):
        assert cx.information_gain([1.0], 1.0) == pytest.approx(0.5 * math.log(2), rel=1e-15)
        assert cx.information_gain([1.0], 1.0) == pytest.approx(0.346574, abs=1e-6)
        assert cx.information_gain([1.0, 3.0], 1.0) == pytest.approx(0.5 * (math.log(2) + math.log(4)), rel=1e-15)
        assert cx.information_gain([1.0, 3.0], 1.0) == pytest.approx(1.039721, abs=1e-6)

    def test_matrix_agrees(self):
        rng = np.random.default_rng(1)
        K = _random_spd(rng, 20)
        for eta in (0.1, 3.0):
            assert cx.information_gain_matrix(K, eta) == pytest.approx(
                cx.information_gain(eigenvalues_sym(K), eta), rel=1e-8)


class TestRelativeInformationGain:
    def test_beta_zero_is_information_gain(self):
        lam = [3.0, 1.0, 0.2]
        assert cx.relative_information_gain(lam, 2.0, 0.0) == cx.information_gain(lam, 2.0)

    def test_hand_value(self):
        assert cx.relative_information_gain([1.0], 3.0, 1.0) == pytest.approx(0.5 * math.log(2), rel=1e-15)

    def test_zero_spectrum(self):
        assert cx.relative_information_gain([0.0, 0.0], 2.0, 1.0) == 0.0

    def test_ordering_enforced(self):
        with pytest.raises(InvalidInputError):
            cx.relative_information_gain([1.0], 1.0, 1.0)
        with pytest.raises(InvalidInputError):
            cx.relative_information_gain([1.0], 1.0, -0.1)

    def test_no_cancellation_near_equal_rates(self):
        # A difference of two large log-dets loses every digit here.
        lam = np.full(1000, 1e4)
        eta, beta = 1.0, 1.0 - 1e-12
        expected = 0.5 * 1000 * (eta - beta) * 1e4 / (1 + beta * 1e4)
        assert cx.relative_information_gain(lam, eta, beta) == pytest.approx(expected, rel=1e-6)


class TestScaledRig:
    def test_beta_zero(self):
        lam = [2.0, 0.3]
        assert cx.scaled_rig(lam, 1.5, 0.0) == pytest.approx(2 * cx.information_gain(lam, 1.5), rel=1e-15)

    def test_limit_is_effective_dimension(self):
        assert cx.scaled_rig([1.0], 1.0, 1.0 - 1e-6) == pytest.approx(0.5, abs=1e-5)

    def test_empty(self):
        assert cx.scaled_rig([], 1.0, 0.5) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(
        lam=st.lists(st.floats(0.0, 1e3), min_size=1, max_size=20),
        eta=st.floats(1e-3, 1e2),
        frac=st.floats(0.0, 0.999),
    )
    def test_interpolation_and_thin_sandwich(self, lam, eta, frac):
        beta = frac * eta
        s = cx.scaled_rig(lam, eta, beta)
        d = cx.effective_dimension(lam, eta)
        g = cx.information_gain(lam, eta)
        tol = 1e-10 * max(1.0, d)
        assert d - tol <= s <= 2 * g + tol
        if beta > 0:
            assert s <= eta / beta * d + tol

    def test_profile(self):
        p = cx.complexity_profile([1.0, 0.5], 2.0, 0.5)
        assert p.d_eff <= p.scaled_rig <= 2 * p.info_gain
        assert p.rel_info_gain == pytest.approx(cx.relative_information_gain([1.0, 0.5], 2.0, 0.5))


SPEC = make_spectrum(DecayParams("polynomial", beta_p=2.0), 128)


class TestSplitInformationGain:
    def test_empty_tail(self):
        _, perp = cx.split_information_gain(SPEC, grid_design(6), SPEC.M, 2.0)
        assert perp == pytest.approx(0.0, abs=1e-14)

    def test_zero_rate(self):
        assert cx.split_information_gain(SPEC, grid_design(6), 3, 0.0) == (0.0, 0.0)

    def test_sum_matches_dense_logdet(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(size=8)
        K = build_kernel_matrix(KernelSpec("spectral", spectral=SPEC), X, jitter=0.0)
        par, perp = cx.split_information_gain(SPEC, X, 2, 1.7)
        oracle = 0.5 * np.linalg.slogdet(1.7 * K.entries + np.eye(8))[1]
        assert par + perp == pytest.approx(oracle, rel=1e-8)

    def test_tail_term_bounds(self):
        X = grid_design(40)
        for D in (1, 4, 16):
            for eta in (0.5, 5.0):
                _, perp = cx.split_information_gain(SPEC, X, D, eta)
                delta_D = SPEC.psi**2 * SPEC.spectrum[D:].sum()
                assert 0.0 <= perp <= 0.5 * 40 * eta * delta_D + 1e-12


class TestGram:
    def test_equal_rates(self):
        assert cx.gram_logdet_ratio(SPEC, grid_design(5), 3, 1.0, 1.0) == 0.0

    def test_scalar(self):
        spec = SpectralKernelSpec([1.0])
        val = cx.gram_logdet_ratio(spec, [[0.4]], 1, 2.0, 1.0)
        assert val == pytest.approx(math.log(1.5), rel=1e-14)
        assert val <= math.log(2.0)

    def test_weinstein_aronszajn(self):
        X = grid_design(12)
        for D in (1, 5, 20):
            K_par, _ = split_kernel_matrices(SPEC, X, D)
            a = np.linalg.slogdet(3.0 * K_par.entries + np.eye(12))[1]
            b = np.linalg.slogdet(0.5 * K_par.entries + np.eye(12))[1]
            val = cx.gram_logdet_ratio(SPEC, X, D, 3.0, 0.5)
            assert val == pytest.approx(a - b, rel=1e-8)
            assert val <= D * math.log(3.0 / 0.5)


class TestSpectralBounds:
    def test_truncation_bound_value(self):
        val = cx.rig_bound_prop6(5, 1.0, 0.5, 100, 0.01)
        assert val == pytest.approx(2.5 * math.log(2) + 0.5, rel=1e-15)
        assert val == pytest.approx(2.232868, abs=1e-6)

    def test_truncation_bound_limits(self):
        assert cx.rig_bound_prop6(3, 1.0, 1.0, 50, 0.0) == 0.0
        assert cx.rig_bound_prop6(4, 2.0, 1.0, 0, 0.3) == pytest.approx(2 * math.log(2))

    def test_truncation_bound_rejects_beta_zero(self):
        with pytest.raises(InvalidInputError):
            cx.rig_bound_prop6(3, 1.0, 0.0, 10, 0.1)

    def test_poly_value(self):
        d = DecayParams("polynomial", C_p=1.0, beta_p=2.0)
        assert cx.rig_bound_poly(100, 1.0, 1 / math.e, d, 1.0) == pytest.approx(11.0, rel=1e-14)

    def test_poly_limit_and_homogeneity(self):
        d = DecayParams("polynomial", beta_p=3.0)
        assert cx.rig_bound_poly(1, 1.0, 1.0, d, 1.0) == 0.0
        L = math.log(4.0)
        first = lambda n: cx.rig_bound_poly(n, 1.0, 0.25, d, 1.0) - L
        assert first(200) == pytest.approx(2 ** (1 / 3) * first(100), rel=1e-13)

    def test_exp_value(self):
        d = DecayParams("exponential", C_e1=1.0, C_e2=1.0, beta_e=1.0)
        val = cx.rig_bound_exp(10, 1.0, 1 / math.e, d, 1.0)
        assert val == pytest.approx(math.log(10) + 1, rel=1e-14)
        assert val == pytest.approx(3.302585, abs=1e-6)

    def test_exp_constant(self):
        d = DecayParams("exponential", beta_e=0.5)
        assert cx.exp_bound_constant(d, 1.0) == pytest.approx(8 * math.e, rel=1e-14)
        assert cx.exp_bound_constant(d, 1.0) == pytest.approx(21.7463, abs=1e-4)

    def test_exp_domain(self):
        d = DecayParams("exponential")
        with pytest.raises(DomainError):
            cx.rig_bound_exp(1, 0.5, 0.1, d, 1.0)

    def test_vakili(self):
        assert cx.vakili_ig_bound(1, 1.0, 1, 1.0, 0.0) == pytest.approx(0.5 * math.log(2), rel=1e-15)
        assert cx.vakili_ig_bound(3, 0.0, 10, 1.0, 0.5) == 0.0
        base = cx.vakili_ig_bound(3, 2.0, 10, 1.0, 0.1)
        assert cx.vakili_ig_bound(3, 2.0, 10, 1.0, 0.35) - base == pytest.approx(0.5 * 10 * 2.0 * 0.25)

    def test_bounds_dominate_on_synthetic_kernel(self):
        decay = DecayParams("polynomial", beta_p=2.0)
        spec = make_spectrum(decay, 2048)
        X = grid_design(64)
        lam = eigenvalues_sym(build_kernel_matrix(KernelSpec("spectral", spectral=spec), X, jitter=0.0))
        for eta, beta in [(1.0, 0.1), (4.0, 2.0)]:
            rig = cx.relative_information_gain(lam, eta, beta)
            assert rig <= cx.rig_bound_poly(64, eta, beta, decay, spec.psi)
            for D in (1, 8, 32):
                delta_D = spec.psi**2 * spec.spectrum[D:].sum()
                assert rig <= cx.rig_bound_prop6(D, eta, beta, 64, delta_D)
