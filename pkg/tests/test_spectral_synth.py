import math

import numpy as np
import pytest

from riglab.errors import InvalidInputError
from riglab.kernel_core import KernelSpec, build_kernel_matrix, grid_design
from riglab.spectral_synth import (
    COSINE_PSI,
    DecayParams,
    SpectralKernelSpec,
    cosine_features,
    delta_tail_bound,
    delta_tail_exact,
    eval_spectral_kernel,
    exp_tail_constant,
    make_spectrum,
    split_kernel_matrices,
    tail_remainder,
    truncation_level,
)

POLY2 = DecayParams("polynomial", C_p=1.0, beta_p=2.0)
EXP1 = DecayParams("exponential", C_e1=1.0, C_e2=1.0, beta_e=1.0)


class TestDecayParams:
    @pytest.mark.parametrize("kw", [
        {"kind": "polynomial", "beta_p": 1.0},
        {"kind": "polynomial", "C_p": 0.0},
        {"kind": "exponential", "beta_e": 1.5},
        {"kind": "exponential", "C_e2": -1.0},
        {"kind": "stretched"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            DecayParams(**kw)

    def test_tail_integral_poly(self):
        # int_M^inf x^-2 dx = 1/M
        assert POLY2.tail_integral(100) == pytest.approx(0.01)

    def test_tail_integral_exp(self):
        assert EXP1.tail_integral(3) == pytest.approx(math.exp(-3.0), rel=1e-12)
        half = DecayParams("exponential", beta_e=0.5)
        # int_M^inf exp(-sqrt x) dx = 2 (sqrt M + 1) exp(-sqrt M)
        assert half.tail_integral(16) == pytest.approx(2 * 5 * math.exp(-4.0), rel=1e-12)


class TestMakeSpectrum:
    def test_polynomial(self):
        np.testing.assert_allclose(make_spectrum(POLY2, 3).spectrum, [1.0, 0.25, 1 / 9])

    def test_exponential(self):
        np.testing.assert_allclose(make_spectrum(EXP1, 2).spectrum, [math.exp(-1), math.exp(-2)])

    def test_single_term(self):
        assert make_spectrum(DecayParams("polynomial", C_p=3.0), 1).spectrum[0] == 3.0
        d = DecayParams("exponential", C_e1=2.0, C_e2=0.5)
        assert make_spectrum(d, 1).spectrum[0] == pytest.approx(2.0 * math.exp(-0.5))

    def test_decay_holds_with_equality(self):
        for d in (POLY2, DecayParams("polynomial", C_p=0.7, beta_p=1.5), EXP1,
                  DecayParams("exponential", C_e1=2.0, C_e2=0.3, beta_e=0.5)):
            spec = make_spectrum(d, 500)
            np.testing.assert_array_equal(spec.spectrum, d.envelope(np.arange(1, 501)))
            assert spec.psi == COSINE_PSI

    def test_default_truncation(self):
        assert make_spectrum(POLY2).M == 4096
        # exp(-i) >= 1e-300 iff i <= 690
        assert truncation_level(EXP1) == 690

    def test_underflow_rejected(self):
        with pytest.raises(InvalidInputError):
            make_spectrum(EXP1, 800)

    def test_invalid_spectrum(self):
        with pytest.raises(InvalidInputError):
            SpectralKernelSpec([0.5, 1.0])


class TestEvaluation:
    def test_features_bounded_by_psi(self):
        Phi = cosine_features(np.linspace(0, 1, 101), 50)
        assert np.abs(Phi).max() <= COSINE_PSI + 1e-15
        np.testing.assert_array_equal(Phi[:, 0], 1.0)

    def test_features_orthonormal(self):
        # Midpoint rule integrates cosines of degree < 2N exactly.
        N = 400
        x = (np.arange(N) + 0.5) / N
        Phi = cosine_features(x, 20)
        np.testing.assert_allclose(Phi.T @ Phi / N, np.eye(20), atol=1e-12)

    def test_value_at_origin(self):
        spec = make_spectrum(POLY2, 50)
        xi = spec.spectrum
        assert eval_spectral_kernel(spec, 0.0, 0.0) == pytest.approx(xi[0] + 2 * xi[1:].sum(), rel=1e-14)

    def test_constant_kernel(self):
        spec = SpectralKernelSpec([1.0])
        for x, xp in [(0.0, 0.3), (0.9, 0.1)]:
            assert eval_spectral_kernel(spec, x, xp) == pytest.approx(1.0)

    def test_symmetry(self):
        spec = make_spectrum(POLY2, 64)
        assert eval_spectral_kernel(spec, 0.2, 0.7) == eval_spectral_kernel(spec, 0.7, 0.2)

    def test_domain(self):
        with pytest.raises(InvalidInputError):
            cosine_features([1.5], 3)

    def test_kernel_matrix_via_kernel_spec(self):
        spec = make_spectrum(POLY2, 64)
        X = grid_design(9)
        K = build_kernel_matrix(KernelSpec("spectral", spectral=spec), X, jitter=0.0)
        x = X.points[:, 0]
        direct = np.array([[eval_spectral_kernel(spec, a, b) for b in x] for a in x])
        np.testing.assert_allclose(K.entries, direct, rtol=1e-13)


class TestSplit:
    def test_full_split_has_empty_tail(self):
        spec = make_spectrum(POLY2, 8)
        _, K_perp = split_kernel_matrices(spec, grid_design(5), 8)
        np.testing.assert_array_equal(K_perp.entries, 0.0)

    def test_scalar_case(self):
        spec = SpectralKernelSpec([1.0, 0.5])
        K_par, K_perp = split_kernel_matrices(spec, [[0.0]], 1)
        np.testing.assert_allclose(K_par.entries, [[1.0]])
        # phi_2(0)^2 = 2
        np.testing.assert_allclose(K_perp.entries, [[1.0]])

    def test_additivity_and_rank(self):
        rng = np.random.default_rng(11)
        spec = make_spectrum(DecayParams("polynomial", beta_p=1.5), 256)
        X = rng.uniform(size=30)
        K = build_kernel_matrix(KernelSpec("spectral", spectral=spec), X, jitter=0.0)
        for D in (1, 3, 10, 256):
            K_par, K_perp = split_kernel_matrices(spec, X, D)
            assert np.abs(K_par.entries + K_perp.entries - K.entries).max() <= 1e-10
            lam = np.linalg.eigvalsh(K_par.entries)
            assert np.sum(lam > 1e-9 * K.sup_diag) <= D

    def test_range(self):
        with pytest.raises(InvalidInputError):
            split_kernel_matrices(make_spectrum(POLY2, 4), grid_design(3), 5)


def _basel_tail(D):
    return math.pi**2 / 6 - sum(1.0 / i**2 for i in range(1, D + 1))


class TestDeltaTail:
    def test_empty_sum(self):
        spec = make_spectrum(POLY2, 30)
        assert delta_tail_exact(spec, 30, include_remainder=False) == 0.0
        assert delta_tail_exact(spec, 30) == pytest.approx(tail_remainder(spec))

    def test_basel_tail(self):
        spec = SpectralKernelSpec(make_spectrum(POLY2, 4096).spectrum, psi=1.0, decay=POLY2)
        oracle = _basel_tail(10)
        assert oracle == pytest.approx(0.095166, abs=1e-6)
        # The integral remainder overshoots the true tail by under 1/(2 M^2).
        assert delta_tail_exact(spec, 10) == pytest.approx(oracle, abs=1e-7)
        assert delta_tail_exact(spec, 10) >= oracle

    def test_exponential_two_terms(self):
        spec = SpectralKernelSpec(make_spectrum(EXP1, 2).spectrum, psi=1.0, decay=EXP1)
        assert delta_tail_exact(spec, 1, include_remainder=False) == pytest.approx(math.exp(-2), rel=1e-14)
        assert math.exp(-2) == pytest.approx(0.135335, abs=1e-6)
        # remainder e^-3 + int_3^inf e^-x dx = 2 e^-3, above the true tail e^-3 / (1 - e^-1)
        assert delta_tail_exact(spec, 1) == pytest.approx(math.exp(-2) + 2 * math.exp(-3), rel=1e-12)
        assert tail_remainder(spec) >= math.exp(-3) / (1 - math.exp(-1))


class TestDeltaTailBound:
    def test_polynomial_value(self):
        assert delta_tail_bound(POLY2, 1.0, 10) == pytest.approx(0.1)

    def test_exponential_value(self):
        assert delta_tail_bound(EXP1, 1.0, 10) == pytest.approx(math.exp(-10), rel=1e-14)
        assert math.exp(-10) == pytest.approx(4.5400e-5, rel=1e-4)

    def test_exp_tail_constant(self):
        # beta_e = 1/2, unit constants: (2/0.5) * (2*1)^1 * e^{-1}
        d = DecayParams("exponential", beta_e=0.5)
        assert exp_tail_constant(d, 1.0) == pytest.approx(8 * math.exp(-1), rel=1e-14)

    @pytest.mark.parametrize("decay", [
        POLY2,
        DecayParams("polynomial", C_p=0.5, beta_p=1.5),
        DecayParams("polynomial", beta_p=3.0),
        EXP1,
        DecayParams("exponential", C_e1=2.0, C_e2=0.5),
        DecayParams("exponential", beta_e=0.5),
        DecayParams("exponential", C_e2=2.0, beta_e=0.7),
    ])
    def test_dominates_exact(self, decay):
        spec = make_spectrum(decay, min(truncation_level(decay), 4096))
        for D in range(1, min(spec.M, 200) + 1):
            assert delta_tail_exact(spec, D) <= delta_tail_bound(decay, spec.psi, D)

    def test_uncorrected_polynomial_form_fails_below_two(self):
        # C_p D^{1 - beta_p} psi^2 alone underestimates the tail when beta_p < 2.
        d = DecayParams("polynomial", beta_p=1.5)
        spec = make_spectrum(d, 4096)
        assert delta_tail_exact(spec, 1) > d.C_p * 1.0 * spec.psi**2
        assert delta_tail_bound(d, spec.psi, 1) == pytest.approx(2.0 * spec.psi**2)

    def test_requires_positive_D(self):
        with pytest.raises(InvalidInputError):
            delta_tail_bound(POLY2, 1.0, 0)
