"""Effective dimension, information gain and relative information gain.

All three measures are evaluated from the eigenvalues ``lambda_i`` of the
kernel matrix:

    d_n(eta)        = sum eta lambda / (1 + eta lambda)
    gamma_n(eta)    = 1/2 sum log(1 + eta lambda)
    gamma_n(eta, b) = 1/2 sum log((1 + eta lambda) / (1 + b lambda))

Matrix-form counterparts (linear solves and Cholesky log-determinants) are
provided as cross-checks.  The second half of the module holds the closed-form
upper bounds on ``gamma_n(eta, beta)`` for Mercer kernels with known spectra.
Logs are natural throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from riglab.errors import DomainError, InvalidInputError, NumericError
from riglab.kernel_core import EigenSpectrum, as_kernel_matrix
from riglab.spectral_synth import DecayParams, SpectralKernelSpec, cosine_features, split_kernel_matrices


def _lam(spectrum) -> np.ndarray:
    if isinstance(spectrum, EigenSpectrum):
        return spectrum.values
    lam = np.asarray(spectrum, dtype=float).ravel()
    if np.any(lam < 0):
        raise InvalidInputError("eigenvalues must be non-negative")
    return lam


def _check_rates(eta: float, beta: float) -> None:
    if not (eta > beta >= 0):
        raise InvalidInputError(f"need eta > beta >= 0, got eta={eta}, beta={beta}")


def chol_logdet(A: np.ndarray) -> float:
    """``log det A`` for symmetric positive-definite ``A``."""
    try:
        c, _ = linalg.cho_factor(A, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NumericError(f"Cholesky failed: {exc}") from exc
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def effective_dimension(spectrum, eta: float) -> float:
    if eta <= 0:
        raise InvalidInputError("eta must be positive")
    t = eta * _lam(spectrum)
    return float(np.sum(t / (1.0 + t)))


def effective_dimension_matrix(K, eta: float) -> float:
    """``tr(K (K + I/eta)^{-1})`` by a Cholesky solve."""
    if eta <= 0:
        raise InvalidInputError("eta must be positive")
    A = as_kernel_matrix(K).entries
    n = A.shape[0]
    try:
        c = linalg.cho_factor(A + np.eye(n) / eta, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericError(f"K + I/eta is not positive-definite: {exc}") from exc
    # K (K + I/eta)^{-1} and (K + I/eta)^{-1} K share the trace.
    return float(np.trace(linalg.cho_solve(c, A)))


def information_gain(spectrum, eta: float) -> float:
    if eta < 0:
        raise InvalidInputError("eta must be non-negative")
    return 0.5 * float(np.sum(np.log1p(eta * _lam(spectrum))))


def information_gain_matrix(K, eta: float) -> float:
    """``1/2 log det(eta K + I)`` via Cholesky."""
    if eta < 0:
        raise InvalidInputError("eta must be non-negative")
    A = as_kernel_matrix(K).entries
    return 0.5 * chol_logdet(eta * A + np.eye(A.shape[0]))


def relative_information_gain(spectrum, eta: float, beta: float) -> float:
    """``gamma_n(eta) - gamma_n(beta)`` as a single sum of log-ratios."""
    _check_rates(eta, beta)
    lam = _lam(spectrum)
    return 0.5 * float(np.sum(np.log1p((eta - beta) * lam / (1.0 + beta * lam))))


def scaled_rig(spectrum, eta: float, beta: float) -> float:
    """``2 eta / (eta - beta) * gamma_n(eta, beta)``; runs from ``2 gamma_n(eta)`` at
    ``beta = 0`` down to ``d_n(eta)`` as ``beta -> eta``."""
    _check_rates(eta, beta)
    lam = _lam(spectrum)
    # log1p(h x) / h computed without forming the tiny difference separately.
    h = eta - beta
    x = lam / (1.0 + beta * lam)
    return float(eta * np.sum(np.log1p(h * x) / h))


@dataclass(frozen=True)
class ComplexityProfile:
    eta: float
    beta: float
    d_eff: float
    info_gain: float
    rel_info_gain: float
    scaled_rig: float


def complexity_profile(spectrum, eta: float, beta: float) -> ComplexityProfile:
    return ComplexityProfile(
        eta=eta,
        beta=beta,
        d_eff=effective_dimension(spectrum, eta),
        info_gain=information_gain(spectrum, eta),
        rel_info_gain=relative_information_gain(spectrum, eta, beta),
        scaled_rig=scaled_rig(spectrum, eta, beta),
    )


def split_information_gain(spec: SpectralKernelSpec, X, D: int, eta: float) -> tuple[float, float]:
    """Split ``gamma_n(eta)`` into the rank-``D`` part and the tail correction.

    Returns ``(1/2 log det(eta K_par + I), 1/2 log det(I + eta (I + eta K_par)^{-1} K_perp))``.
    The second determinant is taken in the symmetrised form
    ``I + eta L^{-1} K_perp L^{-T}`` with ``L L^T = I + eta K_par``.
    """
    if eta < 0:
        raise InvalidInputError("eta must be non-negative")
    K_par, K_perp = split_kernel_matrices(spec, X, D)
    n = K_par.n
    A = np.eye(n) + eta * K_par.entries
    try:
        L = linalg.cholesky(A, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericError(f"I + eta K_par is not positive-definite: {exc}") from exc
    term_par = float(np.sum(np.log(np.diag(L))))
    W = linalg.solve_triangular(L, K_perp.entries, lower=True)
    B = linalg.solve_triangular(L, W.T, lower=True)
    B = 0.5 * (B + B.T)
    term_perp = 0.5 * chol_logdet(np.eye(n) + eta * B)
    return term_par, term_perp


def gram_eigenvalues(spec: SpectralKernelSpec, X, D: int) -> np.ndarray:
    """Eigenvalues of the ``D x D`` gram matrix ``Xi^{1/2} Phi^T Phi Xi^{1/2}``."""
    if not 1 <= D <= spec.M:
        raise InvalidInputError(f"D must lie in [1, {spec.M}], got {D}")
    pts = np.asarray(X.points if hasattr(X, "points") else X, dtype=float).ravel()
    Phi = cosine_features(pts, spec.M)[:, :D]
    s = np.sqrt(spec.spectrum[:D])
    G = (Phi * s).T @ (Phi * s)
    return np.maximum(np.linalg.eigvalsh(0.5 * (G + G.T)), 0.0)


def gram_logdet_ratio(spec: SpectralKernelSpec, X, D: int, eta: float, beta: float) -> float:
    """``log det(eta G + I) - log det(beta G + I)`` for the rank-``D`` gram matrix."""
    if not (eta >= beta > 0):
        raise InvalidInputError("need eta >= beta > 0")
    g = gram_eigenvalues(spec, X, D)
    return float(np.sum(np.log1p((eta - beta) * g / (1.0 + beta * g))))


def rig_bound_prop6(D: int, eta: float, beta: float, n: int, delta_D: float) -> float:
    """``1/2 D log(eta/beta) + 1/2 n eta delta_D``."""
    if not (eta >= beta > 0):
        raise InvalidInputError("need eta >= beta > 0")
    if D < 1:
        raise InvalidInputError("D must be >= 1")
    return 0.5 * D * math.log(eta / beta) + 0.5 * n * eta * delta_D


def rig_bound_poly(n: int, eta: float, beta: float, decay: DecayParams, psi: float) -> float:
    """Relative information gain bound under polynomial eigendecay."""
    if decay.kind != "polynomial":
        raise InvalidInputError("rig_bound_poly needs polynomial decay")
    if not (eta >= beta > 0):
        raise InvalidInputError("need eta >= beta > 0")
    L = math.log(eta / beta)
    p = 1.0 / decay.beta_p
    return (n * eta * decay.C_p * psi**2) ** p * L ** (1.0 - p) + L


def exp_bound_constant(decay: DecayParams, psi: float) -> float:
    """The constant ``C_{beta_e}`` inside the log of the exponential-decay bound."""
    b, c1, c2 = decay.beta_e, decay.C_e1, decay.C_e2
    if b == 1.0:
        return c1 * psi**2 / c2
    return (2.0 * c1 * psi**2 / (c2 * b)) * ((2.0 - 2.0 * b) / (c2 * b)) ** (1.0 / b - 1.0) * math.exp((1.0 - b) / b)


def rig_bound_exp(n: int, eta: float, beta: float, decay: DecayParams, psi: float) -> float:
    """Relative information gain bound under exponential eigendecay.

    Raises :class:`DomainError` unless ``n eta C_{beta_e} > 1``.
    """
    if decay.kind != "exponential":
        raise InvalidInputError("rig_bound_exp needs exponential decay")
    if not (eta >= beta > 0):
        raise InvalidInputError("need eta >= beta > 0")
    arg = n * eta * exp_bound_constant(decay, psi)
    if arg <= 1.0:
        raise DomainError(f"n * eta * C_beta_e = {arg:.4g} must exceed 1")
    L = math.log(eta / beta)
    return 0.5 * (2.0 / decay.C_e2 * math.log(arg)) ** (1.0 / decay.beta_e) * L + 0.5 * (1.0 + L)


def vakili_ig_bound(D: int, eta: float, n: int, k_bar: float, delta_D: float) -> float:
    """Information gain bound ``1/2 D log(1 + k_bar n eta / D) + 1/2 n eta delta_D``."""
    if D < 1:
        raise InvalidInputError("D must be >= 1")
    return 0.5 * D * math.log1p(k_bar * n * eta / D) + 0.5 * n * eta * delta_D
