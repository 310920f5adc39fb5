"""Fixed-design data, Gibbs posteriors and Gaussian risk/KL computations.

Only the ``n``-point marginals at the design are ever needed, so every
distribution here is an ``n``-dimensional Gaussian.  With prior
``P_alpha = N(0, alpha K)`` and squared-loss learning rate ``eta``, the Gibbs
posterior is ``N(K (K + zeta I)^{-1} y, alpha K (2 eta alpha K + I)^{-1})``
with ``zeta = 1 / (2 eta alpha)``.

Noise streams use numpy's counter-based Philox generator keyed by the seed in
:class:`NoiseSpec`; experiments derive per-trial seeds as
``master_seed ^ trial_index``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from riglab.errors import InvalidInputError, NumericError
from riglab.kernel_core import DesignPoints, KernelSpec, RkhsElement, as_kernel_matrix, evaluate_rkhs

NOISE_FAMILIES = ("gaussian", "uniform_bounded", "rademacher_scaled", "zero")
KL_JITTER_FACTOR = 1e-12
SEED_MASK = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))


def trial_seed(master_seed: int, trial: int) -> int:
    return (int(master_seed) ^ int(trial)) & SEED_MASK


@dataclass(frozen=True)
class NoiseSpec:
    """Sub-Gaussian noise family.

    ``scale`` is the standard deviation for ``gaussian`` and the half-width
    ``a`` for ``uniform_bounded`` (uniform on ``[-a, a]``) and
    ``rademacher_scaled`` (``+-a``).  In each case the family is
    ``scale``-sub-Gaussian.
    """

    family: str = "gaussian"
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise InvalidInputError(f"unknown noise family {self.family!r}")
        if self.scale < 0:
            raise InvalidInputError("noise scale must be non-negative")

    @property
    def sigma(self) -> float:
        return 0.0 if self.family == "zero" else float(self.scale)

    def sample(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        rng = make_rng(self.seed) if rng is None else rng
        if self.family == "zero" or self.scale == 0:
            return np.zeros(n)
        if self.family == "gaussian":
            return self.scale * rng.standard_normal(n)
        if self.family == "uniform_bounded":
            return rng.uniform(-self.scale, self.scale, n)
        return self.scale * (2.0 * rng.integers(0, 2, n) - 1.0)


@dataclass(frozen=True)
class RegressionInstance:
    X: DesignPoints
    fstar: RkhsElement
    fstar_values: np.ndarray
    y: np.ndarray
    noise: NoiseSpec
    sigma: float

    @property
    def n(self) -> int:
        return self.y.size


def generate_data(spec: KernelSpec, X: DesignPoints, fstar: RkhsElement, noise: NoiseSpec,
                  sigma: float | None = None) -> RegressionInstance:
    """Draw ``y_i = f*(x_i) + eps_i`` deterministically from ``noise.seed``."""
    f = evaluate_rkhs(fstar, spec, X)
    y = f + noise.sample(X.n)
    if sigma is None:
        sigma = noise.sigma
    return RegressionInstance(X, fstar, f, y, noise, float(sigma))


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float).ravel()
        S = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if S.shape != (m.size, m.size):
            raise InvalidInputError(f"covariance shape {S.shape} does not match mean length {m.size}")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", S)

    @property
    def n(self) -> int:
        return self.mean.size

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """``(size, n)`` draws, via an eigendecomposition so PSD covariances work."""
        w, V = np.linalg.eigh(self.covariance)
        root = V * np.sqrt(np.maximum(w, 0.0))
        return self.mean + rng.standard_normal((size, self.n)) @ root.T


def _resolvent_factor(K: np.ndarray, zeta: float):
    try:
        return linalg.cho_factor(K + zeta * np.eye(K.shape[0]), lower=True)
    except linalg.LinAlgError as exc:
        raise NumericError(f"K + {zeta:.3g} I is not positive-definite: {exc}") from exc


def krr_fitted(K, y, zeta: float) -> np.ndarray:
    """Fitted values ``K (K + zeta I)^{-1} y``; ``y`` may hold several columns."""
    if zeta < 0:
        raise InvalidInputError("zeta must be non-negative")
    A = as_kernel_matrix(K).entries
    y = np.asarray(y, dtype=float)
    if y.shape[0] != A.shape[0]:
        raise InvalidInputError("length of y does not match the kernel matrix")
    c = _resolvent_factor(A, zeta)
    return A @ linalg.cho_solve(c, y)


def _gibbs(A: np.ndarray, target: np.ndarray, rate: float, alpha: float) -> GaussianMeasure:
    zeta = 1.0 / (2.0 * rate * alpha)
    c = _resolvent_factor(A, zeta)
    mean = A @ linalg.cho_solve(c, target)
    # alpha K - alpha K (K + zeta I)^{-1} K  ==  (1 / (2 rate)) K (K + zeta I)^{-1}
    cov = linalg.cho_solve(c, A).T / (2.0 * rate)
    return GaussianMeasure(mean, 0.5 * (cov + cov.T))


def gibbs_posterior(K, y, eta: float, alpha: float) -> GaussianMeasure:
    """Marginal of the Gibbs posterior ``Q_{n, eta, alpha}`` at the design."""
    if not (eta > 0 and alpha > 0):
        raise InvalidInputError("eta and alpha must be positive")
    A = as_kernel_matrix(K).entries
    y = np.asarray(y, dtype=float).ravel()
    if y.size != A.shape[0]:
        raise InvalidInputError("length of y does not match the kernel matrix")
    return _gibbs(A, y, eta, alpha)


def oracle_prior_marginal(K, fstar_values, beta: float, sigma: float, alpha: float) -> GaussianMeasure:
    """Marginal of the distribution-dependent prior: rate ``beta + 2 sigma^2 beta^2``
    applied to the noiseless targets ``f*_n``."""
    if not (beta > 0 and sigma >= 0 and alpha > 0):
        raise InvalidInputError("beta, alpha must be positive and sigma non-negative")
    A = as_kernel_matrix(K).entries
    f = np.asarray(fstar_values, dtype=float).ravel()
    return _gibbs(A, f, beta + 2.0 * sigma**2 * beta**2, alpha)


def prior_marginal(K, alpha: float) -> GaussianMeasure:
    """``P_alpha = N(0, alpha K)``."""
    A = as_kernel_matrix(K).entries
    return GaussianMeasure(np.zeros(A.shape[0]), alpha * A)


@dataclass(frozen=True)
class KLTerms:
    """Pieces of ``KL(Q || P) = 1/2 (trace - n + mahalanobis + logdet_ratio)``."""

    trace: float
    mahalanobis: float
    logdet_ratio: float
    n: int
    jitter_applied: float = 0.0

    @property
    def value(self) -> float:
        return 0.5 * (self.trace - self.n + self.mahalanobis + self.logdet_ratio)


def _logdet_psd(S: np.ndarray) -> float:
    try:
        c = linalg.cholesky(S, lower=True)
        return 2.0 * float(np.sum(np.log(np.diag(c))))
    except linalg.LinAlgError:
        w = np.linalg.eigvalsh(S)
        if np.any(w <= 0):
            return -math.inf
        return float(np.sum(np.log(w)))


def kl_terms(Q: GaussianMeasure, P: GaussianMeasure) -> KLTerms:
    """Closed-form KL between Gaussians, split into its components.

    If ``P``'s covariance is numerically singular, ``1e-12 * max_diag`` is
    added to it and reported in ``jitter_applied``.  A degenerate ``Q``
    gives ``logdet_ratio = +inf``.
    """
    if Q.n != P.n:
        raise InvalidInputError("dimension mismatch between Q and P")
    n = P.n
    S_p = P.covariance
    jitter = 0.0
    try:
        c = linalg.cho_factor(S_p, lower=True)
    except linalg.LinAlgError:
        jitter = KL_JITTER_FACTOR * float(np.max(np.diag(S_p)))
        try:
            c = linalg.cho_factor(S_p + jitter * np.eye(n), lower=True)
        except linalg.LinAlgError as exc:
            raise NumericError(f"prior covariance is singular even after jitter {jitter:.3e}") from exc
    logdet_p = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
    diff = Q.mean - P.mean
    trace = float(np.trace(linalg.cho_solve(c, Q.covariance)))
    maha = float(diff @ linalg.cho_solve(c, diff))
    logdet_q = _logdet_psd(Q.covariance)
    return KLTerms(trace, maha, logdet_p - logdet_q, n, jitter)


def kl_gaussian(Q: GaussianMeasure, P: GaussianMeasure) -> float:
    """``KL(Q || P)``, with roundoff-level negatives clamped to zero."""
    return max(kl_terms(Q, P).value, 0.0)


def _pair(g, other, name: str) -> tuple[np.ndarray, np.ndarray]:
    g = np.asarray(g, dtype=float).ravel()
    other = np.asarray(other, dtype=float).ravel()
    if g.size != other.size:
        raise InvalidInputError(f"length mismatch between g and {name}: {g.size} vs {other.size}")
    if g.size == 0:
        raise InvalidInputError("empty vectors")
    return g, other


def excess_risk(g, fstar_values) -> float:
    """``R_n(g) = ||g - f*_n||^2 / n``."""
    g, f = _pair(g, fstar_values, "fstar_values")
    return float(np.sum((g - f) ** 2) / g.size)


def empirical_risk(g, y) -> float:
    """``r_n(g) = ||g - y||^2 / n``."""
    g, y = _pair(g, y, "y")
    return float(np.sum((g - y) ** 2) / g.size)


def average_excess_risk(Q: GaussianMeasure, fstar_values) -> float:
    """``E_{g ~ Q} R_n(g) = R_n(m_Q) + tr(Sigma_Q) / n``."""
    return excess_risk(Q.mean, fstar_values) + float(np.trace(Q.covariance)) / Q.n


def average_empirical_risk(Q: GaussianMeasure, y) -> float:
    """``E_{g ~ Q} r_n(g) = r_n(m_Q) + tr(Sigma_Q) / n``."""
    return empirical_risk(Q.mean, y) + float(np.trace(Q.covariance)) / Q.n
