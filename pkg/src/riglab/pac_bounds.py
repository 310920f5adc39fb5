"""PAC-Bayesian excess-risk bounds for the Gibbs posterior, and coverage runs.

The headline bound, holding with probability at least ``1 - delta``, is

    E_{Q_{n,eta,alpha}} R_n  <=  (2 gamma_n(2 eta alpha, 2 beta alpha)
                                  + ||f*||_H^2 / (2 alpha) + 2 log(1/delta))
                                 / (n (eta - 2 s^2 eta^2 - beta - 2 s^2 beta^2))

with ``s`` the sub-Gaussian noise parameter.  Gaussian integrals of the risks
are always taken in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from riglab.complexity import relative_information_gain
from riglab.errors import InvalidInputError
from riglab.gp_gibbs import (
    GaussianMeasure,
    NoiseSpec,
    average_empirical_risk,
    empirical_risk,
    kl_gaussian,
    krr_fitted,
    make_rng,
    trial_seed,
)
from riglab.kernel_core import DesignPoints, KernelSpec, RkhsElement, build_kernel_matrix, eigenvalues_sym, evaluate_rkhs, rkhs_norm_sq
from riglab.spectral_synth import COSINE_PSI, DecayParams

SCHEDULES = ("poly", "exp", "poly_sigma_tuned")


def localized_denominator(eta: float, beta: float, sigma: float) -> float:
    """``eta - 2 sigma^2 eta^2 - beta - 2 sigma^2 beta^2``."""
    return eta - 2.0 * sigma**2 * eta**2 - beta - 2.0 * sigma**2 * beta**2


@dataclass(frozen=True)
class BoundParams:
    eta: float
    beta: float
    alpha: float
    sigma: float
    delta: float
    n: int

    def __post_init__(self):
        if not (self.eta > 0 and self.beta > 0 and self.alpha > 0 and self.sigma > 0):
            raise InvalidInputError("eta, beta, alpha and sigma must be positive")
        if not 0 < self.delta <= 1:
            raise InvalidInputError("delta must lie in (0, 1]")
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")
        if self.eta >= 1.0 / (2.0 * self.sigma**2):
            raise InvalidInputError("eta must be below 1 / (2 sigma^2)")
        if self.denominator <= 0:
            raise InvalidInputError(f"eta - 2s^2eta^2 - beta - 2s^2beta^2 = {self.denominator:.4g} must be positive")

    @property
    def denominator(self) -> float:
        return localized_denominator(self.eta, self.beta, self.sigma)


@dataclass(frozen=True)
class BoundReport:
    rig: float
    norm_term: float
    conf_term: float
    denominator: float
    n: int
    realized_avg_excess_risk: float = math.nan

    @property
    def bound_value(self) -> float:
        return (2.0 * self.rig + self.norm_term + self.conf_term) / (self.n * self.denominator)

    @property
    def violated(self) -> bool:
        return bool(self.realized_avg_excess_risk > self.bound_value)


def theorem_report(spectrum, params: BoundParams, fstar_norm_sq: float, realized: float = math.nan) -> BoundReport:
    if fstar_norm_sq < 0:
        raise InvalidInputError("fstar_norm_sq must be non-negative")
    a = params.alpha
    rig = relative_information_gain(spectrum, 2.0 * params.eta * a, 2.0 * params.beta * a)
    return BoundReport(
        rig=rig,
        norm_term=fstar_norm_sq / (2.0 * a),
        conf_term=2.0 * math.log(1.0 / params.delta),
        denominator=params.denominator,
        n=params.n,
        realized_avg_excess_risk=realized,
    )


def theorem_bound(spectrum, params: BoundParams, fstar_norm_sq: float) -> float:
    """Excess-risk bound in terms of the relative information gain."""
    return theorem_report(spectrum, params, fstar_norm_sq).bound_value


def _check_eta(eta: float, sigma: float) -> float:
    den = eta - 2.0 * sigma**2 * eta**2
    if not (eta > 0 and den > 0):
        raise InvalidInputError("eta must lie in (0, 1 / (2 sigma^2))")
    return den


def baseline_bound_rhs(Q: GaussianMeasure, prior: GaussianMeasure, inst, eta: float, sigma: float, delta: float) -> float:
    """Non-localised bound objective with the data-free prior ``P_alpha``."""
    den = _check_eta(eta, sigma)
    if not 0 < delta <= 1:
        raise InvalidInputError("delta must lie in (0, 1]")
    n = Q.n
    risk_gap = average_empirical_risk(Q, inst.y) - empirical_risk(inst.fstar_values, inst.y)
    return eta * risk_gap / den + (kl_gaussian(Q, prior) + math.log(1.0 / delta)) / (n * den)


def prop4_objective(Q: GaussianMeasure, prior_beta: GaussianMeasure, inst, params: BoundParams) -> float:
    """Localised bound objective with the Gibbs prior at learning rate ``beta``.

    Minimised over ``Q`` by the Gibbs posterior at learning rate ``eta``.
    """
    den = params.denominator
    n = Q.n
    risk_gap = average_empirical_risk(Q, inst.y) - empirical_risk(inst.fstar_values, inst.y)
    kl = kl_gaussian(Q, prior_beta)
    return (params.eta - params.beta) * risk_gap / den + (kl + 2.0 * math.log(1.0 / params.delta)) / (n * den)


def rate_schedule(kind: str, n: int, sigma: float, decay: DecayParams | None = None,
                  fstar_norm_sq: float | None = None, delta: float = 0.1, psi: float = COSINE_PSI) -> BoundParams:
    """Learning rates and prior scale giving the minimax rates.

    Always ``eta = 1/(4 sigma^2)`` and ``beta = 1/(32 sigma^2)``.  ``alpha`` is
    ``n^{-1/(1+beta_p)}`` for ``poly``, ``1`` for ``exp``, and for
    ``poly_sigma_tuned`` the choice that also tracks ``sigma`` and
    ``||f*||_H``.
    """
    if n < 1 or sigma <= 0:
        raise InvalidInputError("need n >= 1 and sigma > 0")
    eta = 1.0 / (4.0 * sigma**2)
    beta = 1.0 / (32.0 * sigma**2)
    if kind == "exp":
        alpha = 1.0
    elif kind in ("poly", "poly_sigma_tuned"):
        if decay is None or decay.kind != "polynomial":
            raise InvalidInputError(f"schedule {kind!r} needs polynomial decay parameters")
        bp = decay.beta_p
        if kind == "poly":
            alpha = n ** (-1.0 / (1.0 + bp))
        else:
            if not fstar_norm_sq or fstar_norm_sq <= 0:
                raise InvalidInputError("poly_sigma_tuned needs a positive fstar_norm_sq")
            alpha = (
                (bp / 2.0) ** (bp / (1.0 + bp))
                * (decay.C_p * psi**2 / 2.0) ** (-1.0 / (1.0 + bp))
                * math.log(8.0) ** ((1.0 - bp) / (1.0 + bp))
                * fstar_norm_sq ** (bp / (1.0 + bp))
                * sigma ** (2.0 / (1.0 + bp))
                * n ** (-1.0 / (1.0 + bp))
            )
    else:
        raise InvalidInputError(f"unknown schedule {kind!r}; expected one of {SCHEDULES}")
    return BoundParams(eta=eta, beta=beta, alpha=alpha, sigma=sigma, delta=delta, n=n)


def coverage_slack(delta: float, trials: int) -> float:
    """``delta + 3 sqrt(delta (1 - delta) / T)``: the allowed violation fraction."""
    return delta + 3.0 * math.sqrt(delta * (1.0 - delta) / trials)


@dataclass(frozen=True)
class CoverageConfig:
    kernel: KernelSpec
    X: DesignPoints
    fstar: RkhsElement
    noise_family: str
    noise_scale: float
    eta: float
    beta: float
    alpha: float
    sigma: float
    delta: float
    trials: int
    master_seed: int = 0
    jitter: float | None = 0.0

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidInputError("trials must be >= 1")


@dataclass(frozen=True)
class CoverageResult:
    n: int
    bound_value: float
    realized: np.ndarray
    violations: int
    delta: float
    report: BoundReport = field(repr=False)

    @property
    def trials(self) -> int:
        return self.realized.size

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.trials

    @property
    def allowed_fraction(self) -> float:
        return coverage_slack(self.delta, self.trials)

    @property
    def within_contract(self) -> bool:
        return self.violation_fraction <= self.allowed_fraction


def posterior_excess_risks(K, fstar_values, Y, eta: float, alpha: float, spectrum=None) -> np.ndarray:
    """Average excess risk of ``Q_{n,eta,alpha}`` for each response column of ``Y``.

    The posterior covariance does not depend on ``y``, so its trace is shared.
    """
    A = np.asarray(K.entries if hasattr(K, "entries") else K, dtype=float)
    n = A.shape[0]
    zeta = 1.0 / (2.0 * eta * alpha)
    M = krr_fitted(A, Y, zeta)
    lam = (spectrum if spectrum is not None else eigenvalues_sym(A)).values
    trace = float(np.sum(alpha * lam / (2.0 * eta * alpha * lam + 1.0)))
    f = np.asarray(fstar_values, dtype=float).reshape(n, 1)
    return (np.sum((M - f) ** 2, axis=0) + trace) / n


def coverage_experiment(config: CoverageConfig) -> CoverageResult:
    """Count how often the realised average excess risk exceeds the bound."""
    params = BoundParams(config.eta, config.beta, config.alpha, config.sigma, config.delta, config.X.n)
    K = build_kernel_matrix(config.kernel, config.X, jitter=config.jitter)
    spectrum = eigenvalues_sym(K)
    f = evaluate_rkhs(config.fstar, config.kernel, config.X)
    norm_sq = rkhs_norm_sq(config.fstar, config.kernel)
    n = config.X.n
    Y = np.empty((n, config.trials))
    for t in range(config.trials):
        noise = NoiseSpec(config.noise_family, config.noise_scale, trial_seed(config.master_seed, t))
        Y[:, t] = f + noise.sample(n, make_rng(noise.seed))
    realized = posterior_excess_risks(K, f, Y, config.eta, config.alpha, spectrum)
    report = theorem_report(spectrum, params, norm_sq)
    bound = report.bound_value
    return CoverageResult(
        n=n,
        bound_value=bound,
        realized=realized,
        violations=int(np.sum(realized > bound)),
        delta=config.delta,
        report=report,
    )
