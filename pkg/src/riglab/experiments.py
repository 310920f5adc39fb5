"""Experiment configuration and the three experiment drivers.

A configuration is one JSON object; unknown keys are rejected at every
level.  Example (rates)::

    {
      "experiment": "rates",
      "kernel": {"family": "spectral",
                 "decay": {"kind": "polynomial", "C_p": 1.0, "beta_p": 2.0}},
      "n_grid": [128, 256, 512, 1024, 2048, 4096],
      "schedule": "poly",
      "sigma": 0.5, "delta": 0.1, "trials": 50, "master_seed": 0,
      "fstar": {"anchors": [0.2, 0.7], "coefficients": [1.0, -0.5]},
      "output_path": "rates.csv"
    }

Each driver returns an :class:`ExperimentResult` whose rows are written as
CSV by :func:`write_csv`.  Floats are written in shortest round-trip form;
bounds evaluated outside their domain are written as ``inf``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from riglab import complexity as cx
from riglab.errors import DomainError, InvalidInputError
from riglab.gp_gibbs import NOISE_FAMILIES, NoiseSpec, make_rng, trial_seed
from riglab.kernel_core import KernelSpec, RkhsElement, build_kernel_matrix, eigenvalues_sym, evaluate_rkhs, grid_design, rkhs_norm_sq
from riglab.pac_bounds import (
    SCHEDULES,
    BoundParams,
    CoverageConfig,
    coverage_experiment,
    posterior_excess_risks,
    rate_schedule,
    theorem_report,
)
from riglab.spectral_synth import DecayParams, delta_tail_exact, make_spectrum

EXPERIMENTS = ("complexity", "coverage", "rates")

HEADERS = {
    "complexity": ["n", "eta", "beta", "d_eff", "ig", "rig", "scaled_rig", "prop6_bound", "prop7_bound", "vakili_bound"],
    "coverage": ["trial", "n", "bound_value", "realized_risk", "violated"],
    "rates": ["n", "alpha", "bound_value", "realized_risk"],
}

_TOP_KEYS = {
    "experiment", "kernel", "n_grid", "eta", "beta", "alpha", "schedule", "sigma", "delta",
    "trials", "master_seed", "noise", "fstar", "D_max", "output_path",
}
_KERNEL_KEYS = {"family", "lengthscale", "amplitude", "decay", "truncation"}
_DECAY_KEYS = {"kind", "C_p", "beta_p", "C_e1", "C_e2", "beta_e"}
_NOISE_KEYS = {"family", "scale"}
_FSTAR_KEYS = {"anchors", "coefficients"}

DEFAULT_FSTAR = {"anchors": [0.2, 0.7], "coefficients": [1.0, -0.5]}


class ConfigError(InvalidInputError):
    """Raised for malformed or inconsistent experiment configurations."""


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _as_list(v, name: str) -> list[float]:
    vals = v if isinstance(v, list) else [v]
    try:
        return [float(x) for x in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number or a list of numbers") from None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    kernel: KernelSpec
    n_grid: tuple[int, ...]
    sigma: float = 0.5
    delta: float = 0.1
    trials: int = 1
    master_seed: int = 0
    eta: tuple[float, ...] | None = None
    beta: tuple[float, ...] | None = None
    alpha: float | None = None
    schedule: str | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    fstar: RkhsElement | None = None
    D_max: int = 64
    output_path: str | None = None

    @property
    def decay(self) -> DecayParams | None:
        sp = self.kernel.spectral
        return sp.decay if sp is not None else None


def _parse_kernel(obj) -> KernelSpec:
    _reject_unknown(obj, _KERNEL_KEYS, "kernel")
    family = obj.get("family")
    try:
        if family == "spectral":
            if "decay" not in obj:
                raise ConfigError("spectral kernel needs a 'decay' object")
            _reject_unknown(obj["decay"], _DECAY_KEYS, "kernel.decay")
            decay = DecayParams(**obj["decay"])
            spec = make_spectrum(decay, obj.get("truncation"))
            return KernelSpec("spectral", amplitude=float(obj.get("amplitude", 1.0)), spectral=spec)
        if "decay" in obj or "truncation" in obj:
            raise ConfigError("'decay'/'truncation' only apply to spectral kernels")
        return KernelSpec(family, float(obj.get("lengthscale", 1.0)), float(obj.get("amplitude", 1.0)))
    except TypeError as exc:
        raise ConfigError(f"bad kernel parameters: {exc}") from exc


def parse_config(obj: dict) -> ExperimentConfig:
    """Validate a decoded JSON configuration."""
    _reject_unknown(obj, _TOP_KEYS, "config")
    exp = obj.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"'experiment' must be one of {EXPERIMENTS}")
    if "kernel" not in obj or "n_grid" not in obj:
        raise ConfigError("config needs 'kernel' and 'n_grid'")
    kernel = _parse_kernel(obj["kernel"])
    n_grid = obj["n_grid"]
    if not isinstance(n_grid, list) or not n_grid or not all(isinstance(n, int) and n >= 1 for n in n_grid):
        raise ConfigError("n_grid must be a non-empty list of positive integers")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("n_grid must be strictly increasing")
    sigma = float(obj.get("sigma", 0.5))
    delta = float(obj.get("delta", 0.1))
    trials = obj.get("trials", 1)
    if not (sigma > 0):
        raise ConfigError("sigma must be positive")
    if not 0 < delta <= 1:
        raise ConfigError("delta must lie in (0, 1]")
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials must be a positive integer")
    seed = obj.get("master_seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("master_seed must be an unsigned 64-bit integer")

    schedule = obj.get("schedule")
    if schedule is not None and schedule not in SCHEDULES:
        raise ConfigError(f"schedule must be one of {SCHEDULES}")
    eta = tuple(_as_list(obj["eta"], "eta")) if "eta" in obj else None
    beta = tuple(_as_list(obj["beta"], "beta")) if "beta" in obj else None
    alpha = obj.get("alpha")
    if alpha is not None and not (isinstance(alpha, (int, float)) and alpha > 0):
        raise ConfigError("alpha must be a positive number")

    noise_obj = obj.get("noise", {})
    _reject_unknown(noise_obj, _NOISE_KEYS, "noise")
    family = noise_obj.get("family", "gaussian")
    if family not in NOISE_FAMILIES:
        raise ConfigError(f"noise.family must be one of {NOISE_FAMILIES}")
    noise = NoiseSpec(family, float(noise_obj.get("scale", sigma)), seed)

    fobj = obj.get("fstar", DEFAULT_FSTAR)
    _reject_unknown(fobj, _FSTAR_KEYS, "fstar")
    try:
        fstar = RkhsElement(fobj["anchors"], fobj["coefficients"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad fstar: {exc}") from exc

    D_max = obj.get("D_max", 64)
    if not isinstance(D_max, int) or D_max < 1:
        raise ConfigError("D_max must be a positive integer")

    cfg = ExperimentConfig(
        experiment=exp, kernel=kernel, n_grid=tuple(n_grid), sigma=sigma, delta=delta, trials=trials,
        master_seed=seed, eta=eta, beta=beta, alpha=None if alpha is None else float(alpha),
        schedule=schedule, noise=noise, fstar=fstar, D_max=D_max, output_path=obj.get("output_path"),
    )
    _check_policy(cfg)
    return cfg


def _check_policy(cfg: ExperimentConfig) -> None:
    if cfg.experiment == "complexity":
        if cfg.kernel.family != "spectral":
            raise ConfigError("complexity experiments need a spectral kernel")
        if cfg.eta is None or cfg.beta is None:
            raise ConfigError("complexity experiments need 'eta' and 'beta'")
        return
    if cfg.experiment == "rates" and cfg.kernel.family != "spectral":
        raise ConfigError("rates experiments need a spectral kernel")
    if cfg.schedule is None:
        if cfg.eta is None or cfg.beta is None or cfg.alpha is None:
            raise ConfigError("give either 'schedule' or all of 'eta', 'beta', 'alpha'")
        if len(cfg.eta) != 1 or len(cfg.beta) != 1:
            raise ConfigError(f"{cfg.experiment} experiments take a single eta and beta")
    elif cfg.eta is not None or cfg.beta is not None or cfg.alpha is not None:
        raise ConfigError("'schedule' and explicit eta/beta/alpha are mutually exclusive")


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(obj)


@dataclass
class ExperimentResult:
    experiment: str
    rows: list[list]
    footer: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def header(self) -> list[str]:
        return HEADERS[self.experiment]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.header)
    for row in result.rows + result.footer:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(result: ExperimentResult, path) -> None:
    Path(path).write_text(to_csv(result), encoding="utf-8", newline="\n")


def _params_for(cfg: ExperimentConfig, n: int, norm_sq: float) -> BoundParams:
    if cfg.schedule is not None:
        return rate_schedule(cfg.schedule, n, cfg.sigma, cfg.decay, norm_sq, cfg.delta,
                             psi=cfg.kernel.spectral.psi if cfg.kernel.spectral else math.sqrt(2.0))
    return BoundParams(cfg.eta[0], cfg.beta[0], cfg.alpha, cfg.sigma, cfg.delta, n)


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _complexity_cell_rows(cfg: ExperimentConfig, n: int) -> list[list]:
    spec = cfg.kernel.spectral
    X = grid_design(n)
    K = build_kernel_matrix(cfg.kernel, X, jitter=0.0)
    spectrum = eigenvalues_sym(K)
    k_bar = K.sup_diag
    decay = spec.decay
    Ds = range(1, min(cfg.D_max, spec.M) + 1)
    deltas = {D: cfg.kernel.amplitude * delta_tail_exact(spec, D) for D in Ds}
    rows = []
    for eta in cfg.eta:
        for beta in cfg.beta:
            if not eta > beta >= 0:
                continue
            p = cx.complexity_profile(spectrum, eta, beta)
            if beta > 0:
                trunc = min(cx.rig_bound_prop6(D, eta, beta, n, deltas[D]) for D in Ds)
                closed = _closed_form_bound(n, eta, beta, decay, spec.psi, cfg.kernel.amplitude)
            else:
                trunc = closed = math.inf
            vak = min(cx.vakili_ig_bound(D, eta, n, k_bar, deltas[D]) for D in Ds)
            rows.append([n, eta, beta, p.d_eff, p.info_gain, p.rel_info_gain, p.scaled_rig, trunc, closed, vak])
    return rows


def _closed_form_bound(n, eta, beta, decay, psi, amplitude) -> float:
    if decay is None:
        return math.inf
    # An amplitude multiplies every eigenvalue, i.e. rescales C_p or C_e1.
    if decay.kind == "polynomial":
        scaled = DecayParams("polynomial", C_p=decay.C_p * amplitude, beta_p=decay.beta_p)
        return cx.rig_bound_poly(n, eta, beta, scaled, psi)
    scaled = DecayParams("exponential", C_e1=decay.C_e1 * amplitude, C_e2=decay.C_e2, beta_e=decay.beta_e)
    try:
        return cx.rig_bound_exp(n, eta, beta, scaled, psi)
    except DomainError:
        return math.inf


def run_complexity(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    cells = _map(lambda n: _complexity_cell_rows(cfg, n), list(cfg.n_grid), threads)
    rows = sorted((r for cell in cells for r in cell), key=lambda r: (r[0], r[1], r[2]))
    return ExperimentResult("complexity", rows, summary={"rows": len(rows)})


def _coverage_cell(cfg: ExperimentConfig, n: int):
    X = grid_design(n)
    norm_sq = rkhs_norm_sq(cfg.fstar, cfg.kernel)
    params = _params_for(cfg, n, norm_sq)
    cc = CoverageConfig(
        kernel=cfg.kernel, X=X, fstar=cfg.fstar, noise_family=cfg.noise.family, noise_scale=cfg.noise.scale,
        eta=params.eta, beta=params.beta, alpha=params.alpha, sigma=cfg.sigma, delta=cfg.delta,
        trials=cfg.trials, master_seed=cfg.master_seed,
    )
    return coverage_experiment(cc)


def run_coverage(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    results = _map(lambda n: _coverage_cell(cfg, n), list(cfg.n_grid), threads)
    rows, footer, summary = [], [], {}
    for res in results:
        for t, r in enumerate(res.realized):
            rows.append([t, res.n, res.bound_value, float(r), bool(r > res.bound_value)])
        allowed = res.allowed_fraction
        footer.append(["summary", res.n, allowed, res.violation_fraction, not res.within_contract])
        summary[res.n] = {"violations": res.violations, "fraction": res.violation_fraction, "allowed": allowed}
    rows.sort(key=lambda r: (r[1], r[0]))
    return ExperimentResult("coverage", rows, footer, summary)


def _rates_cell(cfg: ExperimentConfig, n: int):
    X = grid_design(n)
    K = build_kernel_matrix(cfg.kernel, X, jitter=0.0)
    spectrum = eigenvalues_sym(K)
    f = evaluate_rkhs(cfg.fstar, cfg.kernel, X)
    norm_sq = rkhs_norm_sq(cfg.fstar, cfg.kernel)
    params = _params_for(cfg, n, norm_sq)
    Y = np.empty((n, cfg.trials))
    for t in range(cfg.trials):
        seed = trial_seed(cfg.master_seed, t)
        Y[:, t] = f + NoiseSpec(cfg.noise.family, cfg.noise.scale, seed).sample(n, make_rng(seed))
    risks = posterior_excess_risks(K, f, Y, params.eta, params.alpha, spectrum)
    bound = theorem_report(spectrum, params, norm_sq).bound_value
    return [n, params.alpha, bound, float(np.mean(risks))]


def ols_slope(x, y) -> float | None:
    """Least-squares slope of ``log y`` against ``log x``; ``None`` for fewer than two points."""
    x, y = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if x.size < 2:
        return None
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc**2))


def run_rates(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    rows = sorted(_map(lambda n: _rates_cell(cfg, n), list(cfg.n_grid), threads), key=lambda r: r[0])
    ns = [r[0] for r in rows]
    bound_slope = ols_slope(ns, [r[2] for r in rows])
    risk_slope = ols_slope(ns, [r[3] for r in rows])
    footer = [] if bound_slope is None else [["slope", "", bound_slope, risk_slope]]
    return ExperimentResult("rates", rows, footer, {"bound_slope": bound_slope, "risk_slope": risk_slope})


RUNNERS = {"complexity": run_complexity, "coverage": run_coverage, "rates": run_rates}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg, threads)
