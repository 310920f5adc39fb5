"""Synthetic Mercer kernels with prescribed eigenvalue decay.

The kernel on ``[0, 1]`` is ``k(x, x') = sum_{i<=M} xi_i phi_i(x) phi_i(x')``
with the cosine basis ``phi_1 = 1``, ``phi_i(x) = sqrt(2) cos((i-1) pi x)``,
which is orthonormal in ``L^2[0, 1]`` and bounded by ``psi = sqrt(2)``.
Eigenvalues are set to the decay envelope with equality, which is the worst
case for every spectral bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from riglab.errors import InvalidInputError
from riglab.kernel_core import KernelMatrix, _as_points

COSINE_PSI = math.sqrt(2.0)
DEFAULT_TRUNCATION = 4096
# Smallest eigenvalue kept when choosing a truncation level automatically.
UNDERFLOW_FLOOR = 1e-300


@dataclass(frozen=True)
class DecayParams:
    """Polynomial ``C_p i^{-beta_p}`` or exponential ``C_e1 exp(-C_e2 i^{beta_e})`` decay."""

    kind: str
    C_p: float = 1.0
    beta_p: float = 2.0
    C_e1: float = 1.0
    C_e2: float = 1.0
    beta_e: float = 1.0

    def __post_init__(self):
        if self.kind == "polynomial":
            if not (self.C_p > 0 and self.beta_p > 1):
                raise InvalidInputError("polynomial decay needs C_p > 0 and beta_p > 1")
        elif self.kind == "exponential":
            if not (self.C_e1 > 0 and self.C_e2 > 0 and 0 < self.beta_e <= 1):
                raise InvalidInputError("exponential decay needs C_e1, C_e2 > 0 and beta_e in (0, 1]")
        else:
            raise InvalidInputError(f"unknown decay kind {self.kind!r}")

    def envelope(self, i) -> np.ndarray:
        """The decay bound evaluated at (1-based) indices ``i``."""
        i = np.asarray(i, dtype=float)
        if self.kind == "polynomial":
            return self.C_p * i ** (-self.beta_p)
        return self.C_e1 * np.exp(-self.C_e2 * i**self.beta_e)

    def tail_integral(self, M: int) -> float:
        """``int_M^inf envelope(x) dx``, an upper bound on ``sum_{i>M} envelope(i)``."""
        if self.kind == "polynomial":
            return self.C_p * M ** (1.0 - self.beta_p) / (self.beta_p - 1.0)
        a = 1.0 / self.beta_e
        lower = self.C_e2 * M**self.beta_e
        return float(self.C_e1 * a * self.C_e2 ** (-a) * special.gamma(a) * special.gammaincc(a, lower))

    def tail_sum_bound(self, M: int) -> float:
        """Upper bound on ``sum_{i>M} envelope(i)`` used for the truncation remainder.

        Polynomial: the integral from ``M``.  Exponential: ``envelope(M+1)``
        plus the integral from ``M+1``, which is strictly tighter and stays
        below the closed-form tail bound at ``D = M``.
        """
        if self.kind == "polynomial":
            return self.tail_integral(M)
        return float(self.envelope(M + 1)) + self.tail_integral(M + 1)


@dataclass(frozen=True)
class SpectralKernelSpec:
    spectrum: np.ndarray
    psi: float = COSINE_PSI
    decay: DecayParams | None = None
    basis: str = "cosine"

    def __post_init__(self):
        xi = np.asarray(self.spectrum, dtype=float).ravel()
        if xi.size < 1 or np.any(xi <= 0) or np.any(np.diff(xi) > 0):
            raise InvalidInputError("spectrum must be positive and non-increasing")
        if self.basis != "cosine":
            raise InvalidInputError(f"unsupported basis {self.basis!r}")
        xi.setflags(write=False)
        object.__setattr__(self, "spectrum", xi)

    @property
    def M(self) -> int:
        return self.spectrum.size


def truncation_level(decay: DecayParams, max_terms: int = DEFAULT_TRUNCATION) -> int:
    """Largest ``M <= max_terms`` whose eigenvalues stay above the underflow floor."""
    idx = np.arange(1, max_terms + 1)
    ok = np.nonzero(decay.envelope(idx) >= UNDERFLOW_FLOOR)[0]
    if ok.size == 0:
        raise InvalidInputError("decay parameters underflow at the first eigenvalue")
    return int(ok[-1] + 1)


def make_spectrum(decay: DecayParams, M: int | None = None) -> SpectralKernelSpec:
    """Cosine-basis kernel whose eigenvalues equal the decay envelope.

    ``M=None`` picks :func:`truncation_level`.
    """
    if M is None:
        M = truncation_level(decay)
    if M < 1:
        raise InvalidInputError("truncation M must be >= 1")
    xi = decay.envelope(np.arange(1, M + 1))
    if np.any(xi <= 0):
        raise InvalidInputError(f"eigenvalues underflow before index {M}; use truncation_level()")
    return SpectralKernelSpec(xi, psi=COSINE_PSI, decay=decay)


def cosine_features(x, M: int) -> np.ndarray:
    """``(n, M)`` matrix ``phi_i(x_j)`` for the cosine basis."""
    x = np.asarray(x, dtype=float).ravel()
    if np.any((x < 0) | (x > 1)):
        raise InvalidInputError("cosine basis inputs must lie in [0, 1]")
    Phi = COSINE_PSI * np.cos(np.pi * np.outer(x, np.arange(M)))
    Phi[:, 0] = 1.0
    return Phi


def spectral_cross(spec: SpectralKernelSpec, a, b, terms: slice = slice(None)) -> np.ndarray:
    """Cross-kernel matrix from the eigen-terms selected by ``terms``."""
    xi = spec.spectrum[terms]
    Pa = cosine_features(a, spec.M)[:, terms]
    Pb = cosine_features(b, spec.M)[:, terms]
    return (Pa * xi) @ Pb.T


def eval_spectral_kernel(spec: SpectralKernelSpec, x: float, x_prime: float) -> float:
    return float(spectral_cross(spec, [x], [x_prime])[0, 0])


def _design_1d(X) -> np.ndarray:
    pts = _as_points(X)
    if pts.shape[1] != 1:
        raise InvalidInputError("spectral kernels are defined on [0, 1]")
    return pts[:, 0]


def split_kernel_matrices(spec: SpectralKernelSpec, X, D: int) -> tuple[KernelMatrix, KernelMatrix]:
    """Kernel matrices of the first ``D`` eigen-terms and of the remaining ones."""
    if not 1 <= D <= spec.M:
        raise InvalidInputError(f"D must lie in [1, {spec.M}], got {D}")
    x = _design_1d(X)
    Phi = cosine_features(x, spec.M)
    xi = spec.spectrum
    K_par = (Phi[:, :D] * xi[:D]) @ Phi[:, :D].T
    K_perp = (Phi[:, D:] * xi[D:]) @ Phi[:, D:].T
    K_par, K_perp = 0.5 * (K_par + K_par.T), 0.5 * (K_perp + K_perp.T)
    sup = float(np.max(np.diag(K_par + K_perp)))
    return KernelMatrix(K_par, 0.0, sup), KernelMatrix(K_perp, 0.0, sup)


def tail_remainder(spec: SpectralKernelSpec) -> float:
    """Upper bound on ``psi^2 sum_{i>M} xi_i`` for the truncated-away terms."""
    if spec.decay is None:
        return 0.0
    return spec.psi**2 * spec.decay.tail_sum_bound(spec.M)


def delta_tail_exact(spec: SpectralKernelSpec, D: int, include_remainder: bool = True) -> float:
    """``psi^2 sum_{i=D+1}^{M} xi_i``, plus the analytic remainder past ``M``."""
    if not 0 <= D <= spec.M:
        raise InvalidInputError(f"D must lie in [0, {spec.M}], got {D}")
    # Sum smallest-first for accuracy.
    head = float(np.sum(spec.spectrum[D:][::-1]))
    total = spec.psi**2 * head
    if include_remainder:
        total += tail_remainder(spec)
    return total


def exp_tail_constant(decay: DecayParams, psi: float) -> float:
    """Prefactor of ``exp(-C_e2 D^{beta_e} / 2)`` in the tail bound for ``beta_e < 1``."""
    b, c1, c2 = decay.beta_e, decay.C_e1, decay.C_e2
    return (2.0 * c1 * psi**2 / (c2 * b)) * ((2.0 / c2) * (1.0 / b - 1.0)) ** (1.0 / b - 1.0) * math.exp(1.0 - 1.0 / b)


def delta_tail_bound(decay: DecayParams, psi: float, D: int) -> float:
    """Closed-form upper bound on ``delta_D`` under the decay condition.

    Polynomial: ``max(1, 1/(beta_p - 1)) C_p D^{1-beta_p} psi^2``.  Without
    the ``1/(beta_p - 1)`` factor the bound fails for ``beta_p < 2``.
    Exponential, ``beta_e = 1``: ``(C_e1 psi^2 / C_e2) exp(-C_e2 D)``.
    Exponential, ``beta_e < 1``: :func:`exp_tail_constant` times
    ``exp(-C_e2 D^{beta_e} / 2)``.
    """
    if D < 1:
        raise InvalidInputError("D must be >= 1")
    if decay.kind == "polynomial":
        factor = max(1.0, 1.0 / (decay.beta_p - 1.0))
        return factor * decay.C_p * D ** (1.0 - decay.beta_p) * psi**2
    if decay.beta_e == 1.0:
        return decay.C_e1 * psi**2 / decay.C_e2 * math.exp(-decay.C_e2 * D)
    return exp_tail_constant(decay, psi) * math.exp(-decay.C_e2 * D**decay.beta_e / 2.0)

