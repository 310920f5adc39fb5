"""Kernels, kernel matrices, symmetric eigenvalues and RKHS bookkeeping.

Everything here works on fixed design points: an ``(n, d)`` array of inputs
at which a kernel is evaluated.  Kernel matrices carry the jitter that was
added to their diagonal (if any) so that downstream reports can surface it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from riglab.errors import InvalidInputError, NumericError

if TYPE_CHECKING:
    from riglab.spectral_synth import SpectralKernelSpec

KERNEL_FAMILIES = ("rbf", "matern32", "matern52", "linear", "spectral")

# Eigenvalues in (-CLAMP_TOL * sup_diag, 0) are roundoff and get clamped to 0.
CLAMP_TOL = 1e-9
DEFAULT_JITTER_FACTOR = 1e-10


@dataclass(frozen=True)
class DesignPoints:
    """Fixed design ``x_1, ..., x_n`` stored as an ``(n, d)`` array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError(f"design points must be a non-empty (n, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("design points must be finite")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise InvalidInputError("design points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def grid_design(n: int, d: int = 1) -> DesignPoints:
    """Equispaced grid on ``[0, 1]^d`` with ``n`` points (``n`` must be a d-th power)."""
    if n < 1 or d < 1:
        raise InvalidInputError("grid_design needs n >= 1 and d >= 1")
    per_axis = int(round(n ** (1.0 / d)))
    if per_axis**d != n:
        raise InvalidInputError(f"n={n} is not a perfect {d}-th power")
    axis = np.linspace(0.0, 1.0, per_axis) if per_axis > 1 else np.zeros(1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return DesignPoints(np.stack([m.ravel() for m in mesh], axis=1))


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its hyperparameters.

    ``amplitude`` multiplies every family.  ``lengthscale`` is ignored by the
    ``linear`` and ``spectral`` families.  For ``spectral`` the Mercer
    expansion is given by ``spectral``.
    """

    family: str
    lengthscale: float = 1.0
    amplitude: float = 1.0
    spectral: SpectralKernelSpec | None = None

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InvalidInputError(f"unknown kernel family {self.family!r}")
        if not (self.lengthscale > 0 and self.amplitude > 0):
            raise InvalidInputError("lengthscale and amplitude must be positive")
        if self.family == "spectral" and self.spectral is None:
            raise InvalidInputError("spectral family needs a SpectralKernelSpec")


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    jitter_applied: float = 0.0
    sup_diag: float = 0.0

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigenSpectrum:
    """Eigenvalues of a kernel matrix, non-increasing and non-negative."""

    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if np.any(vals < 0):
            raise InvalidInputError("spectrum values must be non-negative")
        vals = np.sort(vals)[::-1].copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    @property
    def max(self) -> float:
        return float(self.values[0]) if self.values.size else 0.0


@dataclass(frozen=True)
class RkhsElement:
    """``f = sum_j a_j k(., z_j)``: a finite combination of kernel sections."""

    anchors: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.anchors, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        a = np.asarray(self.coefficients, dtype=float).ravel()
        if z.shape[0] != a.size:
            raise InvalidInputError("need one coefficient per anchor")
        object.__setattr__(self, "anchors", z)
        object.__setattr__(self, "coefficients", a)


def _as_points(X) -> np.ndarray:
    if isinstance(X, DesignPoints):
        return X.points
    pts = np.asarray(X, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def kernel_cross(spec: KernelSpec, A, B) -> np.ndarray:
    """Matrix of kernel evaluations ``k(a_i, b_j)``."""
    A = _as_points(A)
    B = _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.family == "linear":
        out = A @ B.T
    elif spec.family == "spectral":
        from riglab.spectral_synth import spectral_cross

        if A.shape[1] != 1:
            raise InvalidInputError("spectral kernels are defined on [0, 1]")
        out = spectral_cross(spec.spectral, A[:, 0], B[:, 0])
    else:
        sq = np.sum(A**2, 1)[:, None] + np.sum(B**2, 1)[None, :] - 2.0 * A @ B.T
        r = np.sqrt(np.maximum(sq, 0.0)) / spec.lengthscale
        if spec.family == "rbf":
            out = np.exp(-0.5 * r**2)
        elif spec.family == "matern32":
            s = np.sqrt(3.0) * r
            out = (1.0 + s) * np.exp(-s)
        else:
            s = np.sqrt(5.0) * r
            out = (1.0 + s + s**2 / 3.0) * np.exp(-s)
    out = spec.amplitude * out
    if not np.all(np.isfinite(out)):
        raise InvalidInputError("kernel evaluation produced non-finite values")
    return out


def build_kernel_matrix(spec: KernelSpec, X, jitter: float | None = None) -> KernelMatrix:
    """Kernel matrix on the design, with jitter added only when needed.

    ``jitter=None`` uses ``1e-10 * sup_diag``.  The jitter is added to the
    diagonal iff the smallest eigenvalue is below it; ``jitter=0`` never
    modifies the matrix.
    """
    pts = _as_points(X)
    K = kernel_cross(spec, pts, pts)
    K = 0.5 * (K + K.T)
    sup_diag = float(np.max(np.diag(K)))
    amount = DEFAULT_JITTER_FACTOR * sup_diag if jitter is None else float(jitter)
    if amount < 0:
        raise InvalidInputError("jitter must be non-negative")
    applied = 0.0
    if amount > 0:
        lam_min = np.linalg.eigvalsh(K)[0]
        if lam_min < amount:
            K = K + amount * np.eye(K.shape[0])
            applied = amount
    K.setflags(write=False)
    return KernelMatrix(K, jitter_applied=applied, sup_diag=sup_diag)


def as_kernel_matrix(K) -> KernelMatrix:
    """Wrap a raw symmetric array as a :class:`KernelMatrix`."""
    if isinstance(K, KernelMatrix):
        return K
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape[0] != K.shape[1]:
        raise InvalidInputError("kernel matrix must be square")
    diag = np.diag(K)
    return KernelMatrix(K, 0.0, float(np.max(diag)) if diag.size else 0.0)


def eigenvalues_sym(K) -> EigenSpectrum:
    """All eigenvalues of a symmetric PSD matrix, non-increasing.

    Negative eigenvalues above ``-1e-9 * sup_diag`` are clamped to zero;
    anything more negative means the input is indefinite and is rejected.
    """
    K = as_kernel_matrix(K)
    A = K.entries
    if A.size == 0:
        return EigenSpectrum(np.zeros(0))
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, K.sup_diag)):
        raise InvalidInputError("matrix is not symmetric")
    try:
        lam = np.linalg.eigvalsh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigensolver failed on {A.shape[0]}x{A.shape[0]} input: {exc}") from exc
    scale = max(K.sup_diag, float(np.max(np.abs(lam))), np.finfo(float).tiny)
    if lam[0] < -CLAMP_TOL * scale:
        raise InvalidInputError(f"matrix is indefinite: smallest eigenvalue {lam[0]:.3e}")
    return EigenSpectrum(np.maximum(lam, 0.0))


def jacobi_eigenvalues(A, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.

    Kept as an independent cross-check for :func:`eigenvalues_sym`; meant for
    ``n <= 64``.  Returns values sorted non-increasing.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    scale = max(np.abs(A).max(), 1.0) if n else 1.0
    for sweep in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off <= tol * scale:
            return np.sort(np.diag(A))[::-1]
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t**2 + 1.0)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
    raise NumericError(f"Jacobi did not converge after {max_sweeps} sweeps (off-diagonal norm {off:.3e})")


def rkhs_norm_sq(f: RkhsElement, spec: KernelSpec) -> float:
    """Squared RKHS norm ``a^T K_z a``."""
    if f.coefficients.size == 0:
        return 0.0
    Kz = kernel_cross(spec, f.anchors, f.anchors)
    a = f.coefficients
    return max(float(a @ Kz @ a), 0.0)


def evaluate_rkhs(f: RkhsElement, spec: KernelSpec, X) -> np.ndarray:
    """Values ``f(x_i)`` on the design."""
    pts = _as_points(X)
    if f.coefficients.size == 0:
        return np.zeros(pts.shape[0])
    return kernel_cross(spec, pts, f.anchors) @ f.coefficients
