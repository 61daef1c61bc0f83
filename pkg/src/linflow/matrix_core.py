"""Trace-free 3x3 matrices, the strain/vorticity split, and equation residuals.

A spatially linear velocity field ``u(x, t) = M(t) x`` solves the
Navier-Stokes equations (for any viscosity) exactly when ``M`` is trace-free
and obeys the matrix ODE

    dM/dt + M^2 - (1/3) tr(M^2) I = 0.

The vorticity convention is fixed by

    [[0, w3, -w2], [-w3, 0, w1], [w2, -w1, 0]] = M^T - M,

so that ``M = S - A`` with ``A = (M^T - M) / 2`` and ``M x = S x + w x x / 2``.
All matrix norms are Frobenius norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRACE_TOL = 1e-12
# traces beyond this (relative) are treated as bad input rather than roundoff
TRACE_REJECT = 1e-6

IDENTITY = np.eye(3)


class TraceError(ValueError):
    """Input matrix is too far from trace-free to be projected silently."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def _remove_trace(m: np.ndarray) -> tuple[np.ndarray, bool]:
    norm = np.linalg.norm(m)
    tr = np.trace(m)
    if abs(tr) <= TRACE_TOL * (1.0 + norm):
        return m, False
    if abs(tr) > TRACE_REJECT * (1.0 + norm):
        raise TraceError(f"trace {tr:.3e} is not negligible relative to norm {norm:.3e}")
    return m - (tr / 3.0) * IDENTITY, True


@dataclass(frozen=True)
class TraceFreeMatrix:
    """A real 3x3 matrix with zero trace (rates, 1/time).

    Small traces (roundoff) are projected away and recorded in ``projected``;
    large traces raise :class:`TraceError`.
    """

    entries: np.ndarray
    projected: bool = False

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float).reshape(3, 3)
        m, did = _remove_trace(m)
        object.__setattr__(self, "entries", _frozen(m))
        object.__setattr__(self, "projected", self.projected or did)

    @classmethod
    def from_rows(cls, values) -> "TraceFreeMatrix":
        return cls(np.asarray(values, dtype=float).reshape(3, 3))

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    @property
    def trace_sq(self) -> float:
        """tr(M^2)."""
        m = self.entries
        return float(np.einsum("ij,ji->", m, m))


@dataclass(frozen=True)
class StrainVorticityPair:
    """Symmetric trace-free strain ``S`` and vorticity vector ``w``."""

    strain: np.ndarray
    vorticity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        s = np.asarray(self.strain, dtype=float)
        if s.shape == (6,):
            s = sym_from_entries(s)
        s = s.reshape(3, 3)
        s = 0.5 * (s + s.T)
        s, _ = _remove_trace(s)
        w = np.asarray(self.vorticity, dtype=float).reshape(3)
        object.__setattr__(self, "strain", _frozen(s))
        object.__setattr__(self, "vorticity", _frozen(w))

    @property
    def antisymmetric(self) -> np.ndarray:
        """A = (M^T - M) / 2, reconstructed from the vorticity."""
        return 0.5 * vorticity_matrix(self.vorticity)

    @property
    def strain_entries(self) -> np.ndarray:
        return sym_entries(self.strain)


@dataclass(frozen=True)
class VelocityField:
    """u(x) = M x. Divergence is tr(M) = 0."""

    matrix: TraceFreeMatrix

    def __call__(self, x) -> np.ndarray:
        return velocity(self.matrix, x)

    @property
    def divergence(self) -> float:
        return float(np.trace(self.matrix.entries))


def as_array(m) -> np.ndarray:
    if isinstance(m, TraceFreeMatrix):
        return m.entries
    return np.asarray(m, dtype=float).reshape(3, 3)


def as_tracefree(m) -> TraceFreeMatrix:
    if isinstance(m, TraceFreeMatrix):
        return m
    return TraceFreeMatrix(m)


def sym_entries(s) -> np.ndarray:
    """The 6 independent entries (s11, s22, s33, s12, s13, s23)."""
    s = np.asarray(s)
    return np.array([s[0, 0], s[1, 1], s[2, 2], s[0, 1], s[0, 2], s[1, 2]])


def sym_from_entries(e) -> np.ndarray:
    s11, s22, s33, s12, s13, s23 = e
    return np.array([[s11, s12, s13], [s12, s22, s23], [s13, s23, s33]], dtype=float)


def vorticity_matrix(w) -> np.ndarray:
    """The antisymmetric matrix equal to ``M^T - M`` for vorticity ``w``."""
    w1, w2, w3 = w
    return np.array([[0.0, w3, -w2], [-w3, 0.0, w1], [w2, -w1, 0.0]])


def vorticity_from_matrix(x) -> np.ndarray:
    """Inverse of :func:`vorticity_matrix` (reads the upper triangle)."""
    x = np.asarray(x)
    return np.array([x[1, 2], -x[0, 2], x[0, 1]])


def decompose(m) -> StrainVorticityPair:
    m = as_array(m)
    return StrainVorticityPair(0.5 * (m + m.T), vorticity_from_matrix(m.T - m))


def recompose(pair: StrainVorticityPair) -> TraceFreeMatrix:
    # M = S - A
    return TraceFreeMatrix(pair.strain - pair.antisymmetric)


def velocity(m, x) -> np.ndarray:
    return as_array(m) @ np.asarray(x, dtype=float)


def velocity_from_pair(pair: StrainVorticityPair, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return pair.strain @ x + 0.5 * np.cross(pair.vorticity, x)


def pressure(m, x) -> float:
    """The radial pressure -(1/6) tr(M^2) |x|^2."""
    m = as_array(m)
    x = np.asarray(x, dtype=float)
    return -np.einsum("ij,ji->", m, m) * float(x @ x) / 6.0


def pressure_gradient(m, x) -> np.ndarray:
    m = as_array(m)
    return -np.einsum("ij,ji->", m, m) / 3.0 * np.asarray(x, dtype=float)


def ns_rhs(m) -> np.ndarray:
    """dM/dt = -M^2 + (1/3) tr(M^2) I."""
    m = as_array(m)
    m2 = m @ m
    return -m2 + (np.trace(m2) / 3.0) * IDENTITY


def ns_residual(m, dm) -> np.ndarray:
    m = as_array(m)
    m2 = m @ m
    return np.asarray(dm, dtype=float).reshape(3, 3) + m2 - (np.trace(m2) / 3.0) * IDENTITY


def pair_rhs(pair: StrainVorticityPair) -> tuple[np.ndarray, np.ndarray]:
    s, w = pair.strain, pair.vorticity
    ds = -(s @ s) + (np.sum(s * s) / 3.0) * IDENTITY - 0.25 * np.outer(w, w) + (w @ w) / 12.0 * IDENTITY
    return ds, s @ w


def pair_residual(pair: StrainVorticityPair, ds, dw) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the strain and vorticity equations.

    The |S|^2 term carries the identity factor, as it must for the trace of
    the strain equation to vanish.
    """
    s, w = pair.strain, pair.vorticity
    res_s = (
        np.asarray(ds, dtype=float)
        + s @ s
        - (np.sum(s * s) / 3.0) * IDENTITY
        + 0.25 * np.outer(w, w)
        - (w @ w) / 12.0 * IDENTITY
    )
    res_w = np.asarray(dw, dtype=float) - s @ w
    return res_s, res_w


def pressure_hessian(pair: StrainVorticityPair) -> np.ndarray:
    s, w = pair.strain, pair.vorticity
    return (-np.sum(s * s) / 3.0 + (w @ w) / 6.0) * IDENTITY


def classic_evolution_residual(pair: StrainVorticityPair, ds, dw) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the textbook strain and vorticity evolution equations.

    For spatially constant S and w the viscous and advective terms vanish,
    leaving ``dS + S^2 + w w^T/4 - |w|^2 I/4 + Hess(p)`` and ``dw - S w``.
    """
    s, w = pair.strain, pair.vorticity
    res_s = (
        np.asarray(ds, dtype=float)
        + s @ s
        + 0.25 * np.outer(w, w)
        - 0.25 * (w @ w) * IDENTITY
        + pressure_hessian(pair)
    )
    res_w = np.asarray(dw, dtype=float) - s @ w
    return res_s, res_w


def residual_split(m, dm) -> tuple[np.ndarray, np.ndarray]:
    """Split the matrix residual into strain and vorticity residuals.

    The symmetric part is the strain residual; the antisymmetric part equals
    ``-(1/2) X(dw - S w)`` where ``X`` is :func:`vorticity_matrix`.
    """
    res = ns_residual(m, dm)
    sym = 0.5 * (res + res.T)
    anti = 0.5 * (res - res.T)
    return sym, -2.0 * vorticity_from_matrix(anti)
