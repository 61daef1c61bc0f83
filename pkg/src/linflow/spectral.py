"""Eigenvalues and real Jordan forms of trace-free 3x3 matrices.

For trace-free M the characteristic polynomial is the depressed cubic
``rho^3 + p rho + q`` with ``p = -tr(M^2)/2`` and ``q = -det M``. Three shapes
of real canonical form occur (a triple nilpotent block aside):

* ``real_diagonalizable``: ``J = diag(l1, l2, l3)`` ascending;
* ``complex_pair``: ``J = diag(-2 lam) (+) [[lam, a], [-a, lam]]`` with a > 0,
  the real form of ``diag(-2 lam, lam + ia, lam - ia)``; Q's last two columns
  are the real and imaginary parts of the eigenvector for ``lam + ia``;
* ``defective_repeated``: ``J = diag(-2 lam) (+) [[lam, 1], [0, lam]]``.

In the last two shapes the simple eigenvalue sits at index 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .matrix_core import as_array

DEFAULT_TOL = 1e-8
EPS = float(np.finfo(float).eps)
RECONSTRUCT_TOL = 1e-9


class SpectralClass(str, Enum):
    REAL_DIAGONALIZABLE = "real_diagonalizable"
    COMPLEX_PAIR = "complex_pair"
    DEFECTIVE_REPEATED = "defective_repeated"


class IllConditionedError(ArithmeticError):
    """The spectral class cannot be decided at the requested tolerance."""


@dataclass(frozen=True)
class JordanDecomposition:
    spectral_class: SpectralClass
    q: np.ndarray
    j: np.ndarray
    eigenvalues: tuple[complex, complex, complex]

    def reconstruct(self) -> np.ndarray:
        return self.q @ self.j @ np.linalg.inv(self.q)

    @property
    def complex_params(self) -> tuple[float, float]:
        """(lam, a) of the rotation-scaling block."""
        if self.spectral_class is not SpectralClass.COMPLEX_PAIR:
            raise ValueError("not a complex pair")
        return float(self.j[1, 1]), float(self.j[1, 2])

    def profile(self) -> np.ndarray:
        """Q diag(-2, 1, 1) Q^-1 with the -2 on the index-0 direction."""
        return self.q @ np.diag([-2.0, 1.0, 1.0]) @ np.linalg.inv(self.q)


def cubic_coefficients(m) -> tuple[float, float]:
    m = as_array(m)
    return -0.5 * float(np.einsum("ij,ji->", m, m)), -float(np.linalg.det(m))


def _sort(roots) -> tuple[complex, complex, complex]:
    return tuple(sorted((complex(z) for z in roots), key=lambda z: (z.real, z.imag)))


def _newton(x: float, p: float, q: float) -> float:
    # at a double root f' vanishes too; keep the step only if it helps
    f = x * x * x + p * x + q
    d = 3.0 * x * x + p
    if d == 0.0:
        return x
    y = x - f / d
    return y if abs(y * y * y + p * y + q) < abs(f) else x


def depressed_cubic_roots(p: float, q: float) -> tuple[complex, complex, complex]:
    """Roots of rho^3 + p rho + q, ascending by (real, imag)."""
    if p == 0.0 and q == 0.0:
        return (0j, 0j, 0j)
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    # p < 0 is implied by disc <= 0 unless the cube underflowed
    if disc <= 0.0 and p < 0.0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        theta = math.acos(min(1.0, max(-1.0, arg))) / 3.0
        xs = [_newton(m * math.cos(theta - 2.0 * math.pi * i / 3.0), p, q) for i in range(3)]
        mean = sum(xs) / 3.0
        return _sort(x - mean for x in xs)
    # one real root; pick the cube-root branch that avoids cancellation
    big = abs(q) / 2.0 + math.sqrt(disc)
    a = -math.copysign(1.0, q) * big ** (1.0 / 3.0)
    b = -p / (3.0 * a) if a != 0.0 else 0.0
    x = _newton(a + b, p, q)
    # deflate: rho^2 + x rho + (p + x^2)
    im2 = p + 0.75 * x * x
    im = math.sqrt(im2) if im2 > 0.0 else 0.0
    return _sort([x, complex(-x / 2.0, -im), complex(-x / 2.0, im)])


def eigenvalues_tracefree(m) -> tuple[complex, complex, complex]:
    m = as_array(m)
    norm = float(np.linalg.norm(m))
    if norm == 0.0:
        return (0j, 0j, 0j)
    return tuple(z * norm for z in depressed_cubic_roots(*cubic_coefficients(m / norm)))


def _null_vector(b: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(b)
    return vh[-1].conj()


def _real_null_vector(b: np.ndarray) -> np.ndarray:
    v = np.real(_null_vector(b))
    return v / np.linalg.norm(v)


def jordan_decompose(m, tol: float = DEFAULT_TOL) -> JordanDecomposition:
    """Real canonical form ``M = Q J Q^-1``.

    Eigenvalues are taken to coincide when the cubic discriminant, scaled by
    the root magnitude, is within ``tol``. A coincident root is defective when
    ``M - rho I`` has numerical rank 2: its second singular value, relative to
    ``|M|``, is above ``sqrt(tol)``. Values between ``tol`` and ``sqrt(tol)``
    are ambiguous and raise :class:`IllConditionedError`.
    """
    m = as_array(m)
    norm = float(np.linalg.norm(m))
    if norm == 0.0:
        return JordanDecomposition(SpectralClass.REAL_DIAGONALIZABLE, np.eye(3), np.zeros((3, 3)), (0j, 0j, 0j))
    # the class is scale invariant; work at unit norm so p, q cannot underflow
    dec = _decompose_unit(m / norm, tol)
    q_mat, j = dec.q, dec.j * norm
    if dec.spectral_class is SpectralClass.DEFECTIVE_REPEATED:
        # keep the superdiagonal at 1 by shrinking the generalized eigenvector
        q_mat = q_mat.copy()
        q_mat[:, 2] /= norm
        j[1, 2] = 1.0
    out = JordanDecomposition(dec.spectral_class, q_mat, j, tuple(z * norm for z in dec.eigenvalues))
    # ill-conditioned eigenvectors (near a 3x3 block, or a snapped near-tie)
    # can miss the reconstruction bound; refuse rather than return it
    err = float(np.linalg.norm(out.reconstruct() - m))
    if not err <= RECONSTRUCT_TOL * (1.0 + norm):
        raise IllConditionedError(
            f"{dec.spectral_class.value} form reconstructs with error {err:.3g} "
            f"(cond Q = {np.linalg.cond(q_mat):.3g})"
        )
    return out


def _decompose_unit(m: np.ndarray, tol: float) -> JordanDecomposition:
    norm = 1.0
    eye = np.eye(3)
    p, q = cubic_coefficients(m)
    scale2 = max(abs(p) / 3.0, abs(q / 2.0) ** (2.0 / 3.0))
    if scale2 <= (tol * norm) ** 2:
        return _nilpotent(m, norm, tol)
    disc_rel = ((q / 2.0) ** 2 + (p / 3.0) ** 3) / scale2**3
    # p and q carry rounding of order eps |M|^2 and eps |M|^3; relative to
    # the root scale this is amplified by (|M| / root)^3
    window = max(tol, 64.0 * EPS * (norm / math.sqrt(scale2)) ** 3)
    roots = depressed_cubic_roots(p, q)

    if disc_rel > window:
        x = min(roots, key=lambda z: abs(z.imag)).real
        lam = -x / 2.0
        a = math.sqrt(max(p + 0.75 * x * x, 0.0))
        u = _real_null_vector(m - x * eye)
        z = _null_vector(m.astype(complex) - complex(lam, a) * eye)
        # rotate the phase so Re z and Im z are orthogonal
        z = z * np.exp(-0.5j * np.angle(z @ z))
        re, im = z.real, z.imag
        q_mat = np.column_stack([u, re / np.linalg.norm(re), im / np.linalg.norm(re)])
        j = np.array([[x, 0.0, 0.0], [0.0, lam, a], [0.0, -a, lam]])
        ev = _sort([x, complex(lam, a), complex(lam, -a)])
        return JordanDecomposition(SpectralClass.COMPLEX_PAIR, q_mat, j, ev)

    if disc_rel < -window:
        xs = [z.real for z in roots]
        q_mat = np.column_stack([_real_null_vector(m - x * eye) for x in xs])
        return JordanDecomposition(SpectralClass.REAL_DIAGONALIZABLE, q_mat, np.diag(xs), _sort(xs))

    # coincident pair (a, a, -2a); p = -3a^2, q = 2a^3
    a = -3.0 * q / (2.0 * p)
    b = m - a * eye
    sv = np.linalg.svd(b, compute_uv=False)
    s2 = sv[1] / norm
    u = _real_null_vector(m + 2.0 * a * eye)
    if s2 <= tol:
        _, _, vh = np.linalg.svd(b)
        n1, n2 = vh[1], vh[2]
        if a > 0:
            q_mat = np.column_stack([u, n1, n2])
            xs = [-2.0 * a, a, a]
        else:
            q_mat = np.column_stack([n1, n2, u])
            xs = [a, a, -2.0 * a]
        return JordanDecomposition(SpectralClass.REAL_DIAGONALIZABLE, q_mat, np.diag(xs), _sort(xs))
    if s2 < math.sqrt(tol):
        raise IllConditionedError(
            f"repeated eigenvalue {a:.6g}: rank test ambiguous (sigma2/|M| = {s2:.3g}, tol = {tol:.3g})"
        )
    return _defective(m, a, u)


def _defective(m: np.ndarray, a: float, u: np.ndarray) -> JordanDecomposition:
    eye = np.eye(3)
    b = m - a * eye
    v = _real_null_vector(b)
    # generalized eigenvector: (M - a I) w = v, taking the part off v
    w, *_ = np.linalg.lstsq(b, v, rcond=None)
    w = w - (w @ v) * v
    q_mat = np.column_stack([u, v, w])
    j = np.array([[-2.0 * a, 0.0, 0.0], [0.0, a, 1.0], [0.0, 0.0, a]])
    return JordanDecomposition(SpectralClass.DEFECTIVE_REPEATED, q_mat, j, _sort([-2.0 * a, a, a]))


def _nilpotent(m: np.ndarray, norm: float, tol: float) -> JordanDecomposition:
    sv = np.linalg.svd(m, compute_uv=False) / norm
    if sv[1] <= tol:
        # rank one, M = x y^T with y.x = 0: blocks of size 2 and 1 at zero
        col = m[:, np.argmax(np.linalg.norm(m, axis=0))]
        v = col / np.linalg.norm(col)
        w, *_ = np.linalg.lstsq(m, v, rcond=None)
        # a second null vector, orthogonal to v
        _, _, vh = np.linalg.svd(np.vstack([m, v]))
        u = vh[-1]
        q_mat = np.column_stack([u, v, w])
        j = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        return JordanDecomposition(SpectralClass.DEFECTIVE_REPEATED, q_mat, j, (0j, 0j, 0j))
    if sv[1] < math.sqrt(tol):
        raise IllConditionedError("nearly nilpotent matrix with ambiguous rank")
    raise IllConditionedError("nilpotent matrix with a single 3x3 Jordan block has no supported real form")


def complex_block_rhs(lam: float, a: float) -> tuple[float, float]:
    return lam * lam + a * a / 3.0, -2.0 * lam * a


def defective_block_rhs(lam: float, off: float) -> tuple[float, float]:
    return lam * lam, -2.0 * lam * off


def jordan_evolution_rhs(j) -> np.ndarray:
    """-J^2 + tr(J^2) I / 3; preserves each canonical shape."""
    j = np.asarray(j, dtype=float)
    j2 = j @ j
    return -j2 + (np.trace(j2) / 3.0) * np.eye(3)


def family_eigenbasis(r: float, k: float):
    """Eigenvectors of the family matrix with lam = 1.

    ``v1`` has eigenvalue ``-2r``; ``v2 = e2`` and ``v3`` share eigenvalue r.
    Returns (v1, v2, v3, Q) with Q = [v1 v2 v3].
    """
    from .closed_forms import DomainError, FAMILY_TOL

    if not 0.0 < r <= 1.0:
        raise DomainError(f"r must lie in (0, 1], got {r}")
    if abs(k * k - (1.0 + r - 2.0 * r * r)) > FAMILY_TOL:
        raise DomainError(f"(r, k) = ({r}, {k}) is off the family manifold")
    s = 1.0 + 2.0 * r
    n = math.hypot(k, s)
    v1 = np.array([s, 0.0, k]) / n
    v2 = np.array([0.0, 1.0, 0.0])
    v3 = np.array([k, 0.0, s]) / n
    return v1, v2, v3, np.column_stack([v1, v2, v3])
