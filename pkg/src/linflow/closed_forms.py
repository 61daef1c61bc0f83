"""Exact solution families, conserved quantities and limit formulas.

Eigenframe-aligned data is parameterized by ``(lam, r, k)``::

    S = lam * diag(-(1 + r), r, 1),   w = (0, 2 k lam, 0),

equivalently ``M = lam * [[-(1 + r), 0, k], [0, r, 0], [-k, 0, 1]]``.
The defect ``g = 1 + r - 2 r^2 - k^2`` vanishes on the invariant family along
which ``r`` and ``k`` are frozen and ``lam' = r lam^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .matrix_core import StrainVorticityPair, TraceFreeMatrix

FAMILY_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the domain where a closed form is valid."""


def aligned_matrix(lam: float, r: float, k: float) -> np.ndarray:
    return lam * np.array([[-(1.0 + r), 0.0, k], [0.0, r, 0.0], [-k, 0.0, 1.0]])


@dataclass(frozen=True)
class AlignedParams:
    """Eigenframe-aligned state ``(lam, r, k)``; ``lam`` is the largest strain eigenvalue."""

    lam: float
    r: float
    k: float

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lambda must be positive, got {self.lam}")

    @property
    def g(self) -> float:
        return g_defect(self.r, self.k)

    @property
    def m0(self) -> float:
        if self.r == -2.0:
            raise DomainError("m0 = k / (r + 2) is undefined for r = -2")
        return self.k / (self.r + 2.0)

    @property
    def lambda1(self) -> float:
        return -(self.r + 1.0) * self.lam

    @property
    def lambda2(self) -> float:
        return self.r * self.lam

    @property
    def lambda3(self) -> float:
        return self.lam

    def matrix(self) -> TraceFreeMatrix:
        return TraceFreeMatrix(aligned_matrix(self.lam, self.r, self.k))

    def pair(self) -> StrainVorticityPair:
        lam, r, k = self.lam, self.r, self.k
        return StrainVorticityPair(np.diag([-(1.0 + r) * lam, r * lam, lam]), [0.0, 2.0 * k * lam, 0.0])

    def rates(self) -> tuple[float, float, float]:
        """(lam', r', k') from the parameter ODE, in g-form."""
        lam, r, k = self.lam, self.r, self.k
        g = self.g
        return (r - g / 3.0) * lam * lam, lam * (r + 2.0) * g / 3.0, lam * g * k / 3.0


def family_k(r: float) -> float:
    """Nonnegative k on the invariant family, ``k^2 = 1 + r - 2 r^2``."""
    if not -0.5 <= r <= 1.0:
        raise DomainError(f"family requires -1/2 <= r <= 1, got {r}")
    # (1 + 2r)(1 - r) avoids cancellation at the endpoints
    return math.sqrt(max((1.0 + 2.0 * r) * (1.0 - r), 0.0))


@dataclass(frozen=True)
class FamilySolution:
    """The exact solution ``lam(t) = lambda0 / (1 - r lambda0 t)`` with frozen r, k.

    ``k`` defaults to the nonnegative root; (r, -k) evolves as the mirror
    image since the parameter ODE is odd in k. ``t_max`` is ``math.inf``
    when r <= 0.
    """

    lambda0: float
    r: float
    k: float | None = None

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise DomainError(f"lambda0 must be positive, got {self.lambda0}")
        kf = family_k(self.r)
        if self.k is None:
            object.__setattr__(self, "k", kf)
        elif abs(self.k * self.k - kf * kf) > FAMILY_TOL:
            raise DomainError(f"k={self.k} is off the family manifold for r={self.r}")

    @property
    def t_max(self) -> float:
        if self.r > 0:
            return 1.0 / (self.r * self.lambda0)
        return math.inf

    @property
    def finite_blowup(self) -> bool:
        return self.r > 0

    def lam(self, t: float) -> float:
        if not 0 <= t < self.t_max:
            raise DomainError(f"t={t} outside [0, {self.t_max})")
        return self.lambda0 / (1.0 - self.r * self.lambda0 * t)

    def params(self, t: float = 0.0) -> AlignedParams:
        return AlignedParams(self.lam(t), self.r, self.k)

    def matrix(self, t: float) -> np.ndarray:
        return aligned_matrix(self.lam(t), self.r, self.k)

    def dmatrix(self, t: float) -> np.ndarray:
        """Analytic dM/dt = r lam^2 * M / lam."""
        lam = self.lam(t)
        return aligned_matrix(self.r * lam * lam, self.r, self.k)

    def dpair(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        dlam = self.r * self.lam(t) ** 2
        r, k = self.r, self.k
        return np.diag([-(1.0 + r) * dlam, r * dlam, dlam]), np.array([0.0, 2.0 * k * dlam, 0.0])


def family_state(sol: FamilySolution, t: float) -> AlignedParams:
    return sol.params(t)


def g_defect(r: float, k: float) -> float:
    return 1.0 + r - 2.0 * r * r - k * k


class LimitConstants(NamedTuple):
    r_inf: float
    k_inf: float
    r_star: float
    on_boundary: bool


def limit_constants(m0: float) -> LimitConstants:
    """Roots of g along the invariant line ``k = m0 (r + 2)``.

    ``r_inf`` (the attracting root) and ``k_inf = m0 (r_inf + 2)`` are the
    blowup limits for data below the separatrix; ``r_star`` is the other root.
    At ``|m0| = 1/2`` the roots merge at 0 and ``on_boundary`` is set.
    """
    disc = 1.0 - 4.0 * m0 * m0
    if disc < 0:
        raise DomainError(f"|m0| must be <= 1/2, got {m0}")
    root = math.sqrt(disc)
    denom = 2.0 * m0 * m0 + 4.0
    r_inf = (disc + 3.0 * root) / denom
    r_star = (disc - 3.0 * root) / denom
    k_inf = m0 * (9.0 + 3.0 * root) / denom
    return LimitConstants(r_inf, k_inf, r_star, disc == 0.0)


def defective_closed_form(lambda0: float, t: float, off0: float = 1.0) -> tuple[float, float]:
    """(lam, off) for J = [[-2 lam, 0, 0], [0, lam, off], [0, 0, lam]].

    Solves lam' = lam^2, off' = -2 lam off.
    """
    if not lambda0 > 0:
        raise DomainError(f"lambda0 must be positive, got {lambda0}")
    s = 1.0 - lambda0 * t
    if t < 0 or s <= 0:
        raise DomainError(f"t={t} outside [0, {1.0 / lambda0})")
    return lambda0 / s, off0 * s * s


def boundary_invariant(lam: float, r: float) -> float:
    """Conserved quantity on the separatrix ``k^2 = (r + 2)^2 / 4``.

    There the reduced system is ``lam' = r (1 + 3r/4) lam^2`` and
    ``r' = -(3/4) lam (r + 2) r^2``, so ``d(ln lam)/dr = -(2/r + 1/(r+2)) / 3``
    and ``lam * r^(2/3) * (r + 2)^(1/3)`` is constant.
    """
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    return lam * r ** (2.0 / 3.0) * (r + 2.0) ** (1.0 / 3.0)


def boundary_r_bounds(r0: float, lambda0: float, t: float) -> tuple[float, float]:
    """Brackets for r(t) on the separatrix.

    With c the boundary invariant, ``(r^(-1/3))' = (c/4) (r + 2)^(2/3)``, and
    ``0 < r < r0`` bounds the integrand between ``2^(2/3)`` and ``(r0+2)^(2/3)``.
    """
    if not r0 > 0:
        raise DomainError(f"r0 must be positive, got {r0}")
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    c = boundary_invariant(lambda0, r0)
    rate = 0.25 * c * r0 ** (1.0 / 3.0)
    lower = r0 / (1.0 + rate * (r0 + 2.0) ** (2.0 / 3.0) * t) ** 3
    upper = r0 / (1.0 + rate * 2.0 ** (2.0 / 3.0) * t) ** 3
    return lower, upper


def lambda_asymptotic_check(trajectory, t_max_est: float) -> float:
    """sup |(T - t) lam(t) - 1| over the final decade of lam samples.

    ``lam`` is the first state column. It should be the rate whose
    reciprocal is asymptotically ``T - t``: the Jordan-block lam, or on the
    aligned family ``r lam`` (pass that column instead of lam when r != 1).
    """
    if not trajectory.blew_up:
        raise ValueError("trajectory did not terminate in blowup")
    t = np.asarray(trajectory.times)
    lam = np.asarray(trajectory.states)[:, 0]
    last = lam[-1]
    sel = lam >= last / 10.0
    return float(np.max(np.abs((t_max_est - t[sel]) * lam[sel] - 1.0)))
