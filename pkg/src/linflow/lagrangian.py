"""Particle paths for the blowup family.

Along the family ``M(t) = lam(t) M1`` with ``M1`` having eigenvectors v1
(eigenvalue -2r) and v2, v3 (eigenvalue r), the particle equation
``y' = M(t) y`` decouples in the eigenbasis. With ``s = r lam0 t``::

    Y(y0, t) = Q D(t) Q^-1 y0,   D = diag((1 - s)^2, 1/(1 - s), 1/(1 - s)).

The v1 axis is crushed to the origin while span{v2, v3} is sent to infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closed_forms import DomainError, FamilySolution
from .dynamics import SolverConfig, Trajectory, integrate_linear
from .matrix_core import pressure, velocity
from .spectral import family_eigenbasis


@dataclass(frozen=True)
class FlowMapSpec:
    family: FamilySolution
    q: np.ndarray = field(init=False, repr=False)
    q_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.family.r > 0:
            raise DomainError(f"flow map needs r > 0, got {self.family.r}")
        *_, q = family_eigenbasis(self.family.r, self.family.k)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "q_inv", np.linalg.inv(q))

    @classmethod
    def from_params(cls, lambda0: float, r: float) -> "FlowMapSpec":
        return cls(FamilySolution(lambda0, r))

    @property
    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.q[:, 0], self.q[:, 1], self.q[:, 2]

    @property
    def t_max(self) -> float:
        return self.family.t_max

    def shrink(self, t: float) -> float:
        """1 - r lam0 t, validated against the blowup time."""
        if not 0 <= t < self.t_max:
            raise DomainError(f"t={t} outside [0, {self.t_max})")
        return 1.0 - self.family.r * self.family.lambda0 * t

    def d_of_t(self, t: float) -> np.ndarray:
        s = self.shrink(t)
        return np.array([s * s, 1.0 / s, 1.0 / s])

    def jacobian(self, t: float) -> np.ndarray:
        return self.q @ np.diag(self.d_of_t(t)) @ self.q_inv

    def jacobian_det(self, t: float) -> float:
        """det D(t), from the diagonal law."""
        return float(np.prod(self.d_of_t(t)))


def flow_map(spec: FlowMapSpec, y0, t: float) -> np.ndarray:
    y0 = np.asarray(y0, dtype=float)
    if t == 0:
        return y0.copy()
    coeff = spec.q_inv @ y0
    return spec.q @ (spec.d_of_t(t) * coeff)


def advect(m_of_t, y0, cfg: SolverConfig) -> Trajectory:
    """Numerical particle path y' = M(t) y."""
    return integrate_linear(m_of_t, y0, cfg)


def yz_circle_constants(r: float, k: float) -> tuple[float, float]:
    """(c1, c3) with e3 = c1 v1 + c3 v3."""
    n = math.hypot(k, 1.0 + 2.0 * r)
    return -k * n / (3.0 * r * (1.0 + 2.0 * r)), n / (3.0 * r)


def circle_image_eigenplane(r0: float, spec: FlowMapSpec, t: float, theta: float) -> np.ndarray:
    """Image of R0 (cos th v2 + sin th v3); stays a circle, radius R0 / (1 - s)."""
    s = spec.shrink(t)
    _, v2, v3 = spec.basis
    return r0 / s * (math.cos(theta) * v2 + math.sin(theta) * v3)


def circle_image_yz(r0: float, spec: FlowMapSpec, t: float, theta: float) -> np.ndarray:
    """Image of R0 (cos th e2 + sin th e3).

    Expanding ``e3 = c1 v1 + c3 v3`` and scaling each eigencomponent gives
    ``c1 R0 sin th (1-s)^2 v1 + R0 cos th/(1-s) v2 + c3 R0 sin th/(1-s) v3``.
    """
    s = spec.shrink(t)
    v1, v2, v3 = spec.basis
    c1, c3 = yz_circle_constants(spec.family.r, spec.family.k)
    st, ct = math.sin(theta), math.cos(theta)
    return c1 * r0 * st * s * s * v1 + r0 * ct / s * v2 + c3 * r0 * st / s * v3


def yz_image_plane_angle(spec: FlowMapSpec, t: float) -> float:
    """Angle between the plane of the yz-circle image and span{v2, v3}."""
    j = spec.jacobian(t)
    n = np.cross(j[:, 1], j[:, 2])
    _, v2, v3 = spec.basis
    n0 = np.cross(v2, v3)
    c = abs(n @ n0) / (np.linalg.norm(n) * np.linalg.norm(n0))
    return math.acos(min(1.0, c))


def seregin_sverak_probe(spec: FlowMapSpec, t: float, radius: float) -> tuple[float, float]:
    """(p, p + |u|^2 / 2) at x = radius * v1.

    With eigenvalues (-2r, r, r) lam, ``p = -r^2 lam^2 |x|^2`` and the
    Bernoulli quantity is ``r^2 lam^2 |x|^2``.
    """
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    spec.shrink(t)
    m = spec.family.matrix(t)
    x = radius * spec.basis[0]
    p = pressure(m, x)
    u = velocity(m, x)
    return p, p + 0.5 * float(u @ u)
