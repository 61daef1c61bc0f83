"""Predicted fate of initial data, and a check of predictions against dynamics.

Aligned data ``(lam, r, k)`` falls into one of the family sub-cases (g = 0)
or one of six regions separated by ``g = 0`` and the separatrix
``k^2 = (r + 2)^2 / 4``. General data is classified by its spectrum: when
``Re l1 < Re l2 <= Re l3`` the solution blows up with profile
``Q diag(-2, 1, 1) Q^-1 / (T - t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .closed_forms import FAMILY_TOL, AlignedParams, limit_constants
from .dynamics import Status, Trajectory
from .matrix_core import as_array
from .spectral import DEFAULT_TOL, jordan_decompose

OBSERVE_LAMBDA = 1e6


class CaseTag(str, Enum):
    FAMILY_BLOWUP = "family_blowup"
    FAMILY_STATIONARY = "family_stationary"
    FAMILY_DECAY = "family_decay"
    CASE1 = "case1"
    CASE2 = "case2"
    CASE3_BOUNDARY = "case3_boundary"
    CASE4 = "case4"
    CASE5 = "case5"
    CASE6 = "case6"
    GENERAL_BLOWUP = "general_blowup"
    OUTSIDE_HYPOTHESIS = "outside_hypothesis"


class LambdaLimit(str, Enum):
    FINITE = "finite"
    FINITE_TIME = "infinity_at_finite_time"
    INFINITE_TIME = "infinity_at_infinite_time"


ALIGNED_TAGS = frozenset(
    {
        CaseTag.FAMILY_BLOWUP,
        CaseTag.FAMILY_STATIONARY,
        CaseTag.FAMILY_DECAY,
        CaseTag.CASE1,
        CaseTag.CASE2,
        CaseTag.CASE3_BOUNDARY,
        CaseTag.CASE4,
        CaseTag.CASE5,
        CaseTag.CASE6,
    }
)


@dataclass(frozen=True)
class FatePrediction:
    case_tag: CaseTag
    finite_blowup: bool
    lambda_limit: LambdaLimit
    limits: tuple[float, float] | None = None
    t_max_exact: float | None = None
    params: AlignedParams | None = None
    profile: np.ndarray | None = field(default=None, compare=False)
    refinement: "FatePrediction | None" = None

    def summary(self) -> dict:
        out = {
            "case": self.case_tag.value,
            "finite_blowup": self.finite_blowup,
            "lambda_limit": self.lambda_limit.value,
            "limits": None if self.limits is None else list(self.limits),
            "t_max_exact": self.t_max_exact,
        }
        if self.profile is not None:
            out["profile"] = np.asarray(self.profile).tolist()
        if self.refinement is not None:
            out["refinement"] = self.refinement.summary()
        return out


def f_poly(r: float, m0: float) -> float:
    return -1.0 + 2.0 * r + 2.0 * r * r + m0 * m0 * (r + 2.0) ** 2


def g_poly(r: float, m0: float) -> float:
    return 1.0 + r - 2.0 * r * r - m0 * m0 * (r + 2.0) ** 2


def g_factored(r: float, m0: float) -> float:
    """g along k = m0 (r + 2) as ``-(m0^2 + 2) (r - r_star) (r - r_inf)``."""
    lc = limit_constants(m0)
    return -(m0 * m0 + 2.0) * (r - lc.r_star) * (r - lc.r_inf)


def classify_aligned(p0: AlignedParams) -> FatePrediction:
    """Region of (r0, k0), decided in exact rational arithmetic.

    Points within ``FAMILY_TOL`` (relative in k^2) of the family curve or the
    separatrix are treated as lying on it.
    """
    lam0 = p0.lam
    r, k = Fraction(p0.r), Fraction(p0.k)
    k2 = k * k
    fam = 1 + r - 2 * r * r
    sep = (r + 2) ** 2 / 4
    r_f, k_f = float(r), float(k)

    def aligned(tag, blowup, lim, limits=None, t_max=None):
        return FatePrediction(tag, blowup, lim, limits, t_max, p0)

    # ties within FAMILY_TOL snap to the boundary, matching FamilySolution
    on_family = Fraction(-1, 2) <= r <= 1 and abs(k2 - fam) <= Fraction(FAMILY_TOL) * (1 + k2)
    on_sep = r > 0 and abs(k2 - sep) <= Fraction(FAMILY_TOL) * (1 + k2)
    if on_family:
        if r > 0:
            return aligned(CaseTag.FAMILY_BLOWUP, True, LambdaLimit.FINITE_TIME, (r_f, k_f), 1.0 / (r_f * lam0))
        if r == 0:
            return aligned(CaseTag.FAMILY_STATIONARY, False, LambdaLimit.FINITE, (r_f, k_f))
        return aligned(CaseTag.FAMILY_DECAY, False, LambdaLimit.FINITE, (r_f, k_f))
    if on_sep:
        return aligned(CaseTag.CASE3_BOUNDARY, False, LambdaLimit.INFINITE_TIME, (0.0, math.copysign(1.0, k_f)))
    if r > 0 and fam < k2 < sep:
        return aligned(CaseTag.CASE1, True, LambdaLimit.FINITE_TIME, _m0_limits(p0))
    if Fraction(-1, 2) < r < 1 and k2 < fam:
        return aligned(CaseTag.CASE2, True, LambdaLimit.FINITE_TIME, _m0_limits(p0))
    if r > 0 and k2 > sep:
        return aligned(CaseTag.CASE4, True, LambdaLimit.FINITE_TIME, (-2.0, 0.0))
    if Fraction(-1, 2) <= r <= 0 and k2 > fam:
        return aligned(CaseTag.CASE5, True, LambdaLimit.FINITE_TIME, (-2.0, 0.0))
    if r < Fraction(-1, 2):
        return aligned(CaseTag.CASE6, True, LambdaLimit.FINITE_TIME, (-2.0, 0.0))
    raise AssertionError(f"unclassified aligned data {p0}")  # unreachable


def _m0_limits(p0: AlignedParams) -> tuple[float, float]:
    lc = limit_constants(p0.m0)
    return lc.r_inf, lc.k_inf


def aligned_params_of(m0, tol: float = DEFAULT_TOL) -> AlignedParams | None:
    """(lam, r, k) if M is aligned within ``tol`` (relative), else None."""
    m = as_array(m0)
    norm = float(np.linalg.norm(m))
    if norm == 0.0:
        return None
    s = 0.5 * (m + m.T)
    lam = s[2, 2]
    off = [s[0, 1], s[0, 2], s[1, 2], m[1, 2] - m[2, 1], m[0, 1] - m[1, 0]]
    if lam <= tol * norm or max(abs(v) for v in off) > tol * norm:
        return None
    return AlignedParams(float(lam), float(s[1, 1] / lam), float(m[0, 2] / lam))


def classify_general(m0, tol: float = DEFAULT_TOL) -> FatePrediction:
    """Spectral prediction; aligned data gets the sharper aligned result."""
    dec = jordan_decompose(m0, tol)
    re = [z.real for z in dec.eigenvalues]
    scale = 1.0 + max(abs(z) for z in dec.eigenvalues)
    params = aligned_params_of(m0, tol)
    if re[1] - re[0] > tol * scale:
        refinement = classify_aligned(params) if params is not None else None
        return FatePrediction(
            CaseTag.GENERAL_BLOWUP,
            True,
            LambdaLimit.FINITE_TIME,
            profile=dec.profile(),
            refinement=refinement,
        )
    if params is not None:
        return classify_aligned(params)
    return FatePrediction(CaseTag.OUTSIDE_HYPOTHESIS, False, LambdaLimit.FINITE)


# ---------------------------------------------------------------------------
# verification


class InconclusiveError(RuntimeError):
    """The trajectory stopped before the prediction could be observed."""


@dataclass(frozen=True)
class Check:
    name: str
    predicted: float
    observed: float
    error: float
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    case_tag: CaseTag
    observed_at: float | None
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> dict:
        return {
            "case": self.case_tag.value,
            "observed_at": self.observed_at,
            "passed": self.passed,
            "checks": [c.__dict__ for c in self.checks],
        }


def _check(name, predicted, observed, tol, relative=False) -> Check:
    err = abs(observed - predicted)
    if relative:
        err /= max(abs(predicted), 1e-300)
    return Check(name, float(predicted), float(observed), float(err), bool(err <= tol))


def _aligned_view(traj: Trajectory) -> np.ndarray:
    if traj.kind == "params":
        return traj.states
    ms = traj.matrices()
    lam = ms[:, 2, 2]
    return np.column_stack([lam, ms[:, 1, 1] / lam, ms[:, 0, 2] / lam])


def verify_prediction(pred: FatePrediction, traj: Trajectory, tol: float) -> VerificationReport:
    """Compare predicted limits with the trajectory.

    Blowup predictions are observed at the last sample with lam >= 1e6 (or
    |M| >= 1e6 for general data), global ones at the final sample.
    """
    tag = pred.case_tag
    if tag is CaseTag.OUTSIDE_HYPOTHESIS:
        return VerificationReport(tag, None, ())

    if pred.finite_blowup:
        if traj.termination.status is Status.UNDERFLOW:
            raise InconclusiveError(f"step underflow before observation: {traj.termination.message}")
        if not traj.blew_up:
            return VerificationReport(tag, traj.t_final, (Check("finite_blowup", 1.0, 0.0, 1.0, False),))
        t_est = traj.termination.t_max_estimate
        if tag is CaseTag.GENERAL_BLOWUP:
            return _verify_general(pred, traj, tol, t_est)
        states = _aligned_view(traj)
        idx = np.nonzero(states[:, 0] >= OBSERVE_LAMBDA)[0]
        if idx.size == 0:
            return VerificationReport(tag, traj.t_final, (Check("observation_gate", OBSERVE_LAMBDA, states[-1, 0], 1.0, False),))
        i = int(idx[-1])
        lam, r, k = states[i]
        t = float(traj.times[i])
        checks = [_check("r_limit", pred.limits[0], r, tol), _check("k_limit", pred.limits[1], k, tol)]
        if pred.t_max_exact is not None:
            # (T - t) r lam = 1 on the family. Uses the extrapolated T: near
            # lam ~ 1e9 a 1e-11 error in t would swamp the exact T, which is
            # compared on its own in the next check
            checks.append(_check("(T-t)*r*lambda", 1.0, (t_est - t) * pred.params.r * lam, tol))
            checks.append(_check("t_max", pred.t_max_exact, t_est, tol, relative=True))
        return VerificationReport(tag, t, tuple(checks))

    if traj.termination.status is Status.UNDERFLOW:
        raise InconclusiveError(f"step underflow before t_end: {traj.termination.message}")
    checks = [Check("finite_blowup", 0.0, float(traj.blew_up), float(traj.blew_up), not traj.blew_up)]
    states = _aligned_view(traj)
    lam, r, k = states[-1]
    t = traj.t_final
    if tag is CaseTag.FAMILY_STATIONARY:
        drift = float(np.max(np.abs(states - states[0])) / np.max(np.abs(states[0])))
        checks.append(Check("stationary_drift", 0.0, drift, drift, drift <= tol))
    elif tag is CaseTag.FAMILY_DECAY:
        p0 = pred.params
        exact = p0.lam / (1.0 - p0.r * p0.lam * t)
        checks += [_check("lambda", exact, lam, tol, relative=True), _check("r", p0.r, r, tol), _check("k", p0.k, k, tol)]
    elif tag is CaseTag.CASE3_BOUNDARY:
        checks += [_check("r_limit", pred.limits[0], r, tol), _check("k_limit", pred.limits[1], k, tol)]
        checks.append(Check("lambda_growth", states[0, 0], lam, 0.0, bool(lam > states[0, 0])))
    return VerificationReport(tag, t, tuple(checks))


def _verify_general(pred: FatePrediction, traj: Trajectory, tol: float, t_est: float) -> VerificationReport:
    idx = np.nonzero(traj.norms >= OBSERVE_LAMBDA)[0]
    if idx.size == 0:
        return VerificationReport(pred.case_tag, traj.t_final, (Check("observation_gate", OBSERVE_LAMBDA, traj.norms[-1], 1.0, False),))
    i = int(idx[-1])
    t = float(traj.times[i])
    m = traj.matrices()[i]
    prof = np.asarray(pred.profile)
    err = float(np.linalg.norm((t_est - t) * m - prof) / np.linalg.norm(prof))
    return VerificationReport(pred.case_tag, t, (Check("profile", 0.0, err, err, err <= tol),))
