"""Adaptive integration of the matrix, pair, parameter and Jordan-block ODEs.

All systems share one stepping loop built on scipy's DOP853 embedded pair
(order 8 with a 5/3 error estimator). The loop adds what the library does
not: blowup detection by a reciprocal-norm fit, dense sampling at requested
times, retention of every accepted step in the final decade before
termination, and trace re-projection for the matrix and pair systems.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853

from .closed_forms import AlignedParams
from .matrix_core import (
    IDENTITY,
    StrainVorticityPair,
    TraceFreeMatrix,
    as_tracefree,
    sym_entries,
    sym_from_entries,
)

TRACE_DRIFT = 1e-10
# a blowup fit must explain 1/norm this well, relative to its scale
FIT_RESIDUAL = 1e-3
# half-width multiplier on the fit standard error
CI_SIGMAS = 4.0


def default_rel_tol() -> float:
    env = os.environ.get("LINFLOW_DEFAULT_TOL")
    if env:
        val = float(env)
        if not val > 0:
            raise ValueError(f"LINFLOW_DEFAULT_TOL must be positive, got {env}")
        return val
    return 1e-10


class Status(str, Enum):
    HORIZON = "horizon_reached"
    BLOWUP = "blowup"
    UNDERFLOW = "step_underflow"


@dataclass(frozen=True)
class Termination:
    status: Status
    t_max_estimate: float | None = None
    confidence_interval: tuple[float, float] | None = None
    message: str = ""


@dataclass(frozen=True)
class SolverConfig:
    t_end: float = 10.0
    rel_tol: float = field(default_factory=default_rel_tol)
    abs_tol: float = 1e-12
    blowup_norm_threshold: float = 1e9
    min_step: float | None = None
    max_samples: int = 1_000_000
    sample_times: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive and finite, got {self.t_end}")
        if not self.rel_tol > 0 or not self.abs_tol > 0:
            raise ValueError("rel_tol and abs_tol must be positive")
        if not self.blowup_norm_threshold > 1:
            raise ValueError("blowup_norm_threshold must exceed 1")
        if self.min_step is None:
            object.__setattr__(self, "min_step", 1e-14 * self.t_end)
        if self.sample_times is not None:
            ts = tuple(sorted(float(t) for t in self.sample_times))
            if ts and (ts[0] < 0 or ts[-1] > self.t_end):
                raise ValueError("sample_times must lie in [0, t_end]")
            object.__setattr__(self, "sample_times", ts)
        if self.max_samples < 2:
            raise ValueError("max_samples must be at least 2")

    def replace(self, **kw) -> "SolverConfig":
        vals = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if "t_end" in kw and "min_step" not in kw:
            vals["min_step"] = None
        vals.update(kw)
        return SolverConfig(**vals)


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution. ``states[i]`` is the state at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray
    termination: Termination
    kind: str
    columns: tuple[str, ...]
    norms: np.ndarray
    threshold: float = 1e9
    rel_tol: float = 0.0
    projections: int = 0
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size and (t[0] != 0.0 or np.any(np.diff(t) <= 0)):
            raise ValueError("times must start at 0 and increase strictly")

    @property
    def blew_up(self) -> bool:
        return self.termination.status is Status.BLOWUP

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.columns.index(name)]

    def matrices(self) -> np.ndarray:
        """States as an (n, 3, 3) array of velocity-gradient matrices."""
        if self.kind == "matrix":
            return self.states.reshape(-1, 3, 3)
        if self.kind == "pair":
            return np.array([_pair_state_matrix(y) for y in self.states])
        if self.kind == "params":
            lam, r, k = self.states.T
            out = np.zeros((len(lam), 3, 3))
            out[:, 0, 0] = -(1.0 + r) * lam
            out[:, 1, 1] = r * lam
            out[:, 2, 2] = lam
            out[:, 0, 2] = k * lam
            out[:, 2, 0] = -k * lam
            return out
        raise ValueError(f"no matrix view for kind {self.kind!r}")

    def pairs(self) -> list[StrainVorticityPair]:
        if self.kind == "pair":
            return [StrainVorticityPair(y[:6], y[6:]) for y in self.states]
        from .matrix_core import decompose

        return [decompose(m) for m in self.matrices()]


def _pair_state_matrix(y) -> np.ndarray:
    s = sym_from_entries(y[:6])
    w1, w2, w3 = y[6:]
    # M = S - A with A = X(w)/2
    a = 0.5 * np.array([[0.0, w3, -w2], [-w3, 0.0, w1], [w2, -w1, 0.0]])
    return s - a


# ---------------------------------------------------------------------------
# reciprocal-norm extrapolation


def fit_reciprocal(times, norms, threshold: float, rel_tol: float = 0.0):
    """Least-squares line through 1/norm over samples with norm >= threshold/10.

    Returns (t_est, (lo, hi), slope, rel_residual). The interval is the fit
    standard error widened by ``rel_tol * t_est``, a floor for the global
    integration error that the fit residuals cannot see.
    """
    t = np.asarray(times, dtype=float)
    n = np.asarray(norms, dtype=float)
    sel = n >= threshold / 10.0
    if np.count_nonzero(sel) < 3:
        raise ValueError(f"need at least 3 samples above {threshold / 10.0:.3g}, found {np.count_nonzero(sel)}")
    t, y = t[sel], 1.0 / n[sel]
    # centre time for conditioning; intercept solved at the centre
    tc = t.mean()
    x = t - tc
    sxx = float(x @ x)
    if sxx == 0.0:
        raise ValueError("degenerate sample times in final decade")
    slope = float(x @ y) / sxx
    mean_y = float(y.mean())
    resid = y - (mean_y + slope * x)
    scale = float(np.sqrt(np.mean(y * y)))
    rel_res = float(np.sqrt(np.mean(resid * resid))) / scale
    if slope >= 0:
        return math.nan, (math.nan, math.nan), slope, rel_res
    t_est = tc - mean_y / slope
    m = len(t)
    sigma2 = float(resid @ resid) / max(m - 2, 1)
    var_mean = sigma2 / m
    var_slope = sigma2 / sxx
    # T = tc - c/b with c, b uncorrelated after centring
    se = math.sqrt(var_mean / slope**2 + (mean_y**2 / slope**4) * var_slope)
    half = CI_SIGMAS * se + rel_tol * abs(t_est)
    return t_est, (t_est - half, t_est + half), slope, rel_res


def estimate_blowup_time(trajectory: Trajectory, threshold: float | None = None):
    """Extrapolated blowup time and interval from the final decade of norms."""
    thr = trajectory.threshold if threshold is None else threshold
    if not np.max(trajectory.norms) >= thr:
        raise ValueError("trajectory norm never reached the blowup threshold")
    t_est, ci, slope, _ = fit_reciprocal(trajectory.times, trajectory.norms, thr, trajectory.rel_tol)
    if not slope < 0:
        raise ValueError("reciprocal norm is not decreasing; no blowup to extrapolate")
    return t_est, ci


# ---------------------------------------------------------------------------
# the shared stepping loop


def _run(
    fun: Callable,
    y0: np.ndarray,
    cfg: SolverConfig,
    norm: Callable[[np.ndarray], float],
    kind: str,
    columns: tuple[str, ...],
    fixup: Callable[[np.ndarray], np.ndarray | None] | None = None,
    atol=None,
    record: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Trajectory:
    y0 = np.asarray(y0, dtype=float)
    atol = cfg.abs_tol if atol is None else atol
    thr = cfg.blowup_norm_threshold
    keep_all = cfg.sample_times is None
    pending = [t for t in (cfg.sample_times or ()) if t > 0.0]
    pi = 0

    times = [0.0]
    states = [y0.copy()]
    norms = [norm(y0)]
    projections = 0

    def push(t, y):
        if t <= times[-1]:
            return
        times.append(t)
        states.append(np.array(y, dtype=float))
        norms.append(norm(y))

    def make(t, y, first_step=None):
        return DOP853(fun, t, y, cfg.t_end, rtol=cfg.rel_tol, atol=atol, first_step=first_step)

    solver = make(0.0, y0)
    status = Status.HORIZON
    message = ""
    t_est = None
    ci = None
    # final-decade buffer when only requested samples are kept
    tail: list[tuple[float, np.ndarray]] = []

    if norms[0] >= thr:
        raise ValueError("initial norm already exceeds blowup threshold")

    while True:
        if solver.status == "finished":
            break
        t_old = solver.t
        msg = solver.step()
        if solver.status == "failed":
            status, message = Status.UNDERFLOW, str(msg)
            break
        t, y = solver.t, solver.y
        if not np.all(np.isfinite(y)):
            status, message = Status.UNDERFLOW, "non-finite state"
            break

        # dense samples inside (t_old, t]
        if pi < len(pending) and pending[pi] <= t:
            dense = solver.dense_output()
            while pi < len(pending) and pending[pi] <= t:
                ts = pending[pi]
                ys = y if ts == t else dense(ts)
                while tail and tail[0][0] < ts:
                    push(*tail.pop(0))
                push(ts, ys)
                pi += 1

        nrm = norm(y)
        if keep_all:
            push(t, y)
        elif nrm >= thr / 10.0:
            tail.append((t, y.copy()))
        else:
            tail.clear()

        if len(times) + len(tail) > cfg.max_samples:
            status, message = Status.UNDERFLOW, "max_samples exceeded"
            break

        if nrm >= thr:
            for item in tail:
                push(*item)
            tail.clear()
            try:
                t_fit, ci_fit, slope, rel = fit_reciprocal(times, norms, thr, cfg.rel_tol)
            except ValueError as exc:
                status, message = Status.UNDERFLOW, f"blowup fit unavailable: {exc}"
                break
            if slope < 0 and rel < FIT_RESIDUAL:
                status, t_est, ci = Status.BLOWUP, t_fit, ci_fit
            else:
                status = Status.UNDERFLOW
                message = f"norm {nrm:.3g} crossed threshold but fit is poor (slope {slope:.3g}, residual {rel:.3g})"
            break

        if solver.status == "running" and solver.step_size < cfg.min_step:
            status, message = Status.UNDERFLOW, f"step {solver.step_size:.3g} below min_step {cfg.min_step:.3g}"
            break

        if fixup is not None and solver.status == "running":
            fixed = fixup(y)
            if fixed is not None:
                projections += 1
                solver = make(t, fixed, first_step=max(solver.step_size, 1e-300))
                if keep_all:
                    states[-1] = fixed.copy()
                    norms[-1] = norm(fixed)

    if status is not Status.BLOWUP:
        for item in tail:
            push(*item)
        if np.all(np.isfinite(solver.y)):
            push(solver.t, solver.y)

    st = np.array(states)
    if record is not None:
        st = np.array([record(s) for s in st])
    return Trajectory(
        times=np.array(times),
        states=st,
        termination=Termination(status, t_est, ci, message),
        kind=kind,
        columns=columns,
        norms=np.array(norms),
        threshold=thr,
        rel_tol=cfg.rel_tol,
        projections=projections,
    )


# ---------------------------------------------------------------------------
# the four systems


def _matrix_rhs(_t, y):
    m = y.reshape(3, 3)
    m2 = m @ m
    return (-m2 + (np.trace(m2) / 3.0) * IDENTITY).ravel()


def _matrix_fixup(y):
    m = y.reshape(3, 3)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if abs(tr) > TRACE_DRIFT * np.linalg.norm(m):
        return (m - (tr / 3.0) * IDENTITY).ravel()
    return None


MATRIX_COLUMNS = tuple(f"m{i}{j}" for i in range(1, 4) for j in range(1, 4))
PAIR_COLUMNS = ("s11", "s22", "s33", "s12", "s13", "s23", "w1", "w2", "w3")
PARAM_COLUMNS = ("lambda", "r", "k")


def integrate_matrix(m0, cfg: SolverConfig) -> Trajectory:
    """Integrate dM/dt = -M^2 + tr(M^2) I / 3 from ``m0``."""
    m0 = as_tracefree(m0).entries
    return _run(
        _matrix_rhs,
        m0.ravel(),
        cfg,
        norm=lambda y: float(np.sqrt(y @ y)),
        kind="matrix",
        columns=MATRIX_COLUMNS,
        fixup=_matrix_fixup,
    )


def _pair_rhs(_t, y):
    s = sym_from_entries(y[:6])
    w = y[6:]
    ss = float(np.sum(s * s))
    ww = float(w @ w)
    ds = -(s @ s) - 0.25 * np.outer(w, w) + (ss / 3.0 + ww / 12.0) * IDENTITY
    return np.concatenate([sym_entries(ds), s @ w])


def _pair_norm(y):
    s = y[:6]
    w = y[6:]
    # |S|^2 counts off-diagonal entries twice
    s2 = s[0] ** 2 + s[1] ** 2 + s[2] ** 2 + 2.0 * (s[3] ** 2 + s[4] ** 2 + s[5] ** 2)
    return float(np.sqrt(s2 + 0.5 * (w @ w)))


def _pair_fixup(y):
    tr = y[0] + y[1] + y[2]
    if abs(tr) > TRACE_DRIFT * _pair_norm(y):
        out = y.copy()
        out[:3] -= tr / 3.0
        return out
    return None


def integrate_pair(pair0: StrainVorticityPair, cfg: SolverConfig) -> Trajectory:
    """Integrate the strain and vorticity equations from ``pair0``."""
    y0 = np.concatenate([pair0.strain_entries, pair0.vorticity])
    return _run(_pair_rhs, y0, cfg, norm=_pair_norm, kind="pair", columns=PAIR_COLUMNS, fixup=_pair_fixup)


def _params_norm(lam, r, k):
    return abs(lam) * math.sqrt(2.0 * (1.0 + r + r * r + k * k))


def integrate_params(p0: AlignedParams, cfg: SolverConfig, reduced: bool = False) -> Trajectory:
    """Integrate the (lam, r, k) system.

    Internally ``r + 2 = sigma * exp(u)`` with ``sigma = sign(r0 + 2)`` so the
    sign of ``r + 2`` cannot change. ``r0 = -2`` is the invariant line r = -2.
    With ``reduced=True`` k is slaved to ``m0 (r + 2)`` and g is evaluated in
    factored form, which keeps separatrix data (|m0| = 1/2) on the separatrix.
    """
    lam0, r0, k0 = float(p0.lam), float(p0.r), float(p0.k)

    if r0 == -2.0:
        def fun(_t, y):
            lam, k = y
            g = -9.0 - k * k
            return [(-2.0 - g / 3.0) * lam * lam, lam * g * k / 3.0]

        traj = _run(
            fun,
            [lam0, k0],
            cfg,
            norm=lambda y: _params_norm(y[0], -2.0, y[1]),
            kind="params",
            columns=PARAM_COLUMNS,
            record=lambda y: np.array([y[0], -2.0, y[1], 0.0]),
        )
        return _split_aux(traj)

    sigma = 1.0 if r0 > -2.0 else -1.0
    u0 = math.log(abs(r0 + 2.0))

    if reduced:
        traj = _integrate_reduced(lam0, r0, k0, sigma, u0, cfg)
    else:
        def fun(_t, y):
            lam, u, k = y
            r = sigma * math.exp(u) - 2.0
            g = 1.0 + r - 2.0 * r * r - k * k
            return [(r - g / 3.0) * lam * lam, lam * g / 3.0, lam * g * k / 3.0]

        def unpack(y):
            rp2 = sigma * math.exp(y[1])
            return np.array([y[0], rp2 - 2.0, y[2], rp2])

        traj = _run(
            fun,
            [lam0, u0, k0],
            cfg,
            norm=lambda y: _params_norm(*unpack(y)[:3]),
            kind="params",
            columns=PARAM_COLUMNS,
            record=unpack,
            # k' is proportional to k, so k keeps its sign and can be held to
            # a purely relative tolerance as it decays toward 0
            atol=[cfg.abs_tol, cfg.abs_tol, 1e-300],
        )
    return _split_aux(traj)


def _integrate_reduced(lam0, r0, k0, sigma, u0, cfg):
    """(lam, r) with k = m0 (r + 2) and g in factored form.

    For |m0| <= 1/2, r - r_inf keeps its sign, so the state is
    ``(lam, ln|r - r_inf|)``; r near the attractor then keeps full relative
    precision, which matters on the separatrix where r_inf = 0 and r ~ t^-3.
    """
    from .closed_forms import limit_constants

    m0 = k0 / (r0 + 2.0)
    if 1.0 - 4.0 * m0 * m0 >= 0.0 and r0 != limit_constants(m0).r_inf:
        lc = limit_constants(m0)
        c = -(m0 * m0 + 2.0)
        tau = 1.0 if r0 > lc.r_inf else -1.0

        def fun(_t, y):
            lam, w = y
            r = lc.r_inf + tau * math.exp(w)
            d = r - lc.r_inf
            g = c * (r - lc.r_star) * d
            # w' = r' / (r - r_inf)
            return [(r - g / 3.0) * lam * lam, lam * (r + 2.0) * c * (r - lc.r_star) / 3.0]

        def unpack(y):
            d = tau * math.exp(y[1])
            r = lc.r_inf + d
            rp2 = (lc.r_inf + 2.0) + d
            return np.array([y[0], r, m0 * rp2, rp2])

        y0 = [lam0, math.log(abs(r0 - lc.r_inf))]
    else:
        def fun(_t, y):
            lam, u = y
            r = sigma * math.exp(u) - 2.0
            g = 1.0 + r - 2.0 * r * r - m0 * m0 * (r + 2.0) ** 2
            return [(r - g / 3.0) * lam * lam, lam * g / 3.0]

        def unpack(y):
            rp2 = sigma * math.exp(y[1])
            return np.array([y[0], rp2 - 2.0, m0 * rp2, rp2])

        y0 = [lam0, u0]
    return _run(
        fun,
        y0,
        cfg,
        norm=lambda y: _params_norm(*unpack(y)[:3]),
        kind="params",
        columns=PARAM_COLUMNS,
        record=unpack,
    )


def _split_aux(traj: Trajectory) -> Trajectory:
    """Move the recorded r + 2 column (exact sign, no cancellation) to aux."""
    return replace(traj, states=traj.states[:, :3], aux={"r_plus_2": traj.states[:, 3]})


def integrate_complex_params(lambda0: float, a0: float, cfg: SolverConfig) -> Trajectory:
    """lam' = lam^2 + a^2/3, a' = -2 lam a (complex Jordan block)."""
    if not lambda0 > 0:
        raise ValueError(f"lambda0 must be positive, got {lambda0}")

    def fun(_t, y):
        lam, a = y
        return [lam * lam + a * a / 3.0, -2.0 * lam * a]

    traj = _run(
        fun,
        [lambda0, a0],
        cfg,
        norm=lambda y: math.sqrt(6.0 * y[0] ** 2 + 2.0 * y[1] ** 2),
        kind="complex",
        columns=("lambda", "a"),
    )
    # a(t) exp(2 int lam) is constant; the integral follows from lam' = lam^2 + a^2/3
    return traj


def integrate_defective_params(lambda0: float, off0: float, cfg: SolverConfig) -> Trajectory:
    """lam' = lam^2, off' = -2 lam off (defective Jordan block)."""
    if not lambda0 > 0:
        raise ValueError(f"lambda0 must be positive, got {lambda0}")

    def fun(_t, y):
        lam, off = y
        return [lam * lam, -2.0 * lam * off]

    return _run(
        fun,
        [lambda0, off0],
        cfg,
        norm=lambda y: math.sqrt(6.0 * y[0] ** 2 + y[1] ** 2),
        kind="defective",
        columns=("lambda", "off"),
    )


def integrate_linear(m_of_t: Callable[[float], np.ndarray], y0: Sequence[float], cfg: SolverConfig) -> Trajectory:
    """dy/dt = M(t) y, the particle-path equation for u = M(t) x."""

    def fun(t, y):
        return np.asarray(m_of_t(t), dtype=float) @ y

    return _run(
        fun,
        np.asarray(y0, dtype=float),
        cfg,
        norm=lambda y: float(np.sqrt(y @ y)),
        kind="path",
        columns=("x", "y", "z"),
    )
