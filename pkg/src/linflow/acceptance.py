"""Acceptance checks shared by the test suite and ``linflow validate``.

Each runner returns a :class:`CriterionResult`; none of them raise on a
failed comparison, so a report always covers every criterion.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .classifier import CaseTag, InconclusiveError, classify_aligned, classify_general, verify_prediction
from .closed_forms import (
    AlignedParams,
    FamilySolution,
    aligned_matrix,
    boundary_invariant,
    boundary_r_bounds,
    family_k,
)
from .dynamics import (
    SolverConfig,
    Status,
    integrate_complex_params,
    integrate_defective_params,
    integrate_matrix,
    integrate_pair,
    integrate_params,
)
from .lagrangian import FlowMapSpec, advect, flow_map, seregin_sverak_probe
from .matrix_core import decompose
from .spectral import IllConditionedError, SpectralClass, jordan_decompose

GRID_MARGIN = 1e-3


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number:>2} {self.name}: {self.detail} ({self.seconds:.2f} s)"


def _timed(number: int, name: str, fn: Callable[[], tuple[bool, str]]) -> CriterionResult:
    t0 = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - t0)


def random_tracefree(rng: np.random.Generator) -> np.ndarray:
    m = rng.normal(size=(3, 3))
    return m - np.trace(m) / 3.0 * np.eye(3)


# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        times = (0.5, 1.0, 1.5, 1.8)
        traj = integrate_matrix(aligned_matrix(1.0, 0.5, 1.0), SolverConfig(t_end=1.8, sample_times=times))
        elapsed = time.perf_counter() - t0
        errs = []
        for t in times:
            i = int(np.searchsorted(traj.times, t))
            lam = traj.states[i].reshape(3, 3)[2, 2]
            exact = 1.0 / (1.0 - t / 2.0)
            errs.append(abs(lam - exact) / exact)
        worst = max(errs)
        return worst <= 1e-8 and elapsed < 1.0, f"max rel err {worst:.2e} (<= 1e-8), integration {elapsed:.3f} s (< 1 s)"

    return _timed(1, "family closed form vs integrator", run)


def criterion_2() -> CriterionResult:
    def run():
        rs = np.linspace(0.1, 1.0, 10)
        lams = [0.5, 1.0, 2.0, 3.0, 0.8, 1.5, 1.2, 0.7, 2.5, 1.0]
        worst, covered = 0.0, 0
        for r, lam0 in zip(rs, lams):
            t_true = 1.0 / (r * lam0)
            traj = integrate_matrix(aligned_matrix(lam0, r, family_k(r)), SolverConfig(t_end=2.0 * t_true))
            if not traj.blew_up:
                return False, f"no blowup detected for r={r:.2f}"
            term = traj.termination
            worst = max(worst, abs(term.t_max_estimate - t_true) / t_true)
            lo, hi = term.confidence_interval
            covered += lo <= t_true <= hi
        ok = worst <= 1e-4 and covered >= 9
        return ok, f"max rel err {worst:.2e} (<= 1e-4), interval covers {covered}/10 (>= 9)"

    return _timed(2, "blowup-time estimation", run)


def criterion_3(seed: int = 3) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(20):
            p0 = AlignedParams(rng.uniform(0.5, 2.0), rng.uniform(-1.5, 1.5), rng.uniform(-2.0, 2.0))
            traj = integrate_params(p0, SolverConfig(t_end=50.0, blowup_norm_threshold=1e9))
            lam, _, k = traj.states.T
            # stop where lam first reaches 1e4, as the criterion asks
            stop = np.argmax(lam >= 1e4) if np.any(lam >= 1e4) else len(lam) - 1
            m = k[: stop + 1] / traj.aux["r_plus_2"][: stop + 1]
            worst = max(worst, float(np.max(np.abs(m - p0.m0))))
        return worst <= 1e-8, f"max |k/(r+2) - m0| = {worst:.2e} over 20 trajectories (<= 1e-8)"

    return _timed(3, "phase-space invariant m0", run)


def _distance_to_boundaries(r: float, k: float) -> float:
    """Euclidean distance in (r, k) to g = 0 and to k = (r + 2)/2, r > 0."""
    rr = np.linspace(-0.5, 1.0, 20001)
    kk = np.sqrt(np.maximum((1.0 + 2.0 * rr) * (1.0 - rr), 0.0))
    d_fam = float(np.min(np.hypot(rr - r, kk - k)))
    d_fam = min(d_fam, float(np.min(np.hypot(rr - r, -kk - k))))
    # perpendicular distance to the separatrix line, clipped to r >= 0
    t = max(0.0, (r + (k - 1.0) * 0.5) / 1.25)
    d_sep = math.hypot(r - t, k - (1.0 + 0.5 * t))
    return min(d_fam, d_sep)


def grid_points(n: int = 21):
    for r in np.linspace(-1.0, 1.5, n):
        for k in np.linspace(0.0, 2.5, n):
            yield float(r), float(k)


def criterion_4() -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        total = passed = 0
        limit_err = {"1/2": 0.0, "4/5/6": 0.0}
        failures = []
        for r, k in grid_points():
            if _distance_to_boundaries(r, k) <= GRID_MARGIN:
                continue
            p0 = AlignedParams(1.0, r, k)
            pred = classify_aligned(p0)
            traj = integrate_params(p0, SolverConfig(t_end=100.0))
            total += 1
            try:
                rep = verify_prediction(pred, traj, 2e-2)
            except InconclusiveError:
                failures.append((r, k))
                continue
            if rep.passed:
                passed += 1
            else:
                failures.append((r, k))
            key = "1/2" if pred.case_tag in (CaseTag.CASE1, CaseTag.CASE2) else "4/5/6"
            for c in rep.checks:
                if c.name in ("r_limit", "k_limit"):
                    limit_err[key] = max(limit_err[key], c.error)
        elapsed = time.perf_counter() - t0
        frac = passed / total
        ok = frac >= 0.99 and limit_err["1/2"] <= 2e-2 and limit_err["4/5/6"] <= 2e-2 and elapsed < 120.0
        detail = (
            f"{passed}/{total} pass ({frac:.1%}, >= 99%), max limit err cases 1/2 {limit_err['1/2']:.1e}, "
            f"cases 4/5/6 {limit_err['4/5/6']:.1e} (<= 2e-2), {elapsed:.1f} s (< 120 s)"
        )
        if failures:
            detail += f", failing points {failures[:5]}"
        return ok, detail

    return _timed(4, "six-case classifier vs dynamics", run)


def criterion_5() -> CriterionResult:
    def run():
        problems = []
        worst_c = 0.0
        growth = math.inf
        for r0 in (0.5, 1.0, 2.0):
            p0 = AlignedParams(1.0, r0, (r0 + 2.0) / 2.0)
            times = (1.0, 10.0, 100.0, 1000.0)
            traj = integrate_params(p0, SolverConfig(t_end=1000.0, sample_times=times), reduced=True)
            if traj.termination.status is not Status.HORIZON:
                problems.append(f"r0={r0}: {traj.termination.status.value}")
                continue
            lam = dict(zip(traj.times, traj.states[:, 0]))
            growth = min(growth, lam[1000.0] / lam[10.0])
            if not lam[1000.0] > 10.0 * lam[10.0]:
                problems.append(f"r0={r0}: lambda(1e3) <= 10 lambda(10)")
            c0 = boundary_invariant(1.0, r0)
            for lam_t, r_t, _ in traj.states:
                worst_c = max(worst_c, abs(boundary_invariant(lam_t, r_t) / c0 - 1.0))
            for t, (_, r_t, _) in zip(traj.times, traj.states):
                if t in (1.0, 10.0, 100.0):
                    lo, hi = boundary_r_bounds(r0, 1.0, t)
                    if not lo < r_t < hi:
                        problems.append(f"r0={r0}: r({t:g})={r_t:.3e} outside ({lo:.3e}, {hi:.3e})")
        ok = not problems and worst_c <= 1e-8
        detail = (
            f"no blowup to t=1e3, min lambda(1e3)/lambda(10) {growth:.3g} (> 10), "
            f"r inside brackets at t=1,10,100, max c drift {worst_c:.1e} (<= 1e-8)"
        )
        if problems:
            detail += "; " + "; ".join(problems)
        return ok, detail

    return _timed(5, "separatrix: blowup at infinity", run)


def constructed_matrix(kind: str, rng: np.random.Generator) -> np.ndarray:
    """Q J Q^-1 with a well-conditioned Q and eigenvalue scale away from zero."""
    while True:
        q = rng.normal(size=(3, 3))
        if np.linalg.cond(q) < 100.0:
            break
    lam = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 2.0)
    if kind == "real":
        x = rng.normal(size=3)
        while np.min(np.abs(np.subtract.outer(x, x)) + np.eye(3)) < 0.1:
            x = rng.normal(size=3)
        j = np.diag(x - x.mean())
    elif kind == "repeated":
        j = np.diag([-2.0 * lam, lam, lam])
    elif kind == "complex":
        a = rng.uniform(0.2, 2.0)
        j = np.array([[-2.0 * lam, 0.0, 0.0], [0.0, lam, a], [0.0, -a, lam]])
    else:
        j = np.array([[-2.0 * lam, 0.0, 0.0], [0.0, lam, 1.0], [0.0, 0.0, lam]])
    m = q @ j @ np.linalg.inv(q)
    return m - np.trace(m) / 3.0 * np.eye(3)


def criterion_6(seed: int = 6) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(1000):
            m = random_tracefree(rng)
            dec = jordan_decompose(m)
            worst = max(worst, np.linalg.norm(dec.reconstruct() - m) / (1.0 + np.linalg.norm(m)))
        expected = {
            "real": SpectralClass.REAL_DIAGONALIZABLE,
            "repeated": SpectralClass.REAL_DIAGONALIZABLE,
            "complex": SpectralClass.COMPLEX_PAIR,
            "defective": SpectralClass.DEFECTIVE_REPEATED,
        }
        recovered = {k: 0 for k in expected}
        for kind, cls in expected.items():
            for _ in range(120):
                m = constructed_matrix(kind, rng)
                try:
                    dec = jordan_decompose(m)
                except IllConditionedError:
                    continue
                if dec.spectral_class is cls:
                    recovered[kind] += 1
                    worst = max(worst, np.linalg.norm(dec.reconstruct() - m) / (1.0 + np.linalg.norm(m)))
        per_class = {
            "real_diagonalizable": recovered["real"] + recovered["repeated"],
            "complex_pair": recovered["complex"],
            "defective_repeated": recovered["defective"],
        }
        ok = worst <= 1e-9 and all(v >= 100 for v in per_class.values())
        return ok, f"max reconstruction err {worst:.1e} (<= 1e-9), recovered {per_class} (each >= 100)"

    return _timed(6, "Jordan round trip", run)


def criterion_7(seed: int = 7) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        done = 0
        while done < 20:
            m0 = random_tracefree(rng)
            pred = classify_general(m0)
            if pred.case_tag is not CaseTag.GENERAL_BLOWUP:
                continue
            traj = integrate_matrix(m0, SolverConfig(t_end=200.0, blowup_norm_threshold=1e6))
            if not traj.blew_up:
                return False, f"no blowup detected ({traj.termination.status.value})"
            t_est = traj.termination.t_max_estimate
            prof = pred.profile
            m = traj.states[-1].reshape(3, 3)
            err = np.linalg.norm((t_est - traj.times[-1]) * m - prof) / np.linalg.norm(prof)
            worst = max(worst, err)
            done += 1
        return worst <= 5e-2, f"max relative profile deviation {worst:.2e} over 20 runs (<= 5e-2)"

    return _timed(7, "general-case blowup profile", run)


def criterion_8() -> CriterionResult:
    def run():
        traj = integrate_complex_params(1.0, 1.0, SolverConfig(t_end=2.0))
        t_est = traj.termination.t_max_estimate if traj.blew_up else math.nan
        a_final = abs(traj.states[-1, 1])
        cpx_ok = traj.blew_up and t_est <= 1.0 and a_final <= 1e-3
        dtraj = integrate_defective_params(1.0, 1.0, SolverConfig(t_end=0.9, sample_times=(0.9,)))
        lam, off = dtraj.states[-1]
        e_lam = abs(lam - 10.0) / 10.0
        e_off = abs(off - 0.01) / 0.01
        ok = cpx_ok and max(e_lam, e_off) <= 1e-8
        return ok, (
            f"complex: T={t_est:.6f} (<= 1), a(final)={a_final:.1e} (<= 1e-3); "
            f"defective at t=0.9: rel err lambda {e_lam:.1e}, off {e_off:.1e} (<= 1e-8)"
        )

    return _timed(8, "complex-pair and defective blocks", run)


def criterion_9(seed: int = 9) -> CriterionResult:
    def run():
        worst_path = 0.0
        worst_det = 0.0
        monotone = True
        for i in range(100):
            rng = np.random.default_rng(seed * 1000 + i)
            r = rng.uniform(0.05, 1.0)
            lam0 = rng.uniform(0.5, 2.0)
            spec = FlowMapSpec.from_params(lam0, r)
            y0 = rng.normal(size=3)
            t_stop = 0.9 * spec.t_max
            ts = tuple(np.linspace(0.0, t_stop, 21))
            traj = advect(spec.family.matrix, y0, SolverConfig(t_end=t_stop, sample_times=ts))
            for t, y in zip(traj.times, traj.states):
                exact = flow_map(spec, y0, t)
                worst_path = max(worst_path, np.linalg.norm(y - exact) / np.linalg.norm(exact))
                worst_det = max(worst_det, abs(spec.jacobian_det(t) - 1.0), abs(np.linalg.det(spec.jacobian(t)) - 1.0))
            v1, v2, v3 = spec.basis
            c = rng.normal(size=3)
            n_axis = [np.linalg.norm(flow_map(spec, c[0] * v1, t)) for t in ts]
            n_plane = [np.linalg.norm(flow_map(spec, c[1] * v2 + c[2] * v3, t)) for t in ts]
            monotone &= bool(np.all(np.diff(n_axis) < 0) and np.all(np.diff(n_plane) > 0))
        probe_ok = True
        for lam0, r in ((1.0, 1.0), (1.0, 0.5), (2.0, 0.25)):
            spec = FlowMapSpec.from_params(lam0, r)
            ts = np.linspace(0.0, spec.t_max * (1.0 - 1e-3), 1000)
            vals = np.array([seregin_sverak_probe(spec, t, 1.0) for t in ts])
            probe_ok &= bool(np.all(np.diff(vals[:, 0]) < 0) and np.all(np.diff(vals[:, 1]) > 0))
        ok = worst_path <= 1e-6 and worst_det <= 1e-9 and monotone and probe_ok
        return ok, (
            f"flow map vs advection {worst_path:.1e} (<= 1e-6), |det - 1| {worst_det:.1e} (<= 1e-9), "
            f"axis/plane monotone {monotone}, pressure/Bernoulli monotone {probe_ok}"
        )

    return _timed(9, "Lagrangian flow map", run)


def criterion_10(seed: int = 10) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(50):
            m0 = random_tracefree(rng)
            probe = integrate_matrix(m0, SolverConfig(t_end=100.0))
            life = probe.termination.t_max_estimate if probe.blew_up else probe.t_final
            half = 0.5 * life
            ts = tuple(np.linspace(0.0, half, 11))
            cfg = SolverConfig(t_end=half, sample_times=ts)
            a = integrate_matrix(m0, cfg)
            b = integrate_pair(decompose(m0), cfg)
            ma = a.matrices()
            mb = b.matrices()
            sel_a = np.isin(a.times, ts)
            sel_b = np.isin(b.times, ts)
            worst = max(worst, float(np.max(np.linalg.norm(ma[sel_a] - mb[sel_b], axis=(1, 2)))))
        return worst <= 1e-8, f"max Frobenius gap {worst:.1e} over 50 matrices (<= 1e-8)"

    return _timed(10, "matrix vs strain-vorticity formulation", run)


RUNNERS = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(only=None) -> list[CriterionResult]:
    keys = sorted(RUNNERS) if not only else sorted(only)
    return [RUNNERS[k]() for k in keys]
