import math

import numpy as np
import pytest

from linflow.closed_forms import AlignedParams, FamilySolution, aligned_matrix, family_k
from linflow.dynamics import (
    SolverConfig,
    Status,
    Termination,
    Trajectory,
    default_rel_tol,
    estimate_blowup_time,
    fit_reciprocal,
    integrate_complex_params,
    integrate_defective_params,
    integrate_matrix,
    integrate_pair,
    integrate_params,
)
from linflow.matrix_core import StrainVorticityPair, decompose, recompose


def test_zero_matrix_is_fixed():
    traj = integrate_matrix(np.zeros((3, 3)), SolverConfig(t_end=5))
    assert traj.termination.status is Status.HORIZON
    assert traj.t_final == 5.0
    assert not traj.states.any()


def test_zero_pair_is_fixed():
    traj = integrate_pair(StrainVorticityPair(np.zeros((3, 3))), SolverConfig(t_end=5))
    assert traj.termination.status is Status.HORIZON and not traj.states.any()


@pytest.mark.parametrize("lam0,r", [(1.0, 1.0), (2.0, 0.5)])
def test_matrix_family_blowup_time(lam0, r):
    m0 = aligned_matrix(lam0, r, family_k(r))
    traj = integrate_matrix(m0, SolverConfig(t_end=3))
    assert traj.blew_up
    t_est = traj.termination.t_max_estimate
    assert abs(t_est - 1.0) <= 1e-4
    lo, hi = traj.termination.confidence_interval
    assert lo <= 1.0 <= hi


def test_pair_matches_family_closed_form():
    fam = FamilySolution(1.0, 0.5)
    cfg = SolverConfig(t_end=1.9, sample_times=(0.5, 1.0, 1.8))
    traj = integrate_pair(decompose(fam.matrix(0.0)), cfg)
    for t, m in zip(traj.times, traj.matrices()):
        if t in (0.5, 1.0, 1.8):
            assert m[2, 2] / fam.lam(t) - 1 == pytest.approx(0, abs=1e-8)


def test_pair_decay_branch():
    fam = FamilySolution(1.0, -0.5)
    traj = integrate_pair(decompose(fam.matrix(0.0)), SolverConfig(t_end=10))
    assert traj.termination.status is Status.HORIZON
    assert traj.matrices()[-1][2, 2] == pytest.approx(fam.lam(10.0), rel=1e-8)


def test_params_family_keeps_r_k():
    traj = integrate_params(AlignedParams(1.0, 1.0, 0.0), SolverConfig(t_end=2))
    assert traj.blew_up
    # r is stored via log(r + 2), so exact up to an ulp
    assert np.max(np.abs(traj.column("r") - 1.0)) <= 1e-15
    assert np.all(traj.column("k") == 0.0)
    assert traj.termination.t_max_estimate == pytest.approx(1.0, abs=1e-4)


def test_params_stationary():
    traj = integrate_params(AlignedParams(1.0, 0.0, 1.0), SolverConfig(t_end=100))
    assert traj.termination.status is Status.HORIZON
    assert np.max(np.abs(traj.states - [1.0, 0.0, 1.0])) <= 1e-10


def test_params_r_minus_two_is_invariant():
    traj = integrate_params(AlignedParams(1.0, -2.0, 0.3), SolverConfig(t_end=5))
    assert np.all(traj.column("r") == -2.0)
    assert np.all(traj.aux["r_plus_2"] == 0.0)


def test_params_case2_monotone_and_invariant():
    p0 = AlignedParams(1.0, 0.5, 0.5)
    traj = integrate_params(p0, SolverConfig(t_end=50))
    r = traj.column("r")
    assert np.all(np.diff(r) >= -1e-14)
    m = traj.column("k") / traj.aux["r_plus_2"]
    assert np.max(np.abs(m - 0.2)) <= 1e-8


def test_params_sign_of_r_plus_two_kept():
    traj = integrate_params(AlignedParams(1.0, -3.0, 0.5), SolverConfig(t_end=5))
    assert np.all(traj.aux["r_plus_2"] < 0)


def test_complex_zero_a_is_real_case():
    traj = integrate_complex_params(1.0, 0.0, SolverConfig(t_end=2))
    assert traj.blew_up
    assert traj.termination.t_max_estimate == pytest.approx(1.0, abs=1e-4)
    assert np.all(traj.column("a") == 0.0)


def test_complex_blowup_before_one():
    traj = integrate_complex_params(1.0, 1.0, SolverConfig(t_end=2))
    assert traj.blew_up
    assert traj.termination.t_max_estimate <= 1.0
    assert abs(traj.column("a")[-1]) <= 1e-3


def test_defective_closed_form_match():
    traj = integrate_defective_params(1.0, 1.0, SolverConfig(t_end=2, sample_times=(0.9,)))
    i = list(traj.times).index(0.9)
    lam, off = traj.states[i]
    assert lam == pytest.approx(10.0, rel=1e-8)
    assert off == pytest.approx(0.01, rel=1e-8)
    assert traj.termination.t_max_estimate == pytest.approx(1.0, abs=1e-4)


def test_fit_reciprocal_exact_line():
    t = 1 - np.logspace(-1, -9, 200)
    t_est, (lo, hi), slope, res = fit_reciprocal(t, 1 / (1 - t), 1e8)
    assert abs(t_est - 1) <= 1e-10
    assert slope == pytest.approx(-1.0)
    assert res < 1e-6


def test_fit_reciprocal_needs_samples():
    with pytest.raises(ValueError):
        fit_reciprocal([0.0, 0.1], [1.0, 2.0], 1e9)


def test_estimate_requires_threshold():
    traj = integrate_params(AlignedParams(1.0, 0.0, 1.0), SolverConfig(t_end=1))
    with pytest.raises(ValueError):
        estimate_blowup_time(traj)


def test_estimate_on_synthetic_trajectory():
    t = np.concatenate([[0.0], 1 - np.logspace(-1, -10, 100)])
    lam = 1 / (1 - t)
    traj = Trajectory(t, lam[:, None], Termination(Status.BLOWUP), "scalar", ("lambda",), lam)
    t_est, _ = estimate_blowup_time(traj)
    assert abs(t_est - 1) <= 1e-10


def test_sample_times_are_hit():
    cfg = SolverConfig(t_end=1, sample_times=(0.25, 0.5, 0.75))
    traj = integrate_params(AlignedParams(1.0, -0.5, 0.0), cfg)
    assert list(traj.times) == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_trajectory_validates_times():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)), Termination(Status.HORIZON), "x", ("a",), np.zeros(2))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(t_end=-1)
    with pytest.raises(ValueError):
        SolverConfig(rel_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(t_end=1, sample_times=(2.0,))
    assert SolverConfig(t_end=2).min_step == 2e-14
    assert SolverConfig().replace(t_end=4).min_step == 4e-14


def test_env_tolerance(monkeypatch):
    monkeypatch.setenv("LINFLOW_DEFAULT_TOL", "1e-7")
    assert default_rel_tol() == 1e-7
    assert SolverConfig().rel_tol == 1e-7
    monkeypatch.setenv("LINFLOW_DEFAULT_TOL", "-1")
    with pytest.raises(ValueError):
        default_rel_tol()


def test_trace_stays_zero():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3))
    m0 = a - np.trace(a) / 3 * np.eye(3)
    traj = integrate_matrix(m0, SolverConfig(t_end=1))
    tr = np.trace(traj.matrices(), axis1=1, axis2=2)
    assert np.max(np.abs(tr) / traj.norms) <= 1e-10


def test_matrix_and_pair_agree():
    rng = np.random.default_rng(4)
    for _ in range(5):
        a = rng.normal(size=(3, 3))
        m0 = a - np.trace(a) / 3 * np.eye(3)
        ts = tuple(np.linspace(0.05, 0.3, 6))
        cfg = SolverConfig(t_end=0.3, sample_times=ts)
        ma = integrate_matrix(m0, cfg)
        pb = integrate_pair(decompose(m0), cfg)
        if ma.blew_up or pb.blew_up:
            continue
        for m, pair in zip(ma.matrices(), pb.pairs()):
            assert np.linalg.norm(m - recompose(pair).entries) <= 1e-8


def test_step_halving_reduces_error():
    fam = FamilySolution(1.0, 0.5)
    errs = []
    for tol in (1e-6, 1e-9):
        cfg = SolverConfig(t_end=1.8, rel_tol=tol, abs_tol=tol, sample_times=(1.8,))
        traj = integrate_matrix(fam.matrix(0.0), cfg)
        errs.append(abs(traj.matrices()[-1][2, 2] / fam.lam(1.8) - 1))
    assert errs[1] < errs[0] / 10


def test_underflow_status_reported():
    # a minimum step far larger than the blowup scale cannot resolve the singularity
    cfg = SolverConfig(t_end=2, min_step=1e-3, blowup_norm_threshold=1e300)
    traj = integrate_params(AlignedParams(1.0, 1.0, 0.0), cfg)
    assert traj.termination.status is Status.UNDERFLOW
    assert math.isfinite(traj.t_final) and traj.t_final < 1.0
