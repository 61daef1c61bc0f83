import math

import numpy as np
import pytest

from linflow.closed_forms import DomainError, FamilySolution
from linflow.dynamics import SolverConfig
from linflow.lagrangian import (
    FlowMapSpec,
    advect,
    circle_image_eigenplane,
    circle_image_yz,
    flow_map,
    seregin_sverak_probe,
    yz_circle_constants,
    yz_image_plane_angle,
)


@pytest.fixture
def half():
    return FlowMapSpec.from_params(1.0, 0.5)


def test_identity_at_zero(half):
    assert np.array_equal(flow_map(half, [1.0, 2.0, 3.0], 0.0), [1.0, 2.0, 3.0])


def test_hand_computed_point(half):
    # Q D Q^-1 (1, 1, 1) at t = 1/2 with s = 3/4, worked out by hand
    y = flow_map(half, [1.0, 1.0, 1.0], 0.5)
    assert y == pytest.approx([59 / 72, 4 / 3, 155 / 144], abs=1e-14)


def test_v1_axis_to_origin(half):
    v1 = half.basis[0]
    for t in (0.5, 1.5, 1.99):
        s = 1 - 0.5 * t
        assert np.allclose(flow_map(half, v1, t), s * s * v1, atol=1e-14)


def test_diagonal_case_against_advect():
    spec = FlowMapSpec.from_params(1.0, 1.0)
    fam = spec.family
    cfg = SolverConfig(t_end=0.9, sample_times=(0.5, 0.9))
    traj = advect(fam.matrix, [0.0, 0.0, 1.0], cfg)
    for t, y in zip(traj.times, traj.states):
        assert y == pytest.approx([0, 0, 1 / (1 - t)], rel=1e-8, abs=1e-12)


def test_advect_zero_field():
    traj = advect(lambda t: np.zeros((3, 3)), [1.0, 2.0, 3.0], SolverConfig(t_end=2))
    assert np.all(traj.states == [1.0, 2.0, 3.0])


def test_flow_map_against_advect(half):
    rng = np.random.default_rng(0)
    cfg = SolverConfig(t_end=0.9 * half.t_max, sample_times=(0.5, 1.0, 1.8))
    for y0 in rng.normal(size=(10, 3)):
        traj = advect(half.family.matrix, y0, cfg)
        for t, y in zip(traj.times, traj.states):
            ref = flow_map(half, y0, t)
            assert np.linalg.norm(y - ref) <= 1e-6 * np.linalg.norm(ref)


def test_volume_preserved(half):
    for t in np.linspace(0, 1.999, 50):
        assert half.jacobian_det(t) == pytest.approx(1.0, abs=1e-12)
    # floating-point det of Q D Q^-1 loses digits as cond(D) grows
    for t in np.linspace(0, 1.8, 10):
        assert np.linalg.det(half.jacobian(t)) == pytest.approx(1.0, rel=1e-9)


def test_domain_errors(half):
    with pytest.raises(DomainError):
        flow_map(half, [1, 0, 0], 2.0)
    with pytest.raises(DomainError):
        FlowMapSpec.from_params(1.0, -0.5)
    with pytest.raises(DomainError):
        FlowMapSpec(FamilySolution(1.0, 0.0))
    with pytest.raises(DomainError):
        seregin_sverak_probe(half, 0.5, 0.0)


def test_eigenplane_circle():
    spec = FlowMapSpec.from_params(1.0, 1.0)
    _, v2, v3 = spec.basis
    assert np.allclose(circle_image_eigenplane(1.0, spec, 0.0, 0.3), math.cos(0.3) * v2 + math.sin(0.3) * v3)
    assert np.allclose(circle_image_eigenplane(1.0, spec, 0.5, 0.0), 2 * v2)
    radii = [np.linalg.norm(circle_image_eigenplane(1.0, spec, 0.5, th)) for th in np.linspace(0, 6, 20)]
    assert max(radii) - min(radii) <= 1e-12


def test_yz_constants_decompose_e3(half):
    c1, c3 = yz_circle_constants(0.5, 1.0)
    v1, _, v3 = half.basis
    assert np.allclose(c1 * v1 + c3 * v3, [0, 0, 1], atol=1e-15)
    assert c3 == pytest.approx(math.sqrt(5) / 1.5)
    assert c3 > 1


def test_yz_circle_at_zero(half):
    assert np.allclose(circle_image_yz(2.0, half, 0.0, math.pi / 2), [0, 0, 2], atol=1e-15)
    assert np.allclose(circle_image_yz(2.0, half, 0.0, 0.0), [0, 2, 0], atol=1e-15)


def test_yz_circle_matches_flow_map(half):
    for th in np.linspace(0, 2 * math.pi, 7):
        y0 = [0.0, math.cos(th), math.sin(th)]
        assert np.allclose(circle_image_yz(1.0, half, 1.2, th), flow_map(half, y0, 1.2), atol=1e-13)


def test_yz_circle_r_one_degenerates():
    spec = FlowMapSpec.from_params(1.0, 1.0)
    c1, _ = yz_circle_constants(1.0, 0.0)
    assert c1 == 0.0
    p = circle_image_yz(1.0, spec, 0.5, 0.7)
    assert np.allclose(p, circle_image_eigenplane(1.0, spec, 0.5, 0.7))


def test_yz_plane_rotates_toward_eigenplane(half):
    angles = [yz_image_plane_angle(half, t) for t in np.linspace(0, 1.9999, 40)]
    assert np.all(np.diff(angles) < 0)
    assert angles[0] == pytest.approx(math.acos(2 / math.sqrt(5)))
    assert angles[-1] < 1e-6


def test_probe_at_zero():
    spec = FlowMapSpec.from_params(1.0, 1.0)
    p, b = seregin_sverak_probe(spec, 0.0, 1.0)
    assert p == pytest.approx(-1.0) and b == pytest.approx(1.0)


def test_probe_monotone_and_unbounded():
    spec = FlowMapSpec.from_params(1.0, 1.0)
    ts = np.linspace(0, 1 - 1e-6, 1000)
    vals = np.array([seregin_sverak_probe(spec, t, 1.0) for t in ts])
    assert np.all(np.diff(vals[:, 0]) < 0)
    assert np.all(np.diff(vals[:, 1]) > 0)
    assert seregin_sverak_probe(spec, 1 - 1e-7 - 1e-9, 1.0)[1] > 1e6
