import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitswarm.cbf import (SafetyConfig, build_pair_view, h_dot, psi, u_safe_pair, view_from_vectors,
                            virtual_radius)
from orbitswarm.errors import InsideVirtualZoneError, SingularityError
from orbitswarm.geometry import ClassKFn, rotate_E
from orbitswarm.path import FieldGains, ImplicitPath, heading_ref
from orbitswarm.sim import field_heading
from orbitswarm.state import RobotState


def cfg(r=1.0, d=0.5, gamma=1.0, form="cubic", omega_max=2.0):
    return SafetyConfig(r=r, d_exp=d, kappa=ClassKFn(gamma, form), omega_max=omega_max)


def arc(p0, theta0, s, omega, t):
    """Closed-form unicycle pose after ``t`` seconds at constant turn rate."""
    p0 = np.asarray(p0, float)
    if omega == 0:
        return p0 + s * t * np.array([math.cos(theta0), math.sin(theta0)]), theta0
    th = theta0 + omega * t
    return p0 + (s / omega) * np.array([math.sin(th) - math.sin(theta0), math.cos(theta0) - math.cos(th)]), th


def random_valid_view(rng, c):
    while True:
        p = rng.uniform(-10, 10, 2)
        if np.hypot(*p) <= virtual_radius(c, max(np.hypot(*p), 1e-9)) * 1.01:
            continue
        a, b = rng.uniform(-math.pi, math.pi, 2)
        vi = rng.uniform(1, 6) * np.array([math.cos(a), math.sin(a)])
        vj = rng.uniform(1, 6) * np.array([math.cos(b), math.sin(b)])
        if np.hypot(*(vj - vi)) < 1e-3:
            continue
        return view_from_vectors(c, p, vi, vj)


def test_virtual_radius_examples():
    assert virtual_radius(cfg(r=1, d=0.5), 4) == pytest.approx(2)
    for d in (0.0, 0.3, 0.9):
        assert virtual_radius(cfg(r=2, d=d), 2) == pytest.approx(2)
    assert virtual_radius(cfg(r=1, d=0.0), 100) == 1
    with pytest.raises(ValueError):
        virtual_radius(cfg(), 0.0)
    with pytest.raises(ValueError):
        virtual_radius(cfg(), -1.0)


@given(st.floats(0.01, 0.99), st.floats(0.1, 50), st.floats(0.1, 50))
def test_virtual_radius_monotone(d, a, b):
    c = cfg(r=0.7, d=d)
    if abs(a - b) > 1e-6:
        lo, hi = sorted((a, b))
        assert virtual_radius(c, lo) < virtual_radius(c, hi)


def test_config_validation():
    with pytest.raises(ValueError, match="d must be in"):
        cfg(d=1.0)
    with pytest.raises(ValueError, match="r must be positive"):
        cfg(r=0)
    with pytest.raises(ValueError, match="omega_max"):
        cfg(omega_max=0)
    assert cfg(r=0.4).sense_radius == pytest.approx(4.0)


def test_h_head_on_inside_cone():
    # r=1.8, d=0.5 puts the virtual radius at exactly 3 for a separation of 5
    c = cfg(r=1.8, d=0.5)
    v = view_from_vectors(c, (5, 0), (1, 0), (0, 0))
    assert v.rho == pytest.approx(3)
    assert v.cos_phi == pytest.approx(0.8)
    assert v.h == pytest.approx(-1)


def test_h_receding_pair():
    c = cfg(r=1.8, d=0.5)
    v = view_from_vectors(c, (5, 0), (0, 0), (1, 0))
    assert v.h == pytest.approx(9)


def test_lg_zero_when_cone_axis_parallel_to_velocity():
    v = view_from_vectors(cfg(), (5, 0), (1, 0), (3, 0))
    assert v.Lg_h_i == pytest.approx(0, abs=1e-12)


@settings(max_examples=200)
@given(st.integers(0, 2**31 - 1))
def test_cone_identity_and_lie_terms(seed):
    c = cfg(r=0.8, d=0.4)
    rng = np.random.default_rng(seed)
    v = random_valid_view(rng, c)
    dist = np.hypot(*v.p_ij)
    assert v.cos_phi ** 2 + (v.rho / dist) ** 2 == pytest.approx(1, abs=1e-12)
    vij = v.v_j - v.v_i
    w = v.p_ij + vij / np.hypot(*vij) * dist * v.cos_phi
    assert v.Lg_h_i == pytest.approx(w @ rotate_E(v.v_i), rel=1e-12, abs=1e-12)
    assert v.Lg_h_j == pytest.approx(-w @ rotate_E(v.v_j), rel=1e-12, abs=1e-12)
    assert v.h == pytest.approx(v.p_ij @ vij + dist * np.hypot(*vij) * v.cos_phi, rel=1e-12, abs=1e-12)


def test_h_dot_drift_only():
    v = random_valid_view(np.random.default_rng(0), cfg())
    assert h_dot(v, 0.0, 0.0) == v.Lf_h


def test_lg_matches_input_coefficient():
    rng = np.random.default_rng(5)
    c = cfg()
    for _ in range(100):
        v = random_valid_view(rng, c)
        u, uj, du = rng.uniform(-1, 1), rng.uniform(-1, 1), 1e-3
        coeff = (h_dot(v, u + du, uj) - h_dot(v, u - du, uj)) / (2 * du)
        assert coeff == pytest.approx(v.Lg_h_i, abs=1e-9 * max(1, abs(v.Lg_h_i)))


@pytest.mark.parametrize("d", [0.0, 0.5, 0.8])
def test_h_dot_matches_trajectory_finite_difference(d):
    c = cfg(r=0.6, d=d)
    rng = np.random.default_rng(11)
    dt = 1e-4
    checked = 0
    while checked < 30:
        pi, pj = rng.uniform(-5, 5, 2), rng.uniform(-5, 5, 2)
        ti, tj = rng.uniform(-math.pi, math.pi, 2)
        si, sj = rng.uniform(1, 6, 2)
        wi, wj = rng.uniform(-1.5, 1.5, 2)
        p = pj - pi
        if np.hypot(*p) < 1.2 * virtual_radius(c, np.hypot(*p)):
            continue

        def h_at(t):
            a, tha = arc(pi, ti, si, wi, t)
            b, thb = arc(pj, tj, sj, wj, t)
            return view_from_vectors(c, b - a, si * np.array([math.cos(tha), math.sin(tha)]),
                                     sj * np.array([math.cos(thb), math.sin(thb)])).h

        v0 = view_from_vectors(c, p, si * np.array([math.cos(ti), math.sin(ti)]),
                               sj * np.array([math.cos(tj), math.sin(tj)]))
        fd = (h_at(dt) - h_at(-dt)) / (2 * dt)
        an = h_dot(v0, wi, wj)
        assert an == pytest.approx(fd, rel=1e-3, abs=1e-6)
        checked += 1


def test_psi_examples():
    c = cfg(gamma=2.0)
    v = view_from_vectors(c, (5, 0), (1, 0), (3, 0))
    # drift-only residual plus cubic barrier term
    assert psi(v, c, 0.0, 0.0) == pytest.approx(v.Lf_h + 2 * v.h ** 3)
    # residual arithmetic on a synthetic view: h = 1, h_dot = -1
    synthetic = type(v)(v.p_ij, v.v_ij, v.v_i, v.v_j, v.rho, v.cos_phi, 1.0, -1.0, 0.0, 0.0)
    assert psi(synthetic, c, 0.3, 0.1) == pytest.approx(1.0)
    boundary = type(v)(v.p_ij, v.v_ij, v.v_i, v.v_j, v.rho, v.cos_phi, 0.0, 0.0, 1.0, 1.0)
    assert psi(boundary, c, 0.0, 0.0) == 0.0


def test_psi_nonnegative_for_parked_pair_across_the_orbit():
    path = ImplicitPath.circle(10)
    gains = FieldGains(1.0, 2.0)
    c = cfg(r=0.4, d=0.3)
    a = RobotState(0, (10, 0), field_heading(path, gains, np.array([10.0, 0])), 5.0)
    b = RobotState(1, (-10, 0), field_heading(path, gains, np.array([-10.0, 0])), 4.0)
    v = build_pair_view(c, a, b)
    assert abs(v.p_ij @ v.v_ij) < 1e-12
    assert v.h > 0
    assert psi(v, c, heading_ref(path, gains, a), heading_ref(path, gains, b)) >= 0


def test_u_safe_examples():
    c = cfg()
    v = view_from_vectors(c, (5, 0), (1, 0), (3, 0))
    fake = type(v)(v.p_ij, v.v_ij, v.v_i, v.v_j, v.rho, v.cos_phi, 0.0, -0.5, 2.0, 0.0)
    assert u_safe_pair(fake, c, 0.0, 0.0) == pytest.approx(0.25)
    ok = type(v)(v.p_ij, v.v_ij, v.v_i, v.v_j, v.rho, v.cos_phi, 1.0, 0.0, 2.0, 0.0)
    assert u_safe_pair(ok, c, 0.0, 0.0) == 0.0


def test_u_safe_singularity():
    c = cfg()
    v = view_from_vectors(c, (5, 0), (1, 0), (3, 0))
    flat = type(v)(v.p_ij, v.v_ij, v.v_i, v.v_j, v.rho, v.cos_phi, 0.0, -0.5, 1e-12, 0.0)
    with pytest.raises(SingularityError):
        u_safe_pair(flat, c, 0.0, 0.0)


@settings(max_examples=300)
@given(st.integers(0, 2**31 - 1))
def test_u_safe_restores_constraint(seed):
    c = cfg(r=0.5, d=0.6)
    rng = np.random.default_rng(seed)
    v = random_valid_view(rng, c)
    u_ref, u_j = rng.uniform(-1, 1, 2)
    if abs(v.Lg_h_i) <= 1e-6:
        return
    us = u_safe_pair(v, c, u_ref, u_j)
    if psi(v, c, u_ref, u_j) >= 0:
        assert us == 0.0
    else:
        assert h_dot(v, u_ref + us, u_j) + c.kappa(v.h) >= -1e-9 * max(1, abs(v.Lf_h))


def test_inside_zone_strict_and_relaxed():
    c = cfg(r=1.0, d=0.5)
    with pytest.raises(InsideVirtualZoneError):
        view_from_vectors(c, (0.9, 0), (1, 0), (0, 0))
    v = view_from_vectors(c, (0.9, 0), (1, 0), (0, 0), strict=False)
    assert v.inside_zone and v.cos_phi == 0


def test_degenerate_relative_velocity():
    v = view_from_vectors(cfg(), (5, 0), (1, 1), (1, 1))
    assert v.degenerate_velocity
    assert v.h == 0
    assert math.isfinite(v.Lg_h_i) and math.isfinite(v.Lf_h)
