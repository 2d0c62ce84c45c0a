import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitswarm.errors import DegenerateFieldError, DegenerateGradientError
from orbitswarm.geometry import vec2, wrap_angle
from orbitswarm.path import (FieldGains, ImplicitPath, field_jacobian, gvf, heading_ref, path_error,
                             path_hessian, path_normal, path_tangent)
from orbitswarm.sim import field_heading, step_unicycle
from orbitswarm.state import COUNTER_CLOCKWISE, RobotState

ELL = ImplicitPath.ellipse(2, 1)
UNIT = ImplicitPath.circle(1)


def test_path_error_examples():
    assert path_error(ELL, vec2(2, 0)) == 0
    assert path_error(ELL, vec2(0, 0)) == -1
    assert path_error(UNIT, vec2(2, 0)) == 3


def test_path_normal_examples():
    assert np.array_equal(path_normal(UNIT, vec2(1, 0)), [2, 0])
    assert np.array_equal(path_normal(UNIT, vec2(0, -1)), [0, -2])
    assert np.array_equal(path_normal(ELL, vec2(2, 0)), [1, 0])
    with pytest.raises(DegenerateGradientError):
        path_normal(UNIT, vec2(0, 0))


def test_path_tangent_examples():
    assert np.array_equal(path_tangent(UNIT, vec2(1, 0)), [0, -2])
    assert np.array_equal(path_tangent(UNIT, vec2(0, 1)), [2, 0])
    assert np.array_equal(path_tangent(ELL, vec2(0, 1)), [2, 0])
    # mirrored orbit
    assert np.array_equal(path_tangent(UNIT, vec2(1, 0), COUNTER_CLOCKWISE), [0, 2])


def test_gvf_examples():
    assert np.array_equal(gvf(UNIT, FieldGains(1, 1), vec2(1, 0)), [0, -2])
    assert np.allclose(gvf(UNIT, FieldGains(1, 1), vec2(2, 0)), [-12, -4])
    p = vec2(5, 5)
    assert np.array_equal(gvf(UNIT, FieldGains(0, 1), p), path_tangent(UNIT, p))


def test_gvf_degenerate_point():
    with pytest.raises(DegenerateGradientError):
        gvf(UNIT, FieldGains(1, 1), vec2(0, 0))


def test_heading_ref_vanishing_field_raises():
    # next to the center both field terms shrink below the regularity threshold
    with pytest.raises((DegenerateFieldError, DegenerateGradientError)):
        heading_ref(UNIT, FieldGains(1, 1), RobotState(0, vec2(1e-12, 0), 0, 1))


@settings(max_examples=100)
@given(st.floats(0, 2 * math.pi), st.sampled_from([UNIT, ELL, ImplicitPath.ellipse(60, 35, (3, -2))]))
def test_gvf_on_path_equals_tangent(angle, path):
    p = path.point_at(angle)
    g = gvf(path, FieldGains(3.0, 1.0), p)
    assert abs(path_error(path, p)) < 1e-12
    assert np.allclose(g, path_tangent(path, p), atol=1e-10)


@pytest.mark.parametrize("path", [UNIT, ELL, ImplicitPath.ellipse(60, 35, (3, -2)), ImplicitPath.circle(10, (1, 1))])
def test_normal_and_hessian_match_finite_differences(path):
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = np.array(path.center) + rng.uniform(-2, 2, 2) * path.a
        n = path_normal(path, p)
        hs = 1e-6 * path.a
        fd = np.array([(path_error(path, p + hs * e) - path_error(path, p - hs * e)) / (2 * hs) for e in np.eye(2)])
        assert np.allclose(fd, n, rtol=1e-6, atol=1e-6 * np.abs(n).max())
        hfd = np.column_stack([(path_normal(path, p + hs * e) - path_normal(path, p - hs * e)) / (2 * hs)
                               for e in np.eye(2)])
        assert np.allclose(hfd, path_hessian(path), rtol=1e-5, atol=1e-9)


def test_field_jacobian_matches_finite_differences():
    path = ImplicitPath.ellipse(6, 3.5, (1, 2))
    gains = FieldGains(0.7, 1.0)
    rng = np.random.default_rng(2)
    for direction in (1, -1):
        for _ in range(20):
            p = np.array(path.center) + rng.uniform(-8, 8, 2)
            hs = 1e-6
            fd = np.column_stack([(gvf(path, gains, p + hs * e, direction) - gvf(path, gains, p - hs * e, direction))
                                  / (2 * hs) for e in np.eye(2)])
            J = field_jacobian(path, gains, p, direction)
            assert np.allclose(fd, J, rtol=1e-5, atol=1e-6 * np.abs(J).max())


def test_heading_ref_circular_orbit_rate():
    path = ImplicitPath.circle(10)
    gains = FieldGains(1.0, 3.0)
    p = vec2(10, 0)
    st_ = RobotState(0, p, field_heading(path, gains, p), 5.0)
    assert heading_ref(path, gains, st_) == pytest.approx(-0.5, abs=1e-12)


def test_heading_ref_circular_orbit_simulated_lap():
    path = ImplicitPath.circle(10)
    gains = FieldGains(1.0, 3.0)
    p = vec2(10, 0)
    st_ = RobotState(0, p, field_heading(path, gains, p), 5.0)
    dt = 1e-3
    worst = 0.0
    for _ in range(int(2 * math.pi * 10 / 5 / dt)):
        st_ = step_unicycle(st_, heading_ref(path, gains, st_), dt)
        worst = max(worst, abs(path_error(path, st_.p)))
    assert worst < 1e-3


def test_heading_ref_proportional_term():
    path = ImplicitPath.circle(10)
    gains = FieldGains(1.0, 2.0)
    p = vec2(10, 0)
    chi = field_heading(path, gains, p)
    st_ = RobotState(0, p, chi + 0.2, 5.0)
    assert heading_ref(path, gains, st_, feedforward=False) == pytest.approx(-0.4, abs=1e-12)


def test_heading_ref_opposite_heading():
    path = ImplicitPath.circle(10)
    gains = FieldGains(1.0, 1.0)
    p = vec2(10, 0)
    chi = field_heading(path, gains, p)
    st_ = RobotState(0, p, chi + math.pi, 5.0)
    ff = heading_ref(path, gains, st_) - heading_ref(path, gains, st_, feedforward=False)
    assert heading_ref(path, gains, st_) == pytest.approx(ff - 1.0 * wrap_angle(math.pi), abs=1e-12)
    assert heading_ref(path, gains, st_, feedforward=False) == pytest.approx(-math.pi, abs=1e-12)


def test_feedforward_matches_field_direction_rate():
    path = ImplicitPath.ellipse(8, 5)
    gains = FieldGains(0.8, 1.5)
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.uniform(-10, 10, 2)
        th = rng.uniform(-math.pi, math.pi)
        s = 3.0
        st_ = RobotState(0, p, th, s)
        ff = heading_ref(path, gains, st_) + gains.k_d * wrap_angle(th - field_heading(path, gains, p))
        hs = 1e-6
        v = s * np.array([math.cos(th), math.sin(th)])
        fd = wrap_angle(field_heading(path, gains, p + hs * v) - field_heading(path, gains, p - hs * v)) / (2 * hs)
        assert ff == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_clockwise_orbit_after_convergence():
    path = ImplicitPath.ellipse(6, 4)
    gains = FieldGains(1.0, 2.0)
    st_ = RobotState(0, vec2(9, 1), 2.0, 2.0)
    dt = 1e-2
    for _ in range(3000):
        st_ = step_unicycle(st_, heading_ref(path, gains, st_), dt)
    angles = []
    for _ in range(200):
        st_ = step_unicycle(st_, heading_ref(path, gains, st_), dt)
        angles.append(math.atan2(st_.p[1], st_.p[0]))
    steps = np.array([wrap_angle(b - a) for a, b in zip(angles, angles[1:])])
    assert (steps < 0).all()
    assert abs(path_error(path, st_.p)) < 1e-3


def test_path_validation():
    with pytest.raises(ValueError):
        ImplicitPath.ellipse(0, 1)
    with pytest.raises(ValueError):
        ImplicitPath("square")
    with pytest.raises(ValueError):
        FieldGains(1.0, 0.0)
    assert ImplicitPath.circle(2).error_scale == 4
    assert ImplicitPath.ellipse(2, 1).error_scale == 1
    assert ImplicitPath.circle(1).perimeter() == pytest.approx(2 * math.pi)
