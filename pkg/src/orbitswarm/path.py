"""Implicit closed paths, the guiding vector field and the heading controller.

Both supported paths are axis-aligned quadratics

    phi(p) = qx * (x - cx)**2 + qy * (y - cy)**2 - c0

with ``qx = qy = 1, c0 = R**2`` for a circle and ``qx = 1/a**2, qy = 1/b**2,
c0 = 1`` for an ellipse.  The level-set value ``phi(p)`` is the path error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateFieldError, DegenerateGradientError
from .geometry import E, Vec2, _wrap, rotate_E
from .state import CLOCKWISE

FIELD_EPS = 1e-9


@dataclass(frozen=True)
class ImplicitPath:
    kind: str
    center: tuple = (0.0, 0.0)
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("circle", "ellipse"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("path semi-axes must be positive")
        if self.kind == "circle" and self.a != self.b:
            raise ValueError("circle needs a == b (the radius)")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def circle(cls, radius, center=(0.0, 0.0)):
        return cls("circle", center, radius, radius)

    @classmethod
    def ellipse(cls, a, b, center=(0.0, 0.0)):
        return cls("ellipse", center, a, b)

    @property
    def coeffs(self):
        """``(cx, cy, qx, qy, c0)`` as consumed by the compiled kernels."""
        cx, cy = self.center
        if self.kind == "circle":
            return cx, cy, 1.0, 1.0, self.a * self.a
        return cx, cy, 1.0 / self.a**2, 1.0 / self.b**2, 1.0

    @property
    def error_scale(self) -> float:
        """``|phi(center)|``, the natural magnitude of the path error."""
        return self.coeffs[4]

    def point_at(self, angle: float, level: float = 0.0) -> Vec2:
        """Point at polar ``angle`` (about the center) on the level set ``phi = level``."""
        cx, cy, qx, qy, c0 = self.coeffs
        if c0 + level <= 0:
            raise ValueError(f"level {level} lies below the path center")
        c, s = math.cos(angle), math.sin(angle)
        rad = math.sqrt((c0 + level) / (qx * c * c + qy * s * s))
        return np.array([cx + rad * c, cy + rad * s])

    def perimeter(self) -> float:
        # Ramanujan's second approximation, exact for circles
        a, b = self.a, self.b
        hh = ((a - b) / (a + b)) ** 2
        return math.pi * (a + b) * (1 + 3 * hh / (10 + math.sqrt(4 - 3 * hh)))


@dataclass(frozen=True)
class FieldGains:
    k_e: float
    k_d: float

    def __post_init__(self):
        if not (self.k_e >= 0 and self.k_d > 0):
            raise ValueError("field gains need k_e >= 0 and k_d > 0")


@njit(cache=True)
def _phi(cx, cy, qx, qy, c0, x, y):
    dx = x - cx
    dy = y - cy
    return qx * dx * dx + qy * dy * dy - c0


@njit(cache=True)
def _field(cx, cy, qx, qy, c0, ke, direction, x, y):
    """Return ``(e, nx, ny, fx, fy)``: error, gradient and field at ``(x, y)``."""
    dx = x - cx
    dy = y - cy
    e = qx * dx * dx + qy * dy * dy - c0
    nx = 2.0 * qx * dx
    ny = 2.0 * qy * dy
    fx = direction * ny - ke * e * nx
    fy = -direction * nx - ke * e * ny
    return e, nx, ny, fx, fy


@njit(cache=True)
def _heading_ref(cx, cy, qx, qy, c0, ke, kd, direction, x, y, theta, s, feedforward):
    """Turn rate aligning a unicycle with the guiding field; NaN at degenerate points."""
    e, nx, ny, fx, fy = _field(cx, cy, qx, qy, c0, ke, direction, x, y)
    fn = math.hypot(fx, fy)
    if fn < FIELD_EPS:
        return math.nan
    mx = fx / fn
    my = fy / fn
    chi = math.atan2(my, mx)
    chidot = 0.0
    if feedforward:
        vx = s * math.cos(theta)
        vy = s * math.sin(theta)
        # field Jacobian J = direction * E H - ke (n n^T + e H), H = diag(2qx, 2qy)
        hvx = 2.0 * qx * vx
        hvy = 2.0 * qy * vy
        nv = nx * vx + ny * vy
        jvx = direction * hvy - ke * (nx * nv + e * hvx)
        jvy = -direction * hvx - ke * (ny * nv + e * hvy)
        mj = mx * jvx + my * jvy
        mdx = (jvx - mx * mj) / fn
        mdy = (jvy - my * mj) / fn
        chidot = mx * mdy - my * mdx
    return chidot - kd * _wrap(theta - chi)


def path_error(path: ImplicitPath, p: Vec2) -> float:
    return float(_phi(*path.coeffs, float(p[0]), float(p[1])))


def _check_regular(path, p):
    if p[0] == path.center[0] and p[1] == path.center[1]:
        raise DegenerateGradientError(f"gradient of phi vanishes at the path center {path.center}")


def path_normal(path: ImplicitPath, p: Vec2) -> Vec2:
    """Gradient of phi at ``p``."""
    _check_regular(path, p)
    cx, cy, qx, qy, _ = path.coeffs
    return np.array([2.0 * qx * (p[0] - cx), 2.0 * qy * (p[1] - cy)])


def path_hessian(path: ImplicitPath) -> np.ndarray:
    _, _, qx, qy, _ = path.coeffs
    return np.diag([2.0 * qx, 2.0 * qy])


def path_tangent(path: ImplicitPath, p: Vec2, direction: int = CLOCKWISE) -> Vec2:
    return direction * rotate_E(path_normal(path, p))


def gvf(path: ImplicitPath, gains: FieldGains, p: Vec2, direction: int = CLOCKWISE) -> Vec2:
    """Guiding vector field ``tau(p) - k_e e(p) n(p)``."""
    _check_regular(path, p)
    _, _, _, fx, fy = _field(*path.coeffs, gains.k_e, direction, float(p[0]), float(p[1]))
    f = np.array([fx, fy])
    if math.hypot(fx, fy) < FIELD_EPS:
        raise DegenerateFieldError(f"guiding field vanishes at {tuple(p)}")
    return f


def field_jacobian(path: ImplicitPath, gains: FieldGains, p: Vec2, direction: int = CLOCKWISE) -> np.ndarray:
    n = path_normal(path, p)
    hess = path_hessian(path)
    e = path_error(path, p)
    return direction * E @ hess - gains.k_e * (np.outer(n, n) + e * hess)


def heading_ref(path: ImplicitPath, gains: FieldGains, state, direction=None, feedforward=True) -> float:
    """Reference turn rate ``chi_dot - k_d * wrap(theta - chi)`` for ``state``.

    ``chi`` is the direction of the guiding field at the robot and
    ``chi_dot`` its rate of change along the robot's actual velocity.
    ``direction`` defaults to the robot's own orbit sense.
    """
    if direction is None:
        direction = getattr(state, "direction", CLOCKWISE)
    _check_regular(path, state.p)
    w = _heading_ref(*path.coeffs, gains.k_e, gains.k_d, direction,
                     float(state.p[0]), float(state.p[1]), float(state.theta), float(state.s), feedforward)
    if math.isnan(w):
        raise DegenerateFieldError(f"robot {getattr(state, 'id', '?')}: guiding field vanishes at {tuple(state.p)}")
    return float(w)
