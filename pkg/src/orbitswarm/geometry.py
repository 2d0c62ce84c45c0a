"""Planar vector helpers, the fixed rotation E and class-K gains.

Vectors are plain ``numpy`` arrays of shape ``(2,)``.  The scalar helpers
prefixed with an underscore are numba-compiled so the batched simulation
kernels can share them with the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

Vec2 = np.ndarray

# R(-pi/2): tangent = E @ normal runs clockwise around convex level sets
E = np.array([[0.0, 1.0], [-1.0, 0.0]])

KAPPA_CUBIC = 0
KAPPA_LINEAR = 1
_KAPPA_FORMS = {"cubic": KAPPA_CUBIC, "linear": KAPPA_LINEAR}


def vec2(x: float, y: float) -> Vec2:
    return np.array([float(x), float(y)])


def norm(v: Vec2) -> float:
    return math.hypot(v[0], v[1])


def normalize(v: Vec2) -> Vec2:
    n = norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return np.array([v[0] / n, v[1] / n])


def rotate_E(v: Vec2) -> Vec2:
    """Apply ``E = [[0, 1], [-1, 0]]``, i.e. rotate by -pi/2."""
    return np.array([v[1], -v[0]])


@njit(cache=True)
def _wrap(theta):
    two_pi = 2.0 * math.pi
    w = theta + math.pi
    w -= two_pi * math.floor(w / two_pi)
    if w <= 0.0:
        w = two_pi
    return w - math.pi


def wrap_angle(theta: float) -> float:
    """Canonical representative of ``theta`` in ``(-pi, pi]``."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    return float(_wrap(theta))


@dataclass(frozen=True)
class ClassKFn:
    """Class-K gain ``kappa(h) = gamma * h**3`` (cubic) or ``gamma * h``."""

    gamma: float
    form: str = "cubic"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"class-K gain must be positive, got {self.gamma}")
        if self.form not in _KAPPA_FORMS:
            raise ValueError(f"unknown class-K form {self.form!r}; expected one of {sorted(_KAPPA_FORMS)}")

    @property
    def code(self) -> int:
        return _KAPPA_FORMS[self.form]

    def __call__(self, h: float) -> float:
        return class_k_eval(self, h)


@njit(cache=True)
def _kappa(form, gamma, h):
    # odd extension to h < 0 keeps the sign semantics of the safety condition
    if form == KAPPA_CUBIC:
        return gamma * h * h * h
    return gamma * h


def class_k_eval(k: ClassKFn, h: float) -> float:
    h = float(h)
    if not math.isfinite(h):
        raise ValueError(f"class-K argument must be finite, got {h!r}")
    return float(_kappa(k.code, k.gamma, h))
