"""Collision-cone barrier function with an adaptive virtual radius.

For an ordered pair ``(i, j)`` with ``p = p_j - p_i`` and ``v = v_j - v_i``

    h = p.v + |p| |v| cos(phi),   cos(phi) = sqrt(|p|^2 - rho^2) / |p|

and ``rho(|p|) = |p|**d * r**(1 - d)`` widens the cone at range.  Robot
inputs enter ``h_dot`` linearly through ``Lg_h_i`` and ``Lg_h_j``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InsideVirtualZoneError, SingularityError
from .geometry import ClassKFn, Vec2, _kappa

log = logging.getLogger(__name__)

VEL_EPS = 1e-9
LG_EPS = 1e-9

FLAG_INSIDE_ZONE = 1
FLAG_DEGENERATE_VEL = 2

NEIGHBOR_INPUTS = ("applied", "reference", "zero")
OBSTACLE_MODES = ("moving", "fixed")


@dataclass(frozen=True)
class SafetyConfig:
    """Safety filter parameters.

    ``sense_radius`` defaults to ``10 r``.  ``neighbor_input`` picks the
    value of ``u_j`` the filter assumes for a neighbour: its last applied
    turn rate, its own path-following reference, or zero.
    ``obstacle_mode="fixed"`` treats robots of an opposing swarm as
    stationary obstacles (``v_j = 0``) instead of using their velocity.
    ``ignore`` lists ``(swarm_a, swarm_b)`` pairs where robots of swarm a
    never react to robots of swarm b.
    """

    r: float
    d_exp: float
    kappa: ClassKFn
    omega_max: float
    sense_radius: float | None = None
    neighbor_input: str = "applied"
    obstacle_mode: str = "moving"
    ignore: frozenset = field(default_factory=frozenset)
    eps_pre: float = 0.2
    delta_pre: float = 0.5

    def __post_init__(self):
        problems = []
        if not self.r > 0:
            problems.append(f"r must be positive, got {self.r}")
        if not 0 <= self.d_exp < 1:
            problems.append(f"d must be in [0,1), got {self.d_exp}")
        if not self.omega_max > 0:
            problems.append(f"omega_max must be positive, got {self.omega_max}")
        if self.neighbor_input not in NEIGHBOR_INPUTS:
            problems.append(f"neighbor_input must be one of {NEIGHBOR_INPUTS}")
        if self.obstacle_mode not in OBSTACLE_MODES:
            problems.append(f"obstacle_mode must be one of {OBSTACLE_MODES}")
        if problems:
            raise ValueError("; ".join(problems))
        if self.sense_radius is None:
            object.__setattr__(self, "sense_radius", 10.0 * self.r)
        object.__setattr__(self, "ignore", frozenset(tuple(p) for p in self.ignore))

    def ignores(self, swarm_i: int, swarm_j: int) -> bool:
        return (swarm_i, swarm_j) in self.ignore


@njit(cache=True)
def _virtual_radius(r, d, dist):
    return dist**d * r ** (1.0 - d)


@njit(cache=True)
def _pair_terms(px, py, vix, viy, vjx, vjy, r, d):
    """Cone quantities for relative position ``p`` and absolute velocities.

    Returns ``(dist, rho, cos_phi, h, lf_h, lg_h_i, lg_h_j, flags)``.
    """
    flags = 0
    dist = math.hypot(px, py)
    vx = vjx - vix
    vy = vjy - viy
    vn = math.hypot(vx, vy)
    rho = _virtual_radius(r, d, dist)
    if dist > rho:
        root = math.sqrt(dist * dist - rho * rho)
        cos_phi = root / dist
    else:
        # widest cone; the caller records the event
        root = 0.0
        cos_phi = 0.0
        flags |= FLAG_INSIDE_ZONE
    pv = px * vx + py * vy
    h = pv + vn * root
    if vn < VEL_EPS:
        vhx = 0.0
        vhy = 0.0
        flags |= FLAG_DEGENERATE_VEL
    else:
        vhx = vx / vn
        vhy = vy / vn
    lf_h = vn * vn
    if root > 0.0:
        # rho depends on the state only through |p|: d rho/dt = rho' * (p_hat . v)
        rho_dot = d * rho / dist * (pv / dist)
        lf_h += vn * (pv - rho * rho_dot) / root
    # |p| (p_hat + v_hat cos phi) = p + v_hat * sqrt(|p|^2 - rho^2)
    wx = px + vhx * root
    wy = py + vhy * root
    # E v = (v_y, -v_x)
    lg_h_i = wx * viy - wy * vix
    lg_h_j = -(wx * vjy - wy * vjx)
    return dist, rho, cos_phi, h, lf_h, lg_h_i, lg_h_j, flags


@njit(cache=True)
def _psi(lf_h, lg_h_i, lg_h_j, h, u_i, u_j, kform, gamma):
    return lf_h + lg_h_i * u_i + lg_h_j * u_j + _kappa(kform, gamma, h)


def virtual_radius(cfg: SafetyConfig, dist: float) -> float:
    """``dist**d * r**(1-d)``: equals ``r`` at ``dist = r``, grows with ``dist``."""
    if not dist > 0:
        raise ValueError(f"virtual radius needs a positive distance, got {dist}")
    return float(_virtual_radius(cfg.r, cfg.d_exp, float(dist)))


@dataclass(frozen=True)
class PairView:
    p_ij: Vec2
    v_ij: Vec2
    v_i: Vec2
    v_j: Vec2
    rho: float
    cos_phi: float
    h: float
    Lf_h: float
    Lg_h_i: float
    Lg_h_j: float
    flags: int = 0

    @property
    def dist(self) -> float:
        return math.hypot(self.p_ij[0], self.p_ij[1])

    @property
    def inside_zone(self) -> bool:
        return bool(self.flags & FLAG_INSIDE_ZONE)

    @property
    def degenerate_velocity(self) -> bool:
        return bool(self.flags & FLAG_DEGENERATE_VEL)


def view_from_vectors(cfg: SafetyConfig, p_ij, v_i, v_j, strict=True) -> PairView:
    p_ij = np.asarray(p_ij, dtype=float)
    v_i = np.asarray(v_i, dtype=float)
    v_j = np.asarray(v_j, dtype=float)
    _, rho, cos_phi, h, lf, lgi, lgj, flags = _pair_terms(
        p_ij[0], p_ij[1], v_i[0], v_i[1], v_j[0], v_j[1], cfg.r, cfg.d_exp)
    if strict and flags & FLAG_INSIDE_ZONE:
        raise InsideVirtualZoneError(
            f"|p_ij| = {math.hypot(*p_ij):.6g} does not exceed the virtual radius {rho:.6g}")
    return PairView(p_ij, v_j - v_i, v_i, v_j, rho, cos_phi, h, lf, lgi, lgj, flags)


def build_pair_view(cfg: SafetyConfig, state_i, state_j, strict=True) -> PairView:
    """Relative cone state of ``j`` as seen from ``i``.

    With ``strict=False`` a pair inside the virtual zone gets a clamped
    ``cos_phi = 0`` and the ``inside_zone`` flag instead of an exception.
    """
    return view_from_vectors(cfg, state_j.p - state_i.p, state_i.velocity, state_j.velocity, strict=strict)


def h_dot(view: PairView, u_i: float, u_j: float) -> float:
    return view.Lf_h + view.Lg_h_i * u_i + view.Lg_h_j * u_j


def psi(view: PairView, cfg: SafetyConfig, u_ref_i: float, u_j: float) -> float:
    """Safety residual ``h_dot(u_ref_i, u_j) + kappa(h)``; negative means unsafe."""
    return float(_psi(view.Lf_h, view.Lg_h_i, view.Lg_h_j, view.h, u_ref_i, u_j, cfg.kappa.code, cfg.kappa.gamma))


def u_safe_pair(view: PairView, cfg: SafetyConfig, u_ref_i: float, u_j: float) -> float:
    """Smallest change to ``u_ref_i`` restoring ``h_dot + kappa(h) >= 0``.

    Robot ``j`` is treated as an obstacle holding ``u_j``.
    """
    res = psi(view, cfg, u_ref_i, u_j)
    if res >= 0:
        return 0.0
    if abs(view.Lg_h_i) <= LG_EPS:
        log.warning("safety correction singular: Lg_h_i=%g, psi=%g", view.Lg_h_i, res)
        raise SingularityError(f"Lg_h_i = {view.Lg_h_i:.3g} with psi = {res:.3g} < 0")
    return -res / view.Lg_h_i
