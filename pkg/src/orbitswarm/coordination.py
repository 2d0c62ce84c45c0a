"""Overtaking rule, two-stage overtake automaton and max-aggregation.

Robot ``i`` may overtake ``j`` when ``Lg_h_i > 0`` (``j`` is in the
overtake set of ``i``) and is overtaking it while additionally ``psi < 0``.
Every such pair contributes a positive correction, and ``i`` applies the
largest one, so all evasions turn the same way: outwards for clockwise
orbits.  Counter-clockwise robots use the mirror image of the rule, with
``Lg_h_i`` and the corrections multiplied by their orbit direction, so
they too overtake on the outside.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .cbf import LG_EPS, SafetyConfig, psi, view_from_vectors
from .errors import DegenerateFieldError, SingularityError
from .geometry import rotate_E
from .path import FieldGains, ImplicitPath, heading_ref
from .state import CLOCKWISE

log = logging.getLogger(__name__)


class OvertakeStage(IntEnum):
    NON_OVERTAKING = 0
    STAGE1 = 1
    STAGE2 = 2


@dataclass
class LedgerEntry:
    """Overtake bookkeeping for one ordered pair ``(i, j)``.

    ``lg_h_i`` is oriented: multiplied by the orbit direction of ``i``.
    """

    stage: OvertakeStage = OvertakeStage.NON_OVERTAKING
    psi: float = math.inf
    lg_h_i: float = 0.0
    faces_outside: bool = True


def is_overtaking(entry: LedgerEntry) -> bool:
    return entry.lg_h_i > 0 and entry.psi < 0


def heading_cross(view, direction=CLOCKWISE) -> float:
    """``v_hat_j . E v_hat_i``; negative once the overtaker has turned past ``j``."""
    vi, vj = view.v_i, view.v_j
    ni, nj = math.hypot(*vi), math.hypot(*vj)
    if ni == 0 or nj == 0:
        return 0.0
    return direction * float(vj @ rotate_E(vi)) / (ni * nj)


def faces_outside(view, direction=CLOCKWISE) -> bool:
    """``p_hat_ij . E v_hat_i > 0``: the overtaker faces outside of ``p_ij``."""
    return direction * float(view.p_ij @ rotate_E(view.v_i)) > 0


def oriented_lg(view, direction=CLOCKWISE) -> float:
    return direction * view.Lg_h_i


def stage_transition(entry: LedgerEntry, view, direction=CLOCKWISE) -> OvertakeStage:
    """Next stage of the overtake automaton given this step's rule state.

    ``entry.psi`` and ``entry.lg_h_i`` must already hold the current step's
    values.  Stage 2 never returns to stage 1.
    """
    active = is_overtaking(entry)
    if not active:
        nxt = OvertakeStage.NON_OVERTAKING
    elif entry.stage == OvertakeStage.NON_OVERTAKING:
        nxt = OvertakeStage.STAGE1
    elif entry.stage == OvertakeStage.STAGE1 and heading_cross(view, direction) < 0:
        nxt = OvertakeStage.STAGE2
    else:
        nxt = entry.stage
    if active:
        entry.faces_outside = faces_outside(view, direction)
    entry.stage = nxt
    return nxt


def aggregate_safe(corrections) -> float:
    """Largest per-pair correction, floored at zero. Accepts values or ``(id, value)`` pairs."""
    best = 0.0
    for c in corrections:
        u = c[1] if isinstance(c, tuple) else c
        if u > best:
            best = u
    return best


def pair_view(robot_i, other, cfg: SafetyConfig):
    """Pair view as the safety filter of ``robot_i`` perceives ``other``."""
    v_j = other.velocity
    if cfg.obstacle_mode == "fixed" and other.direction != robot_i.direction:
        v_j = np.zeros(2)
    return view_from_vectors(cfg, other.p - robot_i.p, robot_i.velocity, v_j, strict=False)


def considered(robot_i, other, cfg: SafetyConfig) -> bool:
    """Whether ``i`` reacts to ``other`` at all (identity, activity, role, range)."""
    if other.id == robot_i.id or not other.active:
        return False
    if cfg.ignores(robot_i.swarm, other.swarm):
        return False
    d = other.p - robot_i.p
    return math.hypot(d[0], d[1]) <= cfg.sense_radius


def overtake_set(robot_i, others, cfg: SafetyConfig) -> set:
    """Ids ``j`` within sensing range with oriented ``Lg_h_i > 0``."""
    out = set()
    for other in others:
        if not considered(robot_i, other, cfg):
            continue
        if oriented_lg(pair_view(robot_i, other, cfg), robot_i.direction) > 0:
            out.add(other.id)
    return out


def neighbor_input(other, path, gains, cfg: SafetyConfig, robot_i=None) -> float:
    if robot_i is not None and cfg.obstacle_mode == "fixed" and other.direction != robot_i.direction:
        return 0.0
    if cfg.neighbor_input == "applied":
        return other.omega
    if cfg.neighbor_input == "reference":
        return heading_ref(path, gains, other)
    return 0.0


@dataclass
class Decision:
    omega: float
    u_ref: float
    u_safe: float
    saturated: bool
    corrections: dict = field(default_factory=dict)
    psi: dict = field(default_factory=dict)
    lg_h_i: dict = field(default_factory=dict)


def decide(robot_i, neighbors, path: ImplicitPath, gains: FieldGains, cfg: SafetyConfig) -> Decision:
    """Full input computation for robot ``i`` from a local snapshot.

    ``corrections`` holds the magnitude each active pair asks for and
    ``lg_h_i`` the oriented ``Lg_h_i``; ``u_safe`` carries the orbit sign.
    """
    try:
        u_ref = heading_ref(path, gains, robot_i)
    except DegenerateFieldError as exc:
        raise DegenerateFieldError(f"robot {robot_i.id}: {exc}") from exc
    corrections, psis, lgs = {}, {}, {}
    for other in sorted(neighbors, key=lambda r: r.id):
        if not considered(robot_i, other, cfg):
            continue
        view = pair_view(robot_i, other, cfg)
        u_j = neighbor_input(other, path, gains, cfg, robot_i)
        res = psi(view, cfg, u_ref, u_j)
        lg = oriented_lg(view, robot_i.direction)
        psis[other.id] = res
        lgs[other.id] = lg
        if lg > 0 and res < 0:
            if lg <= LG_EPS:
                raise SingularityError(f"robot {robot_i.id} vs {other.id}: Lg_h_i = {lg:.3g}")
            corrections[other.id] = -res / lg
    u_safe = robot_i.direction * aggregate_safe(corrections.values())
    raw = u_ref + u_safe
    omega = min(max(raw, -cfg.omega_max), cfg.omega_max)
    saturated = omega != raw
    if saturated:
        log.info("robot %s saturated: requested %.4g, bound %.4g", robot_i.id, raw, cfg.omega_max)
    return Decision(omega, u_ref, u_safe, saturated, corrections, psis, lgs)


def robot_input(robot_i, neighbors, path: ImplicitPath, gains: FieldGains, cfg: SafetyConfig) -> float:
    """Turn rate ``clamp(u_ref + max_j u_safe_ij)`` for robot ``i``."""
    return decide(robot_i, neighbors, path, gains, cfg).omega

