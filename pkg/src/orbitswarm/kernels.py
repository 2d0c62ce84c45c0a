"""Batched, compiled versions of the per-robot and per-pair computations.

These loop over the whole swarm for one time step and reuse the scalar
kernels of :mod:`cbf` and :mod:`path`, so the simulator and the public
per-pair API evaluate the same arithmetic.
"""

import math

from numba import njit

from .cbf import FLAG_INSIDE_ZONE, LG_EPS, _pair_terms
from .geometry import _kappa, _wrap
from .path import _heading_ref

NEIGHBOR_APPLIED = 0
NEIGHBOR_REFERENCE = 1
NEIGHBOR_ZERO = 2


@njit(cache=True)
def control_step(x, y, th, s, om_prev, active, swarm, direc, ignore,
                 cx, cy, qx, qy, c0, ke, kd,
                 r, d, kform, gamma, omega_max, sense, neighbor_mode, fixed_opposing,
                 omega, u_ref, u_safe, saturated,
                 psi, lgi, hval, dist, cross, a1, tracked):
    """Compute every robot's input from the step-start snapshot.

    Pair arrays are indexed ``[i, j]`` (``j`` seen from ``i``); entries of
    untracked pairs hold ``psi = inf``.  ``lgi``, ``cross`` and ``a1`` are
    multiplied by the orbit direction of ``i`` so that the overtaking rule
    reads the same for both directions.  Returns ``(min_dist, n_collisions,
    n_singular, n_inside_zone, degenerate_robot)`` where ``min_dist`` runs
    over all active pairs and ``degenerate_robot`` is -1 unless some robot
    sits on a zero of the guiding field.
    """
    n = x.shape[0]
    degenerate = -1
    for i in range(n):
        u_ref[i] = 0.0
        u_safe[i] = 0.0
        saturated[i] = False
        if active[i]:
            w = _heading_ref(cx, cy, qx, qy, c0, ke, kd, direc[i], x[i], y[i], th[i], s[i], True)
            if math.isnan(w):
                if degenerate < 0:
                    degenerate = i
                w = 0.0
            u_ref[i] = w

    min_dist = math.inf
    n_coll = 0
    n_sing = 0
    n_inside = 0
    for i in range(n):
        vix = s[i] * math.cos(th[i])
        viy = s[i] * math.sin(th[i])
        best = 0.0
        for j in range(n):
            tracked[i, j] = False
            psi[i, j] = math.inf
            lgi[i, j] = 0.0
            if i == j or not active[i] or not active[j]:
                continue
            px = x[j] - x[i]
            py = y[j] - y[i]
            dij = math.hypot(px, py)
            dist[i, j] = dij
            if j > i:
                if dij < min_dist:
                    min_dist = dij
                if dij <= r:
                    n_coll += 1
            if ignore[swarm[i], swarm[j]] or dij > sense:
                continue
            opposing = direc[i] != direc[j]
            if fixed_opposing and opposing:
                vjx = 0.0
                vjy = 0.0
                u_j = 0.0
            else:
                vjx = s[j] * math.cos(th[j])
                vjy = s[j] * math.sin(th[j])
                if neighbor_mode == NEIGHBOR_APPLIED:
                    u_j = om_prev[j]
                elif neighbor_mode == NEIGHBOR_REFERENCE:
                    u_j = u_ref[j]
                else:
                    u_j = 0.0
            _, _, _, h, lf, lg_i, lg_j, flags = _pair_terms(px, py, vix, viy, vjx, vjy, r, d)
            if flags & FLAG_INSIDE_ZONE:
                n_inside += 1
            res = lf + lg_i * u_ref[i] + lg_j * u_j + _kappa(kform, gamma, h)
            tracked[i, j] = True
            psi[i, j] = res
            hval[i, j] = h
            # v_hat_j . E v_hat_i and p_hat_ij . E v_hat_i, oriented like lg_o
            cross[i, j] = direc[i] * math.sin(th[i] - th[j])
            a1[i, j] = direc[i] * (px * viy - py * vix) / (dij * s[i]) if dij > 0 else 0.0
            # counter-clockwise robots use the mirrored rule: they overtake on
            # their own outside, i.e. with negative corrections
            lg_o = direc[i] * lg_i
            lgi[i, j] = lg_o
            if lg_o > 0.0 and res < 0.0:
                if lg_o <= LG_EPS:
                    n_sing += 1
                    best = math.inf
                else:
                    c = -res / lg_o
                    if c > best:
                        best = c
        u_safe[i] = direc[i] * best
        if active[i]:
            raw = u_ref[i] + u_safe[i]
            if raw > omega_max:
                omega[i] = omega_max
                saturated[i] = True
            elif raw < -omega_max:
                omega[i] = -omega_max
                saturated[i] = True
            else:
                omega[i] = raw
        else:
            omega[i] = 0.0
    return min_dist, n_coll, n_sing, n_inside, degenerate


@njit(cache=True)
def rk4_unicycle(x, y, th, s, omega, dt, active):
    """Classical RK4 step of ``p' = s (cos th, sin th), th' = omega`` with held omega."""
    n = x.shape[0]
    for i in range(n):
        if not active[i]:
            continue
        t0 = th[i]
        w = omega[i]
        tm = t0 + 0.5 * dt * w
        t1 = t0 + dt * w
        # the heading stage values of k2 and k3 coincide because omega is held
        cx = math.cos(t0) + 4.0 * math.cos(tm) + math.cos(t1)
        cy = math.sin(t0) + 4.0 * math.sin(tm) + math.sin(t1)
        x[i] += s[i] * dt / 6.0 * cx
        y[i] += s[i] * dt / 6.0 * cy
        th[i] = _wrap(t1)


@njit(cache=True)
def update_stages(k, stage, psi, lgi, cross, a1, ep_min_lg, ep_a1_bad, ep_stage2, started, ended):
    """Advance the overtake automaton of every ordered pair.

    Episodes run from rule activation to deactivation.  ``ep_min_lg`` tracks
    ``Lg_h_i`` over the episode, including the deactivation step when the
    pair is still unsafe (``psi < 0``), so losing ``Lg_h_i > 0`` while unsafe
    shows up as a non-positive minimum.  ``ep_stage2`` holds the step index
    ``k`` at which stage 2 was entered (-1 if never).  Returns the counts of started and
    ended episodes; their positions are flagged in ``started``/``ended``.
    """
    n = stage.shape[0]
    n_start = 0
    n_end = 0
    for i in range(n):
        for j in range(n):
            started[i, j] = False
            ended[i, j] = False
            rule = lgi[i, j] > 0.0 and psi[i, j] < 0.0
            st = stage[i, j]
            if st == 0:
                if rule:
                    stage[i, j] = 1
                    started[i, j] = True
                    n_start += 1
                    ep_min_lg[i, j] = lgi[i, j]
                    ep_a1_bad[i, j] = 0 if a1[i, j] > 0.0 else 1
                    ep_stage2[i, j] = -1
                continue
            if not rule:
                if psi[i, j] < 0.0 and lgi[i, j] < ep_min_lg[i, j]:
                    ep_min_lg[i, j] = lgi[i, j]
                stage[i, j] = 0
                ended[i, j] = True
                n_end += 1
                continue
            if lgi[i, j] < ep_min_lg[i, j]:
                ep_min_lg[i, j] = lgi[i, j]
            if a1[i, j] <= 0.0:
                ep_a1_bad[i, j] += 1
            if st == 1 and cross[i, j] < 0.0:
                stage[i, j] = 2
                ep_stage2[i, j] = k
    return n_start, n_end
