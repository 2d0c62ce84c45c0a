"""Fixed-step swarm simulation with runtime safety and convergence monitors.

Each step freezes the state, computes every robot's input from that
snapshot, advances the overtake automaton, records telemetry, integrates
all robots with RK4 (turn rate held over the step) and finally applies the
carrier launch rule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cbf import SafetyConfig
from .coordination import OvertakeStage
from .errors import DegenerateFieldError, ScenarioError
from .path import FieldGains, ImplicitPath, _field
from .state import CLOCKWISE, RobotState

log = logging.getLogger(__name__)

SPAWN_MODES = ("level", "launch", "explicit")
SPEED_ORDERS = ("random", "fastest_ahead")
LAUNCH_ORDERS = ("fastest_first", "id")


@dataclass
class RobotGroup:
    """A batch of robots sharing speed range, swarm tag and spawn rule.

    ``level`` spawns robots on the level set ``phi = level`` (a ``[lo, hi]``
    pair draws each robot's level uniformly) at polar angles spread evenly
    over ``arc`` with a random fraction ``jitter`` of the spacing added,
    headed along the guiding field.  ``launch`` robots wait on the carrier.
    ``explicit`` takes ``states`` as ``[x, y, theta]`` rows.

    ``speed_order="fastest_ahead"`` hands the sampled speeds out so each
    level-spawned robot trails a faster one, except for the one pair that
    closes the loop.  This keeps initial pairs out of each other's
    collision cones.
    """

    count: int
    speed: tuple = (5.0, 5.0)
    swarm: int = 0
    direction: int = CLOCKWISE
    spawn: str = "level"
    level: tuple = (0.0, 0.0)
    arc: tuple = (0.0, 2.0 * math.pi)
    jitter: float = 0.0
    states: list = field(default_factory=list)
    speed_order: str = "random"


@dataclass
class LaunchConfig:
    origin: tuple
    carrier_speed: float
    spacing_multiple: float = 2.5
    heading: float = math.pi / 2
    # "fastest_first" releases robots by decreasing speed so no robot starts behind a slower one
    order: str = "fastest_first"


@dataclass
class Scenario:
    path: ImplicitPath
    gains: FieldGains
    safety: SafetyConfig
    robots: list
    duration: float
    dt: float
    launch: LaunchConfig | None = None
    name: str = "scenario"
    description: str = ""
    record_every: int = 1
    halt_on_collision: bool = False
    fail_on_saturation: bool = True

    def validate(self):
        problems = []
        if not self.dt > 0:
            problems.append(("run.dt", f"must be > 0, got {self.dt}"))
        if not self.duration >= self.dt:
            problems.append(("run.duration", f"must be >= dt, got {self.duration}"))
        if not (isinstance(self.record_every, int) and self.record_every >= 1):
            problems.append(("run.record_every", "must be an integer >= 1"))
        for k, g in enumerate(self.robots):
            loc = f"robots[{k}]"
            lo, hi = g.speed
            if not lo > 0:
                problems.append((f"{loc}.speed", f"speeds must be > 0, got {lo}"))
            if lo > hi:
                problems.append((f"{loc}.speed", f"lo must not exceed hi ({lo} > {hi})"))
            if g.spawn not in SPAWN_MODES:
                problems.append((f"{loc}.spawn", f"must be one of {SPAWN_MODES}"))
            if g.speed_order not in SPEED_ORDERS:
                problems.append((f"{loc}.speed_order", f"must be one of {SPEED_ORDERS}"))
            if g.count < 0:
                problems.append((f"{loc}.count", "must be >= 0"))
            if g.direction not in (1, -1):
                problems.append((f"{loc}.direction", "must be cw or ccw"))
            if g.spawn == "launch" and self.launch is None:
                problems.append((f"{loc}.spawn", "launch spawn needs a launch section"))
            if g.spawn == "explicit" and len(g.states) != g.count:
                problems.append((f"{loc}.states", f"expected {g.count} rows, got {len(g.states)}"))
            if g.spawn == "level" and min(g.level) <= -self.path.error_scale:
                problems.append((f"{loc}.level", "level set must lie outside the path center"))
        if self.launch is not None and not self.launch.spacing_multiple > 1:
            problems.append(("launch.spacing_multiple", f"must be > 1, got {self.launch.spacing_multiple}"))
        if self.launch is not None and self.launch.order not in LAUNCH_ORDERS:
            problems.append(("launch.order", f"must be one of {LAUNCH_ORDERS}"))
        if self.launch is not None and not self.launch.carrier_speed >= 0:
            problems.append(("launch.carrier_speed", "must be >= 0"))
        if problems:
            raise ScenarioError(problems)
        return self

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.duration / self.dt)))


def speed_sample(spec, rng) -> float:
    """Uniform draw from ``spec = (lo, hi)``."""
    lo, hi = spec
    if lo > hi:
        raise ScenarioError([("speed", f"lo must not exceed hi ({lo} > {hi})")])
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def field_heading(path: ImplicitPath, gains: FieldGains, p, direction=CLOCKWISE) -> float:
    _, _, _, fx, fy = _field(*path.coeffs, gains.k_e, float(direction), float(p[0]), float(p[1]))
    return math.atan2(fy, fx)


def initial_states(sc: Scenario, seed: int) -> list:
    """Robot states at t=0; launch robots start inactive on the carrier."""
    rng = np.random.default_rng(seed)
    speeds = [[speed_sample(g.speed, rng) for _ in range(g.count)] for g in sc.robots]
    robots = []
    rid = 0
    for g, spd in zip(sc.robots, speeds):
        if g.speed_order == "fastest_ahead" and g.spawn == "level":
            # slots go counter-clockwise, so a clockwise robot's leader is the previous slot
            spd = sorted(spd, reverse=g.direction == CLOCKWISE)
        if g.spawn == "launch":
            poses = [(sc.launch.origin[0], sc.launch.origin[1], sc.launch.heading)] * g.count
        elif g.spawn == "explicit":
            poses = [tuple(row) for row in g.states]
        else:
            a0, a1 = g.arc
            full = math.isclose(abs(a1 - a0), 2 * math.pi)
            n_slots = g.count if full else max(g.count - 1, 1)
            step = (a1 - a0) / n_slots
            poses = []
            for k in range(g.count):
                ang = a0 + step * (k + g.jitter * rng.uniform(-0.5, 0.5))
                lvl = g.level[0] if g.level[0] == g.level[1] else rng.uniform(*g.level)
                p = sc.path.point_at(ang, lvl)
                poses.append((p[0], p[1], field_heading(sc.path, sc.gains, p, g.direction)))
        for (px, py, th), s in zip(poses, spd):
            robots.append(RobotState(rid, np.array([px, py], dtype=float), th, s,
                                     active=g.spawn != "launch", swarm=g.swarm, direction=g.direction))
            rid += 1
    return robots


def step_unicycle(state: RobotState, omega: float, dt: float) -> RobotState:
    """Advance one unicycle by ``dt`` with ``omega`` held constant."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.array([state.p[0]])
    y = np.array([state.p[1]])
    th = np.array([state.theta])
    kernels.rk4_unicycle(x, y, th, np.array([state.s]), np.array([float(omega)]), float(dt), np.array([True]))
    return state.moved(p=np.array([x[0], y[0]]), theta=float(th[0]), omega=float(omega))


@dataclass
class StepRecord:
    t: float
    ids: np.ndarray
    active: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    e: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_dist: np.ndarray
    pair_h: np.ndarray
    pair_psi: np.ndarray
    pair_lg_h_i: np.ndarray
    pair_stage: np.ndarray
    # aggregated over the steps since the previous record
    min_pairwise_distance: float
    saturation_count: int
    singularity_count: int
    inside_virtual_zone_count: int
    collision_count: int


@dataclass
class Episode:
    """One overtake of ``j`` by ``i``, from rule activation to deactivation."""

    i: int
    j: int
    t_start: float
    t_end: float | None = None
    t_stage2: float | None = None
    min_lg_h_i: float = math.inf
    facing_violations: int = 0
    e_gap: float = math.nan
    alignment_error: float = math.nan
    preconditions_ok: bool = False
    opposing: bool = False
    faster: bool = True
    faces_outside_at_start: bool = True

    @property
    def stages(self) -> list:
        seq = [OvertakeStage.NON_OVERTAKING, OvertakeStage.STAGE1]
        if self.t_stage2 is not None:
            seq.append(OvertakeStage.STAGE2)
        if self.t_end is not None:
            seq.append(OvertakeStage.NON_OVERTAKING)
        return seq


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    records: list
    episodes: list
    totals: dict

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, k):
        return self.records[k]


class _Swarm:
    """Struct-of-arrays mirror of the robot list used by the kernels."""

    def __init__(self, robots):
        n = len(robots)
        self.n = n
        self.ids = np.array([r.id for r in robots], dtype=np.int64)
        self.x = np.array([r.p[0] for r in robots], dtype=float)
        self.y = np.array([r.p[1] for r in robots], dtype=float)
        self.th = np.array([r.theta for r in robots], dtype=float)
        self.s = np.array([r.s for r in robots], dtype=float)
        self.om = np.zeros(n)
        self.active = np.array([r.active for r in robots], dtype=np.bool_)
        self.swarm = np.array([r.swarm for r in robots], dtype=np.int64)
        self.direc = np.array([float(r.direction) for r in robots])

    def states(self):
        return [RobotState(int(self.ids[k]), np.array([self.x[k], self.y[k]]), self.th[k], self.s[k],
                           bool(self.active[k]), int(self.swarm[k]), int(self.direc[k]), float(self.om[k]))
                for k in range(self.n)]


def _ignore_matrix(sc: Scenario, swarms):
    size = int(max(swarms, default=0)) + 1
    for a, b in sc.safety.ignore:
        size = max(size, a + 1, b + 1)
    mat = np.zeros((size, size), dtype=np.bool_)
    for a, b in sc.safety.ignore:
        mat[a, b] = True
    return mat


def _tangent_alignment(path, gains, sw, k):
    """``|v_hat - tau_hat(p)|`` for robot ``k``."""
    _, nx, ny, _, _ = _field(*path.coeffs, gains.k_e, sw.direc[k], sw.x[k], sw.y[k])
    tx, ty = sw.direc[k] * ny, -sw.direc[k] * nx
    tn = math.hypot(tx, ty)
    return math.hypot(math.cos(sw.th[k]) - tx / tn, math.sin(sw.th[k]) - ty / tn)


def run_scenario(sc: Scenario, seed: int = 0) -> RunResult:
    """Simulate ``sc`` deterministically; identical inputs give identical records."""
    sc.validate()
    path, gains, cfg = sc.path, sc.gains, sc.safety
    sw = _Swarm(initial_states(sc, seed))
    n = sw.n
    coeffs = path.coeffs
    ignore = _ignore_matrix(sc, sw.swarm)
    neighbor_mode = {"applied": kernels.NEIGHBOR_APPLIED, "reference": kernels.NEIGHBOR_REFERENCE,
                     "zero": kernels.NEIGHBOR_ZERO}[cfg.neighbor_input]
    fixed_opposing = cfg.obstacle_mode == "fixed"
    eps_pre = cfg.eps_pre * path.error_scale

    omega = np.zeros(n)
    u_ref = np.zeros(n)
    u_safe = np.zeros(n)
    saturated = np.zeros(n, dtype=np.bool_)
    psi = np.full((n, n), np.inf)
    lgi = np.zeros((n, n))
    hval = np.zeros((n, n))
    dist = np.zeros((n, n))
    cross = np.zeros((n, n))
    a1 = np.zeros((n, n))
    tracked = np.zeros((n, n), dtype=np.bool_)
    stage = np.zeros((n, n), dtype=np.int8)
    ep_min = np.zeros((n, n))
    ep_a1 = np.zeros((n, n), dtype=np.int64)
    ep_s2 = np.full((n, n), -1, dtype=np.int64)
    started = np.zeros((n, n), dtype=np.bool_)
    ended = np.zeros((n, n), dtype=np.bool_)

    queue = [k for k in range(n) if not sw.active[k]]
    if sc.launch is not None and sc.launch.order == "fastest_first":
        queue.sort(key=lambda k: (-sw.s[k], k))
    carrier = None
    last_launched = None
    if sc.launch is not None and queue:
        carrier = np.array(sc.launch.origin, dtype=float)
        first = queue.pop(0)
        sw.active[first] = True
        last_launched = first
    launch_gap = sc.launch.spacing_multiple * cfg.r if sc.launch is not None else 0.0
    launch_times = {k: 0.0 for k in range(n) if sw.active[k]}

    open_eps = {}
    episodes = []
    records = []
    totals = dict(min_pairwise_distance=math.inf, first_collision_t=None, collision_steps=0,
                  collision_pairs=0, saturation_count=0, first_saturation_t=None, singularity_count=0, inside_virtual_zone_count=0,
                  max_abs_omega=0.0, steps=0, halted=False, initial_unsafe_pairs=0)
    win = dict(min_d=math.inf, sat=0, sing=0, inside=0, coll=0)

    n_steps = sc.n_steps
    for k in range(n_steps):
        t = k * sc.dt
        min_d, n_coll, n_sing, n_inside, degenerate = kernels.control_step(
            sw.x, sw.y, sw.th, sw.s, sw.om, sw.active, sw.swarm, sw.direc, ignore,
            *coeffs, gains.k_e, gains.k_d,
            cfg.r, cfg.d_exp, cfg.kappa.code, cfg.kappa.gamma, cfg.omega_max, cfg.sense_radius,
            neighbor_mode, fixed_opposing,
            omega, u_ref, u_safe, saturated, psi, lgi, hval, dist, cross, a1, tracked)
        if degenerate >= 0:
            raise DegenerateFieldError(
                f"robot {sw.ids[degenerate]}: guiding field vanishes at t={t:.6g}, "
                f"p=({sw.x[degenerate]:.6g}, {sw.y[degenerate]:.6g})")
        n_sat = int(saturated.sum())
        if k == 0:
            # pairs that start inside each other's collision cone are outside the safe set
            totals["initial_unsafe_pairs"] = int((tracked & (hval < 0)).sum())

        n_start, n_end = kernels.update_stages(k, stage, psi, lgi, cross, a1, ep_min, ep_a1, ep_s2, started, ended)
        if n_end:
            for i, j in zip(*np.nonzero(ended)):
                ep = open_eps.pop((int(i), int(j)))
                ep.t_end = t
                ep.min_lg_h_i = float(ep_min[i, j])
                ep.facing_violations = int(ep_a1[i, j])
                if ep_s2[i, j] >= 0:
                    ep.t_stage2 = float(ep_s2[i, j]) * sc.dt
                episodes.append(ep)
        if n_start:
            for i, j in zip(*np.nonzero(started)):
                i, j = int(i), int(j)
                e_i = _field(*coeffs, gains.k_e, sw.direc[i], sw.x[i], sw.y[i])[0]
                e_j = _field(*coeffs, gains.k_e, sw.direc[j], sw.x[j], sw.y[j])[0]
                align = _tangent_alignment(path, gains, sw, i) + _tangent_alignment(path, gains, sw, j)
                ep = Episode(int(sw.ids[i]), int(sw.ids[j]), t, e_gap=abs(e_j - e_i), alignment_error=align,
                             opposing=bool(sw.direc[i] != sw.direc[j]),
                             faster=bool(sw.s[i] > sw.s[j] or (sw.s[i] == sw.s[j] and e_i < e_j)),
                             faces_outside_at_start=bool(a1[i, j] > 0))
                ep.preconditions_ok = (not ep.opposing and ep.faster and ep.faces_outside_at_start
                                       and ep.e_gap < eps_pre and align < cfg.delta_pre)
                open_eps[(i, j)] = ep

        totals["saturation_count"] += n_sat
        if n_sat and totals["first_saturation_t"] is None:
            totals["first_saturation_t"] = t
        totals["singularity_count"] += n_sing
        totals["inside_virtual_zone_count"] += n_inside
        if n:
            totals["max_abs_omega"] = max(totals["max_abs_omega"], float(np.abs(omega).max()))
        if min_d < totals["min_pairwise_distance"]:
            totals["min_pairwise_distance"] = min_d
        if n_coll:
            totals["collision_steps"] += 1
            totals["collision_pairs"] += n_coll
            if totals["first_collision_t"] is None:
                totals["first_collision_t"] = t
                log.warning("collision at t=%.4f (min distance %.4g <= r=%.4g)", t, min_d, cfg.r)
        win["min_d"] = min(win["min_d"], min_d)
        win["sat"] += n_sat
        win["sing"] += n_sing
        win["inside"] += n_inside
        win["coll"] += n_coll

        halt = sc.halt_on_collision and n_coll > 0
        if k % sc.record_every == 0 or k == n_steps - 1 or halt:
            records.append(_record(t, sw, omega, path, stage, tracked, dist, hval, psi, lgi, win))
            win = dict(min_d=math.inf, sat=0, sing=0, inside=0, coll=0)
        totals["steps"] = k + 1
        if halt:
            totals["halted"] = True
            break

        kernels.rk4_unicycle(sw.x, sw.y, sw.th, sw.s, omega, sc.dt, sw.active)
        sw.om[:] = omega
        if carrier is not None:
            carrier[1] += sc.launch.carrier_speed * sc.dt
            waiting = ~sw.active
            sw.x[waiting] = carrier[0]
            sw.y[waiting] = carrier[1]
            sw.th[waiting] = sc.launch.heading
            if queue and math.hypot(sw.x[last_launched] - carrier[0], sw.y[last_launched] - carrier[1]) >= launch_gap:
                nxt = queue.pop(0)
                sw.active[nxt] = True
                last_launched = nxt
                launch_times[nxt] = (k + 1) * sc.dt

    for (i, j), ep in sorted(open_eps.items()):
        ep.min_lg_h_i = float(ep_min[i, j])
        ep.facing_violations = int(ep_a1[i, j])
        if ep_s2[i, j] >= 0:
            ep.t_stage2 = float(ep_s2[i, j]) * sc.dt
        episodes.append(ep)
    episodes.sort(key=lambda e: (e.t_start, e.i, e.j))
    totals["launch_times"] = launch_times
    totals["unlaunched"] = len(queue)
    return RunResult(sc, seed, records, episodes, totals)


def _record(t, sw, omega, path, stage, tracked, dist, hval, psi, lgi, win):
    cx, cy, qx, qy, c0 = path.coeffs
    e = qx * (sw.x - cx) ** 2 + qy * (sw.y - cy) ** 2 - c0
    mask = tracked | (stage > 0)
    pi, pj = np.nonzero(mask)
    return StepRecord(
        t=t, ids=sw.ids.copy(), active=sw.active.copy(), x=sw.x.copy(), y=sw.y.copy(), theta=sw.th.copy(),
        omega=omega.copy(), e=e,
        pair_i=sw.ids[pi], pair_j=sw.ids[pj], pair_dist=dist[pi, pj], pair_h=hval[pi, pj],
        pair_psi=psi[pi, pj], pair_lg_h_i=lgi[pi, pj], pair_stage=stage[pi, pj].astype(np.int64),
        min_pairwise_distance=float(win["min_d"]), saturation_count=win["sat"], singularity_count=win["sing"],
        inside_virtual_zone_count=win["inside"], collision_count=win["coll"])


@dataclass
class Summary:
    r: float
    min_pairwise_distance: float
    first_collision_t: float | None
    collision_steps: int
    min_lg_h_i_overtaking: float
    max_abs_omega: float
    saturation_count: int
    singularity_count: int
    inside_virtual_zone_count: int
    final_abs_e: dict
    episodes: list
    lg_checked: int
    lg_violations: int
    precondition_failures: int
    unlaunched: int
    initial_unsafe_pairs: int = 0

    @property
    def collision_free(self) -> bool:
        return self.collision_steps == 0 and self.min_pairwise_distance > self.r

    def lines(self):
        ok = "yes" if self.collision_free else "NO"
        first = "-" if self.first_collision_t is None else f"{self.first_collision_t:.4f}"
        worst = max(self.final_abs_e.values(), default=0.0)
        return [
            f"collision free:             {ok} (min distance {self.min_pairwise_distance:.6g}, r = {self.r:.6g}, first collision t = {first})",
            f"max |omega|:                {self.max_abs_omega:.6g}",
            f"saturation events:          {self.saturation_count}",
            f"singularity events:         {self.singularity_count}",
            f"inside virtual zone events: {self.inside_virtual_zone_count}",
            f"overtake episodes:          {len(self.episodes)} (min Lg_h_i {self.min_lg_h_i_overtaking:.6g})",
            f"Lg_h_i sign monitor:        {self.lg_checked} checked, {self.lg_violations} violations, "
            f"{self.precondition_failures} episodes without preconditions",
            f"max final |e|:              {worst:.6g}",
            f"pairs starting with h < 0:  {self.initial_unsafe_pairs}",
        ]


def monitor_report(result: RunResult) -> Summary:
    """Aggregate the run's monitors into a :class:`Summary`."""
    if len(result.records) == 0:
        raise ValueError("monitor_report needs a non-empty record stream")
    tot = result.totals
    last = result.records[-1]
    final_e = {int(i): abs(float(e)) for i, e, a in zip(last.ids, last.e, last.active) if a}
    eps = result.episodes
    min_lg = min((ep.min_lg_h_i for ep in eps), default=math.inf)
    checked = [ep for ep in eps if ep.preconditions_ok]
    return Summary(
        r=result.scenario.safety.r,
        min_pairwise_distance=tot["min_pairwise_distance"],
        first_collision_t=tot["first_collision_t"],
        collision_steps=tot["collision_steps"],
        min_lg_h_i_overtaking=min_lg,
        max_abs_omega=tot["max_abs_omega"],
        saturation_count=tot["saturation_count"],
        singularity_count=tot["singularity_count"],
        inside_virtual_zone_count=tot["inside_virtual_zone_count"],
        final_abs_e=final_e,
        episodes=eps,
        lg_checked=len(checked),
        lg_violations=sum(1 for ep in checked if not ep.min_lg_h_i > 0),
        precondition_failures=len(eps) - len(checked),
        unlaunched=tot.get("unlaunched", 0),
        initial_unsafe_pairs=tot.get("initial_unsafe_pairs", 0),
    )
