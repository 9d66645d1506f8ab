"""Per-tick pipeline, termination, metrics, and seeded batch runs.

Tick order: obstacles move; every robot senses; modes transition; hierarchy
indices are recomputed; each non-idle robot stamps and relaxes its fields,
picks command neurons and forces; adaptive weights step; speeds map through
arctan; all moves apply at a synchronous barrier.  Every per-robot stage
reads only the stage-start snapshot, so a run is a pure function of its
RunConfig: identical configs give byte-identical trajectories regardless of
the worker count used for the per-robot fan-out.

A run succeeds when every robot has cleared the safe distance d_s from every
threat it personally knows (and at least one robot knows one), nobody was
lost from the swarm's largest connected cluster, and no robot ever entered
an obstacle.
"""

import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .binn import ActivityGrid, GridSpec, IntegrationDivergedError, ShuntingParams
from .forces import (BoxedInError, ForceParams, LocalField, NoLeaderError,
                     VirtualForce, adapt_weights, attractive_force,
                     build_local_field, command_neuron_max, command_neuron_min,
                     repulsive_force_escape, repulsive_force_follow,
                     resultant_force, shift_weights, velocity_map)
from .swarm import (Mode, ModeEvent, RobotState, assign_hierarchy, avr_distance,
                    kinematic_step, record_observation, transition_mode)
from .world import (Obstacle, Threat, WorldState, grid_to_world, min_gamma,
                    obstacle_cells, sense, step_obstacles, world_to_grid)

ADAPTATION_MODES = ("neurodynamic", "distance_based", "fixed_ratio")
THREAT_CONTACT_POLICIES = ("exactly_one", "at_least_one", "none")

PLACEMENT_BUDGET = 10_000
MIN_THREAT_SPAWN_DIST = 2.0


class ScenarioError(ValueError):
    """Scenario cannot be parsed or materialized."""


@dataclass(frozen=True)
class RobotPose:
    position: tuple
    heading: float = 0.0


@dataclass(frozen=True)
class RandomRobots:
    count: int
    region: tuple                      # (xmin, ymin, xmax, ymax)
    min_dist: float = 1.5
    connected: bool = True
    threat_contact: str = "exactly_one"

    def __post_init__(self):
        if self.count < 1:
            raise ScenarioError(f"robot count must be >= 1, got {self.count}")
        if self.threat_contact not in THREAT_CONTACT_POLICIES:
            raise ScenarioError(f"unknown threat_contact {self.threat_contact!r}")


@dataclass(frozen=True)
class ObstacleInit:
    lambda_o: float
    center: tuple = None
    region: tuple = None               # sample center here when set
    velocity: tuple = (0.0, 0.0)

    def __post_init__(self):
        if (self.center is None) == (self.region is None):
            raise ScenarioError("obstacle needs exactly one of center/region")


@dataclass(frozen=True)
class ThreatInit:
    position: tuple = None
    region: tuple = None
    active_from: int = 0

    def __post_init__(self):
        if (self.position is None) == (self.region is None):
            raise ScenarioError("threat needs exactly one of position/region")


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = GridSpec()
    bounds: tuple = (0.0, 0.0, 69.0, 69.0)
    dt: float = 0.5
    shunting: ShuntingParams = ShuntingParams()
    forces: ForceParams = ForceParams()
    sensing_range: float = 8.0
    v_max: float = 1.4
    robots: object = RandomRobots(count=13, region=(18.0, 18.0, 30.0, 30.0))
    obstacles: tuple = ()
    threats: tuple = (ThreatInit(position=(15.0, 15.0)),)
    max_ticks: int = 300
    seed: int = 1
    adaptation_mode: str = "neurodynamic"
    n_runs: int = 30
    workers: int = 1

    def __post_init__(self):
        if self.max_ticks < 1:
            raise ScenarioError(f"max_ticks must be >= 1, got {self.max_ticks}")
        if self.adaptation_mode not in ADAPTATION_MODES:
            raise ScenarioError(f"unknown adaptation_mode {self.adaptation_mode!r}")
        if not self.v_max > 0:
            raise ScenarioError("v_max must be positive")
        if not self.sensing_range > 0:
            raise ScenarioError("sensing_range must be positive")


@dataclass(frozen=True)
class TrajectoryRecord:
    tick: int
    robot: int
    x: float
    y: float
    mode: Mode
    hierarchy: object
    v: float
    alpha_a: float
    gamma_min: float


@dataclass
class RunMetrics:
    success: bool
    reason: str                    # success | timeout
    escape_time: float             # seconds from first threat appearance
    energy_proxy: float            # sum over robots and ticks of v^2 * dt
    members_lost: int
    min_gamma: float               # inf when the scenario has no obstacles
    min_inter_robot: float         # inf for a single robot
    ticks: int
    mode_events: list

    def to_dict(self) -> dict:
        def enc(v):
            return None if isinstance(v, float) and math.isinf(v) else v
        return {
            "success": self.success,
            "reason": self.reason,
            "escape_time": self.escape_time,
            "energy_proxy": self.energy_proxy,
            "members_lost": self.members_lost,
            "min_gamma": enc(self.min_gamma),
            "min_inter_robot": enc(self.min_inter_robot),
            "ticks": self.ticks,
            "mode_events": [
                {"tick": e.tick, "robot": e.robot, "from": e.frm.value,
                 "to": e.to.value, "cause": e.cause.value}
                for e in self.mode_events
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        from .swarm import Cause
        def dec(v):
            return math.inf if v is None else v
        return cls(
            success=d["success"], reason=d["reason"],
            escape_time=d["escape_time"], energy_proxy=d["energy_proxy"],
            members_lost=d["members_lost"], min_gamma=dec(d["min_gamma"]),
            min_inter_robot=dec(d["min_inter_robot"]), ticks=d["ticks"],
            mode_events=[
                ModeEvent(robot=e["robot"], frm=Mode(e["from"]), to=Mode(e["to"]),
                          cause=Cause(e["cause"]), tick=e["tick"])
                for e in d["mode_events"]
            ],
        )


@dataclass
class SimState:
    world: WorldState
    robots: list
    fields: dict = field(default_factory=dict)   # robot id -> warm escape field


@dataclass
class RunResult:
    metrics: RunMetrics
    records: list
    world_initial: WorldState
    world_final: WorldState


def materialize(config: RunConfig):
    """Build the tick-0 WorldState and robot list from a config (seeded)."""
    rng = np.random.default_rng(config.seed)
    budget = [PLACEMENT_BUDGET]

    def draw(region):
        if budget[0] <= 0:
            raise ScenarioError(
                f"no feasible placement found within {PLACEMENT_BUDGET} samples")
        budget[0] -= 1
        x0, y0, x1, y1 = region
        return (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))

    obstacles = []
    for spec in config.obstacles:
        center = spec.center if spec.center is not None else draw(spec.region)
        obstacles.append(Obstacle(center=tuple(center), lambda_o=spec.lambda_o,
                                  velocity=tuple(spec.velocity)))

    threats = []
    for spec in config.threats:
        if spec.position is not None:
            pos = tuple(spec.position)
        else:
            while True:
                pos = draw(spec.region)
                if min_gamma(pos, obstacles) > 1.5:
                    break
        threats.append(Threat(position=pos, active_from=spec.active_from))

    if isinstance(config.robots, RandomRobots):
        poses = _place_robots(config, obstacles, threats, draw)
    else:
        poses = [(tuple(p.position), p.heading) for p in config.robots]

    robots = [RobotState(id=i, position=np.array(pos), heading=heading)
              for i, (pos, heading) in enumerate(poses)]
    world = WorldState(bounds=tuple(config.bounds), obstacles=tuple(obstacles),
                       threats=tuple(threats), tick=0, dt=config.dt)
    return world, robots


def _place_robots(config: RunConfig, obstacles, threats, draw):
    rr = config.robots
    first_threat = None
    actives = [t for t in threats if t.active_from == 0]
    if actives and rr.threat_contact != "none":
        first_threat = actives[0].position

    while True:
        positions = []
        while len(positions) < rr.count:
            pos = draw(rr.region)
            if min_gamma(pos, obstacles) <= 1.0:
                continue
            if any(math.hypot(pos[0] - t.position[0], pos[1] - t.position[1])
                   < MIN_THREAT_SPAWN_DIST for t in threats):
                continue
            if any(math.dist(pos, q) < rr.min_dist for q in positions):
                continue
            positions.append(pos)
        if first_threat is not None:
            contacts = sum(
                1 for p in positions
                if math.dist(p, first_threat) <= config.sensing_range)
            if rr.threat_contact == "exactly_one" and contacts != 1:
                continue
            if rr.threat_contact == "at_least_one" and contacts < 1:
                continue
        if rr.connected and not _is_connected(positions, config.sensing_range):
            continue
        return [(p, 0.0) for p in positions]


def _is_connected(positions, radius) -> bool:
    n = len(positions)
    if n <= 1:
        return True
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in range(n):
            if j not in seen and math.dist(positions[i], positions[j]) <= radius:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


def _components_lost(robots, radius) -> int:
    """Robots outside the largest mutually-connected cluster at termination."""
    n = len(robots)
    if n <= 1:
        return 0
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            d = math.dist(tuple(robots[i].position), tuple(robots[j].position))
            if d <= radius:
                parent[find(i)] = find(j)
    sizes = {}
    for i in range(n):
        r = find(i)
        sizes[r] = sizes.get(r, 0) + 1
    return n - max(sizes.values())


@dataclass
class _Plan:
    rid: int
    speed: float
    heading: float
    alpha_a: float
    alpha_r: float
    field: object = None     # warm escape field to retain


def distance_based_adapt(robot, obs, params: ForceParams, avr=None):
    """Ablation baseline: the S signal is the average neighbor distance alone."""
    if avr is None:
        avr = avr_distance(robot, obs)
    if avr is None:
        return robot.alpha_a, robot.alpha_r
    return shift_weights(robot.alpha_a, params.u, avr > params.r_d)


def _plan_robot(robot, obs, config: RunConfig, neighbor_states, warm_field):
    if robot.mode is Mode.ALIGN:
        return _Plan(robot.id, 0.0, robot.heading, robot.alpha_a, robot.alpha_r)

    fp = config.forces
    cell = world_to_grid(tuple(robot.position), config.grid, config.bounds)

    if robot.mode is Mode.ESCAPE:
        field = build_local_field(obs, "repulsive", robot, config.shunting, fp,
                                  config.grid, cell, neighbor_states,
                                  reuse=warm_field)
        try:
            p_rep = field.to_global(command_neuron_min(field, field.to_local(cell)))
        except BoxedInError:
            return _Plan(robot.id, 0.0, robot.heading, robot.alpha_a,
                         robot.alpha_r, field=field)
        reps = []
        for th in robot.known_threats:
            d = math.dist(tuple(robot.position), th)
            reps.append(repulsive_force_escape(p_rep, cell, fp.c_r, d, fp.d_s))
        total = resultant_force(robot, [], reps, 0.0, 1.0)
        return _finish_plan(robot, total, config, field=field)

    # Follow: local windows for attraction and repulsion.
    rep_field = build_local_field(obs, "repulsive", robot, config.shunting, fp,
                                  config.grid, cell, neighbor_states)
    center = (fp.window_radius, fp.window_radius)
    attractive = []
    try:
        att_field = build_local_field(obs, "attractive", robot, config.shunting,
                                      fp, config.grid, cell, neighbor_states)
        p_att = att_field.to_global(command_neuron_max(att_field, center))
        own = robot.hierarchy if robot.hierarchy is not None else math.inf
        n_lower = 0
        for nb in obs.neighbors:
            _, hier = neighbor_states.get(nb.id, (nb.mode, nb.hierarchy))
            if hier is not None and hier < own:
                n_lower += 1
        pull = attractive_force(p_att, cell, fp.c_a)
        attractive = [pull] * max(n_lower, 1)
    except NoLeaderError:
        attractive = []
    except BoxedInError:
        return _Plan(robot.id, 0.0, robot.heading, robot.alpha_a, robot.alpha_r)

    try:
        p_rep = rep_field.to_global(command_neuron_min(rep_field, center))
    except BoxedInError:
        return _Plan(robot.id, 0.0, robot.heading, robot.alpha_a, robot.alpha_r)

    reps = []
    for nb in obs.neighbors:
        reps.append(repulsive_force_follow(p_rep, cell, fp.c_r, nb.distance, fp.r_d))
    for th in robot.known_threats:
        d = math.dist(tuple(robot.position), th)
        reps.append(repulsive_force_escape(p_rep, cell, fp.c_r, d, fp.d_s))

    total = resultant_force(robot, attractive, reps, robot.alpha_a, robot.alpha_r)

    avr = avr_distance(robot, obs)
    if config.adaptation_mode == "neurodynamic":
        alpha_a, alpha_r = adapt_weights(robot, obs, rep_field, fp,
                                         avr=avr, cell=center)
    elif config.adaptation_mode == "distance_based":
        alpha_a, alpha_r = distance_based_adapt(robot, obs, fp, avr=avr)
    else:
        alpha_a, alpha_r = robot.alpha_a, robot.alpha_r

    plan = _finish_plan(robot, total, config)
    plan.alpha_a, plan.alpha_r = alpha_a, alpha_r
    return plan


def _finish_plan(robot, force: VirtualForce, config: RunConfig, field=None):
    speed = velocity_map(force, config.v_max)
    if force.magnitude > 0.0:
        heading = math.atan2(force.vector[1], force.vector[0])
    else:
        heading = robot.heading
    return _Plan(robot.id, speed, heading, robot.alpha_a, robot.alpha_r,
                 field=field)


def tick(state: SimState, config: RunConfig, executor=None):
    """Advance the simulation one tick in place."""
    world = step_obstacles(state.world)
    robots = state.robots
    covered = obstacle_cells(world, config.grid)
    observations = {
        r.id: sense(world, robots, r.id, config.sensing_range, config.grid,
                    covered_cells=covered)
        for r in robots
    }

    events = []
    transitions = [transition_mode(r, observations[r.id], world.tick)
                   for r in robots]
    for robot, (new_mode, evts) in zip(robots, transitions):
        events.extend(evts)
        record_observation(robot, observations[robot.id], world.tick, new_mode)
        if new_mode is not Mode.ESCAPE:
            state.fields.pop(robot.id, None)

    assign_hierarchy(robots, observations)
    neighbor_states = {r.id: (r.mode, r.hierarchy) for r in robots}

    def plan_one(robot):
        try:
            return _plan_robot(robot, observations[robot.id], config,
                               neighbor_states, state.fields.get(robot.id))
        except IntegrationDivergedError as exc:
            raise IntegrationDivergedError(f"tick {world.tick}: {exc}") from exc

    if executor is not None:
        plans = list(executor.map(plan_one, robots))
    else:
        plans = [plan_one(r) for r in robots]

    for robot, plan in zip(robots, plans):
        if plan.field is not None:
            state.fields[robot.id] = plan.field
        robot.alpha_a, robot.alpha_r = plan.alpha_a, plan.alpha_r
        kinematic_step(robot, plan.heading, plan.speed, config.dt,
                       config.bounds, config.v_max)

    state.world = world
    return events


def terminated(state: SimState, config: RunConfig):
    """(done, reason): success once every robot cleared all threats it knows."""
    aware = [r for r in state.robots if r.known_threats]
    if aware:
        safe = all(
            math.dist(tuple(r.position), th) > config.forces.d_s
            for r in aware for th in r.known_threats)
        if safe:
            return True, "success"
    if state.world.tick >= config.max_ticks:
        return True, "timeout"
    return False, ""


def run(config: RunConfig, keep_records: bool = True, workers: int = None,
        dump_ticks=None, dump_sink=None) -> RunResult:
    """Simulate one seeded scenario to termination.

    dump_ticks/dump_sink export the full-grid field of the lowest-id Escape
    robot after the requested ticks (sink receives (tick, ActivityGrid)).
    """
    world0, robots = materialize(config)
    state = SimState(world=world0, robots=robots)
    nworkers = config.workers if workers is None else workers
    dump_ticks = set(dump_ticks or ())

    records = []
    events = []
    energy = 0.0
    mg = math.inf
    mir = math.inf

    def log_tick():
        nonlocal mg, mir
        for r in state.robots:
            g = min_gamma(tuple(r.position), state.world.obstacles)
            mg = min(mg, g)
            if keep_records:
                records.append(TrajectoryRecord(
                    tick=state.world.tick, robot=r.id,
                    x=float(r.position[0]), y=float(r.position[1]),
                    mode=r.mode, hierarchy=r.hierarchy, v=r.speed,
                    alpha_a=r.alpha_a, gamma_min=g))
        for i in range(len(state.robots)):
            for j in range(i + 1, len(state.robots)):
                mir = min(mir, math.dist(tuple(state.robots[i].position),
                                         tuple(state.robots[j].position)))

    log_tick()
    pool = ThreadPoolExecutor(max_workers=nworkers) if nworkers > 1 else None
    try:
        while True:
            done, reason = terminated(state, config)
            if done:
                break
            evts = tick(state, config, executor=pool)
            events.extend(evts)
            for r in state.robots:
                energy += r.speed * r.speed * config.dt
            log_tick()
            if state.world.tick in dump_ticks and dump_sink is not None:
                fld = _lowest_escape_field(state)
                if fld is not None:
                    dump_sink(state.world.tick, fld.grid)
    finally:
        if pool is not None:
            pool.shutdown()

    first_threat_tick = min((t.active_from for t in world0.threats), default=0)
    lost = _components_lost(state.robots, config.sensing_range)
    metrics = RunMetrics(
        success=(reason == "success" and lost == 0 and mg > 1.0),
        reason=reason,
        escape_time=(state.world.tick - first_threat_tick) * config.dt,
        energy_proxy=energy,
        members_lost=lost,
        min_gamma=mg,
        min_inter_robot=mir,
        ticks=state.world.tick,
        mode_events=events,
    )
    return RunResult(metrics=metrics, records=records, world_initial=world0,
                     world_final=state.world)


def _lowest_escape_field(state: SimState):
    for r in sorted(state.robots, key=lambda r: r.id):
        if r.mode is Mode.ESCAPE and r.id in state.fields:
            return state.fields[r.id]
    return None


@dataclass
class BatchReport:
    runs: list
    success_rate: float
    escape_time_mean: float
    escape_time_std: float
    energy_mean: float
    energy_std: float
    members_lost_runs: int

    @classmethod
    def from_runs(cls, runs) -> "BatchReport":
        times = np.array([m.escape_time for m in runs])
        energies = np.array([m.energy_proxy for m in runs])
        return cls(
            runs=list(runs),
            success_rate=sum(m.success for m in runs) / len(runs),
            escape_time_mean=float(times.mean()),
            escape_time_std=float(times.std()),
            energy_mean=float(energies.mean()),
            energy_std=float(energies.std()),
            members_lost_runs=sum(1 for m in runs if m.members_lost > 0),
        )

    def to_dict(self) -> dict:
        return {
            "success_rate": self.success_rate,
            "escape_time_mean": self.escape_time_mean,
            "escape_time_std": self.escape_time_std,
            "energy_mean": self.energy_mean,
            "energy_std": self.energy_std,
            "members_lost_runs": self.members_lost_runs,
            "runs": [m.to_dict() for m in self.runs],
        }


def _batch_worker(config: RunConfig) -> RunMetrics:
    return run(config, keep_records=False).metrics


def run_batch(config: RunConfig, n_runs: int = None, workers: int = None,
              adaptation_mode: str = None) -> BatchReport:
    """Run n seeded variants (seed_i = seed + i) and aggregate."""
    n = config.n_runs if n_runs is None else n_runs
    if n < 1:
        raise ScenarioError(f"n_runs must be >= 1, got {n}")
    nworkers = config.workers if workers is None else workers
    if adaptation_mode is not None:
        config = replace(config, adaptation_mode=adaptation_mode)
    configs = [replace(config, seed=config.seed + i) for i in range(n)]
    if nworkers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=min(nworkers, n)) as pool:
            metrics = list(pool.map(_batch_worker, configs))
    else:
        metrics = [_batch_worker(c) for c in configs]
    return BatchReport.from_runs(metrics)
