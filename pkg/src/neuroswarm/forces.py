"""Virtual forces read off the neural landscape, and the adaptive weighting.

A non-idle robot keeps one or two activity fields stamped from its own
observation.  The next waypoint is the command neuron among the robot's eight
neighboring cells: the maximum-activity neighbor when attracted (toward the
leader stamp) and the minimum nonnegative-activity neighbor when repelled
(away from threat/robot stamps).  Obstacle cells carry negative activity and
are never selected, which is what makes every step collision-free.

Forces are unit lattice directions scaled by C_A / C_R, gated by distance
(neighbor repulsion inside R_d, threat repulsion inside d_s), and mixed by
the adaptive weights alpha_A + alpha_R = 1.  The weight update compares

    S = Avr(i) + k_act * sum over the 8 neighbor cells of [x]^-

against R_d: crowding alone lowers the attraction, but nearby obstacles push
negative activity into the sum and raise it instead, so squeezed robots pull
together rather than scatter.  The resulting speed is the bounded map
v = arctan(|F|) * (2/pi) * V_max.
"""

import math
from dataclasses import dataclass

import numpy as np

from .binn import ActivityGrid, GridSpec, ShuntingParams, neighbor_cells, relax, stamp_inputs


class BoxedInError(RuntimeError):
    """All candidate neighbor cells carry negative activity; hold this tick."""


class NoLeaderError(RuntimeError):
    """No escape robot or lower-index neighbor in view to stamp as attractor."""


@dataclass(frozen=True)
class ForceParams:
    c_a: float = 1.0          # attractive force magnitude
    c_r: float = 1.0          # repulsive force magnitude
    r_d: float = 3.0          # desired neighbor distance (repulsion deadband)
    d_s: float = 20.0         # safe distance from a threat
    u: float = 0.05           # adaptation stride
    window_radius: int = 8    # half-width of a Follow robot's local field (cells)
    k_act: float = 10.0       # scale of the neural-activity term in the S signal

    def __post_init__(self):
        if not (self.c_a > 0 and self.c_r > 0 and self.r_d > 0):
            raise ValueError("C_A, C_R, R_d must be positive")
        if not self.d_s > self.r_d:
            raise ValueError(f"d_s must exceed R_d, got d_s={self.d_s} R_d={self.r_d}")
        if not 0.0 < self.u < 0.5:
            raise ValueError(f"U must lie in (0, 0.5), got {self.u}")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.k_act < 0:
            raise ValueError("k_act must be >= 0")


@dataclass(frozen=True)
class VirtualForce:
    vector: tuple
    kind: str                 # attractive | repulsive_follow | repulsive_escape | resultant

    @property
    def magnitude(self) -> float:
        return math.hypot(self.vector[0], self.vector[1])


ZERO = (0.0, 0.0)


@dataclass
class LocalField:
    """An activity grid whose cell (0, 0) sits at `origin` in global lattice
    coordinates; the full-workspace field of an Escape robot has origin (0, 0)."""

    grid: ActivityGrid
    origin: tuple = (0, 0)

    def to_local(self, cell):
        return (cell[0] - self.origin[0], cell[1] - self.origin[1])

    def to_global(self, cell):
        return (cell[0] + self.origin[0], cell[1] + self.origin[1])

    def clamp_local(self, cell):
        spec = self.grid.spec
        return (min(max(cell[0], 0), spec.width - 1),
                min(max(cell[1], 0), spec.height - 1))


def build_local_field(obs, target_kind: str, robot, shunting: ShuntingParams,
                      forces: "ForceParams", grid_spec: GridSpec,
                      robot_cell, neighbor_states=None,
                      reuse: LocalField = None) -> LocalField:
    """Stamp and relax one robot field of the requested kind.

    target_kind "attractive": one +E source at the cell of the closest Escape
    neighbor, or failing that the lowest-hierarchy neighbor below the robot's
    own index (NoLeaderError when neither exists).  target_kind "repulsive":
    +E sources at observed neighbor robots and at every known threat
    (remembered positions included; ones outside the window are clamped to its
    edge so their push direction survives).  Obstacle cells are always -E and
    win conflicts.

    Escape robots use the
    full-workspace grid (pass reuse to keep it warm across ticks); Follow
    robots get a cold (2*window_radius+1)^2 window centered on their cell.
    """
    if robot.mode.value == "Align":
        raise ValueError("Align robots have no force field")
    escape = robot.mode.value == "Escape"
    if escape:
        field = reuse if reuse is not None else LocalField(ActivityGrid(grid_spec))
    else:
        wr = forces.window_radius
        side = 2 * wr + 1
        spec = GridSpec(width=side, height=side, spacing=grid_spec.spacing)
        field = LocalField(ActivityGrid(spec),
                           origin=(robot_cell[0] - wr, robot_cell[1] - wr))

    spec = field.grid.spec
    obstacles = []
    for cell in obs.obstacle_cells:
        local = field.to_local(cell)
        if spec.in_grid(local):
            obstacles.append(local)

    sources = []
    if target_kind == "attractive":
        target = _attraction_target(obs, robot, neighbor_states)
        if target is None:
            raise NoLeaderError(f"robot {robot.id} sees no leader to follow")
        cell = field.to_local(_world_cell(target, grid_spec))
        if spec.in_grid(cell):
            sources.append(cell)
    elif target_kind == "repulsive":
        if not escape:
            # Escape robots are pushed by their threats alone; Follow robots
            # also keep spacing from every neighbor they see.
            for nb in obs.neighbors:
                cell = field.to_local(_world_cell(nb.position, grid_spec))
                if spec.in_grid(cell):
                    sources.append(cell)
        for th in robot.known_threats:
            cell = field.to_local(_world_cell(th, grid_spec))
            if not spec.in_grid(cell):
                cell = field.clamp_local(cell)
            sources.append(cell)
    else:
        raise ValueError(f"unknown field kind {target_kind!r}")

    stamp_inputs(field.grid, sources, obstacles, shunting.E)
    relax(field.grid, shunting)
    return field


def _world_cell(position, grid_spec: GridSpec):
    # Unclamped nearest-neuron mapping; callers decide how to treat
    # out-of-window cells.
    L = grid_spec.spacing
    return (int(math.floor(position[0] / L + 0.5)),
            int(math.floor(position[1] / L + 0.5)))


def _attraction_target(obs, robot, neighbor_states):
    """Position to stamp: closest Escape neighbor, else lowest lower-index one."""
    current = neighbor_states or {}
    best = None
    for nb in obs.neighbors:
        mode, hier = current.get(nb.id, (nb.mode, nb.hierarchy))
        if mode.value == "Escape":
            key = (nb.distance, nb.id)
            if best is None or key < best[0]:
                best = (key, nb.position)
    if best is not None:
        return best[1]
    own = robot.hierarchy if robot.hierarchy is not None else math.inf
    cand = None
    for nb in obs.neighbors:
        mode, hier = current.get(nb.id, (nb.mode, nb.hierarchy))
        if hier is not None and hier < own:
            key = (hier, nb.distance, nb.id)
            if cand is None or key < cand[0]:
                cand = (key, nb.position)
    return cand[1] if cand is not None else None


def _source_distance(field: LocalField, cell):
    if not field.grid.sources:
        return 0.0
    return min(math.hypot(cell[0] - s[0], cell[1] - s[1]) for s in field.grid.sources)


def command_neuron_max(field: LocalField, cell):
    """Neighbor cell with maximal activity (local coords).

    Never returns a negative-activity cell; ties break toward the stamped
    source, then row-major.  Raises BoxedInError when every neighbor is
    negative.
    """
    grid = field.grid
    candidates = [(c, grid.activity(c)) for c in neighbor_cells(grid.spec, cell)
                  if grid.activity(c) >= 0.0]
    if not candidates:
        raise BoxedInError(f"all neighbors of {cell} carry negative activity")
    return min(candidates,
               key=lambda ca: (-ca[1], _source_distance(field, ca[0]),
                               ca[0][1], ca[0][0]))[0]


def command_neuron_min(field: LocalField, cell):
    """Neighbor cell with minimal nonnegative activity (local coords).

    Obstacle-influenced (negative) cells are excluded, which keeps the
    repulsive step collision-free; ties prefer the cell farthest from the
    stamped source, then row-major.
    """
    grid = field.grid
    candidates = [(c, grid.activity(c)) for c in neighbor_cells(grid.spec, cell)
                  if grid.activity(c) >= 0.0]
    if not candidates:
        raise BoxedInError(f"all neighbors of {cell} carry negative activity")
    return min(candidates,
               key=lambda ca: (ca[1], -_source_distance(field, ca[0]),
                               ca[0][1], ca[0][0]))[0]


def _unit(p_to, p_from, magnitude, kind):
    dx = float(p_to[0] - p_from[0])
    dy = float(p_to[1] - p_from[1])
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        return VirtualForce(ZERO, kind)
    return VirtualForce((magnitude * dx / norm, magnitude * dy / norm), kind)


def attractive_force(p_att, p_c, c_a: float) -> VirtualForce:
    """C_A times the unit direction from the robot's cell to the command cell.

    Defined as the zero vector when the two coincide (the leader shares the
    robot's cell), where the normalized form is singular.
    """
    return _unit(p_att, p_c, c_a, "attractive")


def repulsive_force_follow(p_rep, p_c, c_r: float, d_kl: float, r_d: float) -> VirtualForce:
    """Neighbor repulsion, active only while 0 < D(k,l) <= R_d (inclusive)."""
    if 0.0 < d_kl <= r_d:
        return _unit(p_rep, p_c, c_r, "repulsive_follow")
    return VirtualForce(ZERO, "repulsive_follow")


def repulsive_force_escape(p_rep, p_c, c_r: float, d_ith: float, d_s: float) -> VirtualForce:
    """Threat repulsion, active only while 0 < D(i,Th) <= d_s (inclusive)."""
    if 0.0 < d_ith <= d_s:
        return _unit(p_rep, p_c, c_r, "repulsive_escape")
    return VirtualForce(ZERO, "repulsive_escape")


def adaptation_signal(avr, field: LocalField, cell, k_act: float) -> float:
    """S = Avr(i) + k_act * sum of negative neighbor activity magnitudes."""
    neg = 0.0
    for _, a in ((c, field.grid.activity(c))
                 for c in neighbor_cells(field.grid.spec, cell)):
        if a < 0.0:
            neg += -a
    return avr + k_act * neg


def adapt_weights(robot, obs, field: LocalField, params: ForceParams,
                  avr=None, cell=None):
    """One stride of the neurodynamic weight update; returns (alpha_a, alpha_r).

    Skipped (weights unchanged) when the robot has no neighbors to measure.
    """
    if avr is None:
        from .swarm import avr_distance
        avr = avr_distance(robot, obs)
    if avr is None:
        return robot.alpha_a, robot.alpha_r
    if cell is None:
        wr = params.window_radius
        cell = (wr, wr)
    s = adaptation_signal(avr, field, cell, params.k_act)
    return shift_weights(robot.alpha_a, params.u, s > params.r_d)


def shift_weights(alpha_a: float, u: float, increase: bool):
    """Move alpha_A by +-U along the simplex alpha_A + alpha_R = 1."""
    a = alpha_a + (u if increase else -u)
    a = min(max(a, 0.0), 1.0)
    return a, 1.0 - a


def resultant_force(robot, attractive, repulsive, alpha_a: float,
                    alpha_r: float) -> VirtualForce:
    """F = alpha_A * sum(attractive) + alpha_R * sum(repulsive).

    Escape robots pass no attractive terms, so their resultant is the threat
    repulsion alone.
    """
    fx = alpha_a * sum(f.vector[0] for f in attractive) \
        + alpha_r * sum(f.vector[0] for f in repulsive)
    fy = alpha_a * sum(f.vector[1] for f in attractive) \
        + alpha_r * sum(f.vector[1] for f in repulsive)
    return VirtualForce((fx, fy), "resultant")


def velocity_map(force: VirtualForce, v_max: float) -> float:
    """Bounded speed v = arctan(|F|) * (2/pi) * V_max, strictly below V_max."""
    if v_max <= 0:
        raise ValueError(f"V_max must be positive, got {v_max}")
    mag = force.magnitude
    if mag == 0.0:
        return 0.0
    v = math.atan(mag) * 2.0 / math.pi * v_max
    if v >= v_max:
        # Rounding can land exactly on V_max for huge magnitudes; the map's
        # range is [0, V_max).
        v = math.nextafter(v_max, 0.0)
    return v
