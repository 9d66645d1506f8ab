"""Workspace model: circular obstacles, threats, and strictly local sensing.

An obstacle is the disk gamma(p) <= 1 where

    gamma(p) = ((px - xo)^2 + (py - yo)^2) / lambda_o

so its boundary is the circle of radius sqrt(lambda_o) around the center.
Moving obstacles translate at constant velocity and reflect at the workspace
walls.  A robot senses, without occlusion or noise, every entity within its
detection range R_s: neighbor robots (position, mode, hierarchy), lattice
cells covered by obstacles, and active threat positions.  Nothing outside
R_s is ever visible; robots never exchange information.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .binn import GridSpec


@dataclass(frozen=True)
class Obstacle:
    center: tuple          # (x, y) world position
    lambda_o: float        # size parameter (length^2); radius = sqrt(lambda_o)
    velocity: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.lambda_o > 0:
            raise ValueError(f"lambda_o must be positive, got {self.lambda_o}")

    @property
    def radius(self) -> float:
        return math.sqrt(self.lambda_o)


@dataclass(frozen=True)
class Threat:
    position: tuple
    active_from: int = 0   # tick at which the threat appears; persists forever


@dataclass(frozen=True)
class WorldState:
    bounds: tuple                  # (xmin, ymin, xmax, ymax)
    obstacles: tuple = ()
    threats: tuple = ()
    tick: int = 0
    dt: float = 0.5

    def active_threats(self):
        return [t for t in self.threats if t.active_from <= self.tick]


@dataclass(frozen=True)
class NeighborInfo:
    id: int
    position: tuple
    mode: object           # swarm.Mode of the neighbor at sensing time
    hierarchy: object      # int or None
    distance: float


@dataclass(frozen=True)
class Observation:
    """Everything one robot perceives in one tick; all items lie within R_s."""

    self_pose: tuple
    neighbors: tuple = ()
    obstacle_cells: tuple = ()     # lattice cells whose center has gamma <= 1
    threats_seen: tuple = ()


def gamma(point, obstacle: Obstacle) -> float:
    """Normalized squared distance to the obstacle center; > 1 is collision-free."""
    dx = point[0] - obstacle.center[0]
    dy = point[1] - obstacle.center[1]
    return (dx * dx + dy * dy) / obstacle.lambda_o


def min_gamma(point, obstacles) -> float:
    g = math.inf
    for ob in obstacles:
        g = min(g, gamma(point, ob))
    return g


def _reflect(value, velocity, lo, hi):
    # Reflect about whichever wall was crossed until back inside; the normal
    # velocity component flips sign at each bounce.
    for _ in range(16):
        if value < lo:
            value = 2.0 * lo - value
            velocity = -velocity
        elif value > hi:
            value = 2.0 * hi - value
            velocity = -velocity
        else:
            return value, velocity
    raise ValueError("obstacle velocity too large for the workspace")


def step_obstacles(world: WorldState) -> WorldState:
    """Advance obstacle centers by v*dt with wall reflection; increment tick."""
    xmin, ymin, xmax, ymax = world.bounds
    moved = []
    for ob in world.obstacles:
        vx, vy = ob.velocity
        if vx == 0.0 and vy == 0.0:
            moved.append(ob)
            continue
        x, vx = _reflect(ob.center[0] + vx * world.dt, vx, xmin, xmax)
        y, vy = _reflect(ob.center[1] + vy * world.dt, vy, ymin, ymax)
        moved.append(replace(ob, center=(x, y), velocity=(vx, vy)))
    return replace(world, obstacles=tuple(moved), tick=world.tick + 1)


def world_to_grid(point, spec: GridSpec, bounds=None):
    """Nearest-neuron cell (cx, cy) for a world point; clamped at the grid edge."""
    if bounds is not None:
        xmin, ymin, xmax, ymax = bounds
        if not (xmin <= point[0] <= xmax and ymin <= point[1] <= ymax):
            raise ValueError(f"point {tuple(point)} outside workspace bounds {bounds}")
    cx = int(math.floor(point[0] / spec.spacing + 0.5))
    cy = int(math.floor(point[1] / spec.spacing + 0.5))
    cx = min(max(cx, 0), spec.width - 1)
    cy = min(max(cy, 0), spec.height - 1)
    return cx, cy


def grid_to_world(cell, spec: GridSpec):
    """World position of a cell center (inverse of world_to_grid)."""
    return (cell[0] * spec.spacing, cell[1] * spec.spacing)


def obstacle_cells(world: WorldState, spec: GridSpec):
    """All lattice cells whose center lies inside or on any obstacle, sorted."""
    cells = set()
    L = spec.spacing
    for ob in world.obstacles:
        r = ob.radius
        cx0 = max(0, int(math.floor((ob.center[0] - r) / L)))
        cx1 = min(spec.width - 1, int(math.ceil((ob.center[0] + r) / L)))
        cy0 = max(0, int(math.floor((ob.center[1] - r) / L)))
        cy1 = min(spec.height - 1, int(math.ceil((ob.center[1] + r) / L)))
        for cy in range(cy0, cy1 + 1):
            for cx in range(cx0, cx1 + 1):
                if gamma((cx * L, cy * L), ob) <= 1.0:
                    cells.add((cx, cy))
    return sorted(cells, key=lambda c: (c[1], c[0]))


def sense(world: WorldState, robots, who: int, sensing_range: float,
          spec: GridSpec = None, covered_cells=None) -> Observation:
    """Observation of robot `who`: entities within sensing_range, nothing else.

    covered_cells may carry the precomputed obstacle_cells(world, spec) so the
    per-tick scan is shared between robots.
    """
    me = None
    for r in robots:
        if r.id == who:
            me = r
            break
    if me is None:
        raise ValueError(f"unknown robot id {who}")
    px, py = float(me.position[0]), float(me.position[1])

    neighbors = []
    for r in robots:
        if r.id == who:
            continue
        d = math.hypot(float(r.position[0]) - px, float(r.position[1]) - py)
        if d <= sensing_range:
            neighbors.append(NeighborInfo(
                id=r.id, position=(float(r.position[0]), float(r.position[1])),
                mode=r.mode, hierarchy=r.hierarchy, distance=d))
    neighbors.sort(key=lambda nb: nb.id)

    cells = ()
    if spec is not None:
        if covered_cells is None:
            covered_cells = obstacle_cells(world, spec)
        L = spec.spacing
        cells = tuple(c for c in covered_cells
                      if math.hypot(c[0] * L - px, c[1] * L - py) <= sensing_range)

    threats = tuple(
        tuple(t.position) for t in world.active_threats()
        if math.hypot(t.position[0] - px, t.position[1] - py) <= sensing_range)

    return Observation(self_pose=(px, py), neighbors=tuple(neighbors),
                       obstacle_cells=cells, threats_seen=threats)
