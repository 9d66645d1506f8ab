"""Robot state, the Align/Escape/Follow mode machine, and hierarchy indexing.

Mode transitions (the only legal edges):

    Align  -> Escape   robot itself detects a threat it did not know
    Align  -> Follow   robot observes a neighbor in Escape or Follow mode
    Follow -> Escape   robot detects a brand-new threat
    Escape -> Follow   robot observes a neighbor whose escape is newer than
                       its own (the new detector takes over the lead)

A robot never returns to Align.  Detecting an already-known threat changes
nothing.  "New" means no recorded threat position lies within 1e-6.

The escape hand-off is inferred purely from the robot's own observations: it
remembers the mode each neighbor showed last tick, so a neighbor seen in
Escape now but not last tick must have transitioned one tick ago.  Robots
that detected the same threat simultaneously therefore keep escaping side by
side instead of swapping with each other.

Hierarchy: every Escape robot has index 1; every other robot gets 1 + the
minimum index among the neighbors it observes, iterated synchronously to a
fixed point (recomputed from scratch each tick).  Robots that observe no
indexed neighbor stay unassigned.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

THREAT_MATCH_TOL = 1e-6


class Mode(str, Enum):
    ALIGN = "Align"
    ESCAPE = "Escape"
    FOLLOW = "Follow"


class Cause(str, Enum):
    THREAT_DETECTED = "threat_detected"
    NEIGHBOR_ESCAPING = "neighbor_escaping"
    NEW_THREAT_SWAP = "new_threat_swap"
    TASK_DONE = "task_done"


@dataclass(frozen=True)
class ModeEvent:
    robot: int
    frm: Mode
    to: Mode
    cause: Cause
    tick: int


@dataclass
class RobotState:
    id: int
    position: np.ndarray           # world (x, y)
    heading: float = 0.0           # radians
    speed: float = 0.0
    mode: Mode = Mode.ALIGN
    hierarchy: int = None
    alpha_a: float = 0.5           # attractive weight; alpha_a + alpha_r == 1
    alpha_r: float = 0.5
    known_threats: list = field(default_factory=list)   # grows monotonically
    escape_since: int = None       # tick of the last Align/Follow -> Escape
    seen_modes: dict = field(default_factory=dict)      # id -> (Mode, tick)

    def knows_threat(self, position) -> bool:
        px, py = position[0], position[1]
        for t in self.known_threats:
            if math.hypot(t[0] - px, t[1] - py) <= THREAT_MATCH_TOL:
                return True
        return False


def transition_mode(robot: RobotState, obs, tick: int):
    """Next mode of one robot given its observation; pure, applied by the engine.

    Rule priority: own threat detection beats everything; the escape hand-off
    applies only to robots already escaping; neighbor-following recruits Align
    robots last.
    """
    events = []
    novel = [t for t in obs.threats_seen if not robot.knows_threat(t)]

    if robot.mode in (Mode.ALIGN, Mode.FOLLOW) and novel:
        events.append(ModeEvent(robot.id, robot.mode, Mode.ESCAPE,
                                Cause.THREAT_DETECTED, tick))
        return Mode.ESCAPE, events

    if robot.mode is Mode.ESCAPE:
        for nb in obs.neighbors:
            if nb.mode is not Mode.ESCAPE:
                continue
            prev = robot.seen_modes.get(nb.id)
            # A continuous sighting that flipped to Escape pins the neighbor's
            # transition to tick-1; yield only to strictly newer escapes.
            if (prev is not None and prev[0] is not Mode.ESCAPE
                    and prev[1] == tick - 1
                    and robot.escape_since is not None
                    and robot.escape_since < tick - 1):
                events.append(ModeEvent(robot.id, Mode.ESCAPE, Mode.FOLLOW,
                                        Cause.NEW_THREAT_SWAP, tick))
                return Mode.FOLLOW, events
        return Mode.ESCAPE, events

    if robot.mode is Mode.ALIGN:
        if any(nb.mode in (Mode.ESCAPE, Mode.FOLLOW) for nb in obs.neighbors):
            events.append(ModeEvent(robot.id, Mode.ALIGN, Mode.FOLLOW,
                                    Cause.NEIGHBOR_ESCAPING, tick))
            return Mode.FOLLOW, events

    return robot.mode, events


def record_observation(robot: RobotState, obs, tick: int, new_mode: Mode):
    """Fold this tick's observation into the robot's private memory."""
    for t in obs.threats_seen:
        if not robot.knows_threat(t):
            robot.known_threats.append((float(t[0]), float(t[1])))
    for nb in obs.neighbors:
        robot.seen_modes[nb.id] = (nb.mode, tick)
    if new_mode is Mode.ESCAPE and robot.mode is not Mode.ESCAPE:
        robot.escape_since = tick
    if new_mode is not Mode.ESCAPE:
        robot.escape_since = None
    robot.mode = new_mode


def assign_hierarchy(robots, observations):
    """Recompute hierarchy indices from scratch (synchronous fixed point).

    observations maps robot id -> Observation for this tick.  Mutates each
    robot's .hierarchy; returns the id -> index dict.
    """
    adjacency = {r.id: [nb.id for nb in observations[r.id].neighbors] for r in robots}
    h = {r.id: (1 if r.mode is Mode.ESCAPE else None) for r in robots}
    for _ in range(len(robots)):
        nxt = {}
        for r in robots:
            if r.mode is Mode.ESCAPE:
                nxt[r.id] = 1
                continue
            vals = [h[j] for j in adjacency[r.id] if h[j] is not None]
            nxt[r.id] = min(vals) + 1 if vals else None
        if nxt == h:
            break
        h = nxt
    for r in robots:
        r.hierarchy = h[r.id]
    return h


def kinematic_step(robot: RobotState, heading: float, speed: float, dt: float,
                   bounds, v_max: float):
    """Omnidirectional move: heading applies instantly, position clamps to bounds."""
    if speed > v_max + 1e-12:
        raise ValueError(f"speed {speed} exceeds V_max {v_max}")
    x = robot.position[0] + speed * dt * math.cos(heading)
    y = robot.position[1] + speed * dt * math.sin(heading)
    xmin, ymin, xmax, ymax = bounds
    robot.position = np.array([min(max(x, xmin), xmax), min(max(y, ymin), ymax)])
    robot.heading = heading
    robot.speed = speed


def avr_distance(robot: RobotState, obs):
    """Mean distance to observed neighbors; None when there are none."""
    if not obs.neighbors:
        return None
    return sum(nb.distance for nb in obs.neighbors) / len(obs.neighbors)
