"""Shunting neural lattice: parameters, activity grid, stamping and relaxation.

Each workspace cell holds one shunting neuron whose activity x obeys

    dx/dt = -A*x + (B - x) * Se - (D + x) * Si

with excitatory input Se = [I]^+ + sum_l w_l [x_l]^+ and inhibitory input
Si = [I]^- + sum_l g_l [x_l - sigma]^-.  Lateral connections reach only the
<= 8 neighbors within Euclidean distance r0 (grid units), with weight mu/d
and inhibitory weight beta*mu/d.  Activity is confined to [-D, B]; positive
activity propagates across the whole grid while negative activity stays in a
small halo because of the threshold sigma.

The continuous model is integrated by synchronous explicit forward
differences with step h; every step reads only the previous iterate, so the
result is independent of traversal order.  The post-step clamp to [-D, B]
preserves the bound that the continuous dynamics guarantee but a finite step
can overshoot.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import relax_loop

SQRT2 = math.sqrt(2.0)

# Lateral neighbor offsets (dx, dy) in row-major order of (dy, dx).
NEIGHBOR_OFFSETS = (
    (-1, -1), (0, -1), (1, -1),
    (-1, 0), (1, 0),
    (-1, 1), (0, 1), (1, 1),
)


class IntegrationDivergedError(RuntimeError):
    """A forward-difference step produced a non-finite activity (h too large)."""


@dataclass(frozen=True)
class ShuntingParams:
    """Constants of the shunting dynamics and its inner integration loop."""

    A: float = 15.0         # passive decay rate (1/time)
    B: float = 1.0          # upper activity bound
    D: float = 1.0          # lower activity bound (activities live in [-D, B])
    mu: float = 1.0         # lateral connection gain
    beta: float = 1.0       # inhibitory gain, in [0, 1]
    E: float = 70.0         # external input magnitude
    sigma: float = -0.5     # inhibitory propagation threshold, in (-D, 0)
    r0: float = SQRT2       # receptive-field radius (grid units)
    h: float = 0.01         # inner integration step (time)
    n_relax: int = 50       # inner relaxation steps per simulation tick

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0 and self.D > 0 and self.E > 0 and self.mu > 0):
            raise ValueError(
                f"A, B, D, E, mu must be positive, got A={self.A} B={self.B} "
                f"D={self.D} E={self.E} mu={self.mu}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not -self.D < self.sigma < 0.0:
            raise ValueError(f"sigma must lie in (-D, 0), got {self.sigma}")
        if self.r0 < 1.0:
            raise ValueError(f"r0 must be >= 1, got {self.r0}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.n_relax < 1:
            raise ValueError(f"n_relax must be >= 1, got {self.n_relax}")


@dataclass(frozen=True)
class GridSpec:
    """Lattice geometry: neuron counts and world spacing between neurons."""

    width: int = 70
    height: int = 70
    spacing: float = 1.0    # world distance between adjacent neurons (= lambda_o)

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    def in_grid(self, cell) -> bool:
        cx, cy = cell
        return 0 <= cx < self.width and 0 <= cy < self.height


def lateral_weight(k, l, params: ShuntingParams, spec: GridSpec):
    """Connection weights (w_kl, g_kl) between two distinct in-grid cells.

    w = mu/|kl| inside the receptive field radius r0, zero beyond; g = beta*w.
    Symmetric by construction.
    """
    for cell in (k, l):
        if not spec.in_grid(cell):
            raise ValueError(f"cell {cell} outside grid {spec.width}x{spec.height}")
    dx = k[0] - l[0]
    dy = k[1] - l[1]
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        raise ValueError(f"lateral weight undefined for identical cells {k}")
    # Tiny tolerance so r0 = sqrt(2) includes the diagonal regardless of
    # how the caller computed it.
    if dist > params.r0 * (1.0 + 1e-12):
        return 0.0, 0.0
    w = params.mu / dist
    return w, params.beta * w


@dataclass
class ActivityGrid:
    """Per-neuron activity x and external input I on a lattice.

    Arrays are indexed [cy, cx].  ``sources`` records the cells stamped +E by
    the latest stamp_inputs call (used for deterministic tie-breaking when a
    command neuron is selected from this field).
    """

    spec: GridSpec
    x: np.ndarray = None
    I: np.ndarray = None
    sources: tuple = ()

    def __post_init__(self):
        shape = (self.spec.height, self.spec.width)
        if self.x is None:
            self.x = np.zeros(shape)
        if self.I is None:
            self.I = np.zeros(shape)
        if self.x.shape != shape or self.I.shape != shape:
            raise ValueError(f"array shape mismatch, expected {shape}")

    def activity(self, cell) -> float:
        return float(self.x[cell[1], cell[0]])

    def copy(self) -> "ActivityGrid":
        return ActivityGrid(self.spec, self.x.copy(), self.I.copy(), self.sources)


@dataclass
class RelaxInfo:
    """Diagnostics of one relax call."""

    steps: int
    residual: float                 # max abs change of the last executed step
    history: np.ndarray = field(repr=False, default=None)  # residual per step


def stamp_inputs(grid: ActivityGrid, sources, obstacles, E: float) -> ActivityGrid:
    """Replace all external inputs: +E at source cells, -E at obstacle cells.

    A cell listed in both gets -E (an occupied cell must repel).  Previous
    stamps are fully discarded; inputs are re-derived every tick.
    """
    spec = grid.spec
    src = set(map(tuple, sources))
    obs = set(map(tuple, obstacles))
    for cell in src | obs:
        if not spec.in_grid(cell):
            raise ValueError(f"stamp coordinate {cell} outside grid "
                             f"{spec.width}x{spec.height}")
    grid.I.fill(0.0)
    for cx, cy in src:
        grid.I[cy, cx] = E
    for cx, cy in obs:
        grid.I[cy, cx] = -E   # obstacle wins on conflict
    grid.sources = tuple(sorted(src - obs, key=lambda c: (c[1], c[0])))
    return grid


def _weights(params: ShuntingParams):
    tol = 1.0 + 1e-12
    we_c = params.mu if 1.0 <= params.r0 * tol else 0.0
    we_d = params.mu / SQRT2 if SQRT2 <= params.r0 * tol else 0.0
    return we_c, we_d, params.beta * we_c, params.beta * we_d


def relax(grid: ActivityGrid, params: ShuntingParams, n_steps: int = None) -> RelaxInfo:
    """Apply n_steps (default params.n_relax) synchronous update steps.

    Stops early only at an exact floating-point fixed point, where further
    steps provably change nothing.  Raises IntegrationDivergedError when a
    step produces a non-finite activity.
    """
    n = params.n_relax if n_steps is None else n_steps
    if n < 1:
        raise ValueError(f"n_steps must be >= 1, got {n}")
    we_c, we_d, wi_c, wi_d = _weights(params)
    residuals = np.zeros(n)
    steps, diverged, _, _ = relax_loop(
        grid.x, grid.I, we_c, we_d, wi_c, wi_d,
        params.A, params.B, params.D, params.sigma, params.h, n, residuals)
    if diverged:
        raise IntegrationDivergedError(
            f"activity became non-finite after step {steps}; decrease h "
            f"(h={params.h})")
    return RelaxInfo(steps=steps, residual=float(residuals[steps - 1]),
                     history=residuals[:steps])


def step_activity(grid: ActivityGrid, params: ShuntingParams) -> RelaxInfo:
    """One explicit forward-difference step of the lattice dynamics."""
    return relax(grid, params, n_steps=1)


def neighbor_cells(spec: GridSpec, cell):
    """In-grid lateral neighbors of cell, in row-major order."""
    if not spec.in_grid(cell):
        raise ValueError(f"cell {cell} outside grid {spec.width}x{spec.height}")
    cx, cy = cell
    out = []
    for dx, dy in NEIGHBOR_OFFSETS:
        nx, ny = cx + dx, cy + dy
        if 0 <= nx < spec.width and 0 <= ny < spec.height:
            out.append((nx, ny))
    return out


def neighbor_activities(grid: ActivityGrid, cell):
    """Activities of the <= 8 in-grid neighbors, row-major deterministic order."""
    return [(c, grid.activity(c)) for c in neighbor_cells(grid.spec, cell)]
