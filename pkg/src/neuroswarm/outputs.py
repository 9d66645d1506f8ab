"""Run artifacts: trajectory.csv, events.csv, metrics.json, run.svg, and
per-tick activity-field dumps (plain-text matrix, 6 significant digits)."""

import json
import math
import os
from pathlib import Path

from .engine import BatchReport, RunMetrics, RunResult
from .swarm import Mode

TRAJECTORY_HEADER = "tick,robot,x,y,mode,hier,v,alpha_A,gamma_min"
EVENTS_HEADER = "tick,robot,from,to,cause"

MODE_COLORS = {Mode.ALIGN: "#e0a800", Mode.ESCAPE: "#d62728", Mode.FOLLOW: "#1f77b4"}


def default_out_dir() -> Path:
    return Path(os.environ.get("NEUROSWARM_OUT", "out"))


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return format(value, ".10g")


def write_outputs(metrics: RunMetrics, records, out_dir, svg: bool = False,
                  result: RunResult = None) -> list:
    """Write the run artifact set; returns the list of paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "trajectory.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for r in records:
            hier = "" if r.hierarchy is None else str(r.hierarchy)
            fh.write(f"{r.tick},{r.robot},{_fmt(r.x)},{_fmt(r.y)},"
                     f"{r.mode.value},{hier},{_fmt(r.v)},{_fmt(r.alpha_a)},"
                     f"{_fmt(r.gamma_min)}\n")
    written.append(path)

    path = out / "events.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(EVENTS_HEADER + "\n")
        for e in metrics.mode_events:
            fh.write(f"{e.tick},{e.robot},{e.frm.value},{e.to.value},"
                     f"{e.cause.value}\n")
    written.append(path)

    path = out / "metrics.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(metrics.to_dict(), fh, indent=2)
        fh.write("\n")
    written.append(path)

    if svg:
        if result is None:
            raise ValueError("svg output needs the RunResult")
        path = out / "run.svg"
        path.write_text(render_svg(result, records), encoding="utf-8")
        written.append(path)
    return written


def write_batch_report(report: BatchReport, out_dir, name: str = "batch.json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    return path


def dump_activity(grid, tick: int, out_dir) -> Path:
    """One file per requested tick: row-major activity matrix, %.6g."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"activity_t{tick}.txt"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in grid.x:
            fh.write(" ".join(format(v, ".6g") for v in row) + "\n")
    return path


def render_svg(result: RunResult, records, size: float = 640.0) -> str:
    """World box, obstacles, threat markers, and mode-colored trajectories."""
    xmin, ymin, xmax, ymax = result.world_initial.bounds
    span = max(xmax - xmin, ymax - ymin)
    pad = 0.04 * span
    scale = size / (span + 2 * pad)

    def sx(x):
        return (x - xmin + pad) * scale

    def sy(y):
        # world y grows upward; svg y grows downward
        return size - (y - ymin + pad) * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
        f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
        f'<rect x="0" y="0" width="{size:.0f}" height="{size:.0f}" fill="white"/>',
        f'<rect x="{sx(xmin):.1f}" y="{sy(ymax):.1f}" '
        f'width="{(xmax - xmin) * scale:.1f}" height="{(ymax - ymin) * scale:.1f}" '
        f'fill="none" stroke="black" stroke-width="1"/>',
    ]
    for world, opacity in ((result.world_initial, 0.85),
                           (result.world_final, 0.35)):
        for ob in world.obstacles:
            parts.append(
                f'<circle cx="{sx(ob.center[0]):.1f}" cy="{sy(ob.center[1]):.1f}" '
                f'r="{ob.radius * scale:.1f}" fill="#888888" '
                f'fill-opacity="{opacity}" stroke="#444444"/>')
        if all(o.velocity == (0.0, 0.0) for o in world.obstacles):
            break
    for th in result.world_initial.threats:
        x, y = sx(th.position[0]), sy(th.position[1])
        parts.append(
            f'<path d="M {x - 6:.1f} {y - 6:.1f} L {x + 6:.1f} {y + 6:.1f} '
            f'M {x - 6:.1f} {y + 6:.1f} L {x + 6:.1f} {y - 6:.1f}" '
            f'stroke="#d62728" stroke-width="3"/>')

    by_robot = {}
    for r in records:
        by_robot.setdefault(r.robot, []).append(r)
    for rid, rows in sorted(by_robot.items()):
        rows.sort(key=lambda r: r.tick)
        # one polyline per mode stretch so the color tracks the mode
        for start in range(len(rows)):
            if start + 1 >= len(rows):
                break
            a, b = rows[start], rows[start + 1]
            parts.append(
                f'<line x1="{sx(a.x):.1f}" y1="{sy(a.y):.1f}" '
                f'x2="{sx(b.x):.1f}" y2="{sy(b.y):.1f}" '
                f'stroke="{MODE_COLORS[b.mode]}" stroke-width="1.5"/>')
        last = rows[-1]
        parts.append(
            f'<circle cx="{sx(last.x):.1f}" cy="{sy(last.y):.1f}" r="3.5" '
            f'fill="{MODE_COLORS[last.mode]}" stroke="black" stroke-width="0.6"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
