"""Scenario files: strict YAML schema with paper-default parameter values.

Every block is optional except `version`; omitted values fall back to the
defaults of RunConfig (70x70 grid with unit spacing, A=15, B=D=1, mu=1,
E=70, sigma=-0.5, r0=sqrt(2), R_d=3, R_s=8, V_max=1.4, dt=0.5, thirteen
randomly placed robots and one threat at (15, 15)).  Unknown keys are
rejected with their full path; invariant violations name the offending
value.  serialize_config() writes a complete file that parses back to an
identical RunConfig.
"""

import math

import yaml

from .binn import GridSpec, ShuntingParams
from .engine import (ObstacleInit, RandomRobots, RobotPose, RunConfig,
                     ScenarioError, ThreatInit)

SCHEMA_VERSION = 1
BLOCKS = ("version", "world", "shunting", "forces", "robots", "obstacles",
          "threats", "run")


def parse_scenario(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML: {exc}") from exc
    if raw is None:
        raise ScenarioError(
            f"{path}: empty scenario file; required: version "
            f"(optional blocks: {', '.join(BLOCKS[1:])})")
    return config_from_dict(raw, source=str(path))


def config_from_dict(raw: dict, source: str = "<dict>") -> RunConfig:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{source}: scenario must be a mapping of blocks")
    _check_keys(raw, BLOCKS, "")
    if "version" not in raw:
        raise ScenarioError(
            f"{source}: missing required key 'version' "
            f"(optional blocks: {', '.join(BLOCKS[1:])})")
    if raw["version"] != SCHEMA_VERSION:
        raise ScenarioError(f"{source}: unsupported schema version "
                            f"{raw['version']!r}, expected {SCHEMA_VERSION}")
    try:
        world = _parse_world(raw.get("world") or {})
        shunting = _parse_params(raw.get("shunting") or {}, ShuntingParams, {
            "A": "A", "B": "B", "D": "D", "mu": "mu", "beta": "beta",
            "E": "E", "sigma": "sigma", "r0": "r0", "h": "h",
            "n_relax": "n_relax"}, "shunting")
        from .forces import ForceParams
        forces = _parse_params(raw.get("forces") or {}, ForceParams, {
            "C_A": "c_a", "C_R": "c_r", "R_d": "r_d", "d_s": "d_s", "U": "u",
            "window_radius": "window_radius", "k_act": "k_act"}, "forces")
        robots_block = _parse_robots(raw.get("robots") or {})
        obstacles = _parse_obstacles(raw.get("obstacles") or [])
        threats = _parse_threats(raw.get("threats"))
        runb = _parse_run(raw.get("run") or {})
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc

    return RunConfig(
        grid=world["grid"], bounds=world["bounds"], dt=world["dt"],
        shunting=shunting, forces=forces,
        sensing_range=robots_block["sensing_range"],
        v_max=robots_block["v_max"], robots=robots_block["placement"],
        obstacles=obstacles, threats=threats, **runb)


def _check_keys(block: dict, allowed, path: str):
    for key in block:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ScenarioError(f"unknown key '{where}' "
                                f"(allowed: {', '.join(allowed)})")


def _parse_world(block: dict) -> dict:
    _check_keys(block, ("bounds", "grid", "dt"), "world")
    defaults = RunConfig()
    bounds = tuple(float(v) for v in block.get("bounds", defaults.bounds))
    if len(bounds) != 4 or bounds[0] >= bounds[2] or bounds[1] >= bounds[3]:
        raise ScenarioError(f"world.bounds must be (xmin, ymin, xmax, ymax), "
                            f"got {bounds}")
    g = block.get("grid") or {}
    _check_keys(g, ("width", "height", "spacing"), "world.grid")
    grid = GridSpec(width=int(g.get("width", 70)), height=int(g.get("height", 70)),
                    spacing=float(g.get("spacing", 1.0)))
    dt = float(block.get("dt", defaults.dt))
    if dt <= 0:
        raise ScenarioError(f"world.dt must be positive, got {dt}")
    return {"bounds": bounds, "grid": grid, "dt": dt}


def _parse_params(block: dict, cls, mapping: dict, path: str):
    _check_keys(block, tuple(mapping), path)
    kwargs = {}
    for key, attr in mapping.items():
        if key in block:
            value = block[key]
            kwargs[attr] = int(value) if attr in ("n_relax", "window_radius") \
                else float(value)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_robots(block: dict) -> dict:
    _check_keys(block, ("sensing_range", "v_max", "random", "poses"), "robots")
    defaults = RunConfig()
    out = {
        "sensing_range": float(block.get("sensing_range", defaults.sensing_range)),
        "v_max": float(block.get("v_max", defaults.v_max)),
    }
    if "random" in block and "poses" in block:
        raise ScenarioError("robots: give either 'random' or 'poses', not both")
    if "poses" in block:
        poses = []
        for i, p in enumerate(block["poses"]):
            if isinstance(p, dict):
                _check_keys(p, ("position", "heading"), f"robots.poses[{i}]")
                poses.append(RobotPose(position=tuple(map(float, p["position"])),
                                       heading=float(p.get("heading", 0.0))))
            else:
                poses.append(RobotPose(position=tuple(map(float, p))))
        if not poses:
            raise ScenarioError("robots.poses must not be empty")
        out["placement"] = tuple(poses)
    else:
        r = block.get("random") or {}
        _check_keys(r, ("count", "region", "min_dist", "connected",
                        "threat_contact"), "robots.random")
        base = defaults.robots
        out["placement"] = RandomRobots(
            count=int(r.get("count", base.count)),
            region=tuple(float(v) for v in r.get("region", base.region)),
            min_dist=float(r.get("min_dist", base.min_dist)),
            connected=bool(r.get("connected", base.connected)),
            threat_contact=str(r.get("threat_contact", base.threat_contact)))
    return out


def _parse_obstacles(items) -> tuple:
    out = []
    for i, ob in enumerate(items):
        _check_keys(ob, ("center", "region", "size", "velocity"),
                    f"obstacles[{i}]")
        if "size" not in ob:
            raise ScenarioError(f"obstacles[{i}]: missing 'size' (lambda_o)")
        out.append(ObstacleInit(
            lambda_o=float(ob["size"]),
            center=tuple(map(float, ob["center"])) if "center" in ob else None,
            region=tuple(map(float, ob["region"])) if "region" in ob else None,
            velocity=tuple(map(float, ob.get("velocity", (0.0, 0.0))))))
    return tuple(out)


def _parse_threats(items) -> tuple:
    if items is None:
        return RunConfig().threats
    out = []
    for i, th in enumerate(items):
        _check_keys(th, ("position", "region", "active_from"), f"threats[{i}]")
        out.append(ThreatInit(
            position=tuple(map(float, th["position"])) if "position" in th else None,
            region=tuple(map(float, th["region"])) if "region" in th else None,
            active_from=int(th.get("active_from", 0))))
    return tuple(out)


def _parse_run(block: dict) -> dict:
    _check_keys(block, ("max_ticks", "seed", "adaptation_mode", "n_runs",
                        "workers"), "run")
    defaults = RunConfig()
    return {
        "max_ticks": int(block.get("max_ticks", defaults.max_ticks)),
        "seed": int(block.get("seed", defaults.seed)),
        "adaptation_mode": str(block.get("adaptation_mode",
                                         defaults.adaptation_mode)),
        "n_runs": int(block.get("n_runs", defaults.n_runs)),
        "workers": int(block.get("workers", defaults.workers)),
    }


def config_to_dict(config: RunConfig) -> dict:
    """Complete scenario dict; parsing it back yields an identical config."""
    s, f = config.shunting, config.forces
    d = {
        "version": SCHEMA_VERSION,
        "world": {
            "bounds": list(config.bounds),
            "grid": {"width": config.grid.width, "height": config.grid.height,
                     "spacing": config.grid.spacing},
            "dt": config.dt,
        },
        "shunting": {"A": s.A, "B": s.B, "D": s.D, "mu": s.mu, "beta": s.beta,
                     "E": s.E, "sigma": s.sigma, "r0": s.r0, "h": s.h,
                     "n_relax": s.n_relax},
        "forces": {"C_A": f.c_a, "C_R": f.c_r, "R_d": f.r_d, "d_s": f.d_s,
                   "U": f.u, "window_radius": f.window_radius,
                   "k_act": f.k_act},
        "robots": {"sensing_range": config.sensing_range, "v_max": config.v_max},
        "obstacles": [],
        "threats": [],
        "run": {"max_ticks": config.max_ticks, "seed": config.seed,
                "adaptation_mode": config.adaptation_mode,
                "n_runs": config.n_runs, "workers": config.workers},
    }
    if isinstance(config.robots, RandomRobots):
        r = config.robots
        d["robots"]["random"] = {
            "count": r.count, "region": list(r.region), "min_dist": r.min_dist,
            "connected": r.connected, "threat_contact": r.threat_contact}
    else:
        d["robots"]["poses"] = [
            {"position": list(p.position), "heading": p.heading}
            for p in config.robots]
    for ob in config.obstacles:
        entry = {"size": ob.lambda_o, "velocity": list(ob.velocity)}
        if ob.center is not None:
            entry["center"] = list(ob.center)
        else:
            entry["region"] = list(ob.region)
        d["obstacles"].append(entry)
    for th in config.threats:
        entry = {"active_from": th.active_from}
        if th.position is not None:
            entry["position"] = list(th.position)
        else:
            entry["region"] = list(th.region)
        d["threats"].append(entry)
    return d


def serialize_config(config: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)
