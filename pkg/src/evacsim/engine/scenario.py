"""Scenario configuration: files, schedules, and their cross-validation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..archetype.attitudes import MESSAGES, AttitudeMatrix, AttitudeProfile, STIMULI, read_attitudes_csv
from ..geometry import as_ring
from ..traffic.hazards import DEFAULT_FIRE_PENALTY, Disruption
from ..traffic.network import RoadNetwork, load_network


class ConfigError(ValueError):
    """The scenario cannot be run as configured; ``problems`` lists every issue found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def parse_clock(value, start_clock: str | None) -> float:
    """Seconds since simulation start from a number of seconds or an "HH:MM" / "HHMM" string."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if start_clock is None:
        raise ValueError(f"clock time {text!r} needs a start_clock in the scenario")

    def secs(t: str) -> int:
        t = t.replace(":", "")
        if len(t) != 4 or not t.isdigit():
            raise ValueError(f"bad clock time {t!r}")
        return int(t[:2]) * 3600 + int(t[2:]) * 60

    return float(secs(text) - secs(start_clock))


@dataclass
class Message:
    time: float
    kind: str
    zones: tuple[str, ...]
    destination: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in MESSAGES:
            raise ValueError(f"unknown message type {self.kind!r}")


@dataclass
class FireFrame:
    time: float
    polygons: list[list[np.ndarray]]


@dataclass
class FireTimeline:
    frames: list[FireFrame] = field(default_factory=list)

    def __post_init__(self):
        self.frames.sort(key=lambda f: f.time)

    def active(self, t: float) -> FireFrame | None:
        cur = None
        for f in self.frames:
            if f.time <= t:
                cur = f
            else:
                break
        return cur

    def times(self) -> list[float]:
        return [f.time for f in self.frames]


@dataclass
class Zone:
    id: str
    polygons: list[list[np.ndarray]]


def _geometry_polygons(geom: dict) -> list[list[np.ndarray]]:
    if geom["type"] == "Polygon":
        return [[as_ring(r) for r in geom["coordinates"]]]
    if geom["type"] == "MultiPolygon":
        return [[as_ring(r) for r in poly] for poly in geom["coordinates"]]
    raise ValueError(f"unsupported geometry type {geom['type']!r}")


def load_fire_geojson(path) -> FireTimeline:
    data = json.loads(Path(path).read_text())
    frames = []
    for k, feat in enumerate(data.get("features", [])):
        props = feat.get("properties") or {}
        if "time" not in props:
            raise ValueError(f"{path}: fire feature {k} has no 'time' property")
        frames.append(FireFrame(float(props["time"]), _geometry_polygons(feat["geometry"])))
    # several features may share one time; merge them into one frame
    merged: dict[float, FireFrame] = {}
    for f in frames:
        merged.setdefault(f.time, FireFrame(f.time, [])).polygons.extend(f.polygons)
    return FireTimeline(list(merged.values()))


def load_zones_geojson(path) -> list[Zone]:
    data = json.loads(Path(path).read_text())
    zones = []
    for k, feat in enumerate(data.get("features", [])):
        props = feat.get("properties") or {}
        zid = props.get("id") or props.get("name")
        if zid is None:
            raise ValueError(f"{path}: zone feature {k} has no 'id' property")
        zones.append(Zone(str(zid), _geometry_polygons(feat["geometry"])))
    return zones


def polygons_to_geojson_geometry(polygons) -> dict:
    def ring(r):
        r = np.asarray(r)
        return [[float(x), float(y)] for x, y in np.vstack([r, r[:1]])]

    if len(polygons) == 1:
        return {"type": "Polygon", "coordinates": [ring(r) for r in polygons[0]]}
    return {"type": "MultiPolygon", "coordinates": [[ring(r) for r in p] for p in polygons]}


@dataclass
class AgentRecord:
    person_id: int
    archetype: str
    home: tuple[float, float]
    evac: tuple[float, float]
    invac: tuple[float, float]
    has_dependants: bool
    deps: tuple[float, float] | None
    threshold_initial: float
    threshold_final: float
    hh_type: str = ""


AGENT_COLUMNS = ["person_id", "household_id", "archetype", "age", "gender", "hh_type", "x", "y",
                 "evac_x", "evac_y", "invac_x", "invac_y", "has_dependants", "deps_x", "deps_y",
                 "threshold_initial", "threshold_final"]


def read_agents_csv(path) -> list[AgentRecord]:
    out = []
    with open(Path(path), newline="") as fh:
        for line, r in enumerate(csv.DictReader(fh), start=2):
            try:
                has = r["has_dependants"].strip().lower() in ("1", "true", "yes")
                deps = (float(r["deps_x"]), float(r["deps_y"])) if has else None
                out.append(AgentRecord(
                    int(r["person_id"]), r["archetype"],
                    (float(r["x"]), float(r["y"])),
                    (float(r["evac_x"]), float(r["evac_y"])),
                    (float(r["invac_x"]), float(r["invac_y"])),
                    has, deps, float(r["threshold_initial"]), float(r["threshold_final"]),
                    r.get("hh_type", ""),
                ))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: bad agent row ({exc})") from None
    return out


def profile_for(rec: AgentRecord, b: AttitudeMatrix) -> AttitudeProfile:
    col = b.column(rec.archetype)
    return AttitudeProfile(rec.archetype, col[:len(STIMULI)].copy(), rec.threshold_initial, rec.threshold_final)


@dataclass
class Scenario:
    agents: list[AgentRecord]
    attitudes: AttitudeMatrix
    network: RoadNetwork
    fire: FireTimeline
    zones: list[Zone]
    messages: list[Message]
    disruptions: list[Disruption]
    horizon_s: float = 8 * 3600
    tick_s: float = 1.0
    cue_distances: dict[str, float] = field(
        default_factory=lambda: {"VisibleFire": 1000.0, "VisibleEmbers": 2500.0, "VisibleSmoke": 5000.0})
    fire_penalty_factor: float = DEFAULT_FIRE_PENALTY
    defend_probability_offset: float = 0.5
    optional_goal_probability: float = 0.5
    stuck_reroute_s: float = 600.0
    deliver_by: str = "home_zone"
    start_clock: str | None = None
    seed: int = 0
    record_trajectories: bool = True
    source_files: dict[str, str] = field(default_factory=dict)
    config: dict = field(default_factory=dict)


_CUE_KEYS = {"fire": "VisibleFire", "embers": "VisibleEmbers", "smoke": "VisibleSmoke"}


def load_scenario(path, seed: int | None = None) -> Scenario:
    """Load and cross-validate a scenario.json; every problem is reported at once."""
    path = Path(path)
    base = path.parent
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    problems: list[str] = []
    files: dict[str, str] = {}

    def resolve(key, value):
        p = (base / value) if not Path(value).is_absolute() else Path(value)
        files[key] = str(p)
        if not p.exists():
            problems.append(f"{key}: file not found: {p}")
        return p

    required = ["population", "attitudes", "network"]
    for key in required:
        if key not in cfg:
            problems.append(f"missing required key {key!r}")
    if problems:
        raise ConfigError(problems)
    pop_path = resolve("population", cfg["population"])
    att_path = resolve("attitudes", cfg["attitudes"])
    nodes_path = resolve("network.nodes", cfg["network"]["nodes"])
    links_path = resolve("network.links", cfg["network"]["links"])
    fire_path = resolve("fire_geojson", cfg["fire_geojson"]) if cfg.get("fire_geojson") else None
    zones_path = resolve("zones_geojson", cfg["zones_geojson"]) if cfg.get("zones_geojson") else None
    if problems:
        raise ConfigError(problems)

    agents = attitudes = network = None
    fire, zones = FireTimeline(), []
    for label, fn in (
        ("population", lambda: read_agents_csv(pop_path)),
        ("attitudes", lambda: read_attitudes_csv(att_path)),
        ("network", lambda: load_network(nodes_path, links_path)),
        ("fire_geojson", lambda: load_fire_geojson(fire_path) if fire_path else FireTimeline()),
        ("zones_geojson", lambda: load_zones_geojson(zones_path) if zones_path else []),
    ):
        try:
            value = fn()
        except (ValueError, KeyError, OSError) as exc:
            problems.append(f"{label}: {exc}")
            continue
        if label == "population":
            agents = value
        elif label == "attitudes":
            attitudes = value
        elif label == "network":
            network = value
        elif label == "fire_geojson":
            fire = value
        else:
            zones = value

    start_clock = cfg.get("start_clock")
    zone_ids = {z.id for z in zones}
    messages = []
    raw_messages = cfg.get("messages", [])
    if isinstance(raw_messages, str):
        try:
            raw_messages = json.loads(resolve("messages", raw_messages).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            problems.append(f"messages: {exc}")
            raw_messages = []
    for k, m in enumerate(raw_messages):
        try:
            zs = tuple(m.get("zones", []))
            unknown = [z for z in zs if z not in zone_ids]
            if unknown:
                problems.append(f"message {k}: unknown zones {unknown}")
            dest = tuple(m["destination"]) if m.get("destination") else None
            messages.append(Message(parse_clock(m["time"], start_clock), m["type"], zs, dest))
        except (KeyError, ValueError) as exc:
            problems.append(f"message {k}: {exc}")
    messages.sort(key=lambda m: m.time)

    disruptions = []
    for k, d in enumerate(cfg.get("disruptions", [])):
        try:
            dis = Disruption(parse_clock(d["start"], start_clock), parse_clock(d["end"], start_clock),
                             tuple(d["links"]), float(d["reduction_pct"]))
        except (KeyError, ValueError) as exc:
            problems.append(f"disruption {k}: {exc}")
            continue
        if network is not None:
            bad = [lid for lid in dis.links if not network.has_link(lid)]
            if bad:
                problems.append(f"disruption {k}: unknown links {bad}")
        disruptions.append(dis)

    if agents is not None and attitudes is not None:
        bad = sorted({a.archetype for a in agents} - set(("CE", "CG", "TD", "WW", "RD", "DE", "EI")))
        if bad:
            problems.append(f"population: archetypes without attitudes {bad}")
    cues = dict(Scenario.__dataclass_fields__["cue_distances"].default_factory())
    for key, val in (cfg.get("cue_distances") or {}).items():
        name = _CUE_KEYS.get(key, key)
        if name not in cues:
            problems.append(f"cue_distances: unknown cue {key!r}")
        else:
            cues[name] = float(val)
    if not cues["VisibleFire"] <= cues["VisibleEmbers"] <= cues["VisibleSmoke"]:
        problems.append("cue_distances must satisfy fire <= embers <= smoke")
    horizon = cfg.get("horizon_s", 8 * 3600)
    tick = cfg.get("tick_s", 1)
    if horizon < 0:
        problems.append("horizon_s must be non-negative")
    if tick != 1:
        problems.append("tick_s must be 1")
    deliver_by = cfg.get("deliver_by", "home_zone")
    if deliver_by not in ("home_zone", "current_zone"):
        problems.append(f"deliver_by must be home_zone or current_zone, got {deliver_by!r}")
    if problems:
        raise ConfigError(problems)

    return Scenario(
        agents=agents, attitudes=attitudes, network=network, fire=fire, zones=zones,
        messages=messages, disruptions=disruptions, horizon_s=float(horizon), tick_s=float(tick),
        cue_distances=cues,
        fire_penalty_factor=float(cfg.get("fire_penalty_factor", DEFAULT_FIRE_PENALTY)),
        defend_probability_offset=float(cfg.get("defend_probability_offset", 0.5)),
        optional_goal_probability=float(cfg.get("optional_goal_probability", 0.5)),
        stuck_reroute_s=float(cfg.get("stuck_reroute_s", 600.0)),
        deliver_by=deliver_by, start_clock=start_clock,
        seed=int(cfg.get("seed", 0) if seed is None else seed),
        record_trajectories=bool(cfg.get("record_trajectories", True)),
        source_files=files, config=cfg,
    )
