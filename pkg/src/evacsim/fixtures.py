"""Small in-memory scenarios for tests, property suites, and quick experiments."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .archetype.attitudes import AttitudeMatrix, assign_attitudes, read_attitudes_csv
from .archetype.matrix import person_rng
from .engine.scenario import AgentRecord, FireFrame, FireTimeline, Message, Scenario, Zone
from .traffic.network import RoadNetwork

DATA_DIR = Path(__file__).parent / "data"

# driver archetype mix used for generated agents (no DE: they do not drive)
DESK_MIX = {"CE": 0.19, "CG": 0.16, "TD": 0.12, "WW": 0.12, "RD": 0.20, "EI": 0.21}


def default_attitudes() -> AttitudeMatrix:
    return read_attitudes_csv(DATA_DIR / "attitudes.csv")


def network_from_edges(nodes: dict[str, tuple[float, float]], edges, speed=16.7, capacity=900.0,
                       lanes=1.0) -> RoadNetwork:
    """Two-way network; each edge (a, b) becomes links "a-b" and "b-a" with Euclidean length."""
    ids = list(nodes)
    idx = {n: i for i, n in enumerate(ids)}
    xy = np.array([nodes[n] for n in ids], dtype=float)
    lid, lf, lt, ln = [], [], [], []
    for a, b in edges:
        for u, v in ((a, b), (b, a)):
            lid.append(f"{u}-{v}")
            lf.append(idx[u])
            lt.append(idx[v])
            ln.append(max(1.0, float(np.hypot(*(xy[idx[u]] - xy[idx[v]])))))
    n = len(lid)
    return RoadNetwork(ids, xy, lid, lf, lt, ln, np.full(n, speed), np.full(n, capacity), np.full(n, lanes))


def rectangle(x0, y0, x1, y1) -> list[np.ndarray]:
    return [np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)]


def ellipse(cx, cy, a, b, angle=0.0, n=24) -> list[np.ndarray]:
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    c, s = np.cos(angle), np.sin(angle)
    x, y = a * np.cos(th), b * np.sin(th)
    return [np.column_stack([cx + c * x - s * y, cy + s * x + c * y])]


def desk_network() -> RoadNetwork:
    """Nine nodes, twenty links: a 2x3 town grid, two exits, and an in-vac site."""
    nodes = {
        "T00": (0, 0), "T01": (1000, 0), "T02": (2000, 0),
        "T10": (0, 1000), "T11": (1000, 1000), "T12": (2000, 1000),
        "EXE": (6000, 500), "EXS": (1000, -5000), "INV": (1000, 2500),
    }
    edges = [("T00", "T01"), ("T01", "T02"), ("T10", "T11"), ("T11", "T12"),
             ("T00", "T10"), ("T01", "T11"), ("T02", "T12"),
             ("T12", "EXE"), ("T01", "EXS"), ("T11", "INV")]
    return network_from_edges(nodes, edges, capacity=600.0)


def desk_fire() -> FireTimeline:
    """A front from the north-west, one frame every 15 minutes for two hours."""
    frames = []
    start, end = np.array([-4000.0, 5000.0]), np.array([2500.0, -500.0])
    axis = end - start
    ang = float(np.arctan2(axis[1], axis[0]))
    for k in range(9):
        head = start + axis * k / 8
        mid = (start + head) / 2
        half = float(np.hypot(*(head - start))) / 2 + 500
        frames.append(FireFrame(900.0 * (k + 1), [ellipse(mid[0], mid[1], half, 400 + 150 * k, ang)]))
    return FireTimeline(frames)


def desk_agents(n: int, seed: int, b: AttitudeMatrix, carer_share: float = 0.3) -> list[AgentRecord]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    names = list(DESK_MIX)
    probs = np.array([DESK_MIX[a] for a in names])
    arch = rng.choice(names, size=n, p=probs / probs.sum())
    homes = rng.uniform([-200, -200], [2200, 1200], size=(n, 2))
    carers = rng.random(n) < carer_share
    deps = rng.uniform([-200, -200], [2200, 1200], size=(n, 2))
    exits = np.array([[6000.0, 500.0], [1000.0, -5000.0]])
    evac_pick = rng.integers(0, 2, size=n)
    out = []
    for i in range(n):
        prof = assign_attitudes(str(arch[i]), b, person_rng(seed, i, 4))
        out.append(AgentRecord(i, str(arch[i]), tuple(homes[i]), tuple(exits[evac_pick[i]]), (1000.0, 2500.0),
                               bool(carers[i]), tuple(deps[i]) if carers[i] else None,
                               prof.threshold_initial, prof.threshold_final))
    return out


def desk_scenario(seed: int = 0, n_agents: int = 200, b: AttitudeMatrix | None = None) -> Scenario:
    """Desk-scale scenario: scripted fire and an escalating message sequence for one zone."""
    b = b if b is not None else default_attitudes()
    zone = Zone("Town", [rectangle(-500, -500, 2500, 1500)])
    messages = [Message(600.0, "Advice", ("Town",)), Message(1800.0, "WatchAndAct", ("Town",)),
                Message(3000.0, "EmergencyWarning", ("Town",)), Message(4200.0, "EvacuateNow", ("Town",))]
    return Scenario(agents=desk_agents(n_agents, seed, b), attitudes=b, network=desk_network(), fire=desk_fire(),
                    zones=[zone], messages=messages, disruptions=[], horizon_s=4 * 3600.0, seed=seed,
                    record_trajectories=False)
