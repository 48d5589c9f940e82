"""Regenerate the shipped fixtures under src/evacsim/data.

    python3 scripts/make_fixtures.py [--seed 2024]

Everything here is synthetic. The archetype matrix contains one exact
published row (female, 25-34, couple with dependants); the other 69 rows are
made up to give a plausible archetype mix and a few all-empty signatures.
The two-town geography loosely mirrors a small town with a larger neighbour
to its south-east and a fire approaching from the north-west.
"""

from __future__ import annotations

import argparse
import csv
import json
from pathlib import Path

import numpy as np

from evacsim import pipeline
from evacsim.archetype.attitudes import read_attitudes_csv
from evacsim.archetype.matrix import AGE_GROUPS, ARCHETYPES, GENDERS, HH_TYPES, ProbabilityMatrix, Signature, \
    load_probability_matrix, write_probability_matrix
from evacsim.fixtures import ellipse, rectangle
from evacsim.popsynth.categories import write_households_csv, write_persons_csv
from evacsim.popsynth.locations import Dwelling
from evacsim.popsynth.reference import age_distribution, generate_reference_region, tabulate
from evacsim.traffic.network import RoadNetwork, write_network

DATA = Path(__file__).resolve().parents[1] / "src" / "evacsim" / "data"
OUT = DATA / "castlemaine"

PUBLISHED_ROW = (Signature("25-34", "Female", "CoupleWithDeps"),
                 [2.4, 4.8, 2.4, np.nan, 2.4, np.nan, 2.4, np.nan])
EMPTY_ROWS = [Signature("18-24", "Male", "SingleWithDeps"), Signature("75+", "Female", "SingleWithDeps"),
              Signature("75+", "Male", "CoupleWithDeps")]

BASE = {"CE": 19, "CG": 16, "TD": 12, "WW": 12, "RD": 20, "DE": 12, "EI": 21, "UT": 0.5}
AGE_TILT = {
    "18-24": {"DE": 2.0, "EI": 0.4, "CE": 0.8}, "25-34": {}, "35-44": {"CE": 1.1},
    "45-54": {"EI": 1.2}, "55-64": {"EI": 1.4, "DE": 0.8}, "65-74": {"EI": 1.5, "DE": 1.3},
    "75+": {"DE": 2.5, "EI": 1.2, "RD": 0.6},
}
GENDER_TILT = {"Male": {"EI": 1.3, "TD": 1.3, "CE": 0.85}, "Female": {"CE": 1.15, "CG": 1.15, "WW": 1.2}}
HH_TILT = {"SingleNoDeps": {"DE": 1.2}, "SingleWithDeps": {"CE": 1.3, "RD": 0.7, "DE": 0.5},
           "CoupleNoDeps": {}, "CoupleWithDeps": {"CE": 1.3, "RD": 0.7, "DE": 0.5}, "Group": {"RD": 1.4, "CG": 0.8}}

REGIONS = {"NorthTown": dict(centre=(-10000.0, 9000.0), households=3400, zone="Zone1",
                             box=(-17000, 3500, -3000, 16000)),
           "SouthTown": dict(centre=(0.0, 0.0), households=3380, zone="Zone2",
                             box=(-6500, -7000, 7000, 3500))}
ZONE2A = (-6500, -7000, 0, 0)  # south-west part of the inner zone
EVAC_POINTS = [(25000.0, 0.0), (0.0, -25000.0)]
INVAC_POINTS = [(0.0, -1500.0), (-10000.0, 8000.0)]
FIRE_ORIGIN = np.array([-15000.0, 11000.0])
FIRE_TRACK_END = np.array([-5000.0, -2500.0])
MESSAGES = [("1100", "Advice", ["Zone1"]), ("1200", "WatchAndAct", ["Zone1"]),
            ("1230", "EmergencyWarning", ["Zone1"]), ("1300", "EvacuateNow", ["Zone1"]),
            ("1330", "Advice", ["Zone2"]), ("1500", "EmergencyWarning", ["Zone2a"]),
            ("1600", "WatchAndAct", ["Zone2"])]
SCENARIO_AGENTS = 2000


def make_matrix(rng) -> ProbabilityMatrix:
    rows = {}
    for age in AGE_GROUPS:
        for g in GENDERS:
            for hh in HH_TYPES:
                sig = Signature(age, g, hh)
                if sig == PUBLISHED_ROW[0]:
                    rows[sig] = np.array(PUBLISHED_ROW[1])
                    continue
                if sig in EMPTY_ROWS:
                    rows[sig] = np.full(len(ARCHETYPES), np.nan)
                    continue
                w = np.array([BASE[a] * AGE_TILT[age].get(a, 1) * GENDER_TILT[g].get(a, 1) * HH_TILT[hh].get(a, 1)
                              for a in ARCHETYPES])
                w *= rng.lognormal(0.0, 0.3, size=len(w))
                w = np.round(w / w.sum() * rng.uniform(8, 20), 1)
                empty = rng.random(len(w)) < 0.15
                empty[ARCHETYPES.index("UT")] |= rng.random() < 0.8
                w[empty | (w == 0)] = np.nan
                if np.count_nonzero(~np.isnan(w)) < 2:
                    w[ARCHETYPES.index("CE")] = 1.0
                rows[sig] = w
    return ProbabilityMatrix(rows)


def make_dwellings(rng, name, region) -> list[Dwelling]:
    x0, y0, x1, y1 = region["box"]
    n = int(region["households"] * 1.08)
    pts = []
    while len(pts) < n:
        if rng.random() < 0.75:
            p = rng.normal(region["centre"], 1100.0)
        else:
            p = rng.uniform((x0, y0), (x1, y1))
        if x0 < p[0] < x1 and y0 < p[1] < y1 and not (name == "NorthTown" and p[1] < 3600):
            pts.append(p)
    return [Dwelling(f"{name}-{i}", float(x), float(y), name) for i, (x, y) in enumerate(pts)]


def perturb(counts, rng):
    """Census-style small random adjustment of non-empty cells."""
    noisy = counts + np.where(counts > 0, rng.integers(-2, 3, size=counts.shape), 0)
    return np.maximum(noisy, 0)


def make_network() -> RoadNetwork:
    nodes: dict[str, tuple[float, float]] = {}
    links: list[tuple[str, str, float, float, float]] = []  # a, b, speed, capacity, lanes

    def road(a, b, speed, cap, lanes):
        links.append((a, b, speed, cap, lanes))

    def grid(prefix, centre, n, spacing):
        half = (n - 1) / 2
        for i in range(n):
            for j in range(n):
                nodes[f"{prefix}{i}_{j}"] = (centre[0] + (j - half) * spacing, centre[1] + (i - half) * spacing)
        for i in range(n):
            for j in range(n):
                main = i == n // 2 or j == n // 2
                speed, cap = (16.7, 1200.0) if main else (13.9, 600.0)
                if j + 1 < n:
                    road(f"{prefix}{i}_{j}", f"{prefix}{i}_{j + 1}", speed, cap, 1)
                if i + 1 < n:
                    road(f"{prefix}{i}_{j}", f"{prefix}{i + 1}_{j}", speed, cap, 1)

    def highway(name, a, b, seg=2000.0, speed=27.8, cap=1800.0):
        pa, pb = np.array(nodes[a]), np.array(nodes[b])
        k = max(1, int(np.hypot(*(pb - pa)) // seg))
        prev = a
        for s in range(1, k):
            nid = f"{name}{s}"
            nodes[nid] = tuple(pa + (pb - pa) * s / k)
            road(prev, nid, speed, cap, 1)
            prev = nid
        road(prev, b, speed, cap, 1)

    grid("N", REGIONS["NorthTown"]["centre"], 7, 800.0)
    grid("S", REGIONS["SouthTown"]["centre"], 9, 800.0)
    nodes["EXIT_E"] = EVAC_POINTS[0]
    nodes["EXIT_S"] = EVAC_POINTS[1]
    highway("HWNS", "N0_6", "S8_0")        # north town's south-east corner to south town's north-west corner
    highway("HWNW", "N3_6", "S4_0")        # second link between the towns along the main streets
    highway("HWE", "S4_8", "EXIT_E")
    highway("HWS", "S0_4", "EXIT_S")
    ids = list(nodes)
    idx = {n: i for i, n in enumerate(ids)}
    xy = np.array([nodes[n] for n in ids])
    lid, lf, lt, ln, sp, cp, la = [], [], [], [], [], [], []
    for a, b, speed, cap, lanes in links:
        for u, v in ((a, b), (b, a)):
            lid.append(f"{u}>{v}")
            lf.append(idx[u])
            lt.append(idx[v])
            ln.append(float(np.hypot(*(xy[idx[u]] - xy[idx[v]]))))
            sp.append(speed)
            cp.append(cap)
            la.append(lanes)
    return RoadNetwork(ids, xy, lid, lf, lt, ln, sp, cp, la)


def _ring_coords(ring) -> list:
    return [[round(float(x), 1), round(float(y), 1)] for x, y in np.vstack([ring, ring[:1]])]


def fire_features() -> list[dict]:
    """Fire fronts every 30 minutes from 11:00 (3600 s after a 10:00 start).

    Until 16:30 the front runs south-east, passing a few kilometres south-west
    of the northern town. From 17:00 a wind change drives its north-east flank
    over that town.
    """
    feats = []
    axis = FIRE_TRACK_END - FIRE_ORIGIN
    ang = float(np.arctan2(axis[1], axis[0]))
    steps = 11
    main = None
    for k in range(steps + 1):
        head = FIRE_ORIGIN + axis * k / steps
        mid = (FIRE_ORIGIN + head) / 2
        length = float(np.hypot(*(head - FIRE_ORIGIN)))
        main = ellipse(mid[0], mid[1], length / 2 + 600, 500 + 0.08 * length, ang, n=32)[0]
        feats.append({"type": "Feature", "properties": {"time": 3600 + 1800 * k},
                      "geometry": {"type": "Polygon", "coordinates": [_ring_coords(main)]}})
    town = np.array(REGIONS["NorthTown"]["centre"])
    u = axis / np.hypot(*axis)
    foot = FIRE_ORIGIN + u * float(np.dot(town - FIRE_ORIGIN, u))
    normal = (town - foot) / np.hypot(*(town - foot))
    for k, reach in enumerate((0.45, 1.0, 1.6)):
        c = foot + normal * np.hypot(*(town - foot)) * reach / 2
        run = ellipse(c[0], c[1], 3500, np.hypot(*(town - foot)) * reach / 2 + 600, ang, n=32)[0]
        t = 3600 + 1800 * (steps + 1 + k)
        feats.append({"type": "Feature", "properties": {"time": t},
                      "geometry": {"type": "MultiPolygon",
                                   "coordinates": [[_ring_coords(main)], [_ring_coords(run)]]}})
    return feats


def polygon_feature(fid, ring) -> dict:
    coords = [[float(x), float(y)] for x, y in np.vstack([ring, ring[:1]])]
    return {"type": "Feature", "properties": {"id": fid}, "geometry": {"type": "Polygon", "coordinates": [coords]}}


def write_points(path, pts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        w.writerows(pts)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    OUT.mkdir(parents=True, exist_ok=True)

    m = make_matrix(rng)
    write_probability_matrix(DATA / "archetype-matrix.csv", m)
    m = load_probability_matrix(DATA / "archetype-matrix.csv")

    persons, households, ages, dwellings = {}, {}, {}, []
    for k, (name, region) in enumerate(REGIONS.items()):
        ref = generate_reference_region(region["households"], seed=args.seed + k, zone=name)
        p, h = tabulate(ref)
        p.counts = perturb(p.counts, rng)
        persons[name], households[name] = p, h
        ages[name] = age_distribution(ref)
        dwellings += make_dwellings(rng, name, region)
    write_persons_csv(OUT / "persons.csv", persons)
    write_households_csv(OUT / "households.csv", households)
    with open(OUT / "ages.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "age", "count"])
        for name, dist in ages.items():
            w.writerows([name, a, int(c)] for a, c in enumerate(dist) if c > 0)
    with open(OUT / "dwellings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "zone"])
        w.writerows([d.id, f"{d.x:.1f}", f"{d.y:.1f}", d.zone] for d in dwellings)
    write_points(OUT / "evac-points.csv", EVAC_POINTS)
    write_points(OUT / "invac-points.csv", INVAC_POINTS)

    net = make_network()
    write_network(net, OUT / "nodes.csv", OUT / "links.csv")
    (OUT / "fire.geojson").write_text(json.dumps({"type": "FeatureCollection", "features": fire_features()}) + "\n")
    zones = [polygon_feature(REGIONS[n]["zone"], rectangle(*REGIONS[n]["box"])[0]) for n in REGIONS]
    zones.append(polygon_feature("Zone2a", rectangle(*ZONE2A)[0]))
    (OUT / "zones.geojson").write_text(json.dumps({"type": "FeatureCollection", "features": zones}, indent=1) + "\n")

    # full pipeline, then a seeded sample of drivers for the desk-scale scenario
    regions = pipeline.synthesize_regions(persons, households, ages, args.seed)
    pipeline.assign_dwelling_coordinates(regions, dwellings, args.seed)
    pipeline.write_population_csv("/tmp/fixture-population.csv", regions)
    pop = pipeline.read_population_csv("/tmp/fixture-population.csv")
    b = read_attitudes_csv(DATA / "attitudes.csv")
    agents, _, rep = pipeline.assign_population(pop, m, b, args.seed, np.array(EVAC_POINTS), np.array(INVAC_POINTS))
    keep = np.sort(rng.choice(len(agents), size=min(SCENARIO_AGENTS, len(agents)), replace=False))
    pipeline.write_agents_csv(OUT / "agents.csv", [agents[i] for i in keep], pop)
    scenario = {
        "population": "agents.csv",
        "attitudes": "../attitudes.csv",
        "network": {"nodes": "nodes.csv", "links": "links.csv"},
        "fire_geojson": "fire.geojson",
        "zones_geojson": "zones.geojson",
        "start_clock": "10:00",
        "horizon_s": 9 * 3600,
        "messages": [{"time": t, "type": k, "zones": z} for t, k, z in MESSAGES],
        "seed": args.seed,
        "record_trajectories": True,
    }
    (OUT / "scenario.json").write_text(json.dumps(scenario, indent=2) + "\n")
    print(f"persons {sum(len(r.population.persons) for r in regions)}  drivers {rep.drivers}  "
          f"by archetype {rep.by_archetype}  scenario agents {len(keep)}")


if __name__ == "__main__":
    main()
