"""Coordinates: dwellings, evacuation preferences, and activity location choice."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import random_point_in_disc

log = logging.getLogger(__name__)

DEPENDANT_RADIUS_M = 5000.0


@dataclass(frozen=True)
class Dwelling:
    id: str
    x: float
    y: float
    zone: str


def read_dwellings_csv(path) -> list[Dwelling]:
    with open(Path(path), newline="") as fh:
        return [Dwelling(r["id"], float(r["x"]), float(r["y"]), r.get("zone", "") or "")
                for r in csv.DictReader(fh)]


def assign_dwellings(households, dwellings: list[Dwelling], seed: int) -> None:
    """Give every household a distinct dwelling from its own zone, uniformly at random."""
    rng = np.random.default_rng(seed)
    by_zone: dict[str, list[Dwelling]] = {}
    for d in dwellings:
        by_zone.setdefault(d.zone, []).append(d)
    hh_by_zone: dict[str, list] = {}
    for h in households:
        hh_by_zone.setdefault(h.zone, []).append(h)
    for zone in sorted(hh_by_zone):
        hhs = hh_by_zone[zone]
        pool = by_zone.get(zone, [])
        if len(pool) < len(hhs):
            raise ValueError(f"zone {zone!r} has {len(pool)} dwellings for {len(hhs)} households")
        picks = rng.choice(len(pool), size=len(hhs), replace=False)
        for h, i in zip(hhs, picks):
            h.coordinate = (pool[i].x, pool[i].y)


@dataclass
class EvacCoordinates:
    evac: tuple[float, float]
    invac: tuple[float, float]
    deps: tuple[float, float] | None = None
    deps_from_pool: bool = False


def nearest_point(point, candidates: np.ndarray) -> int:
    d = np.hypot(candidates[:, 0] - point[0], candidates[:, 1] - point[1])
    return int(np.argmin(d))  # first minimum wins ties


def assign_evac_coordinates(homes, carers, evac_points, invac_points, dependant_homes, seed: int,
                            radius: float = DEPENDANT_RADIUS_M) -> list[EvacCoordinates]:
    """Evacuation, in-vac, and (for carers) dependants' coordinates for each person.

    ``dependant_homes`` are drawn without replacement in a seeded order; once
    exhausted, carers get a uniform point in a disc around their own home.
    """
    rng = np.random.default_rng(seed)
    homes = np.asarray(homes, dtype=float).reshape(-1, 2)
    evac = np.asarray(evac_points, dtype=float).reshape(-1, 2)
    invac = np.asarray(invac_points, dtype=float).reshape(-1, 2)
    if len(evac) == 0 or len(invac) == 0:
        raise ValueError("need at least one evacuation and one in-vac point")
    pool = np.asarray(dependant_homes, dtype=float).reshape(-1, 2)
    pool = pool[rng.permutation(len(pool))]
    next_pool = 0
    evac_pick = rng.integers(0, len(evac), size=len(homes))
    out = []
    for i, home in enumerate(homes):
        ec = EvacCoordinates(tuple(evac[evac_pick[i]]), tuple(invac[nearest_point(home, invac)]))
        if carers[i]:
            if next_pool < len(pool):
                ec.deps = tuple(pool[next_pool])
                ec.deps_from_pool = True
                next_pool += 1
            else:
                ec.deps = tuple(random_point_in_disc(rng, home, radius))
        out.append(ec)
    return out


@dataclass
class Locality:
    centroid: tuple[float, float]
    locations: list[tuple[float, float]]
    weights: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.weights:
            self.weights = [1] * len(self.locations)
        if len(self.weights) != len(self.locations):
            raise ValueError("one allocation weight per location")

    @property
    def total_weight(self) -> int:
        return sum(w for w in self.weights if w > 0)


def locality_probabilities(current, localities: list[Locality], min_distance: float = 500.0) -> np.ndarray:
    """Selection probability of each locality: total weight over centroid distance."""
    mass = np.array([loc.total_weight for loc in localities], dtype=float)
    dist = np.array([np.hypot(loc.centroid[0] - current[0], loc.centroid[1] - current[1])
                     for loc in localities])
    score = mass / np.maximum(dist, min_distance)
    if score.sum() <= 0:
        raise ValueError("every location's allocation weight is exhausted")
    return score / score.sum()


def choose_activity_location(current, localities: list[Locality], rng, min_distance: float = 500.0):
    """Pick a locality by a gravity rule, then a location within it by allocation weight.

    The chosen location's weight drops by one. Distances below
    ``min_distance`` count as ``min_distance`` so a locality containing the
    current position does not absorb all the probability.
    """
    p = locality_probabilities(current, localities, min_distance)
    loc = localities[int(rng.choice(len(localities), p=p))]
    w = np.array([max(v, 0) for v in loc.weights], dtype=float)
    j = int(rng.choice(len(w), p=w / w.sum()))
    loc.weights[j] -= 1
    return loc.locations[j]
