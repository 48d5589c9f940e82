"""Fire penalties and capacity disruptions on road links."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..geometry import is_degenerate, segments_intersect_polygon
from .network import RoadNetwork

log = logging.getLogger(__name__)

DEFAULT_FIRE_PENALTY = 1000.0


def links_touching(net: RoadNetwork, polygon) -> np.ndarray:
    """Boolean mask of links whose straight segment meets the polygon."""
    if is_degenerate(polygon):
        log.warning("ignoring degenerate fire polygon")
        return np.zeros(net.n_links, dtype=bool)
    a, b = net.link_segments()
    return segments_intersect_polygon(a, b, polygon)


def apply_fire_penalty(net: RoadNetwork, polygons, factor: float = DEFAULT_FIRE_PENALTY) -> np.ndarray:
    """Penalise every link meeting any polygon. Penalties never revert.

    Returns the mask of links whose penalty changed.
    """
    hit = np.zeros(net.n_links, dtype=bool)
    for poly in polygons:
        hit |= links_touching(net, poly)
    changed = hit & (net.fire_penalty < factor)
    net.fire_penalty[hit] = np.maximum(net.fire_penalty[hit], factor)
    return changed


@dataclass
class Disruption:
    start: float
    end: float
    links: tuple[str, ...]
    reduction_pct: float

    def __post_init__(self):
        if not 0.0 <= self.reduction_pct <= 100.0:
            raise ValueError(f"flow reduction must lie in [0, 100], got {self.reduction_pct}")
        if self.end < self.start:
            raise ValueError("disruption ends before it starts")


class DisruptionSchedule:
    """Applies disruptions at their start and lifts them at their end.

    Link capacity is always recomputed from the base capacity and the set of
    active disruptions, so lifting one restores the exact prior value.
    """

    def __init__(self, net: RoadNetwork, disruptions: list[Disruption], closure_penalty: float = DEFAULT_FIRE_PENALTY):
        for d in disruptions:
            for lid in d.links:
                if not net.has_link(lid):
                    raise ValueError(f"disruption refers to unknown link {lid!r}")
        self.net = net
        self.disruptions = list(disruptions)
        self.closure_penalty = closure_penalty
        self.active: set[int] | None = None

    def times(self) -> list[float]:
        return sorted({t for d in self.disruptions for t in (d.start, d.end)})

    def next_time(self, after: float) -> float | None:
        later = [t for t in self.times() if t > after]
        return later[0] if later else None

    def update(self, now: float) -> np.ndarray:
        """Bring link capacities in line with the disruptions active at ``now``.

        Returns the mask of links whose capacity or closure changed.
        """
        active = {i for i, d in enumerate(self.disruptions) if d.start <= now < d.end}
        if active == self.active:
            return np.zeros(self.net.n_links, dtype=bool)
        self.active = active
        net = self.net
        before_cap = net.current_capacity.copy()
        before_pen = net.closure_penalty.copy()
        factor = np.ones(net.n_links)
        closed = np.zeros(net.n_links, dtype=bool)
        for i in sorted(active):
            d = self.disruptions[i]
            idx = [net.link_index(lid) for lid in d.links]
            factor[idx] *= 1.0 - d.reduction_pct / 100.0
            if d.reduction_pct >= 100.0:
                closed[idx] = True
        net.current_capacity = net.capacity * factor
        net.closure_penalty = np.where(closed, self.closure_penalty, 1.0)
        return (net.current_capacity != before_cap) | (net.closure_penalty != before_pen)


def apply_disruption(net: RoadNetwork, disruption: Disruption, now: float,
                     closure_penalty: float = DEFAULT_FIRE_PENALTY) -> None:
    """One-off form: the state the single disruption implies at ``now``."""
    DisruptionSchedule(net, [disruption], closure_penalty).update(now)
