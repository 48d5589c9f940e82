"""Road network, routing, hazards, and the queue-based traffic model."""

from .hazards import DEFAULT_FIRE_PENALTY, Disruption, DisruptionSchedule, apply_disruption, apply_fire_penalty
from .network import RoadNetwork, load_network
from .queue import QueueTraffic, Vehicle
from .routing import NoRoute, Route, Router, route, shortest_path

__all__ = [
    "DEFAULT_FIRE_PENALTY", "Disruption", "DisruptionSchedule", "NoRoute", "QueueTraffic", "RoadNetwork",
    "Route", "Router", "Vehicle", "apply_disruption", "apply_fire_penalty", "load_network", "route",
    "shortest_path",
]
