"""Least-cost routing under penalised link costs."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .network import RoadNetwork


class NoRoute(Exception):
    """Destination unreachable from the origin."""


@dataclass
class Route:
    links: list[int]
    depart_time: float
    cost: float
    expected_arrival: float


def shortest_path(net: RoadNetwork, origin: int, destination: int, cost: np.ndarray | None = None) -> tuple[list[int], float]:
    """Dijkstra from ``origin``; among equal-cost predecessors the smaller link index wins."""
    cost = net.link_cost() if cost is None else cost
    dist = {origin: 0.0}
    pred: dict[int, int] = {}
    done = set()
    heap = [(0.0, origin)]
    while heap:
        d, n = heapq.heappop(heap)
        if n in done:
            continue
        done.add(n)
        if n == destination:
            break
        for li in net.out_links[n]:
            m = int(net.link_to[li])
            nd = d + cost[li]
            if not math.isfinite(nd) or m in done:
                continue
            old = dist.get(m)
            if old is None or nd < old or (nd == old and li < pred[m]):
                dist[m] = nd
                pred[m] = li
                heapq.heappush(heap, (nd, m))
    if destination not in done:
        raise NoRoute(f"no route from node {net.node_ids[origin]} to {net.node_ids[destination]}")
    links = []
    n = destination
    while n != origin:
        li = pred[n]
        links.append(li)
        n = int(net.link_from[li])
    links.reverse()
    return links, dist[destination]


def route(net: RoadNetwork, origin: int, destination: int, depart_time: float = 0.0) -> Route:
    """Least-cost route with cost(link) = length / free speed x penalty."""
    links, cost = shortest_path(net, origin, destination)
    travel = float(net.free_flow_time[links].sum()) if links else 0.0
    return Route(links, depart_time, cost, depart_time + travel)


class RouteTree:
    """Cost-to-go and next link toward one destination for every node.

    Built by a backward Dijkstra; when two out-links of a node give the same
    cost-to-go the smaller link index is taken.
    """

    def __init__(self, net: RoadNetwork, destination: int, cost: np.ndarray | None = None):
        cost = net.link_cost() if cost is None else cost
        self.destination = destination
        n = net.n_nodes
        self.cost_to_go = np.full(n, math.inf)
        self.next_link = np.full(n, -1, dtype=np.int64)
        self.cost_to_go[destination] = 0.0
        done = np.zeros(n, dtype=bool)
        heap = [(0.0, destination)]
        while heap:
            d, m = heapq.heappop(heap)
            if done[m]:
                continue
            done[m] = True
            for li in net.in_links[m]:
                k = int(net.link_from[li])
                nd = d + cost[li]
                if done[k] or not math.isfinite(nd):
                    continue
                if nd < self.cost_to_go[k] or (nd == self.cost_to_go[k] and li < self.next_link[k]):
                    self.cost_to_go[k] = nd
                    self.next_link[k] = li
                    heapq.heappush(heap, (nd, k))
        self._link_to = net.link_to

    def path(self, origin: int) -> list[int]:
        if not math.isfinite(self.cost_to_go[origin]):
            raise NoRoute(f"node index {origin} cannot reach node index {self.destination}")
        links = []
        n = origin
        while n != self.destination:
            li = int(self.next_link[n])
            links.append(li)
            n = int(self._link_to[li])
        return links


class Router:
    """Route queries against the current penalties, cached per destination.

    The cache is dropped whenever penalties change, so answers always reflect
    the network state at query time.
    """

    def __init__(self, net: RoadNetwork):
        self.net = net
        self._trees: dict[int, RouteTree] = {}
        self._version = None

    def invalidate(self) -> None:
        self._trees.clear()

    def route(self, origin: int, destination: int, depart_time: float = 0.0) -> Route:
        tree = self._trees.get(destination)
        if tree is None:
            tree = self._trees[destination] = RouteTree(self.net, destination)
        links = tree.path(origin)
        travel = float(self.net.free_flow_time[links].sum()) if links else 0.0
        return Route(links, depart_time, float(tree.cost_to_go[origin]), depart_time + travel)
