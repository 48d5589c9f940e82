import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evacsim.fixtures import rectangle
from evacsim.traffic.hazards import apply_fire_penalty
from evacsim.traffic.network import RoadNetwork
from evacsim.traffic.routing import NoRoute, RouteTree, Router, route, shortest_path


def random_network(seed: int, n: int = 50, extra: int = 100) -> RoadNetwork:
    """Random directed graph over points in a 10 km square, with a cycle so it is connected."""
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0, 10_000, size=(n, 2))
    pairs = {(i, (i + 1) % n) for i in range(n)}
    while len(pairs) < n + extra:
        a, b = rng.integers(0, n, size=2)
        if a != b:
            pairs.add((int(a), int(b)))
    pairs = sorted(pairs)
    frm = [a for a, _ in pairs]
    to = [b for _, b in pairs]
    length = [max(1.0, float(np.hypot(*(xy[a] - xy[b])))) for a, b in pairs]
    speed = rng.choice([8.3, 13.9, 16.7, 27.8], size=len(pairs))
    return RoadNetwork([f"n{i}" for i in range(n)], xy, [f"l{i}" for i in range(len(pairs))], frm, to,
                       length, speed, np.full(len(pairs), 900.0), np.ones(len(pairs)))


def bellman_ford(net: RoadNetwork, origin: int) -> np.ndarray:
    cost = net.link_cost()
    dist = np.full(net.n_nodes, math.inf)
    dist[origin] = 0.0
    for _ in range(net.n_nodes - 1):
        changed = False
        for li in range(net.n_links):
            a, b = net.link_from[li], net.link_to[li]
            if dist[a] + cost[li] < dist[b]:
                dist[b] = dist[a] + cost[li]
                changed = True
        if not changed:
            break
    return dist


def as_digraph(net: RoadNetwork) -> nx.DiGraph:
    g = nx.DiGraph()
    cost = net.link_cost()
    for li in range(net.n_links):
        g.add_edge(int(net.link_from[li]), int(net.link_to[li]), weight=float(cost[li]))
    return g


def path_cost(net, links):
    return float(net.link_cost()[links].sum())


def check_path(net, links, origin, destination):
    node = origin
    for li in links:
        assert net.link_from[li] == node
        node = int(net.link_to[li])
    assert node == destination


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_two_oracles(seed):
    net = random_network(seed)
    rng = np.random.default_rng(seed + 1)
    if rng.random() < 0.5:  # sometimes with a fire in the middle
        apply_fire_penalty(net, [rectangle(3000, 3000, 6000, 6000)])
    origin = int(rng.integers(0, net.n_nodes))
    bf = bellman_ford(net, origin)
    nxd = nx.single_source_dijkstra_path_length(as_digraph(net), origin)
    router = Router(net)
    for dest in range(net.n_nodes):
        links, cost = shortest_path(net, origin, dest)
        check_path(net, links, origin, dest)
        assert cost == pytest.approx(bf[dest], rel=1e-12)
        assert cost == pytest.approx(nxd[dest], rel=1e-12)
        assert path_cost(net, links) == pytest.approx(cost, rel=1e-12)
        r = router.route(origin, dest)
        check_path(net, r.links, origin, dest)
        assert r.cost == pytest.approx(bf[dest], rel=1e-9)


def test_equal_cost_tie_takes_smaller_link():
    xy = [(0, 0), (1, 0), (0, 1), (1, 1)]
    # two equal paths 0->1->3 (links 0, 2) and 0->2->3 (links 1, 3)
    net = RoadNetwork(["a", "b", "c", "d"], xy, ["p", "q", "r", "s"], [0, 0, 1, 2], [1, 2, 3, 3],
                      [100.0] * 4, [10.0] * 4, [900.0] * 4, [1.0] * 4)
    assert shortest_path(net, 0, 3)[0] == [0, 2]
    assert RouteTree(net, 3).path(0) == [0, 2]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 9000), st.floats(0, 9000), st.floats(200, 4000))
def test_fire_never_lowers_planned_cost(seed, x, y, size):
    net = random_network(seed, n=30, extra=60)
    before = [shortest_path(net, 0, d)[1] for d in range(net.n_nodes)]
    apply_fire_penalty(net, [rectangle(x, y, x + size, y + size)])
    after = [shortest_path(net, 0, d)[1] for d in range(net.n_nodes)]
    assert all(a >= b for a, b in zip(after, before))


def test_router_reflects_changes_after_invalidate():
    net = random_network(1, n=20, extra=40)
    router = Router(net)
    r0 = router.route(0, 10)
    net.fire_penalty[r0.links] = 1000.0
    router.invalidate()
    assert router.route(0, 10).cost == pytest.approx(shortest_path(net, 0, 10)[1])


def test_unreachable():
    net = RoadNetwork(["a", "b"], [(0, 0), (1, 0)], ["x"], [0], [1], [10.0], [1.0], [1.0], [1.0])
    with pytest.raises(NoRoute):
        route(net, 1, 0)
    with pytest.raises(NoRoute):
        Router(net).route(1, 0)
    assert route(net, 0, 0).links == []
