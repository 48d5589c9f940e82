import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evacsim.fixtures import network_from_edges, rectangle
from evacsim.traffic.hazards import Disruption, DisruptionSchedule, apply_disruption, apply_fire_penalty
from evacsim.traffic.network import RoadNetwork, load_network, write_network
from evacsim.traffic.queue import PARKED, STRANDED, QueueTraffic
from evacsim.traffic.routing import NoRoute, route


def line(lengths, speed=20.0, capacity=3600.0, lanes=1.0):
    """One-way chain n0 -> n1 -> ... with the given link lengths."""
    n = len(lengths)
    xs = np.concatenate([[0.0], np.cumsum(lengths)])
    return RoadNetwork([f"n{i}" for i in range(n + 1)], np.column_stack([xs, np.zeros(n + 1)]),
                       [f"l{i}" for i in range(n)], list(range(n)), list(range(1, n + 1)),
                       lengths, [speed] * n, [capacity] * n, [lanes] * n)


def run(traffic, until=None, check=None):
    """Advance the event-driven model until nothing is scheduled (or ``until``)."""
    t = 0.0
    while True:
        nxt = traffic.next_event_time()
        if nxt is None or (until is not None and nxt > until):
            return t
        t = max(t, nxt)
        traffic.step(t)
        if check:
            check(t)


# -- network ------------------------------------------------------------------
def test_single_link_cost():
    net = line([1000.0])
    r = route(net, 0, 1)
    assert r.links == [0] and r.cost == 50.0 and r.expected_arrival == 50.0


def test_storage_floor():
    assert line([750.0, 74.0, 3.0], lanes=1).storage.tolist() == [100, 9, 1]
    assert line([750.0], lanes=2).storage.tolist() == [200]


def test_bad_links_rejected():
    with pytest.raises(ValueError, match="l0"):
        line([0.0])
    with pytest.raises(ValueError, match="speed"):
        line([10.0], speed=0.0)


def test_network_csv_round_trip(tmp_path, caplog):
    net = network_from_edges({"a": (0, 0), "b": (1000, 0), "c": (1000, 1000)}, [("a", "b"), ("b", "c")])
    write_network(net, tmp_path / "n.csv", tmp_path / "l.csv")
    again = load_network(tmp_path / "n.csv", tmp_path / "l.csv")
    assert again.link_ids == net.link_ids and np.allclose(again.length, net.length)
    one_way = line([100.0, 100.0])
    write_network(one_way, tmp_path / "n2.csv", tmp_path / "l2.csv")
    with caplog.at_level(logging.WARNING):
        load_network(tmp_path / "n2.csv", tmp_path / "l2.csv")
    assert "not strongly connected" in caplog.text


def test_unknown_node_in_links(tmp_path):
    (tmp_path / "n.csv").write_text("id,x,y\na,0,0\n")
    (tmp_path / "l.csv").write_text("id,from,to,length_m,freespeed_ms,capacity_vph,lanes\nx,a,zz,10,10,100,1\n")
    with pytest.raises(ValueError, match="zz"):
        load_network(tmp_path / "n.csv", tmp_path / "l.csv")


# -- queue model ----------------------------------------------------------------
def test_free_flow_arrival():
    net = line([1000.0, 500.0, 200.0], speed=10.0)
    arrivals = []
    q = QueueTraffic(net, on_arrive=lambda v, t: arrivals.append(t))
    q.depart(0, [0, 1, 2], 0, 3, now=0.0)
    run(q)
    assert arrivals == [170.0]


def test_capacity_limits_outflow():
    net = line([750.0], speed=15.0, capacity=360.0)
    arrivals = []
    q = QueueTraffic(net, stuck_after_s=1e9, on_arrive=lambda v, t: arrivals.append(t))
    for i in range(100):
        q.depart(i, [0], 0, 1, now=0.0)
    run(q)
    assert len(arrivals) == 100
    per_minute = 60.0 / np.diff(arrivals).mean()
    # 360 veh/h is one vehicle every 10 s
    assert per_minute == pytest.approx(6.0, rel=0.02)
    window = [t for t in arrivals if arrivals[0] <= t < arrivals[0] + 600]
    assert len(window) == 60


def test_storage_blocks_upstream():
    net = line([1000.0, 15.0, 1000.0], speed=10.0, capacity=3600.0)
    net.capacity[1] = net.current_capacity[1] = 36.0  # one vehicle per 100 s
    q = QueueTraffic(net)
    for i in range(6):
        q.depart(i, [0, 1, 2], 0, 3, now=0.0)
    run(q, until=400.0, check=lambda t: q.occupancy(1) <= 2)
    assert q.occupancy(1) == 2
    q.flush_blocked_time(400.0)
    assert q.blocked_time[0] > 0


def test_fifo_and_conservation():
    nodes = {"a": (0, 0), "b": (500, 0), "c": (1000, 0), "d": (500, 500)}
    net = network_from_edges(nodes, [("a", "b"), ("b", "c"), ("a", "d"), ("d", "c")], capacity=400.0)
    q = QueueTraffic(net)
    rng = np.random.default_rng(4)
    paths = [[net.link_index("a-b"), net.link_index("b-c")], [net.link_index("a-d"), net.link_index("d-c")]]
    for i in range(80):
        q.depart(i, paths[i % 2], 0, 2, now=float(rng.integers(0, 120)))

    def check(t):
        assert q.counters.conserved(q.en_route())

    run(q, check=check)
    assert q.counters.arrived == 80
    for lid in net.link_ids:
        enters = [v for _, v, l, e in q.trajectories if l == lid and e == "enter"]
        leaves = [v for _, v, l, e in q.trajectories if l == lid and e in ("leave", "arrive")]
        leaves = list(dict.fromkeys(leaves))
        assert leaves == enters[:len(leaves)]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_conservation_with_strandings(seed, n):
    rng = np.random.default_rng(seed)
    net = line([300.0, 30.0, 300.0], speed=15.0, capacity=float(rng.integers(60, 2000)))

    def thwart(v, t, reason):
        return STRANDED if v.agent_id % 2 else PARKED

    q = QueueTraffic(net, stuck_after_s=float(rng.integers(30, 300)), on_thwart=thwart)
    for i in range(n):
        q.depart(i, [0, 1, 2], 0, 3, now=float(rng.integers(0, 60)))

    def check(t):
        assert q.counters.conserved(q.en_route())
        for link in range(net.n_links):
            assert q.occupancy(link) <= net.storage[link]

    run(q, check=check)
    c = q.counters
    assert c.departed == n == c.arrived + c.stranded + c.parked


def test_stuck_vehicle_asks_for_reroute():
    net = line([200.0, 8.0, 200.0], speed=10.0)
    net.capacity[1] = net.current_capacity[1] = 1.0  # almost nothing gets through
    reasons = []

    def thwart(v, t, reason):
        reasons.append((v.agent_id, t, reason))
        return STRANDED

    q = QueueTraffic(net, stuck_after_s=600.0, on_thwart=thwart)
    for i in range(4):
        q.depart(i, [0, 1, 2], 0, 3, now=0.0)
    run(q, until=2000.0)
    assert reasons and all(r == "congestion" for _, _, r in reasons)
    # nobody is declared stuck before 600 s past their expected exit
    assert min(t for _, t, _ in reasons) >= 20.0 + 600.0


def test_impassable_next_link_triggers_thwart():
    net = line([200.0, 200.0], speed=10.0)
    calls = []
    q = QueueTraffic(net, on_thwart=lambda v, t, r: calls.append(r) or STRANDED)
    q.depart(0, [0, 1], 0, 2, now=0.0)
    net.fire_penalty[1] = 1000.0
    run(q)
    assert calls == ["blocked"] and q.counters.stranded == 1


def test_vehicle_on_penalised_link_finishes_it():
    net = line([200.0], speed=10.0)
    arrivals = []
    q = QueueTraffic(net, on_arrive=lambda v, t: arrivals.append(t))
    q.depart(0, [0], 0, 1, now=0.0)
    q.step(0.0)
    net.fire_penalty[0] = 1000.0
    run(q)
    assert arrivals == [20.0]


# -- fire and disruptions ----------------------------------------------------------
def crossing_net():
    return network_from_edges({"a": (0, 0), "b": (1000, 0), "c": (0, 2000), "d": (1000, 2000)},
                              [("a", "b"), ("c", "d")])


def test_fire_missing_all_links():
    net = crossing_net()
    assert not apply_fire_penalty(net, [rectangle(5000, 5000, 6000, 6000)]).any()
    assert (net.fire_penalty == 1).all()


def test_fire_containing_link():
    net = crossing_net()
    apply_fire_penalty(net, [rectangle(-10, -10, 1010, 10)])
    assert net.fire_penalty[net.link_index("a-b")] == 1000.0
    assert net.fire_penalty[net.link_index("c-d")] == 1.0


def test_fire_crossing_link_without_endpoints():
    net = crossing_net()
    apply_fire_penalty(net, [rectangle(400, -100, 600, 100)])
    assert net.fire_penalty[net.link_index("a-b")] == 1000.0
    assert net.fire_penalty[net.link_index("b-a")] == 1000.0
    assert net.fire_penalty[net.link_index("c-d")] == 1.0


def test_fire_penalty_sticks_and_warns_on_degenerate(caplog):
    net = crossing_net()
    apply_fire_penalty(net, [rectangle(400, -100, 600, 100)])
    with caplog.at_level(logging.WARNING):
        changed = apply_fire_penalty(net, [[np.array([[0, 0], [1, 1]])]])
    assert "degenerate" in caplog.text and not changed.any()
    assert net.fire_penalty[net.link_index("a-b")] == 1000.0


def test_penalised_route_avoided():
    nodes = {"a": (0, 0), "b": (1000, 0), "m": (500, 100)}
    net = network_from_edges(nodes, [("a", "b"), ("a", "m"), ("m", "b")])
    assert route(net, 0, 1).links == [net.link_index("a-b")]
    apply_fire_penalty(net, [rectangle(400, -50, 600, 50)])
    assert route(net, 0, 1).links == [net.link_index("a-m"), net.link_index("m-b")]


def test_no_route():
    with pytest.raises(NoRoute):
        route(line([10.0]), 1, 0)


def test_disruption_halves_then_restores():
    net = line([100.0], capacity=720.0)
    before = (net.current_capacity.tobytes(), net.closure_penalty.tobytes())
    sched = DisruptionSchedule(net, [Disruption(100.0, 200.0, ("l0",), 50.0)])
    sched.update(100.0)
    assert net.current_capacity[0] == 360.0
    sched.update(200.0)
    assert (net.current_capacity.tobytes(), net.closure_penalty.tobytes()) == before


def test_full_disruption_closes_link():
    net = line([100.0], capacity=720.0)
    apply_disruption(net, Disruption(0.0, 10.0, ("l0",), 100.0), now=5.0)
    assert net.current_capacity[0] == 0.0
    assert net.penalty[0] == 1000.0
    assert not QueueTraffic(net).passable(0)


def test_overlapping_disruptions_compose():
    net = line([100.0], capacity=800.0)
    sched = DisruptionSchedule(net, [Disruption(0, 100, ("l0",), 50.0), Disruption(50, 150, ("l0",), 50.0)])
    for t, want in ((0, 400.0), (60, 200.0), (120, 400.0), (150, 800.0)):
        sched.update(t)
        assert net.current_capacity[0] == want


def test_disruption_validation():
    net = line([100.0])
    with pytest.raises(ValueError, match="nope"):
        DisruptionSchedule(net, [Disruption(0, 1, ("nope",), 10.0)])
    with pytest.raises(ValueError):
        Disruption(0, 1, ("l0",), 120.0)
    with pytest.raises(ValueError):
        Disruption(5, 1, ("l0",), 10.0)
