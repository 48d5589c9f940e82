import json
from collections import Counter, defaultdict

import numpy as np
import pytest

from evacsim.archetype.attitudes import BEHAVIOUR_ARCHETYPES
from evacsim.archetype.calibration import verify_response_rates
from evacsim.behaviour import DEFENDING, IDLE, REACHED_SAFETY, STRANDED, classify_trace
from evacsim.engine.run import Simulation, cue_for_distance, run, visual_cues
from evacsim.engine.scenario import AgentRecord, ConfigError, FireFrame, FireTimeline, Message, load_scenario, parse_clock, profile_for
from evacsim.engine.summary import TERMINAL_PARTITION, summarize_result
from evacsim.fixtures import default_attitudes, desk_scenario, rectangle
from evacsim.geometry import points_in_polygon

from conftest import CASTLEMAINE

CUES = {"VisibleFire": 1000.0, "VisibleEmbers": 2500.0, "VisibleSmoke": 5000.0}


@pytest.fixture(scope="module")
def castlemaine():
    sc = load_scenario(CASTLEMAINE / "scenario.json")
    return sc, run(sc)


# -- configuration ----------------------------------------------------------------
def test_clock_parsing():
    assert parse_clock("1100", "10:00") == 3600.0
    assert parse_clock("13:30", "1000") == 3.5 * 3600
    assert parse_clock(90, None) == 90.0
    with pytest.raises(ValueError):
        parse_clock("1100", None)


def test_config_reports_every_problem(scenario_dir):
    path = scenario_dir(tick_s=5, messages=[{"time": 10, "type": "Advice", "zones": ["Nowhere"]},
                                            {"time": 20, "type": "Rumour", "zones": ["Town"]}],
                        disruptions=[{"start": 0, "end": 10, "links": ["X-Y"], "reduction_pct": 50}])
    with pytest.raises(ConfigError) as err:
        load_scenario(path)
    text = str(err.value)
    for fragment in ("tick_s", "Nowhere", "Rumour", "X-Y"):
        assert fragment in text
    assert len(err.value.problems) == 4


def test_config_missing_file(scenario_dir):
    path = scenario_dir(population="nope.csv")
    with pytest.raises(ConfigError, match="nope.csv"):
        load_scenario(path)


def test_config_rejects_unknown_type_agents(scenario_dir):
    path = scenario_dir()
    text = (path.parent / "agents.csv").read_text().splitlines()
    row = text[1].split(",")
    row[2] = "UT"
    text[1] = ",".join(row)
    (path.parent / "agents.csv").write_text("\n".join(text) + "\n")
    with pytest.raises(ConfigError, match="UT"):
        load_scenario(path)


def test_loaded_scenario_matches_in_memory(scenario_dir):
    sc = load_scenario(scenario_dir(seed=3, n_agents=40))
    mem = desk_scenario(3, 40)
    assert len(sc.agents) == 40 and [m.time for m in sc.messages] == [m.time for m in mem.messages]
    assert len(sc.fire.frames) == len(mem.fire.frames)


# -- cues ----------------------------------------------------------------------------
def test_cue_bands():
    frame = FireFrame(0.0, [rectangle(0, 0, 1000, 1000)])
    assert visual_cues((500, 500), frame, CUES) == "VisibleFire"
    assert visual_cues((1000 + 2000, 500), frame, CUES) == "VisibleEmbers"
    assert visual_cues((1000 + 4000, 500), frame, CUES) == "VisibleSmoke"
    assert visual_cues((1000 + 10_000, 500), frame, CUES) is None
    assert visual_cues((0, 0), None, CUES) is None


@pytest.mark.parametrize("d", [0.0, 999.0, 1000.0, 1000.1, 2500.0, 4999.0, 5000.0, 5001.0])
def test_cue_nesting(d):
    cue = cue_for_distance(d, CUES)
    qualifies = {c for c, lim in CUES.items() if d <= lim}
    assert (cue is None) == (not qualifies)
    if cue:
        assert CUES[cue] == min(CUES[c] for c in qualifies)


def test_cue_values_ordered_per_archetype():
    b = default_attitudes()
    for a in BEHAVIOUR_ARCHETYPES:
        assert b.get("VisibleFire", a) >= b.get("VisibleEmbers", a) >= b.get("VisibleSmoke", a)


# -- runs --------------------------------------------------------------------------------
def test_quiet_scenario_stays_idle():
    sc = desk_scenario(0, 50)
    sc.messages, sc.fire = [], FireTimeline()
    res = run(sc)
    assert all(a.phase == IDLE for a in res.agents)
    s = summarize_result(res)
    assert all(s["totals"][o] == 0 for o in ("responded_initial", "left", "safe", "stranded"))
    assert s["totals"]["terminal"]["never_left"] == 50
    assert s["departure_histogram"]["counts"] == [] and s["bottlenecks"] == []


def test_horizon_zero():
    sc = desk_scenario(0, 20)
    sc.horizon_s = 0.0
    res = run(sc)
    assert res.end_time == 0.0 and len(res.log) == 0


def test_message_reaches_exactly_the_zone():
    sc = desk_scenario(1, 120)
    sc.zones[0].polygons = [rectangle(-500, -500, 1000, 1500)]
    res = run(sc)
    homes = np.array([a.home for a in res.agents])
    inside = {res.agents[k].person_id for k in np.flatnonzero(points_in_polygon(homes, sc.zones[0].polygons[0]))}
    for m in sc.messages:
        got = [e.agent for e in res.log.of("MessageReceived") if e.time == m.time and e.detail == m.kind]
        assert len(got) == len(set(got)) and set(got) == inside


def test_single_message_response_matches_direct_count():
    sc = desk_scenario(5, 2000)
    sc.fire = FireTimeline()
    sc.messages = [Message(60.0, "EvacuateNow", ("Town",))]
    sc.horizon_s = 120.0
    res = run(sc)
    engine_rate = len(res.log.of("InitialTriggered")) / len(sc.agents)
    direct = verify_response_rates([profile_for(r, sc.attitudes) for r in sc.agents], "EvacuateNow")
    assert engine_rate == direct


def test_suggested_destination_overrides_preference():
    sc = desk_scenario(2, 80)
    sc.fire = FireTimeline()
    sc.messages = [Message(60.0, "EvacuateNow", ("Town",), destination=(1000.0, -5000.0))]
    res = run(sc)
    safe = [e for e in res.log.of("Safe") if e.detail == "e"]
    assert safe
    for e in safe:
        assert res.sim.agents[res.sim.index[e.agent]].evac == (1000.0, -5000.0)


def test_current_zone_delivery_differs_from_home_zone():
    sc = desk_scenario(4, 100)
    sc.fire = FireTimeline()
    sc.messages = [Message(60.0, "EvacuateNow", ("Town",)), Message(3000.0, "Advice", ("Town",))]
    home = run(sc)
    sc.deliver_by = "current_zone"
    here = run(sc)
    n_home = sum(e.detail == "Advice" for e in home.log.of("MessageReceived"))
    n_here = sum(e.detail == "Advice" for e in here.log.of("MessageReceived"))
    assert n_home == 100 and n_here < 100


def replay_stranded(log) -> set[int]:
    """Agents whose evacuation, in-vac, and home targets all failed after deciding to leave."""
    failed = defaultdict(list)
    leaving = set()
    for e in log:
        if e.event == "FinalTriggered" and "decision=Leave" in e.detail:
            leaving.add(e.agent)
        elif e.event == "GoalFailed" and e.agent in leaving:
            failed[e.agent].append(e.detail)
    return {a for a, goals in failed.items() if goals == ["Go(e)", "Go(i)", "Go(h)"]}


def test_desk_run_partition_and_replay():
    for seed in range(5):
        res = run(desk_scenario(seed, 200))
        s = summarize_result(res)
        term = s["totals"]["terminal"]
        assert sum(term.values()) == 200
        assert sum(sum(r["terminal"].values()) for r in s["by_archetype"].values()) == 200
        phases = Counter(a.phase for a in res.agents)
        assert term["safe"] == phases[REACHED_SAFETY]
        assert term["stranded"] == phases[STRANDED] == len(replay_stranded(res.log))
        assert term["defending"] == phases[DEFENDING]
        assert s["traffic"]["departed"] == (s["traffic"]["arrived"] + s["traffic"]["stranded"]
                                            + s["traffic"]["parked"] + s["traffic"]["en_route"])


def test_forced_stranding_is_counted():
    # a carer drives to the dependants, then fire closes every road around town
    sc = desk_scenario(0, 1)
    sc.agents = [AgentRecord(0, "CE", (0.0, 0.0), (6000.0, 500.0), (1000.0, 2500.0), True, (2000.0, 0.0), 0.3, 0.5)]
    sc.optional_goal_probability = 0.0
    sc.messages = [Message(60.0, "EmergencyWarning", ("Town",))]
    sc.fire = FireTimeline([FireFrame(1000.0, [rectangle(-1000, -1000, 3000, 1800)])])
    res = run(sc)
    a = res.agents[0]
    assert a.trace == ["Go(h)", "Go(d)", "Leave", "Go(e)!", "Go(i)!", "Go(h)!"]
    assert a.phase == STRANDED
    s = summarize_result(res)
    assert s["totals"]["stranded"] == 1 == s["totals"]["terminal"]["stranded"]
    assert replay_stranded(res.log) == {0}


def test_event_log_time_ordered_and_deterministic(tmp_path):
    outs = []
    for k in range(2):
        res = run(desk_scenario(9, 150))
        res.log.write_csv(tmp_path / f"e{k}.csv")
        outs.append((tmp_path / f"e{k}.csv").read_bytes())
        times = [e.time for e in res.log]
        assert times == sorted(times)
    assert outs[0] == outs[1]


def test_barometer_monotone_every_step():
    class Watching(Simulation):
        def step(self, t):
            super().step(t)
            now = [(a.barometer.max_visual_cue, a.barometer.max_message) for a in self.agents]
            prev = getattr(self, "_prev", now)
            assert all(c >= pc and m >= pm for (c, m), (pc, pm) in zip(now, prev))
            self._prev = now

    Watching(desk_scenario(3, 150)).run()


def test_traces_match_patterns():
    for seed in range(5):
        res = run(desk_scenario(seed, 200))
        for a in res.agents:
            assert classify_trace(a.trace, a.has_dependants, complete=a.initial_complete), a.trace
            assert a.reroute_attempts <= 3
            if a.has_dependants:
                assert a.phase != DEFENDING


# -- Castlemaine-style fixture ----------------------------------------------------------------
def test_message_regime_delivery(castlemaine):
    sc, res = castlemaine
    times = defaultdict(set)
    for e in res.log.of("MessageReceived"):
        times[e.detail].add(e.time)
    hour = 3600.0
    assert times["Advice"] == {1 * hour, 3.5 * hour}
    assert times["WatchAndAct"] == {2 * hour, 6 * hour}
    assert times["EmergencyWarning"] == {2.5 * hour, 5 * hour}
    assert times["EvacuateNow"] == {3 * hour}
    zone1 = set(res.sim.zone_members["Zone1"].tolist())
    by_time = defaultdict(set)
    for e in res.log.of("MessageReceived"):
        by_time[e.time].add(res.sim.index[e.agent])
    assert by_time[1 * hour] == zone1 == by_time[3 * hour]
    assert by_time[3.5 * hour] == set(res.sim.zone_members["Zone2"].tolist())
    assert by_time[5 * hour] == set(res.sim.zone_members["Zone2a"].tolist())
    assert len(zone1) > 0 and not zone1 & by_time[3.5 * hour]


def test_castlemaine_summary_consistent(castlemaine, tmp_path):
    sc, res = castlemaine
    s = summarize_result(res)
    assert s["population"] == len(sc.agents) == 2000
    assert sum(s["totals"]["terminal"].values()) == 2000
    assert s["bottlenecks"] and s["bottlenecks"][0]["delay_s"] + s["bottlenecks"][0]["blocked_s"] > 0
    json.dumps(s)
    assert set(s["totals"]["terminal"]) == set(TERMINAL_PARTITION)
