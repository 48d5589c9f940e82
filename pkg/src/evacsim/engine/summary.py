"""Aggregate statistics from an event log."""

from __future__ import annotations

import json
from collections import Counter, defaultdict

import numpy as np

from ..archetype.attitudes import MESSAGES
from ..archetype.matrix import BEHAVIOUR_ARCHETYPES

OUTCOMES = ("responded_initial", "responded_final", "left", "defended", "safe", "stranded")
TERMINAL_PARTITION = ("safe", "stranded", "defending", "never_left", "en_route")


def _detail(detail: str, key: str) -> str | None:
    for part in detail.split():
        if part.startswith(key + "="):
            return part[len(key) + 1:]
    return None


def leave_departures(events) -> dict[int, float]:
    """Time each leaving agent first set off after deciding to leave."""
    leaving: set[int] = set()
    out: dict[int, float] = {}
    for e in events:
        if e.event == "FinalTriggered" and _detail(e.detail, "decision") == "Leave":
            leaving.add(e.agent)
        elif e.event == "Departure" and e.agent in leaving and e.agent not in out:
            out[e.agent] = e.time
    return out


def summarize(events, archetypes: dict[int, str], top_k: int = 10, link_delay=None, link_blocked_time=None,
              link_ids=None, histogram_bin_s: float = 1800.0, traffic_counters=None) -> dict:
    """Per-archetype outcome counts, per-message response rates, departures, and bottlenecks."""
    events = list(events)
    per_agent: dict[int, set[str]] = defaultdict(set)
    safe_target: dict[int, str] = {}
    received: dict[str, set[int]] = defaultdict(set)
    responded: dict[str, set[int]] = defaultdict(set)
    for e in events:
        if e.agent is None:
            continue
        if e.event == "InitialTriggered":
            per_agent[e.agent].add("responded_initial")
            cause = _detail(e.detail, "cause")
            if cause in MESSAGES:
                responded[cause].add(e.agent)
        elif e.event == "FinalTriggered":
            per_agent[e.agent].add("responded_final")
            if _detail(e.detail, "decision") == "Leave":
                per_agent[e.agent].add("left")
        elif e.event == "Defending":
            per_agent[e.agent].add("defended")
        elif e.event == "Safe":
            per_agent[e.agent].add("safe")
            safe_target[e.agent] = e.detail
        elif e.event == "Stranded":
            per_agent[e.agent].add("stranded")
        elif e.event == "MessageReceived":
            received[e.detail].add(e.agent)

    groups = sorted(set(archetypes.values()), key=lambda a: (a not in BEHAVIOUR_ARCHETYPES, a))
    def blank():
        return {**{o: 0 for o in OUTCOMES}, "terminal": {t: 0 for t in TERMINAL_PARTITION}}

    by_arch = {a: blank() for a in groups}
    totals = blank()
    for pid, arch in archetypes.items():
        flags = per_agent.get(pid, set())
        row = by_arch[arch]
        for o in OUTCOMES:
            if o in flags:
                row[o] += 1
                totals[o] += 1
        if "safe" in flags:
            term = "safe"
        elif "stranded" in flags:
            term = "stranded"
        elif "defended" in flags:
            term = "defending"
        elif "left" in flags:
            term = "en_route"
        else:
            term = "never_left"
        row["terminal"][term] += 1
        totals["terminal"][term] += 1

    rates = {}
    for m in MESSAGES:
        n = len(received.get(m, ()))
        r = len(responded.get(m, set()) & received.get(m, set()))
        rates[m] = {"received": n, "responded": r, "rate": (r / n) if n else 0.0}

    deps = leave_departures(events)
    hist: list[list[int]] = []
    if deps:
        bins = Counter(int(t // histogram_bin_s) for t in deps.values())
        hist = [[int(b * histogram_bin_s), bins[b]] for b in sorted(bins)]
    medians = {}
    for a in groups:
        ts = [t for pid, t in deps.items() if archetypes.get(pid) == a]
        medians[a] = float(np.median(ts)) if ts else None

    bottlenecks = []
    if link_delay is not None:
        delay = np.asarray(link_delay, dtype=float)
        blocked = np.zeros_like(delay) if link_blocked_time is None else np.asarray(link_blocked_time, dtype=float)
        order = sorted(range(len(delay)), key=lambda i: (-(delay[i] + blocked[i]), i))
        for i in order[:top_k]:
            if delay[i] + blocked[i] <= 0:
                break
            bottlenecks.append({"link": link_ids[i] if link_ids else i, "delay_s": round(float(delay[i]), 3),
                                "blocked_s": round(float(blocked[i]), 3)})

    out = {
        "population": len(archetypes),
        "totals": totals,
        "by_archetype": by_arch,
        "safe_by_target": dict(sorted(Counter(safe_target.values()).items())),
        "message_response": rates,
        "departure_histogram": {"bin_s": histogram_bin_s, "counts": hist},
        "median_departure_s": medians,
        "bottlenecks": bottlenecks,
    }
    if traffic_counters is not None:
        out["traffic"] = traffic_counters
    return out


def summarize_result(result, top_k: int = 10) -> dict:
    sim = result.sim
    archetypes = {a.person_id: arch for a, arch in zip(sim.agents, sim.archetypes)}
    c = sim.traffic.counters
    counters = {"departed": c.departed, "arrived": c.arrived, "stranded": c.stranded,
                "parked": c.parked, "en_route": sim.traffic.en_route()}
    s = summarize(sim.log, archetypes, top_k, sim.traffic.delay_time, sim.traffic.blocked_time, sim.net.link_ids,
                  traffic_counters=counters)
    s["end_time_s"] = result.end_time
    s["seed"] = sim.seed
    return s


def write_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
