"""The time-control loop tying fire, messages, agents, and traffic together."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..archetype.matrix import person_rng
from ..behaviour import (
    DEFENDING, EVACUATING, IDLE, INITIAL_RESPONDING, LEAVE_TARGETS, MAX_REROUTES, REACHED_SAFETY,
    STRANDED, WAITING_AT_DEPS, WAITING_AT_HOME, AgentState, check_thresholds, final_response,
    initial_response, perceive,
)
from ..geometry import points_in_polygon, points_multipolygon_distance
from ..traffic.hazards import DisruptionSchedule, apply_fire_penalty
from ..traffic.queue import PARKED, STRANDED as VEH_STRANDED, QueueTraffic, Vehicle
from ..traffic.routing import NoRoute, Router
from .scenario import FireFrame, Scenario, profile_for

INITIAL_STREAM = 2
FINAL_STREAM = 3
CUE_ORDER = ("VisibleFire", "VisibleEmbers", "VisibleSmoke")


@dataclass(frozen=True)
class Event:
    time: float
    source: str
    agent: int | None
    event: str
    detail: str


class EventLog:
    def __init__(self):
        self.records: list[Event] = []

    def add(self, time, source, agent, event, detail=""):
        self.records.append(Event(float(time), source, agent, event, detail))

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def of(self, event: str) -> list[Event]:
        return [e for e in self.records if e.event == event]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "source", "agent", "event", "detail"])
            for e in self.records:
                w.writerow([f"{e.time:g}", e.source, "" if e.agent is None else e.agent, e.event, e.detail])


def cue_for_distance(d: float, distances: dict[str, float]) -> str | None:
    for cue in CUE_ORDER:
        if d <= distances[cue]:
            return cue
    return None


def visual_cues(position, frame: FireFrame | None, distances: dict[str, float]) -> str | None:
    """Most intense cue visible from ``position`` under the active fire frame."""
    if frame is None or not frame.polygons:
        return None
    d = float(points_multipolygon_distance(np.asarray(position, dtype=float).reshape(1, 2), frame.polygons)[0])
    return cue_for_distance(d, distances)


class Simulation:
    def __init__(self, scenario: Scenario, seed: int | None = None):
        sc = scenario
        self.sc = sc
        self.seed = sc.seed if seed is None else int(seed)
        self.net = sc.network
        self.net.reset_state()
        self.router = Router(self.net)
        self.traffic = QueueTraffic(self.net, sc.stuck_reroute_s, self._on_thwart, self._on_arrive,
                                    sc.record_trajectories)
        self.disruptions = DisruptionSchedule(self.net, sc.disruptions, sc.fire_penalty_factor)
        self.log = EventLog()
        recs = sorted(sc.agents, key=lambda r: r.person_id)
        self.agents: list[AgentState] = []
        for r in recs:
            self.agents.append(AgentState(
                r.person_id, profile_for(r, sc.attitudes), r.has_dependants,
                home=r.home, deps=r.deps, evac=r.evac, invac=r.invac,
            ))
        self.archetypes = [r.archetype for r in recs]
        self.index = {a.person_id: k for k, a in enumerate(self.agents)}
        n = len(self.agents)
        homes = np.array([a.home for a in self.agents], dtype=float).reshape(-1, 2)
        self.nodes: list[dict[str, int]] = [{} for _ in range(n)]
        for key in ("h", "d", "e", "i"):
            pts = [(k, a.coordinate(key)) for k, a in enumerate(self.agents)
                   if key != "d" or a.deps is not None]
            if pts:
                snapped = self.net.nearest_nodes(np.array([p for _, p in pts]))
                for (k, _), node in zip(pts, snapped):
                    self.nodes[k][key] = int(node)
        self.at_node = [self.nodes[k]["h"] for k in range(n)]
        self.zone_members = {z.id: self._members(homes, z.polygons) for z in sc.zones}
        self.vehicle: dict[int, Vehicle] = {}
        self.dirty: set[int] = set()
        self.cues_seen = [set() for _ in range(n)]
        self.overtaken = set()
        self.frame: FireFrame | None = None
        self._frame_idx = 0
        self._msg_idx = 0
        self.now = 0.0

    @staticmethod
    def _members(points: np.ndarray, polygons) -> np.ndarray:
        inside = np.zeros(len(points), dtype=bool)
        for poly in polygons:
            inside |= points_in_polygon(points, poly)
        return np.flatnonzero(inside)

    # -- world phases -----------------------------------------------------
    def _advance_fire(self, t: float) -> bool:
        frames = self.sc.fire.frames
        moved = False
        while self._frame_idx < len(frames) and frames[self._frame_idx].time <= t:
            frame = frames[self._frame_idx]
            self._frame_idx += 1
            changed = apply_fire_penalty(self.net, frame.polygons, self.sc.fire_penalty_factor)
            if changed.any():
                self.router.invalidate()
            self.frame = frame
            self.log.add(t, "fire", None, "FireFrame", f"frame_time={frame.time:g} links_penalised={int(changed.sum())}")
            moved = True
        return moved

    def _deliver_messages(self, t: float) -> None:
        msgs = self.sc.messages
        while self._msg_idx < len(msgs) and msgs[self._msg_idx].time <= t:
            m = msgs[self._msg_idx]
            self._msg_idx += 1
            recipients = self._recipients(m.zones)
            for k in recipients:
                a = self.agents[k]
                self.log.add(t, "messaging", a.person_id, "MessageReceived", m.kind)
                if m.kind == "EvacuateNow" and m.destination is not None and a.phase != EVACUATING:
                    a.evac = m.destination
                    self.nodes[k]["e"] = self.net.nearest_node(m.destination)
                if not a.terminal and perceive(a, m.kind):
                    self.dirty.add(k)

    def _recipients(self, zones) -> list[int]:
        if self.sc.deliver_by == "home_zone":
            ks = set()
            for z in zones:
                ks.update(int(k) for k in self.zone_members.get(z, []))
            return sorted(ks)
        pos = self._positions()
        zone_by_id = {z.id: z for z in self.sc.zones}
        ks = set()
        for zid in zones:
            ks.update(int(k) for k in self._members(pos, zone_by_id[zid].polygons))
        return sorted(ks)

    def _position(self, k: int) -> tuple[float, float]:
        v = self.vehicle.get(k)
        if v is None:
            return self.agents[k].location
        node = self.net.link_to[v.link] if v.link is not None else v.origin
        return tuple(self.net.node_xy[node])

    def _positions(self) -> np.ndarray:
        return np.array([self._position(k) for k in range(len(self.agents))], dtype=float).reshape(-1, 2)

    def _see(self, k: int, cue: str | None, t: float) -> None:
        if cue is None:
            return
        a = self.agents[k]
        if a.phase in (REACHED_SAFETY, STRANDED):
            return
        if cue not in self.cues_seen[k]:
            self.cues_seen[k].add(cue)
            self.log.add(t, "fire", a.person_id, "CueSeen", cue)
        if a.phase == DEFENDING:
            if cue == "VisibleFire" and k not in self.overtaken:
                self.overtaken.add(k)
                self.log.add(t, "behaviour", a.person_id, "FireOvertakenWhileDefending", "")
            return
        if perceive(a, cue):
            self.dirty.add(k)

    def _cues_all(self, t: float) -> None:
        if self.frame is None or not self.frame.polygons or not self.agents:
            return
        d = points_multipolygon_distance(self._positions(), self.frame.polygons)
        for k in range(len(self.agents)):
            self._see(k, cue_for_distance(float(d[k]), self.sc.cue_distances), t)

    # -- agent decisions --------------------------------------------------
    def _waiting_phase(self, k: int) -> str:
        node = self.at_node[k]
        if node == self.nodes[k]["h"]:
            return WAITING_AT_HOME
        if "d" in self.nodes[k] and node == self.nodes[k]["d"]:
            return WAITING_AT_DEPS
        return IDLE

    def _decide(self, k: int, t: float) -> None:
        a = self.agents[k]
        for _ in range(4):
            if a.terminal or k in self.vehicle:
                return
            trig = check_thresholds(a)
            if trig in ("InitialResp", "FullResponse"):
                a.initial_triggered = True
                name, goals = initial_response(a, person_rng(self.seed, a.person_id, INITIAL_STREAM),
                                               self.sc.optional_goal_probability)
                self.log.add(t, "behaviour", a.person_id, "InitialTriggered",
                             f"goal={trig} cause={a.last_stimulus} plan={name} steps={'+'.join(goals) or '-'}")
                a.plan = goals
                a.phase = INITIAL_RESPONDING
            elif trig == "FinalResp":
                a.final_triggered = True
                choice = final_response(a, person_rng(self.seed, a.person_id, FINAL_STREAM),
                                        self.sc.defend_probability_offset)
                a.decision = choice
                a.trace.append(choice)
                self.log.add(t, "behaviour", a.person_id, "FinalTriggered", f"cause={a.last_stimulus} decision={choice}")
                if choice == "Defend":
                    a.phase = DEFENDING
                    self.log.add(t, "behaviour", a.person_id, "Defending", "")
                    return
                a.phase = EVACUATING
                a.leave_index = 0
                a.plan = [LEAVE_TARGETS[0]]
            elif a.phase != INITIAL_RESPONDING:
                return
            if not self._advance_plan(k, t):
                return
            if a.phase == INITIAL_RESPONDING:
                a.initial_complete = True
                a.phase = self._waiting_phase(k)

    def _start_goal(self, k: int, goal: str, t: float) -> None:
        a = self.agents[k]
        a.current_goal = goal
        a.reroute_attempts = 0
        self.log.add(t, "behaviour", a.person_id, "GoalStarted", f"Go({goal})")

    def _advance_plan(self, k: int, t: float) -> bool:
        """Work through the plan until a trip starts. True when the plan ran out here."""
        a = self.agents[k]
        while a.plan:
            if a.current_goal != a.plan[0]:
                self._start_goal(k, a.plan[0], t)
            origin = self.at_node[k]
            links = self._find_path(k, origin, t, None)
            if links is None:
                return not a.terminal
            if not links:
                self._complete_goal(k, t)
                if a.terminal:
                    return False
                continue
            dest = self.nodes[k][a.current_goal]
            v = self.traffic.depart(a.person_id, links, origin, dest, t, tag=a.current_goal)
            self.vehicle[k] = v
            self.log.add(t, "traffic", a.person_id, "Departure", f"Go({a.current_goal}) vehicle={v.id}")
            return False
        return True

    def _find_path(self, k: int, origin: int, t: float, reason: str | None) -> list[int] | None:
        """Path for the current goal from ``origin``, spending reroutes and fallbacks on failure.

        ``reason`` set means the agent was just thwarted. Returns None when the
        agent gives up: stranded while leaving, or the initial plan abandoned.
        """
        a = self.agents[k]
        while True:
            if reason is not None:
                if a.reroute_attempts < MAX_REROUTES:
                    a.reroute_attempts += 1
                    self.log.add(t, "behaviour", a.person_id, "RerouteAttempt",
                                 f"Go({a.current_goal}) attempt={a.reroute_attempts} reason={reason}")
                else:
                    self.log.add(t, "behaviour", a.person_id, "GoalFailed", f"Go({a.current_goal})")
                    a.trace.append(f"Go({a.current_goal})!")
                    if a.phase != EVACUATING:
                        a.plan = []
                        a.current_goal = None
                        return None
                    a.leave_index += 1
                    if a.leave_index >= len(LEAVE_TARGETS):
                        a.plan = []
                        a.current_goal = None
                        a.phase = STRANDED
                        self.log.add(t, "behaviour", a.person_id, "Stranded", "")
                        return None
                    a.plan = [LEAVE_TARGETS[a.leave_index]]
                    self._start_goal(k, a.plan[0], t)
                reason = None
            dest = self.nodes[k][a.current_goal]
            if origin == dest:
                return []
            try:
                return self.router.route(origin, dest, t).links
            except NoRoute:
                reason = "noroute"

    def _complete_goal(self, k: int, t: float) -> None:
        a = self.agents[k]
        goal = a.current_goal
        a.plan.pop(0)
        a.current_goal = None
        a.location = a.coordinate(goal)
        self.at_node[k] = self.nodes[k][goal]
        a.trace.append(f"Go({goal})")
        self.log.add(t, "behaviour", a.person_id, "GoalCompleted", f"Go({goal})")
        if a.phase == EVACUATING:
            a.phase = REACHED_SAFETY
            self.log.add(t, "behaviour", a.person_id, "Safe", goal)

    # -- traffic callbacks ------------------------------------------------
    def _on_thwart(self, v: Vehicle, t: float, reason: str):
        k = self.index[v.agent_id]
        a = self.agents[k]
        node = int(self.net.link_to[v.link]) if v.link is not None else v.origin
        self.log.add(t, "traffic", a.person_id, "Thwarted", f"Go({a.current_goal}) reason={reason}")
        links = self._find_path(k, node, t, reason)
        if links is None:
            del self.vehicle[k]
            self.at_node[k] = node
            a.location = tuple(self.net.node_xy[node])
            if a.phase == STRANDED:
                return VEH_STRANDED
            # initial plan abandoned: the agent stops where it is
            a.initial_complete = True
            a.phase = self._waiting_phase(k)
            self.dirty.add(k)
            return PARKED
        v.destination = self.nodes[k][a.current_goal]
        v.tag = a.current_goal
        return links

    def _on_arrive(self, v: Vehicle, t: float) -> None:
        k = self.index[v.agent_id]
        self.vehicle.pop(k, None)
        self._complete_goal(k, t)
        self.dirty.add(k)
        if self.frame is not None:
            self._see(k, visual_cues(self.agents[k].location, self.frame, self.sc.cue_distances), t)

    # -- loop -------------------------------------------------------------
    def _next_time(self, t: float) -> float | None:
        cands = []
        frames = self.sc.fire.frames
        if self._frame_idx < len(frames):
            cands.append(frames[self._frame_idx].time)
        if self._msg_idx < len(self.sc.messages):
            cands.append(self.sc.messages[self._msg_idx].time)
        nd = self.disruptions.next_time(t)
        if nd is not None:
            cands.append(nd)
        nt = self.traffic.next_event_time()
        if nt is not None:
            cands.append(nt)
        if self.dirty:
            cands.append(t + 1)
        if not cands:
            return None
        return max(t + 1, math.ceil(min(cands)))

    def step(self, t: float) -> None:
        self.now = t
        fire_moved = self._advance_fire(t)
        changed = self.disruptions.update(t)
        if changed.any():
            self.traffic.capacity_changed(t, changed)
            self.router.invalidate()
            self.log.add(t, "disruption", None, "DisruptionUpdate", f"links_changed={int(changed.sum())}")
        self._deliver_messages(t)
        if fire_moved:
            self._cues_all(t)
        dirty, self.dirty = sorted(self.dirty), set()
        for k in dirty:
            self._decide(k, t)
        self.traffic.step(t)

    def run(self) -> "SimulationResult":
        t = 0.0
        horizon = self.sc.horizon_s
        while t < horizon:
            self.step(t)
            if all(a.terminal for a in self.agents) and not self.vehicle:
                break
            nt = self._next_time(t)
            if nt is None:
                break
            t = nt
        end = min(max(t, self.now), horizon)
        self.traffic.flush_blocked_time(end)
        return SimulationResult(self, end)


@dataclass
class SimulationResult:
    sim: Simulation
    end_time: float

    @property
    def log(self) -> EventLog:
        return self.sim.log

    @property
    def agents(self) -> list[AgentState]:
        return self.sim.agents

    def write_trajectories(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "vehicle", "link", "event"])
            for t, vid, link, ev in self.sim.traffic.trajectories:
                w.writerow([f"{t:g}", vid, link, ev])


def run(scenario: Scenario, seed: int | None = None) -> SimulationResult:
    return Simulation(scenario, seed).run()
