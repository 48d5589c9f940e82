"""Mesoscopic queue model: links are FIFO queues with free-flow time, flow capacity, and storage."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .network import RoadNetwork

WAITING = "waiting"
MOVING = "moving"
ARRIVED = "arrived"
STRANDED = "stranded"
PARKED = "parked"


@dataclass
class Vehicle:
    id: int
    agent_id: int
    links: list[int]
    origin: int
    destination: int
    depart_time: float
    pos: int = -1  # index into links; -1 while waiting to enter the first link
    exit_time: float = 0.0
    status: str = WAITING
    entry_seq: int = 0  # bumps on every link entry or reroute; stale timers check it
    blocked_since: float | None = None
    tag: object = None

    @property
    def link(self) -> int | None:
        return self.links[self.pos] if self.pos >= 0 else None

    def next_link(self) -> int | None:
        k = self.pos + 1
        return self.links[k] if k < len(self.links) else None


# Handler signatures used by the owner of the traffic model:
#   on_thwart(vehicle, now, reason) -> new link list from the vehicle's next node,
#       or STRANDED / PARKED to take the vehicle off the road
#   on_arrive(vehicle, now) -> None
ThwartHandler = Callable[[Vehicle, float, str], "list[int] | str"]


@dataclass
class TrafficCounters:
    departed: int = 0
    arrived: int = 0
    stranded: int = 0
    parked: int = 0

    def conserved(self, en_route: int) -> bool:
        return self.departed == self.arrived + self.stranded + self.parked + en_route


class QueueTraffic:
    def __init__(self, net: RoadNetwork, stuck_after_s: float = 600.0,
                 on_thwart: ThwartHandler | None = None,
                 on_arrive: Callable[[Vehicle, float], None] | None = None,
                 record_trajectories: bool = True):
        self.net = net
        self.stuck_after_s = stuck_after_s
        self.on_thwart = on_thwart or (lambda v, t, r: STRANDED)
        self.on_arrive = on_arrive or (lambda v, t: None)
        self.record = record_trajectories
        n = net.n_links
        self.queues: list[deque[Vehicle]] = [deque() for _ in range(n)]
        self.buffers: list[deque[Vehicle]] = [deque() for _ in range(n)]
        self.storage = net.storage
        self.fft = net.free_flow_time
        self.credit = np.array([max(1.0, c / 3600.0) for c in net.current_capacity])
        self.credit_time = np.zeros(n)
        self.blocked_time = np.zeros(n)
        self.delay_time = np.zeros(n)  # time held on the link beyond its free-flow time
        self.vehicles: dict[int, Vehicle] = {}
        self.counters = TrafficCounters()
        self.trajectories: list[tuple[float, int, str, str]] = []
        self._wake: list[tuple[float, int]] = []
        self._stuck: list[tuple[float, int, int]] = []
        self._next_vid = 0

    # -- bookkeeping ------------------------------------------------------
    def _traj(self, t, v: Vehicle, link: int, event: str):
        if self.record:
            self.trajectories.append((t, v.id, self.net.link_ids[link], event))

    def _schedule(self, t: float, link: int):
        heapq.heappush(self._wake, (t, link))

    def _arm_stuck(self, v: Vehicle, t: float):
        heapq.heappush(self._stuck, (t + self.stuck_after_s, v.id, v.entry_seq))

    def _refresh_credit(self, link: int, now: float) -> float:
        rate = self.net.current_capacity[link] / 3600.0
        cap = max(1.0, rate)
        dt = now - self.credit_time[link]
        if dt > 0:
            self.credit[link] = min(cap, self.credit[link] + rate * dt)
            self.credit_time[link] = now
        return self.credit[link]

    def en_route(self) -> int:
        return sum(1 for v in self.vehicles.values() if v.status in (WAITING, MOVING))

    def occupancy(self, link: int) -> int:
        return len(self.queues[link])

    def passable(self, link: int) -> bool:
        return self.net.penalty[link] <= 1.0

    def next_event_time(self) -> float | None:
        times = []
        if self._wake:
            times.append(self._wake[0][0])
        if self._stuck:
            times.append(self._stuck[0][0])
        return min(times) if times else None

    def capacity_changed(self, now: float, mask: np.ndarray) -> None:
        """Settle accrued credit at the old capacity before a capacity change takes effect."""
        for link in np.flatnonzero(mask):
            rate = self.net.current_capacity[link] / 3600.0
            self.credit[link] = min(self.credit[link], max(1.0, rate))
            self.credit_time[link] = now
            self._schedule(now, int(link))

    # -- trips ------------------------------------------------------------
    def depart(self, agent_id: int, links: list[int], origin: int, destination: int, now: float,
               tag=None) -> Vehicle:
        v = Vehicle(self._next_vid, agent_id, list(links), origin, destination, now, tag=tag)
        self._next_vid += 1
        self.vehicles[v.id] = v
        self.counters.departed += 1
        if not v.links:
            self._finish(v, now)
            return v
        self.buffers[v.links[0]].append(v)
        self._arm_stuck(v, now)
        self._schedule(now, v.links[0])
        return v

    def _finish(self, v: Vehicle, now: float):
        v.status = ARRIVED
        self.counters.arrived += 1
        if v.link is not None:
            self._traj(now, v, v.link, "arrive")
        self.on_arrive(v, now)

    def _remove(self, v: Vehicle, now: float, status: str):
        if v.pos >= 0:
            q = self.queues[v.link]
            if v.blocked_since is not None:
                self.blocked_time[v.link] += now - v.blocked_since
                v.blocked_since = None
            q.remove(v)
            self._schedule(now, v.link)
            self._wake_upstream(v.link, now)
        else:
            self.buffers[v.links[0]].remove(v)
        v.status = status
        if status == STRANDED:
            self.counters.stranded += 1
        elif status == PARKED:
            self.counters.parked += 1
        else:
            raise ValueError(f"cannot take a vehicle off the road as {status!r}")

    def _wake_upstream(self, link: int, now: float):
        node = self.net.link_from[link]
        for li in self.net.in_links[node]:
            if self.queues[li]:
                self._schedule(now, li)

    def _thwart(self, v: Vehicle, now: float, reason: str) -> bool:
        """Ask the owner for a new path. Returns True if the vehicle is still travelling."""
        new = self.on_thwart(v, now, reason)
        v.entry_seq += 1
        if isinstance(new, str):
            self._remove(v, now, new)
            return False
        if v.pos < 0:
            old_first = v.links[0]
            v.links = list(new)
            if not v.links:
                self.buffers[old_first].remove(v)
                self._finish(v, now)
                return False
            if v.links[0] != old_first:
                self.buffers[old_first].remove(v)
                self.buffers[v.links[0]].append(v)
            self._schedule(now + 1, v.links[0])
        else:
            v.links = v.links[:v.pos + 1] + list(new)
            self._schedule(now + 1, v.link)
        self._arm_stuck(v, now)
        return True

    # -- stepping ---------------------------------------------------------
    def step(self, now: float) -> None:
        due = set()
        while self._wake and self._wake[0][0] <= now:
            due.add(heapq.heappop(self._wake)[1])
        while self._stuck and self._stuck[0][0] <= now:
            _, vid, seq = heapq.heappop(self._stuck)
            v = self.vehicles.get(vid)
            if v is None or v.status not in (WAITING, MOVING) or v.entry_seq != seq:
                continue
            link = v.link if v.link is not None else v.links[0]
            if self._thwart(v, now, "congestion"):
                due.add(v.link if v.link is not None else v.links[0])
            else:
                due.add(link)
        for link in sorted(due):
            self._flush_link(link, now)
        for link in sorted(due):
            self._admit_departures(link, now)

    def _flush_link(self, link: int, now: float):
        q = self.queues[link]
        while q:
            v = q[0]
            if v.exit_time > now:
                self._schedule(v.exit_time, link)
                return
            if self._refresh_credit(link, now) < 1.0:
                rate = self.net.current_capacity[link] / 3600.0
                if rate > 0:
                    self._schedule(now + max(1.0, np.ceil((1.0 - self.credit[link]) / rate)), link)
                return
            nxt = v.next_link()
            if nxt is None:
                self._leave(v, link, now)
                self._finish(v, now)
                continue
            if not self.passable(nxt):
                if not self._thwart(v, now, "blocked"):
                    continue
                return
            if len(self.queues[nxt]) >= self.storage[nxt]:
                if v.blocked_since is None:
                    v.blocked_since = now
                    self._traj(now, v, link, "blocked")
                self._schedule(now + 1, link)
                return
            self._leave(v, link, now)
            self._enter(v, nxt, now)

    def _leave(self, v: Vehicle, link: int, now: float):
        self.queues[link].popleft()
        self.credit[link] -= 1.0
        self.delay_time[link] += max(0.0, now - v.exit_time)
        if v.blocked_since is not None:
            self.blocked_time[link] += now - v.blocked_since
            v.blocked_since = None
        self._traj(now, v, link, "leave")
        # space freed: upstream heads and waiting departures may now move
        self._wake_upstream(link, now)
        if self.buffers[link]:
            self._schedule(now, link)

    def _enter(self, v: Vehicle, link: int, now: float):
        v.pos += 1
        assert v.links[v.pos] == link
        v.status = MOVING
        v.exit_time = now + self.fft[link]
        v.entry_seq += 1
        self.queues[link].append(v)
        self._traj(now, v, link, "enter")
        if len(self.queues[link]) == 1:
            self._schedule(v.exit_time, link)
        heapq.heappush(self._stuck, (v.exit_time + self.stuck_after_s, v.id, v.entry_seq))

    def _admit_departures(self, link: int, now: float):
        buf = self.buffers[link]
        while buf:
            v = buf[0]
            if not self.passable(link):
                if self._thwart(v, now, "blocked"):
                    if v.links[0] == link:
                        return
                continue
            if len(self.queues[link]) >= self.storage[link]:
                self._schedule(now + 1, link)
                return
            buf.popleft()
            self._enter(v, link, now)

    def flush_blocked_time(self, now: float) -> None:
        for q in self.queues:
            for v in q:
                if v.blocked_since is not None:
                    self.blocked_time[v.link] += now - v.blocked_since
                    v.blocked_since = now
