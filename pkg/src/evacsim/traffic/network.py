"""Directed road network with per-link state."""

from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

VEHICLE_LENGTH_M = 7.5


@dataclass
class RoadNetwork:
    node_ids: list[str]
    node_xy: np.ndarray  # (n, 2)
    link_ids: list[str]
    link_from: np.ndarray  # node indices
    link_to: np.ndarray
    length: np.ndarray  # m
    free_speed: np.ndarray  # m/s
    capacity: np.ndarray  # veh/h, base
    lanes: np.ndarray
    # mutable state
    current_capacity: np.ndarray = field(init=False)
    fire_penalty: np.ndarray = field(init=False)
    closure_penalty: np.ndarray = field(init=False)
    out_links: list[list[int]] = field(init=False)
    in_links: list[list[int]] = field(init=False)

    def __post_init__(self):
        self.node_xy = np.asarray(self.node_xy, dtype=float).reshape(-1, 2)
        for name in ("link_from", "link_to"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        for name in ("length", "free_speed", "capacity", "lanes"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if (self.length <= 0).any():
            raise ValueError(f"link {self.link_ids[int(np.argmax(self.length <= 0))]} has non-positive length")
        if (self.free_speed <= 0).any():
            raise ValueError(f"link {self.link_ids[int(np.argmax(self.free_speed <= 0))]} has non-positive speed")
        self.current_capacity = self.capacity.copy()
        self.fire_penalty = np.ones(self.n_links)
        self.closure_penalty = np.ones(self.n_links)
        self.out_links = [[] for _ in range(self.n_nodes)]
        self.in_links = [[] for _ in range(self.n_nodes)]
        for i in range(self.n_links):
            self.out_links[self.link_from[i]].append(i)
            self.in_links[self.link_to[i]].append(i)
        self._node_index = {nid: i for i, nid in enumerate(self.node_ids)}
        self._link_index = {lid: i for i, lid in enumerate(self.link_ids)}

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_links(self) -> int:
        return len(self.link_ids)

    def node_index(self, node_id: str) -> int:
        return self._node_index[node_id]

    def link_index(self, link_id: str) -> int:
        return self._link_index[link_id]

    def has_link(self, link_id: str) -> bool:
        return link_id in self._link_index

    @property
    def storage(self) -> np.ndarray:
        return np.maximum(1, np.floor(self.length * self.lanes / VEHICLE_LENGTH_M)).astype(np.int64)

    @property
    def free_flow_time(self) -> np.ndarray:
        return self.length / self.free_speed

    @property
    def penalty(self) -> np.ndarray:
        return self.fire_penalty * self.closure_penalty

    def link_cost(self) -> np.ndarray:
        return self.free_flow_time * self.penalty

    def link_segments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.node_xy[self.link_from], self.node_xy[self.link_to]

    def nearest_node(self, xy) -> int:
        d = np.hypot(self.node_xy[:, 0] - xy[0], self.node_xy[:, 1] - xy[1])
        return int(np.argmin(d))

    def nearest_nodes(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        out = np.empty(len(xy), dtype=np.int64)
        for start in range(0, len(xy), 512):
            chunk = xy[start:start + 512]
            d = ((chunk[:, None, :] - self.node_xy[None, :, :]) ** 2).sum(axis=2)
            out[start:start + 512] = np.argmin(d, axis=1)
        return out

    def reset_state(self) -> None:
        self.current_capacity = self.capacity.copy()
        self.fire_penalty[:] = 1.0
        self.closure_penalty[:] = 1.0

    def _reach(self, start: int, forward: bool) -> set[int]:
        seen = {start}
        todo = deque([start])
        adj, end = (self.out_links, self.link_to) if forward else (self.in_links, self.link_from)
        while todo:
            n = todo.popleft()
            for li in adj[n]:
                m = int(end[li])
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        return seen

    def strongly_connected(self) -> bool:
        if self.n_nodes == 0:
            return True
        return len(self._reach(0, True)) == self.n_nodes == len(self._reach(0, False))


def load_network(nodes_csv, links_csv) -> RoadNetwork:
    """Read nodes.csv (id,x,y) and links.csv (id,from,to,length_m,freespeed_ms,capacity_vph,lanes)."""
    with open(Path(nodes_csv), newline="") as fh:
        nodes = list(csv.DictReader(fh))
    node_ids = [r["id"] for r in nodes]
    if len(set(node_ids)) != len(node_ids):
        raise ValueError(f"{nodes_csv}: duplicate node ids")
    index = {nid: i for i, nid in enumerate(node_ids)}
    xy = np.array([[float(r["x"]), float(r["y"])] for r in nodes]).reshape(-1, 2)
    with open(Path(links_csv), newline="") as fh:
        links = list(csv.DictReader(fh))
    try:
        frm = [index[r["from"]] for r in links]
        to = [index[r["to"]] for r in links]
    except KeyError as exc:
        raise ValueError(f"{links_csv}: link references unknown node {exc}") from None
    net = RoadNetwork(
        node_ids, xy, [r["id"] for r in links], frm, to,
        [float(r["length_m"]) for r in links],
        [float(r["freespeed_ms"]) for r in links],
        [float(r["capacity_vph"]) for r in links],
        [float(r.get("lanes") or 1) for r in links],
    )
    if not net.strongly_connected():
        log.warning("road network %s is not strongly connected", links_csv)
    return net


def write_network(net: RoadNetwork, nodes_csv, links_csv) -> None:
    with open(nodes_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y"])
        for nid, (x, y) in zip(net.node_ids, net.node_xy):
            w.writerow([nid, f"{x:.1f}", f"{y:.1f}"])
    with open(links_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "from", "to", "length_m", "freespeed_ms", "capacity_vph", "lanes"])
        for i, lid in enumerate(net.link_ids):
            w.writerow([lid, net.node_ids[net.link_from[i]], net.node_ids[net.link_to[i]],
                        f"{net.length[i]:.1f}", f"{net.free_speed[i]:g}", f"{net.capacity[i]:g}",
                        f"{net.lanes[i]:g}"])


def euclidean_length(net_xy: np.ndarray, a: int, b: int) -> float:
    return math.hypot(*(net_xy[b] - net_xy[a]))
