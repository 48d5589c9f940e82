"""Planar geometry on polygons given as lists of rings.

A polygon is a sequence of rings, outer ring first, holes after; each ring is
an (n, 2) array of vertices in projected metres. Rings may or may not repeat
the first vertex at the end. Containment uses the even-odd rule across all
rings, so holes fall out naturally.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

Ring = np.ndarray
Polygon = Sequence[Ring]


def as_ring(coords) -> Ring:
    ring = np.asarray(coords, dtype=float).reshape(-1, 2)
    if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]
    return ring


def is_degenerate(polygon: Polygon) -> bool:
    return len(polygon) == 0 or len(polygon[0]) < 3


def _edges(polygon: Polygon) -> tuple[np.ndarray, np.ndarray]:
    starts, ends = [], []
    for ring in polygon:
        if len(ring) < 2:
            continue
        starts.append(ring)
        ends.append(np.roll(ring, -1, axis=0))
    if not starts:
        return np.empty((0, 2)), np.empty((0, 2))
    return np.concatenate(starts), np.concatenate(ends)


def points_in_polygon(points, polygon: Polygon) -> np.ndarray:
    """Even-odd ray casting for many points at once. Boundary points count as inside."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if is_degenerate(polygon):
        return np.zeros(len(pts), dtype=bool)
    a, b = _edges(polygon)
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddles = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = straddles & (px < x_cross)
    inside = (np.count_nonzero(crossings, axis=1) % 2) == 1
    on_edge = points_polygon_boundary_distance(pts, polygon) <= 1e-9
    return inside | on_edge


def point_in_polygon(point, polygon: Polygon) -> bool:
    return bool(points_in_polygon([point], polygon)[0])


def points_polygon_boundary_distance(points, polygon: Polygon) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    a, b = _edges(polygon)
    if len(a) == 0:
        return np.full(len(pts), np.inf)
    d = b - a
    len2 = np.einsum("ij,ij->i", d, d)
    len2 = np.where(len2 == 0.0, 1.0, len2)
    rel = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("nij,ij->ni", rel, d) / len2, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.hypot(pts[:, None, 0] - closest[:, :, 0], pts[:, None, 1] - closest[:, :, 1])
    return dist.min(axis=1)


def points_polygon_distance(points, polygon: Polygon) -> np.ndarray:
    """Distance from each point to the polygon; zero for points inside it."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if is_degenerate(polygon):
        return np.full(len(pts), np.inf)
    dist = points_polygon_boundary_distance(pts, polygon)
    a, b = _edges(polygon)
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddles = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    inside = (np.count_nonzero(straddles & (px < x_cross), axis=1) % 2) == 1
    return np.where(inside, 0.0, dist)


def points_multipolygon_distance(points, polygons: Iterable[Polygon]) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    best = np.full(len(pts), np.inf)
    for poly in polygons:
        if is_degenerate(poly):
            continue
        best = np.minimum(best, points_polygon_distance(pts, poly))
    return best


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r) -> bool:
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test, touching and collinear overlap included."""
    o1 = _orient(p1, p2, q1)
    o2 = _orient(p1, p2, q2)
    o3 = _orient(q1, q2, p1)
    o4 = _orient(q1, q2, p2)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True
    if o1 == 0 and _on_segment(p1, q1, p2):
        return True
    if o2 == 0 and _on_segment(p1, q2, p2):
        return True
    if o3 == 0 and _on_segment(q1, p1, q2):
        return True
    if o4 == 0 and _on_segment(q1, p2, q2):
        return True
    return False


def segments_intersect_polygon(starts, ends, polygon: Polygon) -> np.ndarray:
    """For each segment (starts[i], ends[i]) report whether it touches the polygon.

    A segment hits the polygon if either endpoint is inside or it crosses any
    ring edge; the endpoint test alone would miss links that pass straight
    through a fire front.
    """
    s = np.asarray(starts, dtype=float).reshape(-1, 2)
    e = np.asarray(ends, dtype=float).reshape(-1, 2)
    if is_degenerate(polygon) or len(s) == 0:
        return np.zeros(len(s), dtype=bool)
    hit = points_in_polygon(s, polygon) | points_in_polygon(e, polygon)
    a, b = _edges(polygon)

    def orient(px, py, qx, qy, rx, ry):
        return (qx - px) * (ry - py) - (qy - py) * (rx - px)

    sx, sy = s[:, 0:1], s[:, 1:2]
    ex, ey = e[:, 0:1], e[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    o1 = orient(sx, sy, ex, ey, ax, ay)
    o2 = orient(sx, sy, ex, ey, bx, by)
    o3 = orient(ax, ay, bx, by, sx, sy)
    o4 = orient(ax, ay, bx, by, ex, ey)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    hit |= proper.any(axis=1)
    # touching/collinear cases are rare; settle them exactly
    touchy = ~hit & ((o1 == 0) | (o2 == 0) | (o3 == 0) | (o4 == 0)).any(axis=1)
    for i in np.flatnonzero(touchy):
        for j in range(len(a)):
            if segments_intersect(s[i], e[i], a[j], b[j]):
                hit[i] = True
                break
    return hit


def random_point_in_disc(rng: np.random.Generator, centre, radius: float) -> tuple[float, float]:
    r = radius * np.sqrt(rng.random())
    theta = 2.0 * np.pi * rng.random()
    return float(centre[0] + r * np.cos(theta)), float(centre[1] + r * np.sin(theta))
