"""Day plans from per-timestep activity distributions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

DAY_S = 86_400
HOME = "home"


@dataclass
class Activity:
    kind: str
    start_s: float
    duration_s: float
    location: tuple[float, float] | None = None

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass
class DayPlan:
    activities: list[Activity]
    # the activity owning each timestep
    steps: list[str] = field(default_factory=list)

    def kinds(self) -> list[str]:
        return [a.kind for a in self.activities]

    def activity_at(self, t: float) -> Activity:
        for a in self.activities:
            if a.start_s <= t < a.end_s:
                return a
        return self.activities[-1]


def _steps(duration_s: float, step_s: float) -> int:
    return max(1, math.ceil(duration_s / step_s - 1e-9))


def _usable(kinds, durations, step_s, n_steps) -> list[bool]:
    ok = []
    for k in kinds:
        if k != HOME and durations[k] > n_steps * step_s:
            log.warning("activity %r lasts %ss, longer than the day; rejected", k, durations[k])
            ok.append(False)
        else:
            ok.append(True)
    return ok


def start_probabilities(occupancy: dict[str, np.ndarray], durations: dict[str, float],
                        step_s: float = 3600.0) -> dict[str, np.ndarray]:
    """Per-timestep start probabilities whose plans reproduce ``occupancy`` on average.

    ``occupancy[a][t]`` is the share of people doing ``a`` during step ``t``.
    A person carried over from an earlier start cannot start anything new,
    so starts are scaled by the share of people who are free at each step.
    Home is the residual and is left implicit.
    """
    kinds = [k for k in occupancy if k != HOME]
    n = len(next(iter(occupancy.values())))
    carried = {k: np.zeros(n + 1) for k in kinds}
    starts = {k: np.zeros(n) for k in kinds}
    for t in range(n):
        busy = sum(carried[k][t] for k in kinds)
        free = max(1.0 - busy, 0.0)
        if free <= 1e-12:
            continue
        row = np.array([max(occupancy[k][t] - carried[k][t], 0.0) / free for k in kinds])
        if row.sum() > 1.0:
            row /= row.sum()
        for k, s in zip(kinds, row):
            starts[k][t] = s
            d = _steps(durations[k], step_s)
            carried[k][t + 1:t + d] += free * s
    return starts


def generate_day_plan(start_probs: dict[str, np.ndarray], durations: dict[str, float], rng,
                      step_s: float = 3600.0, home_duration_s: float | None = None) -> DayPlan:
    """Draw one candidate per timestep, then let each chosen activity run its duration.

    Step-level procedure: a candidate activity is drawn at every step from the
    start probabilities (the unassigned remainder is home). Walking forward
    through the steps, the candidate of a step is adopted only when the
    previously adopted activity has no duration left. The first and last
    steps are home. Each block after the first starts at a uniform time
    inside its first step.
    """
    kinds = [k for k in start_probs if k != HOME]
    n = len(next(iter(start_probs.values()))) if start_probs else int(DAY_S // step_s)
    ok = _usable(kinds, durations, step_s, n)
    kinds = [k for k, good in zip(kinds, ok) if good]
    home_steps = 1 if home_duration_s is None else _steps(home_duration_s, step_s)
    rows = np.array([np.asarray(start_probs[k], dtype=float) for k in kinds]).reshape(len(kinds), n)
    if (rows.sum(axis=0) > 1 + 1e-9).any():
        raise ValueError("start probabilities exceed 1 at some timestep")
    u = rng.random(n)
    cum = np.cumsum(rows, axis=0) if len(kinds) else np.zeros((0, n))
    candidates = []
    for t in range(n):
        idx = int(np.searchsorted(cum[:, t], u[t], side="right")) if len(kinds) else 0
        candidates.append(kinds[idx] if idx < len(kinds) else HOME)
    candidates[0] = HOME
    candidates[-1] = HOME

    schedule: list[str] = []
    current, remaining = None, 0
    for t in range(n):
        if remaining <= 0 or t == n - 1:
            current = candidates[t]
            remaining = home_steps if current == HOME else _steps(durations[current], step_s)
        schedule.append(current)
        remaining -= 1

    blocks = []
    for t, kind in enumerate(schedule):
        if blocks and blocks[-1][0] == kind:
            continue
        blocks.append((kind, t))
    starts = [0.0] + [(t + rng.random()) * step_s for _, t in blocks[1:]]
    day_end = n * step_s
    acts = []
    for i, (kind, _) in enumerate(blocks):
        end = starts[i + 1] if i + 1 < len(blocks) else day_end
        acts.append(Activity(kind, starts[i], end - starts[i]))
    return DayPlan(acts, schedule)


def occupancy_matrix(plans: list[DayPlan], kinds: list[str]) -> np.ndarray:
    """Share of plans whose timestep is owned by each activity."""
    n = len(plans[0].steps)
    out = np.zeros((len(kinds), n))
    for plan in plans:
        for t, k in enumerate(plan.steps):
            out[kinds.index(k), t] += 1
    return out / len(plans)


def assign_plan_locations(plan: DayPlan, home, localities, rng, min_distance: float = 500.0) -> DayPlan:
    """Anchor home blocks at ``home`` and choose other locations in visiting order."""
    from .locations import choose_activity_location

    current = tuple(home)
    for a in plan.activities:
        if a.kind == HOME:
            a.location = tuple(home)
        else:
            a.location = tuple(choose_activity_location(current, localities, rng, min_distance))
        current = a.location
    return plan
