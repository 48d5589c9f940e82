"""Per-agent decision making: anxiety barometer, response thresholds, goal-plan tree.

The engine feeds stimuli and movement outcomes in; the agent answers with
the next destination it wants to travel to. Destinations are symbolic:
``h`` home, ``d`` dependants, ``e`` evacuation point, ``i`` in-vac point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .archetype.attitudes import AttitudeProfile

IDLE = "Idle"
INITIAL_RESPONDING = "InitialResponding"
WAITING_AT_HOME = "WaitingAtHome"
WAITING_AT_DEPS = "WaitingAtDeps"
DEFENDING = "Defending"
EVACUATING = "Evacuating"
REACHED_SAFETY = "ReachedSafety"
STRANDED = "Stranded"
TERMINAL_PHASES = (DEFENDING, REACHED_SAFETY, STRANDED)

MAX_REROUTES = 3
LEAVE_TARGETS = ("e", "i", "h")


@dataclass
class BehaviourConfig:
    optional_goal_probability: float = 0.5
    defend_probability_offset: float = 0.5
    stuck_reroute_s: float = 600.0


@dataclass
class Barometer:
    max_visual_cue: float = 0.0
    max_message: float = 0.0

    def value(self) -> float:
        return self.max_visual_cue + self.max_message


@dataclass
class PlanStep:
    goal: str  # "h", "d", "e", "i"
    optional: bool = False
    probability: float = 1.0

    def label(self) -> str:
        return f"Go({self.goal})"


@dataclass
class AgentState:
    person_id: int
    profile: AttitudeProfile
    has_dependants: bool = False
    home: tuple[float, float] = (0.0, 0.0)
    deps: tuple[float, float] | None = None
    evac: tuple[float, float] | None = None
    invac: tuple[float, float] | None = None
    location: tuple[float, float] | None = None
    barometer: Barometer = field(default_factory=Barometer)
    phase: str = IDLE
    initial_triggered: bool = False
    initial_complete: bool = False
    final_triggered: bool = False
    decision: str | None = None  # "Defend" or "Leave"
    plan: list[str] = field(default_factory=list)  # pending goals
    current_goal: str | None = None
    leave_index: int = 0
    reroute_attempts: int = 0
    trace: list[str] = field(default_factory=list)
    last_stimulus: str | None = None

    def __post_init__(self):
        if self.location is None:
            self.location = self.home

    @property
    def terminal(self) -> bool:
        return self.phase in TERMINAL_PHASES

    def coordinate(self, goal: str) -> tuple[float, float]:
        coords = {"h": self.home, "d": self.deps, "e": self.evac, "i": self.invac}
        c = coords[goal]
        if c is None:
            raise ValueError(f"agent {self.person_id} has no coordinate for Go({goal})")
        return c


def perceive(agent: AgentState, stimulus: str) -> bool:
    """Fold a cue or message into the barometer; True if the value rose."""
    v = agent.profile.value(stimulus)
    b = agent.barometer
    before = b.value()
    if stimulus.startswith("Visible"):
        b.max_visual_cue = max(b.max_visual_cue, v)
    else:
        b.max_message = max(b.max_message, v)
    if b.value() > before:
        agent.last_stimulus = stimulus
        return True
    return False


def check_thresholds(agent: AgentState) -> str | None:
    """Which response goal the current barometer triggers, if any.

    Each goal triggers once. The final goal waits for the initial plan to
    finish; when both thresholds are crossed before anything has run, the
    combined response fires.
    """
    v = agent.barometer.value()
    p = agent.profile
    initial = not agent.initial_triggered and v >= p.threshold_initial
    final = not agent.final_triggered and v >= p.threshold_final
    if initial and final:
        return "FullResponse"
    if initial:
        return "InitialResp"
    if final and agent.initial_complete:
        return "FinalResp"
    return None


def _distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def initial_response(agent: AgentState, rng, optional_probability: float = 0.5) -> tuple[str, list[str]]:
    """Choose the initial plan and resolve its optional steps.

    Returns the plan name and the goals to pursue in order.
    """
    if agent.has_dependants:
        if agent.deps is None:
            raise ValueError(f"agent {agent.person_id} has dependants but no dependants location")
        here = agent.location
        if _distance(here, agent.deps) <= _distance(here, agent.home):
            name, steps = "DepsNear", [PlanStep("d"), PlanStep("h", True, optional_probability)]
        else:
            name, steps = "DepsFar", [PlanStep("h"), PlanStep("d"), PlanStep("h", True, optional_probability)]
    else:
        name, steps = "NoDeps", [PlanStep("h", True, optional_probability)]
    goals = []
    for s in steps:
        if s.optional and rng.random() >= s.probability:
            continue
        goals.append(s.goal)
    return name, goals


def final_response(agent: AgentState, rng, offset: float = 0.5) -> str:
    """Defend or Leave. Anyone responsible for dependants leaves."""
    if agent.has_dependants:
        return "Leave"
    p_defend = max(0.0, agent.profile.threshold_final - offset)
    return "Defend" if rng.random() < p_defend else "Leave"


def leave_targets(agent: AgentState) -> tuple[str, ...]:
    return LEAVE_TARGETS


# --- trace patterns -----------------------------------------------------------
# A trace is the list of tokens an agent produced: "Go(x)" for a completed
# goal, "Go(x)!" for a failed one, and "Defend" / "Leave" for the decision.
_INITIAL_PATTERNS = {
    "A1": ["Go(h)"],
    "A5": [],
    "A3": ["Go(d)"],
    "A4": ["Go(d)", "Go(h)"],
    "A2": ["Go(h)", "Go(d)", "Go(h)"],
    "A6": ["Go(h)", "Go(d)"],
}
_WITH_DEPS = {"A2", "A3", "A4", "A6"}


def _follows(tokens: list[str], goals: list[str], failures_continue: bool) -> bool:
    """Tokens walk ``goals`` in order; a failure either ends the walk or moves on."""
    if len(tokens) > len(goals):
        return False
    for k, tok in enumerate(tokens):
        if tok.rstrip("!") != goals[k]:
            return False
        last = k == len(tokens) - 1
        if not last and (tok.endswith("!") != failures_continue):
            return False
    return True


def classify_trace(trace: list[str], has_dependants: bool, complete: bool = True) -> list[str]:
    """Behaviour patterns consistent with a trace.

    In the initial part a failed goal ends the plan. In the leave part a
    failure moves on to the next fallback target. ``complete`` says the
    initial plan ran to its end; without it, a trace cut short by the run
    horizon is accepted as a prefix of a pattern.
    """
    decision = next((t for t in trace if t in ("Leave", "Defend")), None)
    if decision is None:
        initial, after = list(trace), []
    else:
        cut = trace.index(decision)
        initial, after = trace[:cut], trace[cut + 1:]
    if decision == "Defend" and after:
        return []
    if decision == "Leave":
        if not _follows(after, [f"Go({t})" for t in LEAVE_TARGETS], failures_continue=True):
            return []
    failed = bool(initial) and initial[-1].endswith("!")
    out = []
    for name, pattern in _INITIAL_PATTERNS.items():
        if (name in _WITH_DEPS) != has_dependants:
            continue
        if not _follows(initial, pattern, failures_continue=False):
            continue
        finished = failed or len(initial) == len(pattern)
        if (complete or decision is not None) and not finished:
            continue
        if decision == "Defend" and name in _WITH_DEPS:
            continue
        out.append(name)
    return out
