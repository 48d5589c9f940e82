"""Calibrate message attitude values so population response rates hit targets."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..stats import normal_quantile
from .attitudes import MESSAGES, THRESHOLD_SD
from .matrix import BEHAVIOUR_ARCHETYPES

DEFAULT_TARGETS = {"Advice": 0.01, "WatchAndAct": 0.05, "EmergencyWarning": 0.30, "EvacuateNow": 0.40}
_JSON_KEYS = {"advice": "Advice", "watchAndAct": "WatchAndAct",
              "emergencyWarning": "EmergencyWarning", "evacuateNow": "EvacuateNow"}


class CalibrationError(ValueError):
    pass


@dataclass
class CalibrationTargets:
    rates: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TARGETS))
    distribution: np.ndarray | None = None  # archetype shares, CE..EI
    threshold_means: np.ndarray | None = None
    sd: float = THRESHOLD_SD

    def __post_init__(self):
        for m, r in self.rates.items():
            if m not in MESSAGES:
                raise CalibrationError(f"unknown message {m!r}")
            if not 0.0 < r < 1.0:
                raise CalibrationError(f"target rate for {m} must lie in (0, 1), got {r}")
        if self.distribution is not None:
            d = np.asarray(self.distribution, dtype=float)
            if d.shape != (len(BEHAVIOUR_ARCHETYPES),) or (d < 0).any() or abs(d.sum() - 1) > 1e-9:
                raise CalibrationError("archetype distribution must be 7 non-negative shares summing to 1")
            self.distribution = d

    def rate_vector(self) -> np.ndarray:
        return np.array([self.rates[m] for m in MESSAGES])


def read_targets_json(path) -> dict[str, float]:
    raw = json.loads(Path(path).read_text())
    out = {}
    for k, v in raw.items():
        name = _JSON_KEYS.get(k, k)
        if name not in MESSAGES:
            raise CalibrationError(f"{path}: unknown message {k!r}")
        out[name] = float(v)
    return out


def archetype_distribution(archetypes) -> np.ndarray:
    """Shares of the seven behaviour archetypes among the given labels."""
    tally = Counter(archetypes)
    counts = np.array([tally[x] for x in BEHAVIOUR_ARCHETYPES], dtype=float)
    if counts.sum() == 0:
        raise CalibrationError("no behaviour archetypes to take a distribution from")
    return counts / counts.sum()


def response_probabilities(v: np.ndarray, d: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Per-archetype response probability for each message row.

    Each row of ``v`` is weighted by the archetype shares and normalised,
    giving every archetype's share of the responders; scaled by the target
    rate and divided by the archetype's own share, that is the fraction of
    the archetype that must respond.
    """
    v = np.asarray(v, dtype=float)
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(v)
    for r in range(v.shape[0]):
        weighted = v[r] * d
        total = weighted.sum()
        if total <= 0:
            raise CalibrationError(f"message {MESSAGES[r]} has no weight under the archetype distribution")
        joint = weighted / total * rates[r]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[r] = np.where(d > 0, joint / d, 0.0)
    return out


def calibrate(v: np.ndarray, d: np.ndarray, rates: np.ndarray, tau: np.ndarray,
              sd: float = THRESHOLD_SD) -> np.ndarray:
    """Calibrated message rows: the threshold quantile matching each response probability.

    A zero probability maps to attitude 0 (no response). Probabilities at or
    above 1 are capped just below 1 and the resulting value clamped to [0, 1].
    """
    v = np.asarray(v, dtype=float)
    if ((v < 0) | (v > 1)).any():
        raise CalibrationError("uncalibrated values must lie in [0, 1]")
    p = response_probabilities(v, d, np.asarray(rates, dtype=float))
    u = np.zeros_like(p)
    for r in range(p.shape[0]):
        for c in range(p.shape[1]):
            if p[r, c] <= 0:
                continue
            q = normal_quantile(min(p[r, c], 1 - 1e-12), float(tau[c]), sd)
            u[r, c] = min(max(q, 0.0), 1.0)
    return u


def verify_response_rates(profiles, message: str) -> float:
    """Fraction of receivers whose initial threshold the message alone reaches."""
    profiles = list(profiles)
    if not profiles:
        raise ValueError("empty population")
    hits = sum(1 for p in profiles if p.value(message) >= p.threshold_initial)
    return hits / len(profiles)
