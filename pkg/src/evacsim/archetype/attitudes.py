"""Attitude values per archetype and per-individual response thresholds."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrix import BEHAVIOUR_ARCHETYPES

CUES = ("VisibleSmoke", "VisibleEmbers", "VisibleFire")
MESSAGES = ("Advice", "WatchAndAct", "EmergencyWarning", "EvacuateNow")
STIMULI = CUES + MESSAGES
THRESHOLDS = ("ThresholdInitial", "ThresholdFinal")
ATTITUDES = STIMULI + THRESHOLDS
THRESHOLD_SD = 0.1
MAX_RESAMPLES = 100


@dataclass
class AttitudeMatrix:
    """Values in [0, 1]; rows follow ``ATTITUDES``, columns the seven behaviour archetypes."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(ATTITUDES), len(BEHAVIOUR_ARCHETYPES)):
            raise ValueError(f"attitude matrix must be {len(ATTITUDES)}x{len(BEHAVIOUR_ARCHETYPES)}")
        if ((self.values < 0) | (self.values > 1)).any():
            raise ValueError("attitude values must lie in [0, 1]")

    def get(self, attitude: str, archetype: str) -> float:
        return float(self.values[ATTITUDES.index(attitude), BEHAVIOUR_ARCHETYPES.index(archetype)])

    def column(self, archetype: str) -> np.ndarray:
        return self.values[:, BEHAVIOUR_ARCHETYPES.index(archetype)].copy()

    def with_message_rows(self, rows: np.ndarray) -> "AttitudeMatrix":
        v = self.values.copy()
        for i, m in enumerate(MESSAGES):
            v[ATTITUDES.index(m)] = rows[i]
        return AttitudeMatrix(v)

    def message_rows(self) -> np.ndarray:
        return np.array([self.values[ATTITUDES.index(m)] for m in MESSAGES])

    def threshold_means(self, which: str = "ThresholdInitial") -> np.ndarray:
        return self.values[ATTITUDES.index(which)].copy()


def read_attitudes_csv(path) -> AttitudeMatrix:
    """CSV: attitude,CE,CG,TD,WW,RD,DE,EI with one row per attitude."""
    vals = np.full((len(ATTITUDES), len(BEHAVIOUR_ARCHETYPES)), np.nan)
    with open(Path(path), newline="") as fh:
        for line, rec in enumerate(csv.DictReader(fh), start=2):
            name = rec["attitude"].strip()
            if name not in ATTITUDES:
                raise ValueError(f"{path}:{line}: unknown attitude {name!r}")
            vals[ATTITUDES.index(name)] = [float(rec[a]) for a in BEHAVIOUR_ARCHETYPES]
    if np.isnan(vals).any():
        raise ValueError(f"{path}: missing attitude rows")
    return AttitudeMatrix(vals)


def read_message_rows_csv(path) -> np.ndarray:
    """The four message rows only (an uncalibrated matrix)."""
    rows = {}
    with open(Path(path), newline="") as fh:
        for line, rec in enumerate(csv.DictReader(fh), start=2):
            name = rec["attitude"].strip()
            if name not in MESSAGES:
                raise ValueError(f"{path}:{line}: expected a message row, got {name!r}")
            rows[name] = [float(rec[a]) for a in BEHAVIOUR_ARCHETYPES]
    missing = [m for m in MESSAGES if m not in rows]
    if missing:
        raise ValueError(f"{path}: missing message rows {missing}")
    return np.array([rows[m] for m in MESSAGES])


def write_attitudes_csv(path, rows: dict[str, np.ndarray], digits: int = 6) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["attitude", *BEHAVIOUR_ARCHETYPES])
        for name, row in rows.items():
            w.writerow([name, *(f"{v:.{digits}f}" for v in row)])


@dataclass
class AttitudeProfile:
    archetype: str
    stimulus_values: np.ndarray  # aligned with STIMULI
    threshold_initial: float
    threshold_final: float

    def value(self, stimulus: str) -> float:
        return float(self.stimulus_values[STIMULI.index(stimulus)])


def sample_thresholds(mu_initial: float, mu_final: float, rng, sd: float = THRESHOLD_SD) -> tuple[float, float]:
    """Initial and final thresholds, each normal then clamped to [0, 1], final >= initial.

    Only the final threshold is redrawn, so the initial threshold keeps the
    distribution calibration relies on. After ``MAX_RESAMPLES`` failures
    the two are swapped.
    """
    ti = float(np.clip(rng.normal(mu_initial, sd), 0.0, 1.0))
    tf = ti
    for _ in range(MAX_RESAMPLES):
        tf = float(np.clip(rng.normal(mu_final, sd), 0.0, 1.0))
        if tf >= ti:
            return ti, tf
    return tf, ti


def assign_attitudes(archetype: str, b: AttitudeMatrix, rng, sd: float = THRESHOLD_SD) -> AttitudeProfile:
    if archetype not in BEHAVIOUR_ARCHETYPES:
        raise ValueError(f"archetype {archetype!r} has no attitudes; filter it out before simulation")
    col = b.column(archetype)
    ti, tf = sample_thresholds(col[ATTITUDES.index("ThresholdInitial")],
                               col[ATTITUDES.index("ThresholdFinal")], rng, sd)
    return AttitudeProfile(archetype, col[:len(STIMULI)].copy(), ti, tf)
