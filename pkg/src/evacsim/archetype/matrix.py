"""Archetype likelihoods by demographic signature, and their assignment."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

ARCHETYPES = ("CE", "CG", "TD", "WW", "RD", "DE", "EI", "UT")
BEHAVIOUR_ARCHETYPES = ARCHETYPES[:7]
ARCHETYPE_NAMES = {
    "CE": "Considered Evacuator",
    "CG": "Community Guided",
    "TD": "Threat Denier",
    "WW": "Worried Waverer",
    "RD": "Responsibility Denier",
    "DE": "Dependent Evacuator",
    "EI": "Experienced Independent",
    "UT": "Unknown Type",
}
AGE_GROUPS = ("18-24", "25-34", "35-44", "45-54", "55-64", "65-74", "75+")
GENDERS = ("Male", "Female")
HH_TYPES = ("SingleNoDeps", "SingleWithDeps", "CoupleNoDeps", "CoupleWithDeps", "Group")
ADULT_AGE = 18

_HH_ALIASES = {
    "singlenodeps": "SingleNoDeps", "singlenodependants": "SingleNoDeps",
    "singlewithoutdependants": "SingleNoDeps", "single": "SingleNoDeps",
    "singlewithdeps": "SingleWithDeps", "singlewithdependants": "SingleWithDeps",
    "couplenodeps": "CoupleNoDeps", "couplenodependants": "CoupleNoDeps",
    "couplewithoutdependants": "CoupleNoDeps", "couple": "CoupleNoDeps",
    "couplewithdeps": "CoupleWithDeps", "couplewithdependants": "CoupleWithDeps",
    "group": "Group", "grouphousehold": "Group",
}


@dataclass(frozen=True, order=True)
class Signature:
    age_group: str
    gender: str
    hh_type: str

    def __post_init__(self):
        if self.age_group not in AGE_GROUPS:
            raise ValueError(f"unknown age group {self.age_group!r}")
        if self.gender not in GENDERS:
            raise ValueError(f"unknown gender {self.gender!r}")
        if self.hh_type not in HH_TYPES:
            raise ValueError(f"unknown household type {self.hh_type!r}")


def all_signatures() -> list[Signature]:
    return [Signature(a, g, h) for a in AGE_GROUPS for g in GENDERS for h in HH_TYPES]


def age_group_of(age: int) -> str | None:
    if age < ADULT_AGE:
        return None
    for label, upper in zip(AGE_GROUPS, (24, 34, 44, 54, 64, 74)):
        if age <= upper:
            return label
    return "75+"


def parse_signature(age_group: str, gender: str, hh_type: str) -> Signature:
    age = age_group.strip().replace("\u2013", "-").replace("\u2014", "-")
    g = gender.strip().capitalize()
    key = re.sub(r"[^a-z]", "", hh_type.lower())
    if key not in _HH_ALIASES:
        raise ValueError(f"unknown household type {hh_type!r}")
    return Signature(age, g, _HH_ALIASES[key])


class AssignmentError(ValueError):
    """A signature row has no probability mass to normalise."""


@dataclass
class ProbabilityMatrix:
    """Rows of raw likelihoods; NaN marks an empty cell. Units cancel on normalisation."""

    rows: dict[Signature, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for sig, row in list(self.rows.items()):
            row = np.asarray(row, dtype=float)
            if row.shape != (len(ARCHETYPES),):
                raise ValueError(f"row for {sig} must have {len(ARCHETYPES)} cells")
            self.rows[sig] = row

    def filled(self, sig: Signature) -> np.ndarray:
        """Empty cells as 0; an all-empty row becomes certain UT."""
        row = self.rows[sig]
        if np.isnan(row).all():
            out = np.zeros(len(ARCHETYPES))
            out[ARCHETYPES.index("UT")] = 1.0
            return out
        return np.nan_to_num(row, nan=0.0)

    def probabilities(self, sig: Signature) -> np.ndarray:
        row = self.filled(sig)
        total = row.sum()
        if total <= 0:
            raise AssignmentError(f"signature {sig} has no probability mass")
        return row / total


def _cell(text: str) -> float:
    text = text.strip()
    if text in ("", "-", "NA", "na"):
        return math.nan
    return float(text)


def load_probability_matrix(path) -> ProbabilityMatrix:
    """CSV with columns age_group,gender,hh_type,CE,CG,TD,WW,RD,DE,EI,UT."""
    rows: dict[Signature, np.ndarray] = {}
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        for line, rec in enumerate(reader, start=2):
            try:
                sig = parse_signature(rec["age_group"], rec["gender"], rec["hh_type"])
                vals = np.array([_cell(rec.get(a) or "") for a in ARCHETYPES])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
            if (vals[~np.isnan(vals)] < 0).any():
                raise ValueError(f"{path}:{line}: negative likelihood")
            if sig in rows:
                raise ValueError(f"{path}:{line}: duplicate signature {sig}")
            rows[sig] = vals
    missing = set(all_signatures()) - set(rows)
    if missing:
        raise ValueError(f"{path}: {len(missing)} signatures missing, e.g. {sorted(missing)[0]}")
    return ProbabilityMatrix(rows)


def write_probability_matrix(path, m: ProbabilityMatrix) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["age_group", "gender", "hh_type", *ARCHETYPES])
        for sig in all_signatures():
            row = m.rows[sig]
            w.writerow([sig.age_group, sig.gender, sig.hh_type,
                        *("" if math.isnan(v) else f"{v:g}" for v in row)])


def draw_index(cumulative: np.ndarray, r):
    """First index whose cumulative probability exceeds ``r``.

    Rounding can leave the last cumulative value a hair under 1; a draw
    beyond it goes to the last column with mass.
    """
    idx = np.searchsorted(cumulative, r, side="right")
    last = int(np.flatnonzero(np.diff(np.concatenate([[0.0], cumulative])) > 0)[-1])
    return np.minimum(idx, last)


def person_rng(seed: int, person_id: int, stream: int = 0) -> np.random.Generator:
    """Independent generator per (seed, person, stream); order of processing does not matter."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(person_id), int(stream)]))


ARCHETYPE_STREAM = 1


def assign_archetype(sig: Signature | None, m: ProbabilityMatrix, rng) -> str | None:
    if sig is None:
        return None
    cum = np.cumsum(m.probabilities(sig))
    return ARCHETYPES[int(draw_index(cum, rng.random()))]


def assign_archetypes(signatures, m: ProbabilityMatrix, seed: int, person_ids=None) -> list[str | None]:
    """One archetype per individual; ``None`` signatures (under 18) get none."""
    signatures = list(signatures)
    ids = range(len(signatures)) if person_ids is None else person_ids
    return [assign_archetype(sig, m, person_rng(seed, pid, ARCHETYPE_STREAM))
            for sig, pid in zip(signatures, ids)]


def household_type(person, household, families) -> str:
    """Map a synthetic person's household situation onto the five survey types.

    Dependants are children under 15 or dependent students in the person's
    own family.
    """
    if household.composition == "Group":
        return "Group"
    if household.composition == "LonePerson" or person.family_id < 0:
        return "SingleNoDeps"
    fam = families[person.family_id]
    is_parent = any(p.id == person.id for p in fam.parents)
    has_deps = any(c.relationship in ("U15Child", "Student") for c in fam.children)
    if is_parent and len(fam.parents) == 2:
        return "CoupleWithDeps" if has_deps else "CoupleNoDeps"
    if is_parent:
        return "SingleWithDeps" if has_deps else "SingleNoDeps"
    return "SingleNoDeps"


def signature_of(person, household, families) -> Signature | None:
    group = age_group_of(person.age_years)
    if group is None:
        return None
    return Signature(group, person.gender, household_type(person, household, families))
