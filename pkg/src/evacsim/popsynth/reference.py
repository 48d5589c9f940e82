"""Generate a plausible ground-truth population to derive fixture marginals from.

The generator follows the same structural rules the synthesiser assumes, so
marginals tabulated from its output are internally consistent. It stands in
for census tables, which cannot be shipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .categories import AGE_BOUNDS, GENDERS, MAX_AGE, HouseholdsMarginal, PersonsMarginal
from .synthesis import (
    MAX_CHILDREN, Family, Household, Person, RegionPopulation, compatible, derive_composition,
)

_HH_KINDS = ("LonePerson", "Group", "CoupleNoChildren", "CoupleWithChildren", "OneParent", "OtherFamily")


@dataclass
class ReferenceShape:
    """Household mix and age tendencies of the generated region."""

    household_mix: tuple[float, ...] = (0.26, 0.04, 0.29, 0.27, 0.115, 0.025)
    second_family_prob: float = 0.04
    third_family_prob: float = 0.1
    relative_prob: float = 0.08
    # age-band weights (bands 1..7) for the older member of a couple
    couple_band_weights: tuple[float, ...] = (0.03, 0.2, 0.26, 0.27, 0.18, 0.05, 0.01)
    parent_band_weights: tuple[float, ...] = (0.03, 0.45, 0.42, 0.09, 0.01, 0.0, 0.0)
    lone_band_weights: tuple[float, ...] = (0.06, 0.12, 0.16, 0.25, 0.28, 0.12, 0.01)
    group_band_weights: tuple[float, ...] = (0.45, 0.3, 0.12, 0.08, 0.04, 0.01, 0.0)


class _Gen:
    def __init__(self, rng, shape: ReferenceShape):
        self.rng = rng
        self.shape = shape
        self.pid = 0
        self.fid = 0
        self.persons: list[Person] = []
        self.families: dict[int, Family] = {}

    def person(self, band, gender, rel) -> Person:
        lo, hi = AGE_BOUNDS[band]
        p = Person(self.pid, band, gender, rel, age_years=int(self.rng.integers(lo, hi + 1)))
        self.pid += 1
        self.persons.append(p)
        return p

    def band(self, weights, offset=1) -> int:
        w = np.asarray(weights, dtype=float)
        return offset + int(self.rng.choice(len(w), p=w / w.sum()))

    def family(self, parents=(), children=(), relatives=()) -> Family:
        f = Family(self.fid, list(parents), list(children), list(relatives))
        self.fid += 1
        self.families[f.id] = f
        return f

    def couple(self, weights):
        mb = self.band(weights)
        fb = max(1, mb - int(self.rng.random() < 0.45))
        return self.person(mb, "Male", "Married"), self.person(fb, "Female", "Married")

    def child(self, parent_band) -> Person:
        opts = [b for b in range(8) if compatible(parent_band, b) and parent_band - b <= 3]
        opts = opts or [b for b in range(8) if compatible(parent_band, b)]
        w = np.array([3.0 if b == 0 else 1.0 for b in opts])
        b = opts[int(self.rng.choice(len(opts), p=w / w.sum()))]
        if b == 0:
            rel = "U15Child"
        elif b == 1:
            rel = "Student" if self.rng.random() < 0.5 else "O15Child"
        else:
            rel = "O15Child"
        return self.person(b, GENDERS[int(self.rng.integers(2))], rel)

    def relative(self) -> Person:
        b = int(self.rng.integers(0, 7))
        return self.person(b, GENDERS[int(self.rng.integers(2))], "Relative")

    def basic(self, kind) -> Family:
        s = self.shape
        if kind == "CoupleNoChildren":
            return self.family(self.couple(s.couple_band_weights))
        if kind == "CoupleWithChildren":
            m, f = self.couple(s.parent_band_weights)
            n = min(1 + int(self.rng.geometric(0.5)) - 1, 4)
            kids = [self.child(f.age_band) for _ in range(max(1, n))]
            return self.family((m, f), kids)
        if kind == "OneParent":
            p = self.person(self.band(s.parent_band_weights), GENDERS[int(self.rng.random() < 0.8)], "LoneParent")
            n = min(int(self.rng.geometric(0.6)), 3)
            return self.family([p], [self.child(p.age_band) for _ in range(n)])
        return self.family(relatives=[self.relative(), self.relative()])


def generate_reference_region(n_households: int, seed: int = 0, shape: ReferenceShape | None = None,
                              zone: str = "") -> RegionPopulation:
    shape = shape or ReferenceShape()
    rng = np.random.default_rng(seed)
    g = _Gen(rng, shape)
    households: list[Household] = []
    mix = np.asarray(shape.household_mix) / sum(shape.household_mix)
    for hid in range(n_households):
        kind = _HH_KINDS[int(rng.choice(len(mix), p=mix))]
        if kind == "LonePerson":
            p = g.person(g.band(shape.lone_band_weights), GENDERS[int(rng.integers(2))], "LonePerson")
            p.household_id = hid
            households.append(Household(hid, 1, "LonePerson", member_ids=[p.id], zone=zone))
            continue
        if kind == "Group":
            size = 2 + min(int(rng.geometric(0.55)) - 1, 3)
            members = [g.person(g.band(shape.group_band_weights), GENDERS[int(rng.integers(2))], "GroupHhMember")
                       for _ in range(size)]
            for p in members:
                p.household_id = hid
            households.append(Household(hid, size, "Group", member_ids=[p.id for p in members], zone=zone))
            continue
        fams = [g.basic(kind)]
        if rng.random() < shape.second_family_prob:
            extra = ["CoupleNoChildren", "OtherFamily"]
            if kind in ("CoupleWithChildren", "OneParent"):
                extra.append("OneParent")
            k = extra[int(rng.integers(len(extra)))]
            n_extra = 2 if rng.random() < shape.third_family_prob else 1
            for _ in range(n_extra):
                if k == "OneParent":
                    p = g.person(g.band(shape.parent_band_weights), "Female", "LoneParent")
                    fams.append(g.family([p], [g.child(p.age_band)]))
                else:
                    fams.append(g.basic(k))
        if rng.random() < shape.relative_prob:
            fams[0].relatives.append(g.relative())
        # keep every household within eight persons
        while sum(len(f.members) for f in fams) > 8:
            if fams[0].relatives:
                fams[0].relatives.pop()
            elif len(fams[0].children) > 1:
                fams[0].children.pop()
            else:
                fams.pop()
        h = Household(hid, 0, "", zone=zone)
        for f in fams:
            f.household_id = hid
            h.family_ids.append(f.id)
            for p in f.members:
                p.family_id = f.id
                p.household_id = hid
                h.member_ids.append(p.id)
        h.size = len(h.member_ids)
        h.composition = derive_composition(h, g.families)
        fams.sort(key=Family.rank, reverse=True)
        h.family_ids = [f.id for f in fams]
        households.append(h)
    members = {pid for h in households for pid in h.member_ids}
    persons = [p for p in g.persons if p.id in members]
    fams = {fid: f for fid, f in g.families.items() if f.household_id >= 0 and f.members}
    for f in fams.values():
        assert len(f.children) <= MAX_CHILDREN
    return RegionPopulation(persons, households, fams)


def tabulate(pop: RegionPopulation) -> tuple[PersonsMarginal, HouseholdsMarginal]:
    """Marginal tables of a population."""
    return PersonsMarginal(pop.person_counts()), HouseholdsMarginal(pop.household_counts())


def age_distribution(pop: RegionPopulation) -> np.ndarray:
    dist = np.zeros(MAX_AGE + 1)
    for p in pop.persons:
        dist[min(p.age_years, MAX_AGE)] += 1
    return dist


__all__ = ["ReferenceShape", "age_distribution", "generate_reference_region", "tabulate"]
