"""Sample-free population synthesis from joint persons/households marginals.

The household table is the reference: every household cell is reproduced
exactly. Persons are instantiated from the persons table and packed into
families and households under the structural heuristics below; persons that
cannot be placed are dropped, and slots that cannot be filled are covered by
probabilistically created persons up to a budget.

Heuristics
    * a couple is a Married male and a Married female in the same age band,
      or the female one band younger;
    * children are at least 15 years younger than the youngest parent;
    * a parent has at most eight children;
    * primary family priority: couple with children > one parent >
      couple without children = other family; ties go to more children,
      then to the lower family id.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .categories import (
    AGE_BANDS, AGE_BOUNDS, CHILD_RELATIONSHIPS, FAMILY_PRIORITY, GENDERS,
    HOUSEHOLD_SIZES, MAX_AGE, RELATIONSHIPS, HouseholdsMarginal, PersonsMarginal,
    composition_label, parse_composition, person_cell_possible,
)

MAX_CHILDREN = 8
MIN_PARENT_GAP = 15


class SynthesisError(RuntimeError):
    """A household cell could not be filled within the creation budget."""


@dataclass
class Person:
    id: int
    age_band: int
    gender: str
    relationship: str
    age_years: int = -1
    family_id: int = -1
    household_id: int = -1
    created: bool = False

    @property
    def age_category(self) -> str:
        return AGE_BANDS[self.age_band]


@dataclass
class Family:
    id: int
    parents: list[Person] = field(default_factory=list)
    children: list[Person] = field(default_factory=list)
    relatives: list[Person] = field(default_factory=list)
    household_id: int = -1

    @property
    def kind(self) -> str:
        if len(self.parents) == 2:
            return "CoupleWithChildren" if self.children else "CoupleNoChildren"
        if len(self.parents) == 1:
            return "OneParent"
        return "OtherFamily"

    @property
    def members(self) -> list[Person]:
        return self.parents + self.children + self.relatives

    def rank(self) -> tuple[int, int, int]:
        return FAMILY_PRIORITY[self.kind], len(self.children), -self.id

    def youngest_parent_band(self) -> int:
        return min(p.age_band for p in self.parents)


@dataclass
class Household:
    id: int
    size: int
    composition: str
    family_ids: list[int] = field(default_factory=list)
    member_ids: list[int] = field(default_factory=list)
    zone: str = ""
    coordinate: tuple[float, float] | None = None


@dataclass
class RegionPopulation:
    persons: list[Person]
    households: list[Household]
    families: dict[int, Family]
    created: int = 0
    dropped: Counter = field(default_factory=Counter)

    def person_counts(self) -> np.ndarray:
        counts = np.zeros((8, 2, 8), dtype=np.int64)
        for p in self.persons:
            counts[p.age_band, GENDERS.index(p.gender), RELATIONSHIPS.index(p.relationship)] += 1
        return counts

    def household_counts(self) -> np.ndarray:
        from .categories import COMPOSITIONS

        counts = np.zeros((8, 14), dtype=np.int64)
        for h in self.households:
            counts[min(h.size, 8) - 1, COMPOSITIONS.index(h.composition)] += 1
        return counts


def compatible(parent_band: int, child_band: int) -> bool:
    """Some ages in the two bands are at least 15 years apart."""
    return AGE_BOUNDS[parent_band][1] - AGE_BOUNDS[child_band][0] >= MIN_PARENT_GAP


_COMPAT = np.array([[compatible(p, c) for c in range(8)] for p in range(8)])


def derive_composition(household: Household, families: dict[int, Family]) -> str:
    """Recompute a household's composition label from its members."""
    if not household.family_ids:
        return "LonePerson" if household.size == 1 else "Group"
    fams = [families[f] for f in household.family_ids]
    primary = max(fams, key=Family.rank)
    return composition_label(len(fams), primary.kind)


class _ChildPool:
    """Unplaced children bucketed by age band; each bucket is pre-shuffled."""

    def __init__(self, children: list[Person]):
        self.bands = [[] for _ in range(8)]
        for c in children:
            self.bands[c.age_band].append(c)

    def __len__(self):
        return sum(len(b) for b in self.bands)

    def counts(self) -> np.ndarray:
        return np.array([len(b) for b in self.bands], dtype=float)

    def any_compatible(self, parent_band: int) -> bool:
        return bool((self.counts() * _COMPAT[parent_band]).any())

    def pop(self, band: int) -> Person:
        return self.bands[band].pop()

    def remaining(self) -> list[Person]:
        return [c for b in self.bands for c in b]


class _Builder:
    def __init__(self, persons: PersonsMarginal, households: HouseholdsMarginal, rng, zone,
                 creation_budget, person_id0, household_id0, family_id0):
        self.marg = persons
        self.hh_marg = households
        self.rng = rng
        self.zone = zone
        self.budget = int(np.floor(creation_budget * max(persons.total, households.persons_implied)))
        self.next_pid = person_id0
        self.next_hid = household_id0
        self.next_fid = family_id0
        self.persons: list[Person] = []
        self.families: dict[int, Family] = {}
        self.households: list[Household] = []
        self.created = 0
        self.cell = None  # household cell being filled, for diagnostics

    # -- persons ---------------------------------------------------------
    def _new_person(self, band, gender, rel, created=False) -> Person:
        p = Person(self.next_pid, band, gender, rel, created=created)
        self.next_pid += 1
        return p

    def instantiate_persons(self) -> dict[str, list[Person]]:
        pools: dict[str, list[Person]] = {rel: [] for rel in RELATIONSHIPS}
        c = self.marg.counts
        for b in range(len(AGE_BANDS)):
            for g, gender in enumerate(GENDERS):
                for r, rel in enumerate(RELATIONSHIPS):
                    for _ in range(int(c[b, g, r])):
                        pools[rel].append(self._new_person(b, gender, rel))
        for rel in RELATIONSHIPS:
            order = self.rng.permutation(len(pools[rel]))
            pools[rel] = [pools[rel][i] for i in order]
        return pools

    def create(self, rel: str, gender: str | None = None, bands=None) -> Person:
        """Create a person the tables did not supply, drawn from the table's own shape."""
        self.created += 1
        if self.created > self.budget:
            size, comp = self.cell if self.cell else ("?", "?")
            raise SynthesisError(
                f"creation budget of {self.budget} persons exhausted while filling "
                f"household cell (size={size}, composition={comp}) with a {rel}"
            )
        r = RELATIONSHIPS.index(rel)
        allowed = [b for b in range(8) if person_cell_possible(b, rel) and (bands is None or b in bands)]
        if not allowed:
            allowed = [b for b in range(8) if person_cell_possible(b, rel)]
        genders = [GENDERS.index(gender)] if gender else [0, 1]
        weights = np.array([[self.marg.counts[b, g, r] for g in genders] for b in allowed], dtype=float)
        if weights.sum() == 0:
            weights[:] = 1.0
        flat = weights.ravel() / weights.sum()
        k = int(self.rng.choice(len(flat), p=flat))
        b, g = allowed[k // len(genders)], genders[k % len(genders)]
        return self._new_person(b, GENDERS[g], rel, created=True)

    # -- families --------------------------------------------------------
    def _new_family(self, parents=(), children=(), relatives=()) -> Family:
        fam = Family(self.next_fid, list(parents), list(children), list(relatives))
        self.next_fid += 1
        self.families[fam.id] = fam
        return fam

    @staticmethod
    def form_couples(married: list[Person]) -> tuple[list[tuple[Person, Person]], list[Person]]:
        """Maximum matching of married males to same-band or one-band-younger females."""
        males = [[] for _ in range(8)]
        females = [[] for _ in range(8)]
        for p in married:
            (males if p.gender == "Male" else females)[p.age_band].append(p)
        couples = []
        for b in range(8):
            for fb in (b - 1, b):
                if fb < 0:
                    continue
                while males[b] and females[fb]:
                    couples.append((males[b].pop(), females[fb].pop()))
        leftover = [p for band in males + females for p in band]
        return couples, leftover

    def take_child(self, children: _ChildPool, parent_band: int) -> Person | None:
        """Remove and return a child compatible with ``parent_band``, favouring plausible gaps."""
        bands = np.arange(8)
        w = children.counts() * _COMPAT[parent_band]
        if w.sum() == 0:
            return None
        gap = parent_band - bands
        w *= np.where((gap >= 1) & (gap <= 3), 1.0, 0.15)
        return children.pop(int(self.rng.choice(8, p=w / w.sum())))

    # -- pipeline --------------------------------------------------------
    def run(self) -> RegionPopulation:
        pools = self.instantiate_persons()
        self.persons_all = [p for rel in RELATIONSHIPS for p in pools[rel]]
        children = pools["U15Child"] + pools["Student"] + pools["O15Child"]
        order = self.rng.permutation(len(children))
        children = _ChildPool([children[i] for i in order])
        relatives = pools["Relative"]

        specs = []
        for size, comp, n in self.hh_marg.cells():
            specs.extend([(size, comp)] * n)

        self.form_lone_person_households([s for s in specs if s[1] == "LonePerson"], pools["LonePerson"])
        self.form_group_households([s for s in specs if s[1] == "Group"], pools["GroupHhMember"])

        fam_specs = [s for s in specs if s[1] not in ("LonePerson", "Group")]
        fam_specs = [fam_specs[i] for i in self.rng.permutation(len(fam_specs))]
        couples, _ = self.form_couples(pools["Married"])
        couples = [couples[i] for i in self.rng.permutation(len(couples))]
        lone_parents = pools["LoneParent"]

        primaries = self.form_basic_families(fam_specs, couples, lone_parents, children, relatives)
        hhs = self.form_households_with_primary_families(fam_specs, primaries)
        self.add_non_primary_families(hhs, couples, lone_parents, children, relatives)
        self.add_children(hhs, children)
        self.add_relatives(hhs, relatives)
        self.households.extend(h for h, _ in hhs)
        self.finalise()
        used = {p.id for p in self.persons}
        dropped = Counter(p.relationship for p in self.persons_all if p.id not in used)
        return RegionPopulation(self.persons, self.households, self.families, self.created, dropped)

    def _household(self, size, comp) -> Household:
        h = Household(self.next_hid, size, comp, zone=self.zone)
        self.next_hid += 1
        return h

    def form_lone_person_households(self, specs, lone: list[Person]):
        for size, comp in specs:
            self.cell = (size, comp)
            p = lone.pop() if lone else self.create("LonePerson")
            h = self._household(1, comp)
            h.member_ids.append(p.id)
            p.household_id = h.id
            self.persons.append(p)
            self.households.append(h)

    def form_group_households(self, specs, members: list[Person]):
        for size, comp in specs:
            self.cell = (size, comp)
            h = self._household(size, comp)
            for _ in range(size):
                p = members.pop() if members else self.create("GroupHhMember")
                p.household_id = h.id
                h.member_ids.append(p.id)
                self.persons.append(p)
            self.households.append(h)

    def _make_couple(self):
        m = self.create("Married", "Male", bands=range(2, 5))
        band = max(1, m.age_band - int(self.rng.integers(0, 2)))
        f = self.create("Married", "Female", bands=[band])
        return m, f

    def form_basic_families(self, fam_specs, couples, lone_parents, children, relatives):
        need = Counter(parse_composition(c)[1] for _, c in fam_specs)
        primaries: dict[str, list[Family]] = {ft: [] for ft in FAMILY_PRIORITY}

        # couples with children: weight candidate couples toward typical parenting ages
        parent_weight = np.array([0.0, 0.5, 1.0, 1.0, 0.4, 0.1, 0.02, 0.01])
        for _ in range(need["CoupleWithChildren"]):
            self.cell = ("?", "CoupleWithChildren")
            fam = None
            if couples:
                yb = np.array([min(m.age_band, f.age_band) for m, f in couples])
                has_child = np.array([children.any_compatible(b) for b in range(8)])
                w = parent_weight[yb] * has_child[yb]
                if w.sum() == 0:
                    w = has_child[yb].astype(float)
                if w.sum() > 0:
                    i = int(self.rng.choice(len(couples), p=w / w.sum()))
                    m, f = couples.pop(i)
                    child = self.take_child(children, min(m.age_band, f.age_band))
                    fam = self._new_family([m, f], [child])
            if fam is None:
                m, f = couples.pop() if couples else self._make_couple()
                yb = min(m.age_band, f.age_band)
                child = self.take_child(children, yb) or self.create(
                    "U15Child" if compatible(yb, 0) else "O15Child",
                    bands=[b for b in range(8) if compatible(yb, b)])
                fam = self._new_family([m, f], [child])
            primaries["CoupleWithChildren"].append(fam)

        for _ in range(need["OneParent"]):
            self.cell = ("?", "OneParent")
            fam = None
            for attempt in range(len(lone_parents)):
                p = lone_parents[-1 - attempt]
                child = self.take_child(children, p.age_band)
                if child is not None:
                    lone_parents.pop(-1 - attempt)
                    fam = self._new_family([p], [child])
                    break
            if fam is None:
                p = lone_parents.pop() if lone_parents else self.create("LoneParent", bands=range(2, 5))
                child = self.create("U15Child" if compatible(p.age_band, 0) else "O15Child",
                                    bands=[b for b in range(8) if compatible(p.age_band, b)])
                fam = self._new_family([p], [child])
            primaries["OneParent"].append(fam)

        for _ in range(need["CoupleNoChildren"]):
            self.cell = ("?", "CoupleNoChildren")
            m, f = couples.pop() if couples else self._make_couple()
            primaries["CoupleNoChildren"].append(self._new_family([m, f]))

        for _ in range(need["OtherFamily"]):
            self.cell = ("?", "OtherFamily")
            pair = [relatives.pop() if relatives else self.create("Relative") for _ in range(2)]
            primaries["OtherFamily"].append(self._new_family(relatives=pair))
        return primaries

    def form_households_with_primary_families(self, fam_specs, primaries):
        hhs = []
        for size, comp in fam_specs:
            _, ft = parse_composition(comp)
            fam = primaries[ft].pop()
            h = self._household(size, comp)
            fam.household_id = h.id
            h.family_ids.append(fam.id)
            hhs.append((h, fam))
        return hhs

    def add_non_primary_families(self, hhs, couples, lone_parents, children, relatives):
        """Second and third families, each a two-person unit.

        Leftover couples and lone parents can only end up in secondary
        families, so the share of other-family units is what the secondary
        slots leave over. Households whose primary may host a one-parent
        secondary are served first.
        """
        hosts_op = ("CoupleWithChildren", "OneParent")
        order = sorted(range(len(hhs)), key=lambda i: parse_composition(hhs[i][0].composition)[1] not in hosts_op)
        slots = sum(parse_composition(h.composition)[0] - 1 for h, _ in hhs)
        op_slots = sum(parse_composition(h.composition)[0] - 1 for h, _ in hhs
                       if parse_composition(h.composition)[1] in hosts_op)
        for i in order:
            h, primary = hhs[i]
            nfam, ft = parse_composition(h.composition)
            self.cell = (h.size, h.composition)
            for _ in range(nfam - 1):
                can_op = ft in hosts_op and lone_parents and len(children)
                n_of = max(0, slots - len(couples) - len(lone_parents))
                options = {
                    "CoupleNoChildren": float(len(couples)),
                    "OneParent": len(lone_parents) * slots / max(op_slots, 1) if can_op else 0.0,
                    "OtherFamily": float(n_of) if len(relatives) >= 2 else 0.0,
                }
                if sum(options.values()) == 0 and len(relatives) >= 2:
                    options["OtherFamily"] = 1.0
                slots -= 1
                if ft in hosts_op:
                    op_slots -= 1
                fam = None
                if sum(options.values()) > 0:
                    kinds = list(options)
                    w = np.array([options[k] for k in kinds])
                    kind = kinds[int(self.rng.choice(len(kinds), p=w / w.sum()))]
                    if kind == "CoupleNoChildren":
                        fam = self._new_family(couples.pop())
                    elif kind == "OneParent":
                        p = lone_parents[-1]
                        child = self.take_child(children, p.age_band)
                        if child is not None:
                            lone_parents.pop()
                            fam = self._new_family([p], [child])
                    if fam is None and len(relatives) >= 2:
                        fam = self._new_family(relatives=[relatives.pop(), relatives.pop()])
                if fam is None:
                    fam = self._new_family(self._make_couple())
                fam.household_id = h.id
                h.family_ids.append(fam.id)

    def _slack(self, h: Household) -> int:
        return h.size - sum(len(self.families[f].members) for f in h.family_ids)

    def add_children(self, hhs, children: _ChildPool):
        """Extra children go to primary families only, so primaries keep their rank."""
        fams = [fam for h, fam in hhs if fam.kind in ("CoupleWithChildren", "OneParent")]
        if not fams or not len(children):
            return
        hh_of = {h.id: h for h, _ in hhs}
        slack = np.array([self._slack(hh_of[f.household_id]) for f in fams])
        nchild = np.array([len(f.children) for f in fams])
        pband = np.array([f.youngest_parent_band() for f in fams])
        # most constrained (oldest) children first
        for band in range(7, -1, -1):
            bucket = children.bands[band]
            keep = []
            plausible = np.where((pband - band >= 1) & (pband - band <= 3), 1.0, 0.15)
            while bucket:
                child = bucket.pop()
                ok = (slack > 0) & (nchild < MAX_CHILDREN) & _COMPAT[pband, band]
                if not ok.any():
                    keep.append(child)
                    continue
                w = ok * plausible
                i = int(self.rng.choice(len(fams), p=w / w.sum()))
                fams[i].children.append(child)
                slack[i] -= 1
                nchild[i] += 1
            bucket.extend(keep)

    def add_relatives(self, hhs, relatives):
        for i in self.rng.permutation(len(hhs)):
            h, fam = hhs[i]
            self.cell = (h.size, h.composition)
            for _ in range(self._slack(h)):
                fam.relatives.append(relatives.pop() if relatives else self.create("Relative"))

    def finalise(self):
        for h in self.households:
            if not h.family_ids:
                continue
            fams = sorted((self.families[f] for f in h.family_ids), key=Family.rank, reverse=True)
            h.family_ids = [f.id for f in fams]
            for fam in fams:
                for p in fam.members:
                    p.family_id = fam.id
                    p.household_id = h.id
                    h.member_ids.append(p.id)
                    self.persons.append(p)
            assert len(h.member_ids) == h.size, (h, self._slack(h))
        self.persons.sort(key=lambda p: p.id)
        self.households.sort(key=lambda h: h.id)


class _AgeSampler:
    def __init__(self, distribution: np.ndarray | None, rng):
        self.rng = rng
        if distribution is None:
            distribution = np.ones(MAX_AGE + 1)
        self.dist = np.asarray(distribution, dtype=float)

    def sample(self, band: int, lo: int = 0, hi: int = MAX_AGE) -> int:
        blo, bhi = AGE_BOUNDS[band]
        a, b = max(blo, lo), min(bhi, hi)
        if a > b:
            # constraint cannot be met inside the band; take the nearest edge
            return blo if lo > bhi or a > bhi else bhi
        w = self.dist[a:b + 1]
        if w.sum() <= 0:
            return int(self.rng.integers(a, b + 1))
        return a + int(self.rng.choice(len(w), p=w / w.sum()))


def assign_ages(pop: RegionPopulation, age_distribution: np.ndarray | None, rng) -> None:
    """Concrete ages within bands; parents first, children capped 15 years below the youngest parent."""
    sampler = _AgeSampler(age_distribution, rng)
    in_family = set()
    for fam in pop.families.values():
        floor = max((AGE_BOUNDS[c.age_band][0] for c in fam.children), default=-MIN_PARENT_GAP) + MIN_PARENT_GAP
        for p in fam.parents:
            p.age_years = sampler.sample(p.age_band, lo=floor)
        cap = min((p.age_years for p in fam.parents), default=MAX_AGE + MIN_PARENT_GAP) - MIN_PARENT_GAP
        for c in fam.children:
            c.age_years = sampler.sample(c.age_band, hi=cap)
        for r in fam.relatives:
            r.age_years = sampler.sample(r.age_band)
        in_family.update(p.id for p in fam.members)
    for p in pop.persons:
        if p.id not in in_family:
            p.age_years = sampler.sample(p.age_band)


def synthesize_region(
    persons: PersonsMarginal,
    households: HouseholdsMarginal,
    age_distribution: np.ndarray | None = None,
    seed: int = 0,
    zone: str = "",
    creation_budget: float = 0.05,
    person_id0: int = 0,
    household_id0: int = 0,
    family_id0: int = 0,
) -> RegionPopulation:
    """Build one region's population. Inputs should already be cleaned."""
    rng = np.random.default_rng(seed)
    builder = _Builder(persons, households, rng, zone, creation_budget,
                       person_id0, household_id0, family_id0)
    pop = builder.run()
    assign_ages(pop, age_distribution, rng)
    # drop families that never reached a household (cannot happen by construction)
    pop.families = {fid: f for fid, f in pop.families.items() if f.household_id >= 0}
    return pop


__all__ = [
    "Family", "Household", "Person", "RegionPopulation", "SynthesisError",
    "assign_ages", "compatible", "derive_composition", "synthesize_region",
    "HOUSEHOLD_SIZES", "CHILD_RELATIONSHIPS",
]
