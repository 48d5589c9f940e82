"""End-to-end steps shared by the command line and the fixture builder."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .archetype.attitudes import AttitudeMatrix, assign_attitudes
from .archetype.matrix import ARCHETYPE_STREAM, AssignmentError, ProbabilityMatrix, assign_archetype, person_rng, signature_of
from .engine.scenario import AGENT_COLUMNS, AgentRecord
from .popsynth.categories import AGE_BANDS, HouseholdsMarginal, PersonsMarginal, band_index
from .popsynth.cleaning import clean_data
from .popsynth.fit import FitReport, validate_fit
from .popsynth.locations import Dwelling, assign_dwellings, assign_evac_coordinates
from .popsynth.synthesis import Family, Household, Person, RegionPopulation, synthesize_region

log = logging.getLogger(__name__)

ATTITUDE_STREAM = 4
NON_DRIVERS = ("DE",)

POPULATION_COLUMNS = ["person_id", "household_id", "family_id", "age", "age_category", "gender",
                      "relationship", "zone", "composition", "x", "y"]


def region_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


@dataclass
class RegionResult:
    name: str
    population: RegionPopulation
    fit: FitReport
    adjustments: list = field(default_factory=list)


def synthesize_regions(persons: dict[str, PersonsMarginal], households: dict[str, HouseholdsMarginal],
                       ages: dict[str, np.ndarray] | None, seed: int,
                       creation_budget: float = 0.05) -> list[RegionResult]:
    """Clean, synthesise, and fit-test every region; ids are unique across regions."""
    missing = sorted(set(persons) ^ set(households))
    if missing:
        raise ValueError(f"regions present in only one marginal table: {missing}")
    out = []
    pid = hid = fid = 0
    for i, name in enumerate(sorted(persons)):
        adj: list = []
        p, h = clean_data(persons[name], households[name], adj)
        pop = synthesize_region(p, h, (ages or {}).get(name), region_seed(seed, i), zone=name,
                                creation_budget=creation_budget,
                                person_id0=pid, household_id0=hid, family_id0=fid)
        pid = max([q.id for q in pop.persons], default=pid - 1) + 1
        hid = max([q.id for q in pop.households], default=hid - 1) + 1
        fid = max(list(pop.families), default=fid - 1) + 1
        fit = validate_fit(pop, persons[name]) if pop.persons else FitReport(0.0, 1.0, 0.0, 0)
        out.append(RegionResult(name, pop, fit, adj))
    return out


def write_population_csv(path, regions: list[RegionResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POPULATION_COLUMNS)
        for reg in regions:
            hh = {h.id: h for h in reg.population.households}
            for p in reg.population.persons:
                h = hh[p.household_id]
                x, y = h.coordinate if h.coordinate is not None else ("", "")
                w.writerow([p.id, p.household_id, p.family_id, p.age_years, AGE_BANDS[p.age_band], p.gender,
                            p.relationship, h.zone, h.composition,
                            f"{x:.1f}" if x != "" else "", f"{y:.1f}" if y != "" else ""])


@dataclass
class LoadedPopulation:
    persons: list[Person]
    households: dict[int, Household]
    families: dict[int, Family]


def read_population_csv(path) -> LoadedPopulation:
    persons, households, families = [], {}, {}
    with open(Path(path), newline="") as fh:
        for line, r in enumerate(csv.DictReader(fh), start=2):
            try:
                p = Person(int(r["person_id"]), band_index(r["age_category"]), r["gender"], r["relationship"],
                           age_years=int(r["age"]), family_id=int(r["family_id"]),
                           household_id=int(r["household_id"]))
                h = households.get(p.household_id)
                if h is None:
                    coord = (float(r["x"]), float(r["y"])) if r.get("x") else None
                    h = households[p.household_id] = Household(p.household_id, 0, r["composition"],
                                                                zone=r.get("zone", ""), coordinate=coord)
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: bad population row ({exc})") from None
            h.size += 1
            h.member_ids.append(p.id)
            if p.family_id >= 0:
                fam = families.setdefault(p.family_id, Family(p.family_id, household_id=p.household_id))
                if p.family_id not in h.family_ids:
                    h.family_ids.append(p.family_id)
                if p.relationship in ("Married", "LoneParent"):
                    fam.parents.append(p)
                elif p.relationship in ("U15Child", "Student", "O15Child"):
                    fam.children.append(p)
                else:
                    fam.relatives.append(p)
            persons.append(p)
    return LoadedPopulation(persons, households, families)


def assign_dwelling_coordinates(regions: list[RegionResult], dwellings: list[Dwelling], seed: int) -> None:
    hhs = [h for reg in regions for h in reg.population.households]
    assign_dwellings(hhs, dwellings, seed)


@dataclass
class AssignmentReport:
    persons: int = 0
    under_18: int = 0
    by_archetype: dict = field(default_factory=dict)
    drivers: int = 0
    dependants_pool: int = 0
    carers: int = 0
    carers_from_pool: int = 0
    zero_mass_signatures: dict = field(default_factory=dict)


def assign_population(pop: LoadedPopulation, m: ProbabilityMatrix, b: AttitudeMatrix, seed: int,
                      evac_points, invac_points) -> tuple[list[AgentRecord], list[Person], AssignmentReport]:
    """Archetypes for adults, attitudes for drivers, and evacuation coordinates.

    Under-18s, unknown types, and dependent evacuators do not drive; the
    homes of dependent evacuators form the pool carers' dependants are drawn from.
    """
    rep = AssignmentReport(persons=len(pop.persons))
    drivers: list[tuple[Person, str, str]] = []
    dependants: list[Person] = []
    counts: dict[str, int] = {}
    for p in sorted(pop.persons, key=lambda q: q.id):
        h = pop.households[p.household_id]
        sig = signature_of(p, h, pop.families)
        if sig is None:
            rep.under_18 += 1
            continue
        try:
            arch = assign_archetype(sig, m, person_rng(seed, p.id, ARCHETYPE_STREAM))
        except AssignmentError:
            key = f"{sig.age_group}/{sig.gender}/{sig.hh_type}"
            rep.zero_mass_signatures[key] = rep.zero_mass_signatures.get(key, 0) + 1
            continue
        counts[arch] = counts.get(arch, 0) + 1
        if arch == "UT":
            continue
        if arch in NON_DRIVERS:
            dependants.append(p)
            continue
        drivers.append((p, arch, sig.hh_type))
    rep.by_archetype = dict(sorted(counts.items()))
    rep.drivers = len(drivers)
    rep.dependants_pool = len(dependants)
    if rep.zero_mass_signatures:
        log.warning("signatures with no probability mass: %s", rep.zero_mass_signatures)
    if not drivers:
        log.warning("no drivers after removing under-18, UT, and DE persons")
        return [], dependants, rep

    homes = np.array([pop.households[p.household_id].coordinate for p, _, _ in drivers], dtype=float)
    carers = np.array([hh.endswith("WithDeps") for _, _, hh in drivers])
    pool = np.array([pop.households[p.household_id].coordinate for p in dependants], dtype=float).reshape(-1, 2)
    coords = assign_evac_coordinates(homes, carers, evac_points, invac_points, pool, seed)
    rep.carers = int(carers.sum())
    rep.carers_from_pool = sum(1 for c in coords if c.deps_from_pool)
    agents = []
    for (p, arch, hh_type), home, ec in zip(drivers, homes, coords):
        prof = assign_attitudes(arch, b, person_rng(seed, p.id, ATTITUDE_STREAM))
        agents.append(AgentRecord(p.id, arch, tuple(home), ec.evac, ec.invac, ec.deps is not None, ec.deps,
                                  prof.threshold_initial, prof.threshold_final, hh_type))
    return agents, dependants, rep


def write_agents_csv(path, agents: list[AgentRecord], pop: LoadedPopulation | None = None) -> None:
    by_id = {p.id: p for p in pop.persons} if pop else {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGENT_COLUMNS)
        for a in agents:
            p = by_id.get(a.person_id)
            deps = a.deps if a.deps is not None else ("", "")
            w.writerow([a.person_id, p.household_id if p else "", a.archetype, p.age_years if p else "",
                        p.gender if p else "", a.hh_type,
                        f"{a.home[0]:.1f}", f"{a.home[1]:.1f}", f"{a.evac[0]:.1f}", f"{a.evac[1]:.1f}",
                        f"{a.invac[0]:.1f}", f"{a.invac[1]:.1f}", int(a.has_dependants),
                        *(f"{v:.1f}" if v != "" else "" for v in deps),
                        f"{a.threshold_initial:.6f}", f"{a.threshold_final:.6f}"])


def read_points_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        return np.array([[float(r["x"]), float(r["y"])] for r in csv.DictReader(fh)]).reshape(-1, 2)
