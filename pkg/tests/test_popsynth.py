import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from scipy import stats as sps

from evacsim.popsynth.categories import (
    AGE_BANDS, AGE_BOUNDS, COMPOSITIONS, GENDERS, HOUSEHOLD_SIZES, RELATIONSHIPS, HouseholdsMarginal,
    PersonsMarginal, band_of_age, household_cell_possible, min_household_size, parse_composition,
    read_households_csv, read_persons_csv, write_households_csv, write_persons_csv,
)
from evacsim.popsynth.cleaning import InconsistentMarginalsError, clean_data, required_persons
from evacsim.popsynth.fit import freeman_tukey, standardised_absolute_error, validate_fit
from evacsim.popsynth.reference import generate_reference_region, tabulate
from evacsim.popsynth.synthesis import SynthesisError, derive_composition, synthesize_region

REL = {r: i for i, r in enumerate(RELATIONSHIPS)}
COMP = {c: i for i, c in enumerate(COMPOSITIONS)}


def persons_with(cells):
    p = PersonsMarginal()
    for (band, gender, rel), n in cells.items():
        p.counts[AGE_BANDS.index(band), GENDERS.index(gender), REL[rel]] = n
    return p


def households_with(cells):
    h = HouseholdsMarginal()
    for (size, comp), n in cells.items():
        h.counts[HOUSEHOLD_SIZES.index(size), COMP[comp]] = n
    return h


# -- tables ---------------------------------------------------------------------
def test_table_shapes():
    assert PersonsMarginal().counts.size == 128
    assert HouseholdsMarginal().counts.size == 8 * len(COMPOSITIONS)
    assert {"LonePerson", "Group"} <= set(COMPOSITIONS)


def test_impossible_person_cells():
    mask = PersonsMarginal().impossible_mask()
    assert mask[0, :, REL["Married"]].all()
    assert not mask[1:, :, REL["Married"]].any()
    assert mask[1:, :, REL["U15Child"]].all()


@pytest.mark.parametrize("age, band", [(0, 0), (14, 0), (15, 1), (39, 2), (100, 7), (120, 7)])
def test_band_of_age(age, band):
    assert band_of_age(age) == band


@pytest.mark.parametrize("comp, size", [("LonePerson", 1), ("Group", 2), ("1Fam:CoupleWithChildren", 3),
                                        ("2Fam:CoupleNoChildren", 4), ("3+Fam:OneParent", 6)])
def test_min_household_size(comp, size):
    assert min_household_size(comp) == size
    assert household_cell_possible(size - 1, comp)
    if size > 1:
        assert not household_cell_possible(size - 2, comp)


def test_csv_round_trip(tmp_path):
    p = persons_with({("25-39", "Male", "Married"): 3, ("0-14", "Female", "U15Child"): 2})
    h = households_with({("4", "1Fam:CoupleWithChildren"): 1})
    write_persons_csv(tmp_path / "p.csv", {"A": p})
    write_households_csv(tmp_path / "h.csv", {"A": h})
    assert np.array_equal(read_persons_csv(tmp_path / "p.csv")["A"].counts, p.counts)
    assert np.array_equal(read_households_csv(tmp_path / "h.csv")["A"].counts, h.counts)


def test_csv_missing_cells_rejected(tmp_path):
    (tmp_path / "p.csv").write_text("age_category,gender,relationship,count\n25-39,Male,Married,3\n")
    with pytest.raises(ValueError, match="128"):
        read_persons_csv(tmp_path / "p.csv")


# -- cleaning -------------------------------------------------------------------
def brute_force_requirements(h: HouseholdsMarginal) -> Counter:
    """Walk every household and count the persons its basic family structure needs."""
    need = Counter()
    for s, size in enumerate(HOUSEHOLD_SIZES):
        for c, comp in enumerate(COMPOSITIONS):
            for _ in range(int(h.counts[s, c])):
                if comp == "LonePerson":
                    need["LonePerson"] += 1
                    continue
                if comp == "Group":
                    need["GroupHhMember"] += int(size.rstrip("+"))
                    continue
                primary = comp.split(":")[1]
                if primary.startswith("Couple"):
                    need["MarriedMale"] += 1
                    need["MarriedFemale"] += 1
                if primary == "OneParent":
                    need["LoneParent"] += 1
                if primary in ("CoupleWithChildren", "OneParent"):
                    need["Children"] += 1
                if primary == "OtherFamily":
                    need["Relative"] += 2
    return need


def test_clean_identity_on_consistent_tables():
    ref = generate_reference_region(300, seed=1)
    p, h = tabulate(ref)
    p2, h2 = clean_data(p, h)
    assert np.array_equal(p2.counts, p.counts)
    assert np.array_equal(h2.counts, h.counts)


def test_clean_adds_missing_married_male_in_modal_band():
    h = households_with({("2", "1Fam:CoupleNoChildren"): 10})
    p = persons_with({("40-54", "Male", "Married"): 6, ("55-69", "Male", "Married"): 3,
                      ("40-54", "Female", "Married"): 10})
    need = brute_force_requirements(h)
    assert need["MarriedMale"] == 10 and required_persons(h)["MarriedMale"] == 10
    adj = []
    p2, _ = clean_data(p, h, adj)
    assert p2.get(AGE_BANDS.index("40-54"), "Male", "Married") == 7
    assert p2.total == p.total + 1
    assert adj == [("added", "40-54", "Male", "Married", 1)]


def test_clean_all_zero():
    p2, h2 = clean_data(PersonsMarginal(), HouseholdsMarginal())
    assert p2.total == 0 and h2.total == 0


def test_clean_rejects_households_without_adults():
    h = households_with({("1", "LonePerson"): 2})
    p = persons_with({("0-14", "Male", "U15Child"): 2})
    with pytest.raises(InconsistentMarginalsError, match="LonePerson"):
        clean_data(p, h)


def test_clean_rejects_impossible_household_cell():
    h = households_with({("2", "1Fam:CoupleWithChildren"): 1})
    with pytest.raises(InconsistentMarginalsError, match="CoupleWithChildren"):
        clean_data(persons_with({("25-39", "Male", "Married"): 1}), h)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=20, max_value=200))
def test_cleaned_tables_meet_brute_force_requirements(seed, n):
    ref = generate_reference_region(n, seed=seed)
    p, h = tabulate(ref)
    rng = np.random.default_rng(seed)
    p.counts = np.maximum(p.counts - rng.integers(0, 3, size=p.counts.shape), 0)
    p2, _ = clean_data(p, h)
    need = brute_force_requirements(h)
    c = p2.counts
    have = {
        "MarriedMale": c[:, 0, REL["Married"]].sum(), "MarriedFemale": c[:, 1, REL["Married"]].sum(),
        "LoneParent": c[:, :, REL["LoneParent"]].sum(), "Relative": c[:, :, REL["Relative"]].sum(),
        "Children": sum(c[:, :, REL[r]].sum() for r in ("U15Child", "Student", "O15Child")),
        "LonePerson": c[:, :, REL["LonePerson"]].sum(), "GroupHhMember": c[:, :, REL["GroupHhMember"]].sum(),
    }
    for key, n_needed in need.items():
        assert have[key] >= n_needed
    assert (p2.counts >= p.counts).all()  # only additions


# -- synthesis ------------------------------------------------------------------
def test_two_couples_forced_pairing():
    h = households_with({("2", "1Fam:CoupleNoChildren"): 2})
    p = persons_with({("40-54", "Male", "Married"): 1, ("25-39", "Male", "Married"): 1,
                      ("40-54", "Female", "Married"): 1, ("25-39", "Female", "Married"): 1})
    pop = synthesize_region(p, h, seed=0)
    assert len(pop.households) == 2 and all(x.size == 2 for x in pop.households)
    bands = sorted((f.parents[0].age_band, f.parents[1].age_band) for f in pop.families.values())
    # male 40-54 pairs with the one-band-younger female first
    males = {f.parents[0].gender for f in pop.families.values()}
    assert males == {"Male"}
    assert all(m - w in (0, 1) for m, w in bands)
    assert pop.created == 0


def check_population_invariants(pop, h_in):
    assert np.array_equal(pop.household_counts(), h_in.counts)
    by_id = {p.id: p for p in pop.persons}
    for hh in pop.households:
        assert hh.size == len(hh.member_ids)
        assert hh.composition == derive_composition(hh, pop.families)
    for p in pop.persons:
        lo, hi = AGE_BOUNDS[p.age_band]
        assert lo <= p.age_years <= hi
    for fam in pop.families.values():
        if len(fam.parents) == 2:
            m, f = sorted(fam.parents, key=lambda q: q.gender != "Male")
            assert (m.gender, f.gender) == ("Male", "Female")
            assert m.relationship == f.relationship == "Married"
            assert m.age_band - f.age_band in (0, 1)
        if fam.children:
            youngest = min(q.age_years for q in fam.parents)
            assert all(youngest - c.age_years >= 15 for c in fam.children)
        for q in fam.members:
            assert by_id[q.id].household_id == fam.household_id


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=30, max_value=300))
def test_synthesis_invariants(seed, n):
    ref = generate_reference_region(n, seed=seed)
    p, h = clean_data(*tabulate(ref))
    pop = synthesize_region(p, h, seed=seed)
    check_population_invariants(pop, h)


def test_primary_family_is_highest_priority():
    ref = generate_reference_region(400, seed=5)
    p, h = clean_data(*tabulate(ref))
    pop = synthesize_region(p, h, seed=5)
    for hh in pop.households:
        if len(hh.family_ids) > 1:
            fams = [pop.families[f] for f in hh.family_ids]
            assert fams[0].rank()[:2] == max(f.rank()[:2] for f in fams)


def test_synthesis_deterministic():
    ref = generate_reference_region(200, seed=2)
    p, h = clean_data(*tabulate(ref))
    a = synthesize_region(p, h, seed=11)
    b = synthesize_region(p, h, seed=11)
    assert [(q.id, q.age_years, q.household_id, q.family_id) for q in a.persons] == \
        [(q.id, q.age_years, q.household_id, q.family_id) for q in b.persons]


def test_creation_budget_exhaustion_names_cell():
    h = households_with({("3", "1Fam:CoupleWithChildren"): 20})
    p = persons_with({("40-54", "Male", "Married"): 20, ("40-54", "Female", "Married"): 20,
                      ("0-14", "Male", "U15Child"): 1})
    with pytest.raises(SynthesisError, match="CoupleWithChildren"):
        synthesize_region(p, h, seed=0)


def test_ages_follow_distribution():
    h = households_with({("1", "LonePerson"): 2000})
    p = persons_with({("25-39", "Female", "LonePerson"): 2000})
    dist = np.zeros(111)
    dist[30] = 3
    dist[35] = 1
    pop = synthesize_region(p, h, dist, seed=4)
    ages = Counter(q.age_years for q in pop.persons)
    assert set(ages) == {30, 35}
    assert ages[30] / 2000 == pytest.approx(0.75, abs=0.03)


# -- fit --------------------------------------------------------------------------
def test_freeman_tukey_hand_case():
    o, e = (4, 1, 4), (3, 3, 3)
    by_hand = 4 * ((2 - math.sqrt(3)) ** 2 + (1 - math.sqrt(3)) ** 2 + (2 - math.sqrt(3)) ** 2)
    assert freeman_tukey(o, e) == pytest.approx(by_hand, rel=1e-12)
    assert freeman_tukey(o, e) == pytest.approx(2.7179676972449, rel=1e-12)
    assert standardised_absolute_error(o, e) == pytest.approx(4 / 9)


def test_exact_fit():
    ref = generate_reference_region(150, seed=3)
    p, _ = tabulate(ref)
    rep = validate_fit(ref, p)
    assert rep.ft_statistic == 0 and rep.sae == 0 and rep.p_value == 1.0


def test_fit_excludes_impossible_and_pools_zero_cells():
    ref = persons_with({("25-39", "Male", "LonePerson"): 10, ("40-54", "Male", "LonePerson"): 10,
                        ("25-39", "Female", "LonePerson"): 5})
    gen = ref.counts.copy()
    gen[AGE_BANDS.index("55-69"), 0, REL["LonePerson"]] = 2  # no expected mass here
    gen[0, 0, REL["Married"]] = 7  # impossible; ignored
    rep = validate_fit(gen, ref)
    assert ("Male", "LonePerson", "55-69", "40-54") in rep.merged
    # pooled: (10,10), (12,10), (5,5)
    assert rep.ft_statistic == pytest.approx(freeman_tukey([10, 12, 5], [10, 10, 5]))
    assert rep.p_value == pytest.approx(sps.chi2.sf(rep.ft_statistic, rep.category_count - 1))
    assert rep.sae == pytest.approx(2 / 25)


def test_fit_requires_population():
    with pytest.raises(ValueError):
        validate_fit(np.zeros((8, 2, 8)), PersonsMarginal())
