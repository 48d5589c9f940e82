"""Reconcile the persons table with what the households table requires."""

from __future__ import annotations

import logging

import numpy as np

from .categories import (
    AGE_BANDS, CHILD_RELATIONSHIPS, COMPOSITIONS, GENDERS, HOUSEHOLD_SIZES,
    RELATIONSHIPS, HouseholdsMarginal, PersonsMarginal, household_cell_possible,
    parse_composition, person_cell_possible,
)

log = logging.getLogger(__name__)


class InconsistentMarginalsError(ValueError):
    """The two tables cannot be reconciled by adding persons."""


# used only when a relationship class is empty everywhere
_DEFAULT_CELL = {
    "Married": 3,
    "LoneParent": 2,
    "U15Child": 0,
    "Relative": 4,
    "LonePerson": 4,
    "GroupHhMember": 1,
}


def required_persons(households: HouseholdsMarginal) -> dict[str, int]:
    """Minimum persons per relationship class for every basic family structure."""
    primaries = {"CoupleNoChildren": 0, "CoupleWithChildren": 0, "OneParent": 0, "OtherFamily": 0}
    lone = group_members = 0
    for size, comp, n in households.cells():
        nfam, ft = parse_composition(comp)
        if comp == "LonePerson":
            lone += n
        elif comp == "Group":
            group_members += size * n
        else:
            primaries[ft] += n
    couples = primaries["CoupleNoChildren"] + primaries["CoupleWithChildren"]
    return {
        "MarriedMale": couples,
        "MarriedFemale": couples,
        "LoneParent": primaries["OneParent"],
        "Children": primaries["CoupleWithChildren"] + primaries["OneParent"],
        "Relative": 2 * primaries["OtherFamily"],
        "LonePerson": lone,
        "GroupHhMember": group_members,
    }


def _available(persons: PersonsMarginal, key: str) -> int:
    c = persons.counts
    if key == "MarriedMale":
        return int(c[:, 0, RELATIONSHIPS.index("Married")].sum())
    if key == "MarriedFemale":
        return int(c[:, 1, RELATIONSHIPS.index("Married")].sum())
    if key == "Children":
        return int(sum(c[:, :, RELATIONSHIPS.index(r)].sum() for r in CHILD_RELATIONSHIPS))
    return int(c[:, :, RELATIONSHIPS.index(key)].sum())


def _modal_cell(persons: PersonsMarginal, key: str) -> tuple[int, int, int]:
    """(band, gender, relationship) cell that receives added persons for ``key``."""
    c = persons.counts
    if key in ("MarriedMale", "MarriedFemale"):
        r = RELATIONSHIPS.index("Married")
        g = 0 if key == "MarriedMale" else 1
        col = c[:, g, r]
        b = int(np.argmax(col)) if col.sum() else _DEFAULT_CELL["Married"]
        return b, g, r
    rels = CHILD_RELATIONSHIPS if key == "Children" else (key,)
    best, best_n = None, -1
    for rel in rels:
        r = RELATIONSHIPS.index(rel)
        for b in range(len(AGE_BANDS)):
            if not person_cell_possible(b, rel):
                continue
            for g in range(len(GENDERS)):
                if c[b, g, r] > best_n:
                    best, best_n = (b, g, r), c[b, g, r]
    if best_n <= 0:
        rel = "U15Child" if key == "Children" else key
        g = 1 if rel == "LoneParent" else 0
        return _DEFAULT_CELL[rel], g, RELATIONSHIPS.index(rel)
    return best


def clean_data(
    persons: PersonsMarginal,
    households: HouseholdsMarginal,
    adjustments: list | None = None,
) -> tuple[PersonsMarginal, HouseholdsMarginal]:
    """Make the persons table sufficient for every basic family the households imply.

    Only additions are made (in the modal age band of the short class), plus
    zeroing of impossible person cells. Secondary and tertiary families are
    not described by the tables; shortfalls there are repaired during
    synthesis instead.
    """
    persons = persons.copy()
    households = households.copy()
    if adjustments is None:
        adjustments = []

    for size, comp, n in households.cells():
        if not household_cell_possible(HOUSEHOLD_SIZES.index(str(size) if size < 8 else "8+"), comp):
            raise InconsistentMarginalsError(
                f"household cell (size={size}, composition={comp}) has {n} households "
                "but cannot be formed"
            )

    for band, gender, rel, n in persons.impossible_cells():
        b, g, r = AGE_BANDS.index(band), GENDERS.index(gender), RELATIONSHIPS.index(rel)
        persons.counts[b, g, r] = 0
        adjustments.append(("removed", band, gender, rel, n))
        log.warning("removed %d persons from impossible cell %s/%s/%s", n, band, gender, rel)

    if households.total > 0:
        adults = int(persons.counts[1:].sum())
        if adults == 0:
            size, comp, n = next(households.cells())
            raise InconsistentMarginalsError(
                f"household cell (size={size}, composition={comp}) needs adults "
                "but the persons table has none"
            )

    for key, need in required_persons(households).items():
        have = _available(persons, key)
        if have < need:
            b, g, r = _modal_cell(persons, key)
            persons.counts[b, g, r] += need - have
            adjustments.append(("added", AGE_BANDS[b], GENDERS[g], RELATIONSHIPS[r], need - have))
            log.info("added %d %s persons in band %s", need - have, RELATIONSHIPS[r], AGE_BANDS[b])
    return persons, households


__all__ = ["InconsistentMarginalsError", "clean_data", "required_persons", "COMPOSITIONS"]
