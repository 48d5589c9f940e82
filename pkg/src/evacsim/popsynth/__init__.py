"""Synthetic population: persons in families in households in dwellings."""

from .categories import (
    AGE_BANDS, COMPOSITIONS, GENDERS, HOUSEHOLD_SIZES, RELATIONSHIPS,
    HouseholdsMarginal, PersonsMarginal,
)
from .cleaning import InconsistentMarginalsError, clean_data
from .synthesis import Family, Household, Person, RegionPopulation, SynthesisError, synthesize_region

__all__ = [
    "AGE_BANDS", "COMPOSITIONS", "GENDERS", "HOUSEHOLD_SIZES", "RELATIONSHIPS",
    "Family", "Household", "HouseholdsMarginal", "InconsistentMarginalsError", "Person",
    "PersonsMarginal", "RegionPopulation", "SynthesisError", "clean_data", "synthesize_region",
]
