"""Census categories and the two joint marginal tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

AGE_BANDS = ("0-14", "15-24", "25-39", "40-54", "55-69", "70-84", "85-99", "100+")
AGE_BOUNDS = ((0, 14), (15, 24), (25, 39), (40, 54), (55, 69), (70, 84), (85, 99), (100, 110))
MAX_AGE = 110
GENDERS = ("Male", "Female")
RELATIONSHIPS = (
    "Married", "LoneParent", "U15Child", "Student",
    "O15Child", "Relative", "LonePerson", "GroupHhMember",
)
CHILD_RELATIONSHIPS = ("U15Child", "Student", "O15Child")

FAMILY_TYPES = ("CoupleNoChildren", "CoupleWithChildren", "OneParent", "OtherFamily")
FAMILY_COUNTS = ("1", "2", "3+")
COMPOSITIONS = ("LonePerson", "Group") + tuple(
    f"{n}Fam:{ft}" for n in FAMILY_COUNTS for ft in FAMILY_TYPES
)
HOUSEHOLD_SIZES = ("1", "2", "3", "4", "5", "6", "7", "8+")

# primary-family priority; couple-no-children and other-family tie at the bottom
FAMILY_PRIORITY = {"CoupleWithChildren": 3, "OneParent": 2, "CoupleNoChildren": 1, "OtherFamily": 1}
BASIC_FAMILY_SIZE = {"CoupleNoChildren": 2, "CoupleWithChildren": 3, "OneParent": 2, "OtherFamily": 2}

_ALLOWED_BANDS = {
    "Married": range(1, 8),
    "LoneParent": range(1, 8),
    "U15Child": range(0, 1),
    "Student": range(1, 2),
    "O15Child": range(1, 8),
    "Relative": range(0, 8),
    "LonePerson": range(1, 8),
    "GroupHhMember": range(1, 8),
}


def _norm_label(s: str) -> str:
    return s.strip().replace("\u2013", "-").replace("\u2014", "-")


def band_index(label: str) -> int:
    try:
        return AGE_BANDS.index(_norm_label(label))
    except ValueError:
        raise ValueError(f"unknown age category {label!r}") from None


def band_of_age(age: int) -> int:
    for i, (lo, hi) in enumerate(AGE_BOUNDS):
        if lo <= age <= hi:
            return i
    if age > MAX_AGE:
        return len(AGE_BANDS) - 1
    raise ValueError(f"age {age} outside every band")


def person_cell_possible(band: int, relationship: str) -> bool:
    return band in _ALLOWED_BANDS[relationship]


def parse_composition(name: str) -> tuple[int, str | None]:
    """Return (number of families, primary family type) for a composition label."""
    if name == "LonePerson" or name == "Group":
        return 0, None
    n, ft = name.split("Fam:")
    return (3 if n == "3+" else int(n)), ft


def composition_label(n_families: int, primary: str) -> str:
    return f"{'3+' if n_families >= 3 else n_families}Fam:{primary}"


def min_household_size(composition: str) -> int:
    if composition == "LonePerson":
        return 1
    if composition == "Group":
        return 2
    nfam, ft = parse_composition(composition)
    return BASIC_FAMILY_SIZE[ft] + 2 * (nfam - 1)


def household_cell_possible(size_index: int, composition: str) -> bool:
    size = size_index + 1
    if composition == "LonePerson":
        return size == 1
    return size >= min_household_size(composition)


@dataclass
class PersonsMarginal:
    """Counts of persons by (age band, gender, relationship): shape (8, 2, 8)."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((8, 2, 8), dtype=np.int64))

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(AGE_BANDS), len(GENDERS), len(RELATIONSHIPS)):
            raise ValueError(f"persons marginal must have 128 cells, got shape {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("persons marginal has negative counts")

    def copy(self) -> "PersonsMarginal":
        return PersonsMarginal(self.counts.copy())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def get(self, band: int, gender: str, relationship: str) -> int:
        return int(self.counts[band, GENDERS.index(gender), RELATIONSHIPS.index(relationship)])

    def impossible_mask(self) -> np.ndarray:
        mask = np.zeros(self.counts.shape, dtype=bool)
        for b in range(len(AGE_BANDS)):
            for r, rel in enumerate(RELATIONSHIPS):
                if not person_cell_possible(b, rel):
                    mask[b, :, r] = True
        return mask

    def impossible_cells(self) -> list[tuple[str, str, str, int]]:
        """Impossible cells holding non-zero counts."""
        out = []
        for b, g, r in zip(*np.nonzero(self.impossible_mask() & (self.counts > 0))):
            out.append((AGE_BANDS[b], GENDERS[g], RELATIONSHIPS[r], int(self.counts[b, g, r])))
        return out


@dataclass
class HouseholdsMarginal:
    """Counts of households by (size, composition): shape (8, 14).

    Size index 7 stands for households of eight or more persons; the
    synthesiser builds them with exactly eight.
    """

    counts: np.ndarray = field(default_factory=lambda: np.zeros((8, 14), dtype=np.int64))

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(HOUSEHOLD_SIZES), len(COMPOSITIONS)):
            raise ValueError(f"households marginal must be 8x14, got shape {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("households marginal has negative counts")

    def copy(self) -> "HouseholdsMarginal":
        return HouseholdsMarginal(self.counts.copy())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def persons_implied(self) -> int:
        sizes = np.arange(1, 9)
        return int((self.counts.sum(axis=1) * sizes).sum())

    def impossible_cells(self) -> list[tuple[str, str, int]]:
        out = []
        for s in range(len(HOUSEHOLD_SIZES)):
            for c, comp in enumerate(COMPOSITIONS):
                if self.counts[s, c] > 0 and not household_cell_possible(s, comp):
                    out.append((HOUSEHOLD_SIZES[s], comp, int(self.counts[s, c])))
        return out

    def cells(self):
        """Yield (size, composition, count) for non-zero cells in table order."""
        for s in range(len(HOUSEHOLD_SIZES)):
            for c, comp in enumerate(COMPOSITIONS):
                n = int(self.counts[s, c])
                if n:
                    yield s + 1, comp, n


def _split_regions(path: Path) -> dict[str, list[dict]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    regions: dict[str, list[dict]] = {}
    for i, row in enumerate(rows, start=2):
        row["_line"] = i
        regions.setdefault(row.get("region") or "", []).append(row)
    return regions


def read_persons_csv(path) -> dict[str, PersonsMarginal]:
    """Read persons.csv (age_category,gender,relationship,count[,region])."""
    out = {}
    for region, rows in _split_regions(Path(path)).items():
        counts = np.zeros((8, 2, 8), dtype=np.int64)
        seen = set()
        for row in rows:
            try:
                b = band_index(row["age_category"])
                g = GENDERS.index(row["gender"].strip())
                r = RELATIONSHIPS.index(row["relationship"].strip())
                n = int(row["count"])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{row['_line']}: bad persons row ({exc})") from None
            counts[b, g, r] = n
            seen.add((b, g, r))
        if len(seen) != 128:
            raise ValueError(f"{path}: region {region!r} has {len(seen)} person cells, expected 128")
        out[region] = PersonsMarginal(counts)
    return out


def read_households_csv(path) -> dict[str, HouseholdsMarginal]:
    """Read households.csv (size,composition,count[,region])."""
    out = {}
    for region, rows in _split_regions(Path(path)).items():
        counts = np.zeros((8, 14), dtype=np.int64)
        seen = set()
        for row in rows:
            try:
                s = HOUSEHOLD_SIZES.index(row["size"].strip())
                c = COMPOSITIONS.index(row["composition"].strip())
                n = int(row["count"])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{row['_line']}: bad households row ({exc})") from None
            counts[s, c] = n
            seen.add((s, c))
        if len(seen) != counts.size:
            raise ValueError(
                f"{path}: region {region!r} has {len(seen)} household cells, expected {counts.size}"
            )
        out[region] = HouseholdsMarginal(counts)
    return out


def read_age_distribution_csv(path) -> dict[str, np.ndarray]:
    """Per-year age counts (age,count[,region]); ages above 110 fold into 110."""
    out: dict[str, np.ndarray] = {}
    for region, rows in _split_regions(Path(path)).items():
        dist = np.zeros(MAX_AGE + 1)
        for row in rows:
            age = min(int(row["age"]), MAX_AGE)
            dist[age] += float(row["count"])
        out[region] = dist
    return out


def write_persons_csv(path, marginals: dict[str, PersonsMarginal]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "age_category", "gender", "relationship", "count"])
        for region, m in marginals.items():
            for b, band in enumerate(AGE_BANDS):
                for g, gender in enumerate(GENDERS):
                    for r, rel in enumerate(RELATIONSHIPS):
                        w.writerow([region, band, gender, rel, int(m.counts[b, g, r])])


def write_households_csv(path, marginals: dict[str, HouseholdsMarginal]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "size", "composition", "count"])
        for region, m in marginals.items():
            for s, size in enumerate(HOUSEHOLD_SIZES):
                for c, comp in enumerate(COMPOSITIONS):
                    w.writerow([region, size, comp, int(m.counts[s, c])])
