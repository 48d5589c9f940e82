"""Goodness of fit of a synthetic population against the persons table."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..stats import chi2_sf
from .categories import AGE_BANDS, GENDERS, RELATIONSHIPS, PersonsMarginal


@dataclass
class FitReport:
    ft_statistic: float
    p_value: float
    sae: float
    category_count: int
    # (gender, relationship, from band, into band) for zero-expected cells that were pooled
    merged: list[tuple[str, str, str, str]] = field(default_factory=list)
    # (gender, relationship, observed) for classes with no expected mass at all
    unmatched: list[tuple[str, str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["merged"] = [list(m) for m in self.merged]
        d["unmatched"] = [list(u) for u in self.unmatched]
        return d


def freeman_tukey(observed, expected) -> float:
    o = np.asarray(observed, dtype=float)
    e = np.asarray(expected, dtype=float)
    return float(4.0 * np.sum((np.sqrt(o) - np.sqrt(e)) ** 2))


def standardised_absolute_error(observed, expected) -> float:
    o = np.asarray(observed, dtype=float)
    e = np.asarray(expected, dtype=float)
    total = e.sum()
    return float(np.abs(o - e).sum() / total) if total > 0 else 0.0


def person_counts(generated) -> np.ndarray:
    """Counts by (band, gender, relationship) from persons or an already-tabulated array."""
    if isinstance(generated, np.ndarray):
        return generated.astype(np.int64)
    if hasattr(generated, "person_counts"):
        return generated.person_counts()
    counts = np.zeros((8, 2, 8), dtype=np.int64)
    for p in generated:
        counts[p.age_band, GENDERS.index(p.gender), RELATIONSHIPS.index(p.relationship)] += 1
    return counts


def _nearest_supported(bands_with_mass: list[int], band: int) -> int | None:
    if not bands_with_mass:
        return None
    return min(bands_with_mass, key=lambda b: (abs(b - band), b))


def validate_fit(generated, reference: PersonsMarginal) -> FitReport:
    """Freeman-Tukey statistic, its chi-square p-value, and SAE over possible categories.

    Zero-expected possible cells are pooled into the nearest age band of the
    same gender and relationship before the FT test; SAE is computed on the
    unpooled cells.
    """
    observed = person_counts(generated)
    if observed.sum() == 0:
        raise ValueError("generated population is empty")
    expected = reference.counts
    possible = ~reference.impossible_mask()
    sae = standardised_absolute_error(observed[possible], expected[possible])

    obs_cells, exp_cells = [], []
    merged, unmatched = [], []
    for g in range(len(GENDERS)):
        for r in range(len(RELATIONSHIPS)):
            bands = [b for b in range(len(AGE_BANDS)) if possible[b, g, r]]
            supported = [b for b in bands if expected[b, g, r] > 0]
            pooled = {b: [int(observed[b, g, r]), int(expected[b, g, r])] for b in supported}
            for b in bands:
                if expected[b, g, r] > 0:
                    continue
                target = _nearest_supported(supported, b)
                if target is None:
                    if observed[b, g, r] > 0:
                        unmatched.append((GENDERS[g], RELATIONSHIPS[r], int(observed[b, g, r])))
                    continue
                pooled[target][0] += int(observed[b, g, r])
                merged.append((GENDERS[g], RELATIONSHIPS[r], AGE_BANDS[b], AGE_BANDS[target]))
            for o, e in pooled.values():
                obs_cells.append(o)
                exp_cells.append(e)

    ft = freeman_tukey(obs_cells, exp_cells)
    k = len(obs_cells)
    p = chi2_sf(ft, k - 1) if k > 1 else 1.0
    return FitReport(ft, p, sae, k, merged, unmatched)
