from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evacsim.popsynth.locations import (
    Dwelling, Locality, assign_dwellings, assign_evac_coordinates, choose_activity_location,
    locality_probabilities,
)


def households(n, zone="Z"):
    return [SimpleNamespace(zone=zone, coordinate=None) for _ in range(n)]


def dwellings(n, zone="Z"):
    return [Dwelling(f"d{i}", float(i), float(-i), zone) for i in range(n)]


def test_single_dwelling():
    hh = households(1)
    assign_dwellings(hh, dwellings(1), seed=0)
    assert hh[0].coordinate == (0.0, -0.0)


def test_dwelling_permutation_deterministic():
    a, b = households(100), households(100)
    assign_dwellings(a, dwellings(100), seed=9)
    assign_dwellings(b, dwellings(100), seed=9)
    coords = [h.coordinate for h in a]
    assert coords == [h.coordinate for h in b]
    assert sorted(c[0] for c in coords) == list(range(100))


def test_too_few_dwellings_names_zone():
    with pytest.raises(ValueError, match="'Z'"):
        assign_dwellings(households(3), dwellings(2), seed=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_dwellings_injective_within_zone(na, nb, spare, seed):
    hh = households(na, "A") + households(nb, "B")
    dw = dwellings(na + spare, "A") + [Dwelling(f"b{i}", 1e6 + i, 0.0, "B") for i in range(nb + spare)]
    assign_dwellings(hh, dw, seed)
    a = [h.coordinate for h in hh[:na]]
    b = [h.coordinate for h in hh[na:]]
    assert len(set(a)) == na and len(set(b)) == nb
    assert all(c[0] < 1e6 for c in a) and all(c[0] >= 1e6 for c in b)


def test_single_invac_point_for_everyone():
    homes = [(0, 0), (1000, 5), (-400, 9000)]
    out = assign_evac_coordinates(homes, [False] * 3, [(1, 1), (2, 2)], [(7, 7)], [], seed=0)
    assert all(e.invac == (7.0, 7.0) for e in out)
    assert all(e.deps is None for e in out)


def test_invac_is_nearest():
    out = assign_evac_coordinates([(0, 0), (100, 0)], [False, False], [(0, 0)], [(10, 0), (90, 0)], [], seed=0)
    assert [e.invac for e in out] == [(10.0, 0.0), (90.0, 0.0)]


def test_empty_pool_falls_back_to_disc():
    out = assign_evac_coordinates([(0, 0)] * 200, [True] * 200, [(1, 1)], [(0, 0)], [], seed=3)
    d = np.array([np.hypot(*e.deps) for e in out])
    assert (d <= 5000.0).all()
    assert not any(e.deps_from_pool for e in out)


def test_two_carers_pool_of_one():
    for seed in range(20):
        out = assign_evac_coordinates([(0, 0), (50, 50)], [True, True], [(1, 1)], [(0, 0)], [(3000, 0)], seed)
        from_pool = [e for e in out if e.deps_from_pool]
        assert len(from_pool) == 1 and from_pool[0].deps == (3000.0, 0.0)
        other = next(e for e, h in zip(out, [(0, 0), (50, 50)]) if not e.deps_from_pool)
        assert other.deps != (3000.0, 0.0)


def test_evac_drawn_with_replacement_from_points():
    out = assign_evac_coordinates([(0, 0)] * 500, [False] * 500, [(1, 1), (2, 2)], [(0, 0)], [], seed=1)
    picks = [e.evac for e in out]
    assert set(picks) == {(1.0, 1.0), (2.0, 2.0)}
    assert abs(picks.count((1.0, 1.0)) / 500 - 0.5) < 0.08


def test_no_points_raises():
    with pytest.raises(ValueError):
        assign_evac_coordinates([(0, 0)], [False], [], [(0, 0)], [], seed=0)


def test_single_location_consumed():
    loc = Locality((0, 0), [(5, 5)])
    assert choose_activity_location((0, 0), [loc], np.random.default_rng(0)) == (5, 5)
    assert loc.weights == [0]
    with pytest.raises(ValueError, match="exhausted"):
        choose_activity_location((0, 0), [loc], np.random.default_rng(0))


def test_gravity_probabilities():
    near = Locality((1000, 0), [(1000, 0)], [4])
    far = Locality((-2000, 0), [(-2000, 0)], [4])
    p = locality_probabilities((0, 0), [near, far])
    # (4/d) / (4/d + 4/2d)
    assert p == pytest.approx([2 / 3, 1 / 3])


def test_weight_ratio_within_locality():
    rng = np.random.default_rng(42)
    picks = {"a": 0, "b": 0}
    for _ in range(10_000):
        loc = Locality((0, 0), [(1, 0), (2, 0)], [10, 1])  # fresh weights each draw
        picks["a" if choose_activity_location((500, 500), [loc], rng) == (1, 0) else "b"] += 1
    # 10:1 split, binomial sd of the 'a' share is about 0.0027
    assert picks["a"] / 10_000 == pytest.approx(10 / 11, abs=0.01)
