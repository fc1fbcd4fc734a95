"""Dynamical metric, separated-set counting by all three methods, rates,
profiles, report export, and the Markov-view text format."""
from __future__ import annotations

import math
import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_boundary_fixed_pwa, random_pwa
from mdimlab import (
    ContractError,
    CountRecord,
    DomainError,
    GridPrecisionError,
    MarkovBranch,
    MarkovView,
    PwaMap,
    ResourceError,
    SerializationError,
    conjugate_into_interval,
    count_cylinders,
    count_separated_exhaustive,
    count_separated_greedy,
    dn_distance,
    dump_views,
    identity_map,
    iterate,
    load_views,
    mdim_profile,
    orbit,
    rate_at_scale,
    report_to_csv,
    report_to_json,
    tent_map,
    verify_cylinder_separation,
)
from mdimlab.separation import (
    CSV_HEADER,
    METHOD_CYLINDER,
    METHOD_EXHAUSTIVE,
    METHOD_GREEDY,
    cylinder_interval,
)

F = Fraction

seeds = st.integers(0, 10**9)


def tent_view() -> MarkovView:
    """The tent map as two touching full branches (no separation certificate)."""
    return MarkovView(
        F(0), F(1),
        (MarkovBranch(F(0), F(1, 2), True), MarkovBranch(F(1, 2), F(1), False)),
        separation_scale=None,
        map=tent_map(),
    )


def twelve_grid() -> list[Fraction]:
    return [F(j, 11) for j in range(12)]


# === dynamical metric =========================================================

def test_dn_distance_vanishes_on_the_diagonal(tent):
    assert dn_distance(tent, F(1, 3), F(1, 3), 4) == 0


def test_dn_distance_tent_examples(tent):
    assert dn_distance(tent, F(0), F(1, 2), 2) == 1
    assert dn_distance(tent, F(1, 10), F(1, 5), 1) == F(1, 10)
    assert dn_distance(tent, F(1, 10), F(1, 5), 2) == F(1, 5)


def test_dn_distance_needs_a_positive_window(tent):
    with pytest.raises(DomainError):
        dn_distance(tent, F(0), F(1), 0)


def test_orbit_is_pointwise(tent):
    assert orbit(tent, F(1, 10), 3) == [F(1, 10), F(1, 5), F(2, 5)]
    with pytest.raises(DomainError):
        orbit(tent, F(1, 10), 0)


# === greedy counting ==========================================================

def test_greedy_identity_wide_scale(identity):
    rec = count_separated_greedy(identity, 1, F(3, 10), F(1, 1000))
    assert rec.count == 4
    assert rec.method == METHOD_GREEDY
    assert rec.grid_resolution == F(1, 1000)


def test_greedy_scale_at_least_the_diameter_gives_one(tent):
    assert count_separated_greedy(tent, 3, F(1), F(1, 4)).count == 1


def test_greedy_tent_half_scale(tent):
    assert count_separated_greedy(tent, 1, F(1, 2), F(1, 1000)).count == 2


def test_greedy_rejects_coarse_grids(tent):
    with pytest.raises(GridPrecisionError, match=r"epsilon/4"):
        count_separated_greedy(tent, 1, F(1, 10), F(1, 20))


def test_greedy_is_maximal_within_its_grid(tent):
    # no unselected grid point can be added: greedy sets are inclusion-maximal
    from mdimlab.separation import greedy_separated_points

    eps, grid = F(1, 4), F(1, 16)
    points = [grid * j for j in range(17)]
    chosen = greedy_separated_points(tent, 2, eps, points)
    for p in points:
        if p in chosen:
            continue
        assert any(dn_distance(tent, p, s, 2) <= eps for s in chosen)


# === exhaustive counting ======================================================

def test_exhaustive_examples(identity):
    assert count_separated_exhaustive(identity, 1, F(2, 5), [F(0), F(1, 2), F(1)]).count == 3
    assert count_separated_exhaustive(identity, 1, F(2, 5), [F(1, 2)]).count == 1
    assert count_separated_exhaustive(identity, 1, F(3, 10), [F(0), F(1, 4), F(1, 2)]).count == 2


def test_exhaustive_caps_the_point_set(identity):
    with pytest.raises(ResourceError):
        count_separated_exhaustive(identity, 1, F(1, 2), [F(j, 20) for j in range(15)])


def test_exhaustive_rejects_empty_points(identity):
    with pytest.raises(DomainError):
        count_separated_exhaustive(identity, 1, F(1, 2), [])


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.fractions(min_value="1/10", max_value="9/10", max_denominator=20))
def test_exhaustive_matches_a_direct_subset_scan(seed, n, eps):
    rng = random.Random(seed)
    m = random_pwa(rng)
    points = sorted({F(rng.randint(0, 16), 16) for _ in range(rng.randint(1, 7))})
    rec = count_separated_exhaustive(m, n, eps, points)
    best = 0
    for r in range(len(points), 0, -1):
        if any(
            all(dn_distance(m, a, b, n) > eps for a, b in combinations(sub, 2))
            for sub in combinations(points, r)
        ):
            best = r
            break
    assert rec.count == best


# === cylinder counting ========================================================

def test_cylinders_tent_binary(tent):
    assert count_cylinders(tent_view(), 5, F(1, 100)).count == 32


def test_cylinders_depth_zero_counts_one():
    assert count_cylinders(tent_view(), 0, F(1, 100)).count == 1


def test_cylinders_need_some_scale():
    with pytest.raises(DomainError, match="no scale"):
        count_cylinders(tent_view(), 3)


def test_cylinders_staircase_level_zero(half_model):
    view = half_model.view(0)
    rec = count_cylinders(view, 2)
    assert rec.count == 64
    assert rec.epsilon == F(1, 58)
    assert rec.method == METHOD_CYLINDER


def test_cylinder_representatives_are_certified_separated(half_model):
    margin = verify_cylinder_separation(half_model.view(0), 2)
    assert margin > F(1, 58)


def test_cylinder_widths_shrink_geometrically(half_model):
    view = half_model.view(0)
    for depth in (1, 2, 3):
        for itinerary in [(0,) * depth, (7,) * depth, (3, 5, 1)[:depth]]:
            lo, hi = cylinder_interval(view, itinerary)
            assert hi - lo == F(1, 2) * F(1, 29) ** depth


def test_view_rejects_gaps_at_or_below_the_declared_scale():
    with pytest.raises(ContractError, match="separation scale"):
        MarkovView(
            F(0), F(1),
            (MarkovBranch(F(0), F(1, 2), True), MarkovBranch(F(1, 2), F(1), False)),
            separation_scale=F(1, 100),
        )


def test_view_rejects_branches_that_miss_the_core(tent):
    with pytest.raises(ContractError, match="does not map onto the core"):
        MarkovView(F(0), F(1), (MarkovBranch(F(0), F(1, 4), True),), None, tent)


def test_view_rejects_branches_broken_by_a_node():
    # crosses the core end to end, but with a kink at 1/4 inside the branch
    kinked = PwaMap.from_nodes(
        [(F(0), F(0)), (F(1, 4), F(1, 3)), (F(1, 2), F(1)), (F(1), F(0))]
    )
    with pytest.raises(ContractError, match="not affine"):
        MarkovView(F(0), F(1), (MarkovBranch(F(0), F(1, 2), True),), None, kinked)


# === rates and profiles =======================================================

def test_rate_identity_is_flat(identity):
    entry = rate_at_scale(identity, F(1, 10), (1, 3), METHOD_GREEDY, F(1, 40))
    assert entry.h_hat == 0.0
    assert entry.ratio == 0.0


def test_rate_tent_cylinder_gives_log_two():
    entry = rate_at_scale(tent_view(), F(1, 100), (2, 8), METHOD_CYLINDER)
    assert entry.h_hat == pytest.approx(math.log(2), abs=1e-12)
    assert entry.max_step == pytest.approx(math.log(2), abs=1e-12)


def test_rate_staircase_level_zero(half_model):
    entry = rate_at_scale(half_model.view(0), F(1, 58), (1, 4), METHOD_CYLINDER)
    assert entry.h_hat == pytest.approx(math.log(8), abs=1e-12)
    assert entry.ratio == pytest.approx(math.log(8) / math.log(58), abs=1e-12)


def test_rate_window_validation(identity):
    with pytest.raises(DomainError):
        rate_at_scale(identity, F(1, 10), (3, 3), METHOD_GREEDY, F(1, 40))
    with pytest.raises(DomainError):
        rate_at_scale(identity, F(3, 2), (1, 3), METHOD_GREEDY, F(1, 40))


def test_profile_identity_is_zero(identity):
    report = mdim_profile(identity, [F(1, 10), F(1, 100)], (1, 3), METHOD_GREEDY, F(1, 400))
    assert [e.ratio for e in report.entries] == [0.0, 0.0]
    assert report.upper == report.lower == 0.0


def test_profile_tent_ratios_decay_like_log_two():
    scales = [F(1, 10), F(1, 100), F(1, 1000)]
    report = mdim_profile(tent_view(), scales, (1, 4), METHOD_CYLINDER)
    ratios = [e.ratio for e in report.entries]
    for ratio, eps in zip(ratios, scales):
        assert ratio == pytest.approx(math.log(2) / abs(math.log(eps)), abs=1e-12)
    assert ratios[0] > ratios[1] > ratios[2]


def test_profile_staircase_levels_bracket_one_half(half_model):
    views = [half_model.view(0), half_model.view(1)]
    scales = [F(1, 58), F(1, 214948)]
    report = mdim_profile(views, scales, (1, 3), METHOD_CYLINDER)
    for entry in report.entries:
        assert abs(entry.ratio - 0.5) < 0.1


def test_profile_validation(identity):
    with pytest.raises(DomainError):
        mdim_profile(identity, [], (1, 3), METHOD_GREEDY)
    with pytest.raises(DomainError):
        mdim_profile(identity, [F(1, 10), F(1, 10)], (1, 3), METHOD_GREEDY)
    with pytest.raises(DomainError):
        mdim_profile([identity], [F(1, 10), F(1, 100)], (1, 3), METHOD_GREEDY)


def test_count_record_validation():
    with pytest.raises(DomainError):
        CountRecord(1, F(1, 10), 0, METHOD_GREEDY)
    with pytest.raises(DomainError):
        CountRecord(1, F(-1, 10), 1, METHOD_GREEDY)
    with pytest.raises(DomainError):
        CountRecord(1, F(1, 10), 1, "guesswork")


# === counting laws ============================================================

@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3))
def test_exhaustive_count_shrinks_as_the_scale_grows(seed, n):
    m = random_pwa(random.Random(seed))
    points = [F(j, 10) for j in range(11)]
    counts = [
        count_separated_exhaustive(m, n, eps, points).count
        for eps in (F(1, 5), F(3, 10), F(2, 5))
    ]
    assert counts[0] >= counts[1] >= counts[2]


@settings(max_examples=40, deadline=None)
@given(seeds, st.fractions(min_value="1/5", max_value="3/5", max_denominator=20))
def test_exhaustive_count_grows_with_the_window(seed, eps):
    m = random_pwa(random.Random(seed))
    points = [F(j, 10) for j in range(11)]
    counts = [count_separated_exhaustive(m, n, eps, points).count for n in (1, 2, 3)]
    assert counts[0] <= counts[1] <= counts[2]


def test_greedy_counts_honor_the_same_laws_on_reference_maps(tent, identity):
    for m in (tent, identity):
        for n in (1, 2):
            a = count_separated_greedy(m, n, F(1, 5), F(1, 40)).count
            b = count_separated_greedy(m, n, F(2, 5), F(1, 40)).count
            assert a >= b
        for eps in (F(1, 5), F(2, 5)):
            a = count_separated_greedy(m, 1, eps, F(1, 40)).count
            b = count_separated_greedy(m, 2, eps, F(1, 40)).count
            assert a <= b


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 3), st.integers(1, 2),
       st.fractions(min_value="2/5", max_value="4/5", max_denominator=20))
def test_separated_sets_survive_power_maps(seed, k, n, eps):
    # an (n,eps)-separated set for the k-th power map is (k*n,eps)-separated
    # for the map itself, so the exact counts are ordered
    m = random_pwa(random.Random(seed))
    points = twelve_grid()
    power = count_separated_exhaustive(iterate(m, k), n, eps, points).count
    direct = count_separated_exhaustive(m, k * n, eps, points).count
    assert power <= direct


def test_greedy_sits_between_exhaustive_bounds(tent):
    points = twelve_grid()
    for n, eps in [(1, F(2, 5)), (2, F(1, 2)), (3, F(4, 9))]:
        lower = count_separated_exhaustive(tent, n, 2 * eps, points).count
        mid = count_separated_greedy(tent, n, eps, F(1, 11)).count
        upper = count_separated_exhaustive(tent, n, eps, points).count
        assert lower <= mid <= upper


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 2),
       st.fractions(min_value="1/4", max_value="3/4", max_denominator=16),
       st.fractions(min_value="1/8", max_value="1/2", max_denominator=16))
def test_affine_conjugation_rescales_counts_exactly(seed, n, lo, width):
    hi = lo + width
    if hi >= 1:
        hi = F(1)
    rng = random.Random(seed)
    m = random_boundary_fixed_pwa(rng)
    conjugated = conjugate_into_interval(m, lo, hi)
    lam = hi - lo
    points = sorted({F(rng.randint(0, 24), 24) for _ in range(8)})
    eps = F(1, 5)
    inner = count_separated_exhaustive(m, n, eps, points).count
    mapped = [lo + lam * x for x in points]
    outer = count_separated_exhaustive(conjugated, n, lam * eps, mapped).count
    assert inner == outer


# === report export ============================================================

def test_csv_layout(half_model):
    report = mdim_profile(
        [half_model.view(0), half_model.view(1)],
        [F(1, 58), F(1, 214948)], (1, 2), METHOD_CYLINDER,
    )
    lines = report_to_csv(report).splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 5
    # rows sorted by (epsilon, n): the smaller scale comes first
    assert lines[1].startswith("1/214948,1,464,cylinder-exact,,")
    assert lines[2].startswith("1/214948,2,215296,cylinder-exact,,")
    assert lines[3].startswith("1/58,1,8,cylinder-exact,,")
    assert lines[4].startswith("1/58,2,64,cylinder-exact,,")
    for line in lines[1:]:
        h_hat, ratio = line.split(",")[-2:]
        assert float(h_hat) > 0 and 0 <= float(ratio) <= 1


def test_csv_carries_grid_resolution(identity):
    report = mdim_profile(identity, [F(1, 10)], (1, 2), METHOD_GREEDY, F(1, 40))
    rows = report_to_csv(report).splitlines()[1:]
    assert all(row.split(",")[4] == "1/40" for row in rows)


def test_json_layout(identity):
    report = mdim_profile(identity, [F(1, 10)], (1, 2), METHOD_GREEDY, F(1, 40))
    doc = report_to_json(report)
    assert set(doc) == {"upper", "lower", "entries"}
    entry = doc["entries"][0]
    assert entry["epsilon"] == "1/10"
    assert entry["window"] == [1, 2]
    assert [r["n"] for r in entry["records"]] == [1, 2]


# === views text format ========================================================

def test_views_round_trip_drops_only_the_map(half_model):
    text = dump_views(half_model.views)
    loaded = load_views(text)
    assert len(loaded) == 2
    for original, copy in zip(half_model.views, loaded):
        assert copy.map is None
        assert (copy.core_lo, copy.core_hi) == (original.core_lo, original.core_hi)
        assert copy.branches == original.branches
        assert copy.separation_scale == original.separation_scale
        assert copy.label == original.label
    assert dump_views(loaded) == text


def test_views_format_is_geometry_only(half_model):
    text = dump_views([half_model.view(0)])
    first, second = text.splitlines()[:2]
    assert first == "markov-views v1"
    assert second == "view core 1/2:1/1 scale 1/58 label level 0"


def test_views_loader_rejects_malformed_documents():
    with pytest.raises(SerializationError):
        load_views("other-header v1\n")
    with pytest.raises(SerializationError, match="no branch lines"):
        load_views("markov-views v1\nview core 0/1:1/1 scale -\n")
    with pytest.raises(SerializationError, match="bad branch line"):
        load_views("markov-views v1\nview core 0/1:1/1 scale -\nbranch sideways 0/1:1/2\n")
    with pytest.raises(SerializationError, match="no views"):
        load_views("markov-views v1\n")
