"""Crossing-lap detection on the interval and the planar baker model:
packing, geometry checks, certified separated families, and serialization."""
from __future__ import annotations

import dataclasses
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdimlab import (
    ContractError,
    DomainError,
    PwaMap,
    ResourceError,
    SerializationError,
    VerificationError,
    build_model_2d,
    certificate_to_csv,
    detect_1d,
    dump_model_2d,
    interval_distance,
    load_model_2d,
    monotone_laps,
    orbit_2d,
    plane_distance,
    ratio_lower_bound,
    separated_bound_2d,
    verify_conditions,
)

F = Fraction

UNIT = (F(0), F(1))


def reference_model():
    """N = 4 slabs on [-1/2, 1/2]^2 at scale 1/16, chained over two stages."""
    return build_model_2d(4, F(1, 2), F(1, 16), 2, width=F(1, 8))


# === interval tools ===========================================================

def test_interval_distance_is_the_larger_endpoint_shift():
    assert interval_distance((F(0), F(1, 4)), (F(1, 2), F(5, 8))) == F(1, 2)
    assert interval_distance((F(0), F(1)), (F(0), F(1))) == 0


def test_monotone_laps_splits_at_direction_flips(tent):
    laps = monotone_laps(tent, UNIT)
    assert [(lap.lo, lap.hi, lap.increasing) for lap in laps] == [
        (F(0), F(1, 2), True), (F(1, 2), F(1), False),
    ]
    assert all((lap.img_lo, lap.img_hi) == (F(0), F(1)) for lap in laps)


def test_monotone_laps_attach_plateaus_to_the_running_lap():
    m = PwaMap.from_nodes([(F(0), F(0)), (F(1, 4), F(1, 2)), (F(1, 2), F(1, 2)), (F(1), F(0))])
    laps = monotone_laps(m, UNIT)
    assert [(lap.lo, lap.hi, lap.increasing) for lap in laps] == [
        (F(0), F(1, 2), True), (F(1, 2), F(1), False),
    ]


# === 1-D detection ============================================================

def test_detect_tent_finds_both_crossings(tent):
    report = detect_1d(tent, UNIT, UNIT, F(1, 8))
    assert report.count == 2
    assert report.min_separation == F(1, 2)
    assert report.margin == 0
    assert [lap.increasing for lap in report.laps] == [True, False]


def test_detect_identity_finds_a_single_crossing(identity):
    report = detect_1d(identity, UNIT, UNIT, F(1, 8))
    assert report.count == 1
    assert report.min_separation is None
    assert report.margin == 0


def test_detect_staircase_level_zero(half_model):
    core = (F(1, 2), F(1))
    report = detect_1d(half_model.map, core, core, F(1, 58))
    assert report.count == 15
    assert sum(lap.increasing for lap in report.laps) == 8
    assert report.min_separation == F(3, 116)
    assert report.min_separation > F(1, 58)
    assert report.margin == 0


def test_detect_with_a_margin_requirement(tent):
    report = detect_1d(tent, UNIT, (F(1, 4), F(3, 4)), F(1, 8), eta=F(1, 8))
    assert report.count == 2
    assert report.min_separation == F(1, 2)
    assert report.margin == F(1, 4)


def test_detect_reports_zero_when_the_margin_is_unreachable(tent):
    report = detect_1d(tent, UNIT, (F(1, 4), F(3, 4)), F(1, 8), eta=F(1, 3))
    assert report.count == 0
    assert report.min_separation is None
    assert report.margin is None


def test_detect_separation_prunes_adjacent_laps(half_model):
    # at a huge scale only one lap of the staircase core can be kept
    core = (F(1, 2), F(1))
    report = detect_1d(half_model.map, core, core, F(1, 2))
    assert report.count == 1


def test_detect_validation(tent):
    with pytest.raises(DomainError, match="degenerate core"):
        detect_1d(tent, UNIT, (F(1, 2), F(1, 2)), F(1, 8))
    with pytest.raises(DomainError, match="inside"):
        detect_1d(tent, (F(1, 4), F(3, 4)), UNIT, F(1, 8))
    with pytest.raises(DomainError, match="eta"):
        detect_1d(tent, UNIT, UNIT, F(1, 8), eta=F(-1, 8))
    with pytest.raises(DomainError, match="epsilon"):
        detect_1d(tent, UNIT, UNIT, F(-1, 8))


# === 2-D model construction ===================================================

def test_build_reference_model_geometry():
    model = reference_model()
    assert model.width == F(1, 8)
    assert model.offsets == (F(-1, 2), F(-5, 24), F(1, 12), F(3, 8))
    assert model.orientations == (1, -1, 1, -1)
    assert model.alpha == pytest.approx(0.25)       # log 4 / (2 log 16)
    # slabs tile flush against both edges with uniform gaps of 1/6
    assert model.offsets[0] == -model.delta
    assert model.offsets[-1] + model.width == model.delta
    for a, b in zip(model.offsets, model.offsets[1:]):
        assert b - (a + model.width) == F(1, 6)


def test_build_default_width_splits_the_slack():
    model = build_model_2d(2, F(1, 2), F(1, 8), 1)
    assert model.width == (2 * model.delta - 2 * model.epsilon) / 4
    assert verify_conditions(model).ok


def test_single_strip_needs_no_gap():
    model = build_model_2d(1, F(1, 2), F(1, 4), 1)
    assert model.width == 2 * model.delta
    summary = verify_conditions(model)
    assert summary.ok
    packing = next(c for c in summary.checks if c.name == "packing")
    assert "single strip" in packing.detail


def test_packing_rejections_name_the_inequality():
    with pytest.raises(ContractError, match=r"N\*epsilon"):
        build_model_2d(16, F(1, 2), F(1, 16), 1)     # 16/16 == 2*delta
    with pytest.raises(ContractError, match=r"N\*epsilon"):
        build_model_2d(256, F(1), F(1, 16), 1)       # 16 > 2*delta
    with pytest.raises(ContractError, match=r"N\*\(width \+ epsilon\)"):
        build_model_2d(4, F(1, 2), F(1, 16), 1, width=F(1, 4))
    with pytest.raises(ContractError, match="positive"):
        build_model_2d(4, F(1, 2), F(1, 16), 1, width=F(0))


def test_branch_arithmetic_lands_in_the_strip():
    model = reference_model()
    for j in range(model.N):
        (s_lo, s_hi), _ = model.strip(j)
        corners = [
            (x, y)
            for x in (-model.delta, model.delta)
            for y in (model.offsets[j], model.offsets[j] + model.width)
        ]
        for corner in corners:
            x1, y1 = model.apply_branch(j, corner)
            assert s_lo <= x1 <= s_hi
            assert abs(y1) == model.delta            # corners land on the rim


def test_apply_routes_points_through_their_slab():
    model = reference_model()
    point = (F(0), model.offsets[2] + model.width / 2)
    assert model.slab_index(point[1]) == 2
    assert model.apply(point) == model.apply_branch(2, point)
    with pytest.raises(DomainError, match="no horizontal slab"):
        model.slab_index(F(0))                       # 0 falls in the gap above slab 1


def test_plane_distance_is_the_sup_norm():
    assert plane_distance((F(0), F(0)), (F(1, 4), F(-1, 2))) == F(1, 2)


def test_orbit_2d_tracks_the_stage_map():
    # arbitrary slab points may fall into a gap after one step; certificate
    # representatives are exactly the points whose images stay in slabs
    model = reference_model()
    cert = separated_bound_2d(model, 1)
    for itin, rep in zip(cert.itineraries, cert.points):
        pts = orbit_2d(model, rep, 2)
        assert pts[0] == rep
        assert pts[1] == model.apply(rep) == model.apply_branch(itin[0], rep)
    with pytest.raises(DomainError, match="orbit length"):
        orbit_2d(model, cert.points[0], 0)


# === geometry verification ====================================================

def test_verify_conditions_passes_for_the_reference_model():
    summary = verify_conditions(reference_model())
    assert summary.ok, summary.first_failure
    assert tuple(c.name for c in summary.checks) == (
        "width-positive", "packing", "slabs-inside-square",
        "slab-gaps", "strips-span-square", "coherence",
    )


def test_verify_conditions_catches_crowded_slabs():
    model = reference_model()
    crowded = dataclasses.replace(
        model, offsets=(F(-1, 2), F(-7, 16), model.offsets[2], model.offsets[3]),
    )
    summary = verify_conditions(crowded)
    failed = next(c for c in summary.checks if c.name == "slab-gaps")
    assert not failed.ok
    assert "slabs 0 and 1" in failed.detail


def test_verify_conditions_catches_an_undersized_scale():
    model = reference_model()
    greedy_eps = dataclasses.replace(model, epsilon=F(1, 4))
    summary = verify_conditions(greedy_eps)
    assert not summary.ok


# === certified separated families ============================================

def test_certificate_counts_grow_as_a_power():
    model = reference_model()
    one = separated_bound_2d(model, 1)
    assert (one.count, one.steps) == (16, 2)
    assert one.min_pairwise == F(7, 24)
    assert one.min_pairwise > model.epsilon
    assert all(m is not None and m > model.epsilon for m in one.per_point_min)


def test_certificate_respects_the_representative_cap():
    model = reference_model()
    with pytest.raises(ResourceError, match="cap"):
        separated_bound_2d(model, 4)                 # 4**8 = 65536 representatives
    with pytest.raises(DomainError):
        separated_bound_2d(model, 0)


def test_certificate_representatives_follow_their_itineraries():
    model = reference_model()
    cert = separated_bound_2d(model, 1)
    for itinerary, point in zip(cert.itineraries, cert.points):
        for t, pos in enumerate(orbit_2d(model, point, cert.steps)):
            assert model.slab_index(pos[1]) == itinerary[t]


def test_single_strip_certificate_has_nothing_to_separate():
    model = build_model_2d(1, F(1, 2), F(1, 4), 2)
    cert = separated_bound_2d(model, 3)
    assert cert.count == 1
    assert cert.min_pairwise is None


def test_overlapping_slabs_are_caught_during_certification():
    model = reference_model()
    # two identical slabs: itineraries through slab 1 resolve to slab 0
    broken = dataclasses.replace(
        model, offsets=(model.offsets[0], model.offsets[0],
                        model.offsets[2], model.offsets[3]),
    )
    with pytest.raises(VerificationError, match="left its slab"):
        separated_bound_2d(broken, 1)


def test_collapsed_strips_are_caught_during_certification():
    broken = dataclasses.replace(reference_model(), width=F(0))
    assert not verify_conditions(broken).ok
    with pytest.raises(VerificationError, match="empty itinerary box"):
        separated_bound_2d(broken, 1)


def test_ratio_lower_bound_examples():
    assert ratio_lower_bound(build_model_2d(16, F(1), F(1, 16), 1), 1) == pytest.approx(1.0)
    assert ratio_lower_bound(reference_model(), 2) == pytest.approx(0.5)
    assert ratio_lower_bound(build_model_2d(1, F(1, 2), F(1, 4), 1), 3) == 0.0


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 64),
    st.fractions(min_value="1/8", max_value=4, max_denominator=32),
    st.fractions(min_value="1/256", max_value=2, max_denominator=512),
)
def test_packing_boundary_is_enforced(n, delta, epsilon):
    if n > 1 and n * epsilon >= 2 * delta:
        with pytest.raises(ContractError):
            build_model_2d(n, delta, epsilon, 1)
    else:
        # a single slab packs for any scale: it fills the square with no gaps
        model = build_model_2d(n, delta, epsilon, 1)
        assert verify_conditions(model).ok
        if n > 1:
            gap = model.offsets[1] - (model.offsets[0] + model.width)
            assert gap > epsilon


# === serialization ============================================================

def test_model_2d_round_trip():
    model = reference_model()
    text = dump_model_2d(model)
    assert load_model_2d(text) == model
    assert dump_model_2d(load_model_2d(text)) == text


def test_model_2d_loader_cross_checks_geometry():
    text = dump_model_2d(reference_model())
    with pytest.raises(SerializationError):
        load_model_2d(text.replace("horseshoe-2d v1", "horseshoe-3d v1"))
    tampered = text.replace("branch 1 slab", "branch 9 slab")
    with pytest.raises(SerializationError, match="branches 0"):
        load_model_2d(tampered)


def test_certificate_csv_layout():
    cert = separated_bound_2d(reference_model(), 1)
    lines = certificate_to_csv(cert).splitlines()
    assert lines[0] == "itinerary,x,y,min_pairwise_dn"
    assert len(lines) == 17
    assert lines[1] == "0-0,0/1,-63/128,7/24"
    assert lines[2] == "0-1,0/1,-175/384,7/24"


def test_certificate_csv_blank_minimum_for_a_single_point():
    cert = separated_bound_2d(build_model_2d(1, F(1, 2), F(1, 4), 1), 1)
    lines = certificate_to_csv(cert).splitlines()
    assert len(lines) == 2
    assert lines[1].endswith(",")                    # no pairwise column for one point
