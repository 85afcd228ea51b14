import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from dsl.errors import CurvesIntersect, DegenerateTriangle, NonGenericPosition
from dsl.geom import (
    OneCycle,
    PolyCycle,
    circle,
    cone_disk,
    count_disk_intersections,
    crossing_linking,
    cycle_length,
    fixture,
    gauss_linking,
    linking_number,
    min_intersections_over_translates,
)
from oracles import brute_force_hits, curve_segments, disk_triangles, midpoint_gauss

SQUARE = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
PAIRS = [
    ("hopf_a", "hopf_b"),
    ("unlink_a", "unlink_b"),
    ("whitehead_a", "whitehead_b"),
    ("torus_core", "torus_meridian"),
]


def test_square_perimeter():
    assert cycle_length(PolyCycle(SQUARE)) == 4.0


def test_length_additive_over_components():
    a = PolyCycle(SQUARE)
    b = PolyCycle(np.array(SQUARE) + [5, 0, 0])
    assert cycle_length(OneCycle.of(a, b)) == pytest.approx(8.0)


def test_64gon_length_matches_closed_form():
    c = circle([0, 0, 0], 1.0, [0, 0, 1], n=64)
    assert cycle_length(c) == pytest.approx(128 * math.sin(math.pi / 64), rel=1e-12)
    assert abs(cycle_length(c) - 2 * math.pi) < 0.01


def test_hopf_matches_numeric_gauss_integral():
    a, b = fixture("hopf_a"), fixture("hopf_b")
    assert abs(linking_number(a, b)) == 1
    assert linking_number(a, b) == round(midpoint_gauss(a, b))


@pytest.mark.parametrize("names", PAIRS)
def test_two_methods_agree_on_fixtures(names):
    a, b = map(fixture, names)
    g = gauss_linking(a, b)
    assert abs(g - round(g)) < 0.1
    assert crossing_linking(a, b) == round(g) == linking_number(a, b)
    assert abs(midpoint_gauss(a, b) - g) < 0.05


def test_expected_fixture_values():
    values = {names[0]: linking_number(*map(fixture, names)) for names in PAIRS}
    assert values == {"hopf_a": 1, "unlink_a": 0, "whitehead_a": 0, "torus_core": 1}


def test_whitehead_fixture_pieces_are_individually_linked_with_nothing_trivial():
    # The Whitehead pair has zero linking number but is not split: the meridian
    # disk of the outer curve is crossed twice by the clasped core.
    a, b = fixture("whitehead_a"), fixture("whitehead_b")
    center = np.asarray(b.vertices).mean(axis=0)
    disk = cone_disk(b, center + [0, 0, 1e-3])
    assert count_disk_intersections(a, disk) == 2


def test_separated_squares_unlinked():
    a = PolyCycle(SQUARE)
    b = PolyCycle(np.array(SQUARE) + [0, 0, 2])
    assert linking_number(a, b) == 0


def test_intersecting_curves_rejected():
    a = PolyCycle(SQUARE)
    b = PolyCycle([[0.5, 0.5, -1], [0.5, 0.5, 1], [0.5, 2, 1], [0.5, 2, -1]])
    with pytest.raises(CurvesIntersect):
        linking_number(a, PolyCycle([[0, 0, 0], [0, 0, 1], [0, 1, 1]]))
    assert linking_number(a, b) in (-1, 1)


@pytest.mark.parametrize("names", PAIRS)
def test_symmetric_and_reversal_negates(names):
    a, b = map(fixture, names)
    assert linking_number(a, b) == linking_number(b, a)
    assert linking_number(a.reversed(), b) == -linking_number(a, b)


def test_rigid_motion_invariance():
    rng = np.random.default_rng(0)
    pairs = [tuple(map(fixture, names)) for names in PAIRS]
    expected = [linking_number(a, b) for a, b in pairs]
    for _ in range(20):
        rot = Rotation.random(random_state=rng).as_matrix()
        shift = rng.normal(size=3) * 3
        got = [linking_number(a.transformed(rot, shift), b.transformed(rot, shift)) for a, b in pairs]
        assert got == expected


def test_planar_cone_tiles_square():
    disk = cone_disk(PolyCycle(SQUARE), [0.5, 0.5, 0])
    assert len(disk.triangles) == 4
    assert disk.area() == pytest.approx(1.0)
    assert np.allclose(np.abs(disk.normals()[:, 2]), 1.0)


def test_pyramid_cone():
    disk = cone_disk(PolyCycle(SQUARE), [0, 0, 1])
    areas = 0.5 * np.linalg.norm(
        np.cross(disk.corners()[1] - disk.corners()[0], disk.corners()[2] - disk.corners()[0]), axis=1
    )
    assert np.all(areas > 1e-6)
    assert disk.area() > 1


def test_collinear_apex_rejected():
    with pytest.raises(DegenerateTriangle):
        cone_disk(PolyCycle(SQUARE), [2, 0, 0])


def test_core_pierces_meridian_once():
    core = fixture("torus_core")
    disk = cone_disk(fixture("torus_meridian"), [1.05 * math.cos(0.1), 1.05 * math.sin(0.1), 0.02])
    assert count_disk_intersections(core, disk) == 1
    assert brute_force_hits(curve_segments(core), disk_triangles(disk)) == 1


def test_far_curve_misses():
    disk = cone_disk(fixture("torus_meridian"), [1.05 * math.cos(0.1), 1.05 * math.sin(0.1), 0.02])
    far = circle([20, 0, 0], 1.0, [0, 0, 1])
    assert count_disk_intersections(far, disk) == 0


def test_curve_in_triangle_plane_rejected():
    disk = cone_disk(PolyCycle(SQUARE), [0.5, 0.5, 0])
    flat = PolyCycle([[0.2, 0.2, 0], [0.8, 0.2, 0], [0.5, 0.8, 0]])
    with pytest.raises(NonGenericPosition):
        count_disk_intersections(flat, disk)


def test_matches_brute_force_on_random_polygons():
    rng = np.random.default_rng(1)
    disk = cone_disk(circle([0, 0, 0], 1.0, [0, 0, 1], n=24), [0.1, -0.05, 0.3])
    for _ in range(25):
        curve = PolyCycle(rng.normal(size=(12, 3)))
        want = brute_force_hits(curve_segments(curve), disk_triangles(disk))
        assert count_disk_intersections(curve, disk) == want


def test_refinement_invariance_and_linking_bound():
    for names in PAIRS:
        a, b = map(fixture, names)
        centre = np.asarray(b.vertices).mean(axis=0)
        disk = cone_disk(b, centre + [1e-3, 2e-3, 3e-3])
        n = count_disk_intersections(a, disk)
        assert count_disk_intersections(a.refined(), disk) == n
        assert n >= abs(linking_number(a, b))


def test_translate_sweep_single_sample():
    core = fixture("torus_core")
    disk = cone_disk(fixture("torus_meridian"), [1.05 * math.cos(0.1), 1.05 * math.sin(0.1), 0.02])
    sweep = min_intersections_over_translates(core, disk, [0.3, 0.9, 0.2], 0.0, 10)
    assert sweep.minimum == count_disk_intersections(core, disk)
    assert len(sweep.counts) == 1


def test_translate_sweep_inside_tube():
    core = fixture("torus_core")
    disk = cone_disk(fixture("torus_meridian"), [1.05 * math.cos(0.1), 1.05 * math.sin(0.1), 0.02])
    sweep = min_intersections_over_translates(core, disk, [0.3, 0.9, 0.2], 0.05, 7)
    assert sweep.minimum == 1
    assert all(c == 1 for _, c in sweep.counts)


def test_translate_sweep_far_away():
    far = circle([20, 0, 0], 1.0, [0, 0, 1])
    disk = cone_disk(fixture("torus_meridian"), [1.05 * math.cos(0.1), 1.05 * math.sin(0.1), 0.02])
    assert min_intersections_over_translates(far, disk, [0.3, 0.9, 0.2], 0.5, 5).minimum == 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_hopf_scaled_and_shifted(scale, x, y, z):
    a, b = fixture("hopf_a"), fixture("hopf_b")
    rot = np.eye(3) * scale
    shift = np.array([x, y, z])
    assert linking_number(a.transformed(rot, shift), b.transformed(rot, shift)) == 1
