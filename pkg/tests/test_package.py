import itertools
import json

import numpy as np
import pytest

from dsl.errors import InvalidPackage, LevelTooLarge, TooFewTori
from dsl.geom import OneCycle, PolyCycle, count_disk_intersections, curve_distance, linking_number
from dsl.package import (
    InitialPackage,
    build_antoine,
    build_bing,
    build_whitehead,
    canonical_longitude,
    level_components,
    load_package,
    meridian_disk,
    realize,
)
from oracles import brute_force_hits, curve_segments, disk_triangles


@pytest.fixture(scope="module")
def bing():
    return build_bing()


@pytest.fixture(scope="module")
def whitehead():
    return build_whitehead()


def pushoff(tube):
    """Copy of the core moved almost to the tube boundary."""
    t = np.linspace(0, 1, 128, endpoint=False)
    pattern = np.column_stack([t, np.full_like(t, 0.97), np.zeros_like(t)])
    return PolyCycle(tube.embed(pattern))


def test_whitehead_shape(whitehead):
    assert whitehead.m == 1
    assert whitehead.contractible_children


def test_whitehead_child_null_homologous(whitehead):
    child = whitehead.realize((1,)).tube.core
    meridian, _ = meridian_disk(whitehead)
    assert linking_number(child, pushoff(whitehead.parent)) == 0
    assert linking_number(child, meridian) == 0


def test_whitehead_nesting_and_shrinking(whitehead):
    one, two = realize(whitehead, [1]).tube, realize(whitehead, [1, 1]).tube
    assert one.contains_tube(two)
    assert two.diameter() < one.diameter()


def test_bing_shape(bing):
    assert bing.m == 2
    assert len(level_components(bing, 3)) == 8


def test_bing_siblings_disjoint(bing):
    a, b = bing.realize((1,)).tube, bing.realize((2,)).tube
    assert curve_distance(a.core, b.core) > a.radius + b.radius
    assert bing.parent.contains_tube(a) and bing.parent.contains_tube(b)


def test_antoine_chain():
    pkg = build_antoine(8)
    assert pkg.m == 8
    cores = [pkg.realize((i,)).tube.core for i in range(1, 9)]
    for i, j in itertools.combinations(range(8), 2):
        consecutive = (j - i) % 8 in (1, 7)
        assert abs(linking_number(cores[i], cores[j])) == (1 if consecutive else 0)


def test_antoine_needs_three():
    with pytest.raises(TooFewTori):
        build_antoine(2)


def test_empty_address_is_parent(bing):
    assert realize(bing, []).tube is bing.parent


def test_level_components_order(bing, whitehead):
    assert level_components(whitehead, 5) == [(1, 1, 1, 1, 1)]
    assert level_components(bing, 2) == [(1, 1), (1, 2), (2, 1), (2, 2)]


def test_level_cap(bing, monkeypatch):
    with pytest.raises(LevelTooLarge):
        level_components(bing, 13)
    monkeypatch.setenv("DSL_LEVEL_CAP", "4")
    with pytest.raises(LevelTooLarge):
        level_components(bing, 3)


@pytest.mark.parametrize("builder", [build_bing, build_whitehead, lambda: build_antoine(3)])
def test_meridian_disk(builder):
    pkg = builder()
    circle, disk = meridian_disk(pkg)
    core = OneCycle.of(pkg.parent.core)
    assert count_disk_intersections(core, disk) == 1
    assert abs(linking_number(circle, pkg.parent.core)) == 1
    on_boundary = pkg.parent.distance_to_core(circle.vertices)
    assert np.allclose(on_boundary, pkg.parent.radius, rtol=1e-6)


def test_canonical_longitudes(bing, whitehead):
    assert len(canonical_longitude(bing, 1)) == 2
    assert canonical_longitude(whitehead, 0).components[0] is whitehead.parent.core
    _, disk = meridian_disk(bing)
    lon = canonical_longitude(bing, 1)
    assert count_disk_intersections(lon, disk) == 2
    assert brute_force_hits(curve_segments(lon), disk_triangles(disk)) == 2


@pytest.mark.parametrize("builder", [build_bing, build_whitehead])
def test_nesting_and_disjointness_first_two_levels(builder):
    pkg = builder()
    for k in (1, 2):
        addrs = level_components(pkg, k)
        for a in addrs:
            tube = pkg.realize(a).tube
            assert pkg.realize(a[:-1]).tube.contains_tube(tube)
            assert tube.is_embedded()
        for a, b in itertools.combinations(addrs, 2):
            s, t = pkg.realize(a).tube, pkg.realize(b).tube
            assert curve_distance(s.core, t.core) > s.radius + t.radius


@pytest.mark.parametrize("builder", [build_bing, build_whitehead, lambda: build_antoine(3)])
def test_diameter_decay(builder):
    pkg = builder()
    diam = [max(pkg.realize(a).tube.diameter() for a in level_components(pkg, k)) for k in range(5)]
    assert all(x > y for x, y in zip(diam, diam[1:]))


@pytest.mark.parametrize("builder", [build_bing, build_whitehead])
def test_longitude_inside_previous_level(builder):
    pkg = builder()
    for k in (0, 1, 2):
        tubes = [pkg.realize(a).tube for a in level_components(pkg, k)]
        for comp in canonical_longitude(pkg, k + 1):
            dist = np.min([t.distance_to_core(comp.vertices) - t.radius for t in tubes], axis=0)
            assert np.all(dist < 0)


def test_json_round_trip_is_exact(bing, tmp_path):
    again = InitialPackage.loads(bing.dumps())
    for a in level_components(bing, 2):
        assert np.array_equal(again.realize(a).tube.core.vertices, bing.realize(a).tube.core.vertices)
    path = tmp_path / "bing.json"
    path.write_text(bing.dumps())
    assert load_package(str(path)).dumps() == bing.dumps()


def test_custom_package_rejects_escaping_child(bing):
    data = json.loads(bing.dumps())
    data["children"][0]["radius_fraction"] = 0.9
    with pytest.raises(Exception) as info:
        InitialPackage.from_dict(data)
    assert isinstance(info.value, (InvalidPackage, ValueError))


def test_custom_package_rejects_overlap(bing):
    data = json.loads(bing.dumps())
    data["children"][1] = data["children"][0]
    with pytest.raises(InvalidPackage):
        InitialPackage.from_dict(data)


def test_builtin_names():
    assert load_package("antoine4").m == 4
    assert load_package("whitehead").package_id == "whitehead"
