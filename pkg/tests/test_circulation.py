import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from dsl.circulation import (
    CirculationBound,
    CirculationEvidence,
    DEFAULT_REGISTRY,
    empirical_circulation,
    registry_lookup,
)
from dsl.errors import LongitudeCheckFailed
from dsl.geom import circle, cone_disk
from dsl.package import build_antoine, build_bing, build_whitehead, canonical_longitude, meridian_disk
from oracles import brute_force_hits, curve_segments, disk_triangles

BING = build_bing()
WHITEHEAD = build_whitehead()


@pytest.mark.parametrize("pkg,k,want", [(BING, 1, 2), (BING, 2, 4), (WHITEHEAD, 1, 2)])
def test_documented_counts(pkg, k, want):
    ev = empirical_circulation(pkg, k)
    assert ev.intersection_count == want
    _, disk = meridian_disk(pkg)
    oracle = brute_force_hits(curve_segments(canonical_longitude(pkg, k)), disk_triangles(disk))
    assert oracle == want


def test_registry_entries():
    for name in ("bing", "whitehead"):
        bound = registry_lookup(name)
        assert bound.omega == 2 and bound.C == 1
        assert "Freedman" in bound.provenance
    assert registry_lookup("custom-xyz") is None


@pytest.mark.parametrize("pkg", [BING, WHITEHEAD])
def test_counts_respect_registry_bound(pkg):
    bound = registry_lookup(pkg.package_id)
    for k in (1, 2, 3):
        assert empirical_circulation(pkg, k).consistent_with(bound)


@pytest.mark.parametrize("pkg", [BING, WHITEHEAD, build_antoine(3)])
def test_level_zero_meets_own_disk(pkg):
    assert empirical_circulation(pkg, 0).intersection_count >= 1


def test_rigid_motion_invariance():
    rng = np.random.default_rng(3)
    base = [empirical_circulation(BING, k).intersection_count for k in (1, 2)]
    for _ in range(3):
        moved = BING.transformed(Rotation.random(random_state=rng).as_matrix(), rng.normal(size=3))
        assert [empirical_circulation(moved, k).intersection_count for k in (1, 2)] == base


def test_user_supplied_sources():
    sigma = canonical_longitude(BING, 1)
    circ, _ = meridian_disk(BING)
    other = cone_disk(circ, np.asarray(circ.vertices).mean(axis=0) + [0.0, 0.0, 0.05])
    ev = empirical_circulation(BING, 1, sigma=sigma, disk=other)
    assert ev.longitude_source == "user_supplied" and ev.disk_source == "user_supplied"
    assert ev.intersection_count >= 2


def test_supplied_cycle_must_meet_meridian():
    with pytest.raises(LongitudeCheckFailed):
        empirical_circulation(BING, 1, sigma=circle([10, 0, 0], 1.0, [0, 0, 1]))


def test_registry_json_extension(tmp_path):
    path = tmp_path / "reg.json"
    path.write_text(json.dumps({"package_id": "mine", "omega": 3, "C": 0.5, "provenance": "notes"}))
    reg = DEFAULT_REGISTRY.extended_from_json(path)
    assert registry_lookup("mine", reg) == CirculationBound("mine", 3, 0.5, "notes")
    assert "mine" not in DEFAULT_REGISTRY
    assert list(reg) == ["bing", "mine", "whitehead"]


def test_bound_and_evidence_validation():
    with pytest.raises(ValueError):
        CirculationBound("x", 0.5)
    with pytest.raises(ValueError):
        CirculationEvidence("x", 1, -1)
