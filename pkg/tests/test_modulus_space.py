import csv
import io

import numpy as np
import pytest

from dsl.modulus import (
    ConnectionFamily,
    ExplicitFamily,
    admissibility_check,
    discrete_modulus,
    longitude_family_problem,
    scaling_experiment,
    snapped_core,
    space_graph,
)
from dsl.package import build_bing, build_whitehead
from dsl.semmes import assemble

LAM = 0.4


@pytest.fixture(scope="module")
def bing_space():
    return assemble(build_bing(), LAM, 2)


@pytest.fixture(scope="module")
def whitehead_space():
    return assemble(build_whitehead(), LAM, 2)


@pytest.fixture(scope="module")
def bing_tables(bing_space):
    pkg = build_bing()
    return {mode: scaling_experiment(pkg, LAM, 2, mode=mode, space=bing_space) for mode in ("explicit", "implicit")}


@pytest.mark.parametrize("which", ["bing_space", "whitehead_space"])
def test_snapped_core_follows_the_parent_core(which, request):
    space = request.getfixturevalue(which)
    cycle, curve_length = snapped_core(space)
    path_length = space.shell.lengths[space.shell.shell_edges][cycle].sum()
    # The longitude is a push-off of the core inside the parent tube, so it is
    # no shorter than the core and at most as long as the outer equator.
    parent = space.pkg.parent
    assert parent.length <= curve_length <= parent.length * (1 + 2 * np.pi * parent.radius)
    assert abs(path_length / curve_length - 1) < 0.10


def test_explicit_member_spans_every_copy_at_the_level(bing_space):
    sg = space_graph(bing_space)
    cycle, _ = snapped_core(bing_space)
    for k, copies in [(0, 1), (1, 2), (2, 4)]:
        fam = longitude_family_problem(bing_space, k, sg=sg).family
        assert isinstance(fam, ExplicitFamily) and fam.size == 1
        assert fam.counts.nnz == copies * len(cycle)


def test_whitehead_level_zero_has_one_member(whitehead_space):
    fam = longitude_family_problem(whitehead_space, 0).family
    assert fam.size == 1


def test_implicit_family_contains_the_explicit_member(bing_space):
    sg = space_graph(bing_space)
    for k in (0, 1):
        explicit = longitude_family_problem(bing_space, k, "explicit", sg).family
        implicit = longitude_family_problem(bing_space, k, "implicit", sg)
        assert isinstance(implicit.family, ConnectionFamily) and implicit.family.edge_disjoint
        est = discrete_modulus(implicit)
        # An admissible density for the larger family is admissible for the explicit member.
        assert admissibility_check(sg.graph, est.density, explicit) >= 1 - 1e-4


def test_bad_level_and_mode(bing_space):
    with pytest.raises(ValueError):
        longitude_family_problem(bing_space, 3)
    with pytest.raises(ValueError):
        longitude_family_problem(bing_space, 0, mode="sideways")


@pytest.mark.parametrize("mode", ["explicit", "implicit"])
def test_bing_scaling_is_non_increasing(bing_tables, mode):
    table = bing_tables[mode]
    values = [r.modulus for r in table.rows]
    assert all(b <= a * (1 + 1e-3) for a, b in zip(values, values[1:]))
    assert 0.05 <= table.fitted_ratio <= 1
    assert all(r.converged for r in table.rows)
    # Two copies per level in series: at least half of m^-2k times level zero.
    assert values[-1] >= 0.5 * 2 ** (-2 * 2) * values[0]


def test_implicit_dominates_explicit(bing_tables):
    for e, i in zip(bing_tables["explicit"].rows, bing_tables["implicit"].rows):
        assert i.modulus >= e.modulus * (1 - 1e-3)


def test_whitehead_scaling_stays_near_level_zero(whitehead_space):
    table = scaling_experiment(build_whitehead(), LAM, 2, space=whitehead_space)
    base = table.rows[0].modulus
    assert all(0.2 * base <= r.modulus <= base * (1 + 1e-3) for r in table.rows)


def test_csv_layout(bing_tables):
    text = bing_tables["explicit"].to_csv()
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == ["k", "modulus", "ratio", "iterations", "converged"]
    assert [int(r["k"]) for r in rows] == [0, 1, 2]
    assert rows[0]["ratio"] == ""
    assert {r["converged"] for r in rows} == {"true"}
    assert text == scaling_experiment(build_bing(), LAM, 2, space=assemble(build_bing(), LAM, 2)).to_csv()
