import math

import networkx as nx
import numpy as np
import pytest

from dsl.errors import DepthTooLarge, EmptyPorts, ShellDisconnected
from dsl.package import build_bing, build_whitehead
from dsl.semmes import (
    BallPackage,
    PointRef,
    assemble,
    ball_fixture,
    build_shell_graph,
    component_diameter,
    distance,
    verify_self_similarity,
)

LAM = 0.4


@pytest.fixture(scope="module")
def bing_space():
    return assemble(build_bing(), LAM, 3)


@pytest.fixture(scope="module")
def ball_space():
    return assemble(ball_fixture(), LAM, 3)


def to_networkx(space):
    g = nx.Graph()
    coo = space.graph.tocoo()
    for a, b, w in zip(coo.row, coo.col, coo.data):
        if not g.has_edge(a, b) or g[a][b]["weight"] > w:
            g.add_edge(int(a), int(b), weight=float(w))
    return g


def test_bing_shell(bing_space):
    shell = bing_space.shell
    assert shell.m == 2
    assert all(len(p) > 0 for p in shell.inner_ports)
    assert len(shell.outer_ports) > 0


def test_whitehead_shell():
    assert build_shell_graph(build_whitehead(), 0.0625).m == 1


def test_coarse_pitch_rejected():
    with pytest.raises(ShellDisconnected):
        build_shell_graph(build_bing(), 0.3)


def test_missing_child_ports():
    far = BallPackage((0, 0, 0), 1.0, ((5.0, 0, 0),), (0.4,))
    with pytest.raises(EmptyPorts):
        build_shell_graph(far, 0.25)


def test_depth_cap():
    with pytest.raises(DepthTooLarge):
        assemble(build_bing(), LAM, 12)


def test_copy_and_leaf_counts(bing_space, ball_space):
    assert len(bing_space.copies) == 15
    assert len(bing_space.leaves) == 16
    bare = assemble(ball_fixture(), LAM, 0, shell=ball_space.shell)
    assert bare.copies == [()] and len(bare.leaves) == 2


def test_scaled_edge_lengths(bing_space):
    shell = bing_space.shell
    off = bing_space.offsets[(1, 2)]
    a, b = shell.edges[shell.shell_edges][:50].T
    got = np.asarray(bing_space.graph[off + a, off + b]).ravel()
    want = (LAM**2 * shell.h) * shell.unit_lengths[shell.shell_edges][:50]
    assert np.array_equal(got, want)
    axis = shell.unit_lengths == 1.0
    assert set(np.round(shell.unit_lengths, 12)) == {1.0, round(math.sqrt(2), 12), round(math.sqrt(3), 12)}
    assert axis.any()


def test_distance_matches_networkx(ball_space):
    g = to_networkx(ball_space)
    rng = np.random.default_rng(5)
    for _ in range(10):
        a, b = (PointRef((), int(v)) for v in rng.integers(0, ball_space.shell.n, 2))
        want = nx.dijkstra_path_length(g, ball_space.vertex(a), ball_space.vertex(b))
        assert distance(ball_space, a, b).value == pytest.approx(want, rel=1e-12)


def test_identity_and_symmetry(bing_space):
    rng = np.random.default_rng(0)
    refs = [PointRef(bing_space.copies[i], int(v)) for i, v in zip(rng.integers(0, 15, 20), rng.integers(0, 4000, 20))]
    refs.append(PointRef.limit((2, 1, 2, 2)))
    for a in refs:
        assert distance(bing_space, a, a).value == 0.0
        for b in refs[:5]:
            assert distance(bing_space, a, b).value == distance(bing_space, b, a).value


def test_triangle_inequality(bing_space):
    rng = np.random.default_rng(1)
    n = bing_space.shell.n

    def ref():
        address = bing_space.copies[rng.integers(0, len(bing_space.copies))]
        return PointRef(address, int(rng.integers(0, n)))

    for _ in range(100):
        a, b, c = ref(), ref(), ref()
        ab, bc, ac = (distance(bing_space, *p).value for p in ((a, b), (b, c), (a, c)))
        assert ac <= (ab + bc) * (1 + 1e-12)


def test_error_bound_formula(bing_space):
    d = bing_space.shell_diameter
    assert bing_space.error_bound == pytest.approx(2 * d * LAM**3 / (1 - LAM))


def test_truncation_consistency(ball_space):
    deeper = ball_space.truncated(4)
    rng = np.random.default_rng(2)
    refs = [PointRef((), int(v)) for v in rng.integers(0, ball_space.shell.n, 6)]
    refs += [PointRef((1, 2), 3), PointRef.limit((1, 2, 1, 2, 2)), PointRef.limit((2,))]
    for a in refs:
        for b in refs:
            gap = abs(distance(ball_space, a, b).value - distance(deeper, a, b).value)
            assert gap <= ball_space.error_bound


def test_limit_leaf_distance_converges():
    shell = build_shell_graph(ball_fixture(), 0.25)
    four, five = (assemble(ball_fixture(), LAM, k, shell=shell) for k in (4, 5))
    a, b = PointRef((), int(shell.outer_ports[0])), PointRef.limit((1, 2, 1, 1, 2, 1))
    assert abs(distance(four, a, b).value - distance(five, a, b).value) < four.error_bound


def test_ball_self_similarity(ball_space):
    L = verify_self_similarity(ball_space, 100, seed=0)
    assert 1.0 <= L <= 1 + 4 * ball_space.shell.h / ball_space.shell_diameter
    finer = assemble(ball_fixture(), LAM, 3, h=0.125)
    assert verify_self_similarity(finer, 100, seed=0) <= L * 1.05


def test_bing_self_similarity_finite(bing_space):
    L = verify_self_similarity(bing_space, 50, seed=0)
    assert 1.0 <= L < math.inf


@pytest.mark.parametrize("name", ["bing", "ball"])
def test_component_diameters_shrink(name, bing_space, ball_space):
    space = bing_space if name == "bing" else ball_space
    diam = [component_diameter(space, k) for k in range(4)]
    assert diam[-1] >= 0
    for a, b in zip(diam, diam[1:]):
        assert LAM / 2 <= b / a <= 2 * LAM


def test_total_diameter_bounded(bing_space):
    bound = bing_space.shell_diameter * (1 + 2 * LAM / (1 - LAM)) + 4 * bing_space.shell.h
    assert component_diameter(bing_space, 0) <= bound


def test_assembly_is_deterministic(ball_space):
    again = assemble(ball_fixture(), LAM, 3)
    assert (again.graph != ball_space.graph).nnz == 0
