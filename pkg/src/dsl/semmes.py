"""Depth-truncated graph model of the Semmes metric on a decomposition space.

The fundamental shell (parent minus the level-1 children) is voxelized once.
The space at depth K glues one copy of that shell per address of length at
most K, the copy at depth k carrying edge lengths scaled by lambda**k. Inner
ports of a copy are joined to the outer ports of its child copies through the
embedding of the package, and each address of length K+1 is closed off by a
single limit leaf standing for the whole truncated branch.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .errors import DepthTooLarge, EmptyPorts, PortMismatch, ShellDisconnected, UnreachablePoint
from .package import InitialPackage, level_cap, level_components

# Forward half of the 26-neighbourhood: 3 axis steps, 6 face diagonals, 4 body diagonals.
STEPS = np.array(
    [s for s in np.ndindex(3, 3, 3) if (np.array(s) - 1).tolist() > [0, 0, 0]], dtype=int
) - 1
STEP_LENGTHS = np.sqrt(np.sum(STEPS**2, axis=1).astype(float))
# Volume per unit edge length, so the 13 forward edges of a voxel carry its volume h**3.
VOLUME_PER_LENGTH = 1.0 / float(STEP_LENGTHS.sum())

TIE_SLACK = 1e-12
PAIRING_LIMIT = 2.0
_CHUNK = 20000


# ---------------------------------------------------------------------------
# regions


class TubeRegion:
    """Shell geometry of an initial package of solid tori."""

    def __init__(self, pkg):
        self.pkg = pkg
        self.parent = pkg.parent
        self.children = [pkg.realize((i,)).tube for i in range(1, pkg.m + 1)]

    @property
    def m(self):
        return len(self.children)

    @property
    def scale(self):
        return self.parent.radius

    def bounds(self):
        v = self.parent.core.vertices
        pad = self.parent.radius
        return v.min(axis=0) - pad, v.max(axis=0) + pad

    def parent_sdf(self, points):
        return self.parent.distance_to_core(points) - self.parent.radius

    def child_sdf(self, points):
        return np.column_stack([c.distance_to_core(points) - c.radius for c in self.children])

    def to_parent_boundary(self, i, points):
        """Radial projection onto child i's boundary, carried to the parent boundary."""
        tab = self.children[i].tube_coords(points)
        ab = tab[:, 1:]
        ab = ab / np.linalg.norm(ab, axis=1)[:, None]
        return self.parent.embed(np.column_stack([tab[:, 0], ab]))


@dataclass(frozen=True)
class BallPackage:
    """Round ball with m disjoint round sub-balls; every child map is a similarity."""

    center: tuple
    radius: float
    child_centers: tuple
    child_radii: tuple
    package_id: str = "balls"

    @property
    def m(self):
        return len(self.child_centers)

    @property
    def scale(self):
        return self.radius

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def parent_sdf(self, points):
        return np.linalg.norm(points - np.asarray(self.center), axis=1) - self.radius

    def child_sdf(self, points):
        return np.column_stack(
            [np.linalg.norm(points - np.asarray(c), axis=1) - r for c, r in zip(self.child_centers, self.child_radii)]
        )

    def to_parent_boundary(self, i, points):
        off = points - np.asarray(self.child_centers[i])
        unit = off / np.linalg.norm(off, axis=1)[:, None]
        return np.asarray(self.center) + self.radius * unit


def ball_fixture(ratio=0.4):
    """Unit ball holding two balls of radius ``ratio`` centred at (+-0.5, 0, 0)."""
    return BallPackage((0.0, 0.0, 0.0), 1.0, ((-0.5, 0.0, 0.0), (0.5, 0.0, 0.0)), (ratio, ratio), "balls")


def region_of(pkg):
    return TubeRegion(pkg) if isinstance(pkg, InitialPackage) else pkg


def _chunked(fn, points):
    if len(points) == 0:
        return fn(np.zeros((1, 3)))[:0]
    return np.concatenate([fn(points[i : i + _CHUNK]) for i in range(0, len(points), _CHUNK)])


# ---------------------------------------------------------------------------
# the shell


@dataclass(frozen=True, eq=False)
class ShellGraph:
    """Voxel graph of the fundamental shell at pitch ``h``.

    Vertices ``0..n-1`` lie in the shell; vertices ``n..n+c-1`` form the collar,
    one voxel layer outside the parent. Edge lengths are in units of ``h``
    (``1``, ``sqrt 2`` or ``sqrt 3``) so scaled copies are exact products.
    """

    h: float
    points: np.ndarray
    n: int
    edges: np.ndarray
    unit_lengths: np.ndarray
    outer_ports: np.ndarray
    inner_ports: tuple
    pairings: tuple = field(repr=False)

    @property
    def m(self):
        return len(self.inner_ports)

    @property
    def collar_size(self):
        return len(self.points) - self.n

    @property
    def shell_edges(self):
        """Mask of edges with both ends in the shell proper."""
        return np.all(self.edges < self.n, axis=1)

    @property
    def lengths(self):
        return self.h * self.unit_lengths

    def matrix(self, with_collar=False, scale=1.0):
        keep = slice(None) if with_collar else self.shell_edges
        e, w = self.edges[keep], scale * self.h * self.unit_lengths[keep]
        size = len(self.points) if with_collar else self.n
        return sp.coo_matrix((w, (e[:, 0], e[:, 1])), shape=(size, size)).tocsr()


def _lattice(region, h):
    lo, hi = region.bounds()
    lo = lo - 2 * h
    counts = np.floor((hi + 2 * h - lo) / h).astype(int) + 1
    idx = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1).reshape(-1, 3)
    return lo, counts, idx


def _inside_shell(region, points):
    sdf = _chunked(region.parent_sdf, points)
    kids = _chunked(region.child_sdf, points)
    return sdf, kids.min(axis=1) if kids.shape[1] else np.full(len(points), np.inf), kids


def build_shell_graph(pkg, h):
    """Voxelize the fundamental shell of ``pkg`` at pitch ``h``."""
    if not h > 0:
        raise ValueError("h must be positive")
    region = region_of(pkg)
    if h >= region.scale:
        raise ShellDisconnected(f"pitch {h} does not resolve a parent of radius {region.scale}")
    lo, counts, idx = _lattice(region, h)
    centers = lo + h * idx
    sdf, kid_min, kids = _inside_shell(region, centers)
    in_shell = (sdf < 0) & (kid_min > 0)
    in_collar = (sdf >= 0) & (sdf < h)
    if in_shell.sum() < 2:
        raise ShellDisconnected(f"pitch {h} leaves no interior voxels")

    order = np.concatenate([np.flatnonzero(in_shell), np.flatnonzero(in_collar)])
    n = int(in_shell.sum())
    lookup = np.full(len(centers), -1)
    lookup[order] = np.arange(len(order))
    grid = lookup.reshape(counts)

    edges, unit = [], []
    for step, length in zip(STEPS, STEP_LENGTHS):
        src = [slice(max(0, -s), c - max(0, s)) for s, c in zip(step, counts)]
        dst = [slice(max(0, s), c - max(0, -s)) for s, c in zip(step, counts)]
        a, b = grid[tuple(src)].ravel(), grid[tuple(dst)].ravel()
        ok = (a >= 0) & (b >= 0)
        edges.append(np.column_stack([a[ok], b[ok]]))
        unit.append(np.full(int(ok.sum()), length))
    edges, unit = np.concatenate(edges), np.concatenate(unit)

    points = centers[order]
    # Drop edges that cut through a child tube or leave the shell between two shell voxels.
    mid = 0.5 * (points[edges[:, 0]] + points[edges[:, 1]])
    msdf, mkid, _ = _inside_shell(region, mid)
    both_shell = np.all(edges < n, axis=1)
    keep = (mkid > 0) & (~both_shell | (msdf < 0))
    edges, unit = edges[keep], unit[keep]

    shell_sdf, shell_kids = sdf[order[:n]], kids[order[:n]]
    n_total = len(points)
    graph = sp.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n_total,) * 2)
    ncomp, labels = connected_components(graph, directed=False)
    main = np.bincount(labels[:n]).argmax()
    alive = labels == main
    if alive[:n].sum() < 0.95 * n:
        raise ShellDisconnected(f"pitch {h} splits the shell into {ncomp} pieces")

    # Re-index onto the main component, keeping shell vertices first.
    remap = np.full(n_total, -1)
    remap[alive] = np.arange(int(alive.sum()))
    n_alive = int(alive[:n].sum())
    edges = remap[edges]
    ok = np.all(edges >= 0, axis=1)
    edges, unit = edges[ok], unit[ok]
    points = points[alive]
    shell_sdf, shell_kids = shell_sdf[alive[:n]], shell_kids[alive[:n]]

    outer = np.flatnonzero(shell_sdf > -h)
    inner = tuple(np.flatnonzero(shell_kids[:, i] < h) for i in range(shell_kids.shape[1]))
    if len(outer) == 0 or any(len(p) == 0 for p in inner):
        raise EmptyPorts(f"pitch {h} leaves a port set empty")
    pairings = tuple(_pair_ports(region, i, points, inner[i], outer, h) for i in range(len(inner)))
    return ShellGraph(float(h), points, n_alive, edges, unit, outer, inner, pairings)


def _pair_ports(region, i, points, inner, outer, h):
    """Glue pairs (inner port, outer port of the child copy, distance in shell units).

    Every inner port is sent to the outer port nearest its image on the parent
    boundary and must find one within ``PAIRING_LIMIT * h``. Child boundaries
    are sampled more sparsely than the parent boundary, so the reverse pairs
    (outer port to nearest image) are added only when they respect the same
    limit; the remaining outer ports reach the glue through their own copy.
    """
    images = _chunked(lambda p: region.to_parent_boundary(i, p), points[inner])
    d1, j1 = cKDTree(points[outer]).query(images)
    limit = PAIRING_LIMIT * h
    if d1.max() > limit:
        raise PortMismatch(f"child {i + 1}: port pairing distance {d1.max():.4g} exceeds {limit:.4g}")
    d2, j2 = cKDTree(images).query(points[outer])
    near = d2 <= limit
    pairs = np.concatenate(
        [
            np.column_stack([inner, outer[j1], d1]),
            np.column_stack([inner[j2[near]], outer[near], d2[near]]),
        ]
    )
    # Canonical order and no duplicates, so assembly is deterministic.
    _, first = np.unique(pairs[:, :2], axis=0, return_index=True)
    return pairs[np.sort(first)]


def shell_diameter(shell, sweeps=3):
    """Graph diameter of the shell proper, estimated by repeated farthest-point sweeps."""
    graph = shell.matrix()
    start, best = 0, 0.0
    for _ in range(sweeps):
        row = dijkstra(graph, directed=False, indices=start)
        far = int(np.argmax(row))
        if row[far] <= best:
            break
        start, best = far, float(row[far])
    return best


# ---------------------------------------------------------------------------
# the glued space


@dataclass(frozen=True)
class PointRef:
    """A voxel of one shell copy, or a limit point when ``voxel`` is None.

    A limit point is named by a prefix of its infinite address. The space only
    resolves the first K+1 entries; shorter prefixes are continued with 1s.
    """

    address: tuple
    voxel: int = None

    @classmethod
    def limit(cls, address):
        return cls(tuple(address), None)


@dataclass(frozen=True)
class Distance:
    value: float
    error_bound: float


class HierarchicalMetricSpace:
    """Shell copies for every address of length at most K, glued and capped by leaves."""

    def __init__(self, pkg, lam, depth, shell, copies, offsets, leaves, graph):
        self.pkg = pkg
        self.package_id = getattr(pkg, "package_id", "custom")
        self.lam = lam
        self.depth = depth
        self.shell = shell
        self.copies = copies
        self.offsets = offsets
        self.leaves = leaves
        self.graph = graph
        self.shell_diameter = shell_diameter(shell)
        self.error_bound = 2 * self.shell_diameter * lam**depth / (1 - lam)
        self._rows = {}

    @property
    def m(self):
        return self.shell.m

    @property
    def size(self):
        return self.graph.shape[0]

    def copy_size(self, address):
        return len(self.shell.points) if len(address) == 0 else self.shell.n

    def vertex(self, ref):
        """Global vertex id of a PointRef."""
        address = tuple(int(i) for i in ref.address)
        if any(not 1 <= i <= self.m for i in address):
            raise ValueError(f"address {address} is not valid for m = {self.m}")
        if ref.voxel is None:
            key = (address + (1,) * (self.depth + 1))[: self.depth + 1]
            return self.leaves[key]
        if address not in self.offsets:
            raise ValueError(f"address {address} is deeper than the truncation depth {self.depth}")
        if not 0 <= ref.voxel < self.copy_size(address):
            raise ValueError(f"voxel {ref.voxel} out of range")
        return self.offsets[address] + int(ref.voxel)

    def row(self, v):
        """All distances from vertex ``v``; rows are cached."""
        hit = self._rows.get(v)
        if hit is None:
            hit = dijkstra(self.graph, directed=False, indices=v)
            self._rows[v] = hit
        return hit

    def rows(self, vertices):
        missing = sorted({int(v) for v in vertices} - set(self._rows))
        if missing:
            block = dijkstra(self.graph, directed=False, indices=missing)
            self._rows.update(zip(missing, block))
        return np.array([self._rows[int(v)] for v in vertices])

    def truncated(self, depth):
        """The same space assembled to another depth, reusing the shell."""
        return assemble(self.pkg, self.lam, depth, shell=self.shell)

    def subtree(self, address):
        """Vertex ids of a copy, all copies below it and the leaves capping them."""
        k = len(address)
        parts = [
            np.arange(off, off + self.copy_size(a))
            for a, off in self.offsets.items()
            if a[:k] == address
        ]
        parts.append(np.array([v for a, v in self.leaves.items() if a[:k] == address], dtype=int))
        return np.concatenate(parts)


def assemble(pkg, lam, depth, h=None, shell=None):
    """Glue lambda-scaled shell copies for all addresses of length <= depth."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    region = region_of(pkg)
    m = region.m
    total = sum(m**k for k in range(depth + 1))
    if total > level_cap():
        raise DepthTooLarge(f"{total} shell copies exceed the cap {level_cap()}")
    if m * lam**3 >= 1:
        warnings.warn(f"{m} disjoint balls of radius {lam} do not fit in the unit ball", stacklevel=2)
    if shell is None:
        shell = build_shell_graph(pkg, region.scale / 4 if h is None else h)

    copies = [a for k in range(depth + 1) for a in _addresses(m, k)]
    offsets, start = {}, 0
    for a in copies:
        offsets[a] = start
        start += len(shell.points) if not a else shell.n
    leaves = {}
    for a in _addresses(m, depth + 1):
        leaves[a] = start
        start += 1

    rows, cols, weights = [], [], []
    inner_edges = shell.edges[shell.shell_edges]
    inner_unit = shell.unit_lengths[shell.shell_edges]
    for a in copies:
        step = lam ** len(a) * shell.h
        e, u = (shell.edges, shell.unit_lengths) if not a else (inner_edges, inner_unit)
        rows.append(offsets[a] + e[:, 0])
        cols.append(offsets[a] + e[:, 1])
        weights.append(step * u)
        for i in range(m):
            child = a + (i + 1,)
            if child in offsets:
                pairs = shell.pairings[i]
                rows.append(offsets[a] + pairs[:, 0].astype(int))
                cols.append(offsets[child] + pairs[:, 1].astype(int))
                weights.append(lam ** len(child) * pairs[:, 2])
            else:
                ports = shell.inner_ports[i]
                rows.append(offsets[a] + ports)
                cols.append(np.full(len(ports), leaves[child]))
                weights.append(np.zeros(len(ports)))
    graph = sp.coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))), shape=(start, start)
    ).tocsr()
    return HierarchicalMetricSpace(pkg, lam, depth, shell, copies, offsets, leaves, graph)


def _addresses(m, k):
    return [tuple(i + 1 for i in idx) for idx in np.ndindex(*(m,) * k)] if k else [()]


def distance(space, a, b):
    """Shortest-path distance with the truncation error bound of the space.

    The search always starts from the smaller vertex id, so the result is
    exactly symmetric in its arguments.
    """
    va, vb = space.vertex(a), space.vertex(b)
    if va == vb:
        return Distance(0.0, space.error_bound)
    lo, hi = min(va, vb), max(va, vb)
    value = float(space.row(lo)[hi])
    if not math.isfinite(value):
        raise UnreachablePoint(f"{b} cannot be reached from {a}")
    return Distance(value, space.error_bound)


def verify_self_similarity(space, sample_pairs, seed=0):
    """Measured distortion L of the level-1 map on sampled shell pairs.

    The map phi_1 carries the space truncated at depth K-1 onto the branch of
    copy (1,) in the space truncated at depth K. Root distances are therefore
    taken at depth K-1, so both sides are cut off at the same relative depth.
    Returns the largest of d(phi x, phi y) / (lambda d(x, y)) and its inverse.
    """
    if space.depth < 2:
        raise ValueError("self-similarity needs depth at least 2")
    rng = np.random.default_rng(seed)
    n = space.shell.n
    x = rng.integers(0, n, size=sample_pairs)
    y = (x + rng.integers(1, n, size=sample_pairs)) % n
    base = space.truncated(space.depth - 1)
    root, child = base.offsets[()], space.offsets[(1,)]
    d0 = base.rows(root + x)[np.arange(sample_pairs), root + y]
    d1 = space.rows(child + x)[np.arange(sample_pairs), child + y]
    scaled = space.lam * d0
    return float(np.max(np.maximum(d1 / scaled, scaled / d1)))


def component_diameter(space, k):
    """Largest diameter over level-k copies, each taken together with its subtree.

    Each diameter is estimated by a double sweep that starts at an outer port.
    """
    if not 0 <= k <= space.depth:
        raise ValueError(f"level {k} outside 0..{space.depth}")
    best = 0.0
    for a in _addresses(space.m, k):
        members = space.subtree(a)
        start = space.offsets[a] + int(space.shell.outer_ports[0])
        far = members[np.argmax(space.row(start)[members])]
        best = max(best, float(space.row(far)[members].max()))
    return best
