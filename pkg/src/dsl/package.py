"""Initial packages of solid tori and their self-similar realization.

A package is a parent tube H (a polygonal core thickened by a radius) together
with m child patterns. Each pattern is a closed curve given in tube
coordinates ``(t, a, b)`` of the parent: ``t`` is the arclength fraction along
the core, ``(a, b)`` the offset in the normal disk, scaled so the tube
boundary is the unit circle. The embedding of the package into a child tube
is coordinate transport, so the level-k component with address
``(i_1, ..., i_k)`` is obtained by embedding pattern ``i_k`` into the tube
realized for ``(i_1, ..., i_{k-1})``.
"""

import itertools
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .errors import (
    FrameDegeneracy,
    InvalidPackage,
    LevelTooLarge,
    LongitudeCheckFailed,
    TooFewTori,
)
from .geom import (
    OneCycle,
    PolyCycle,
    TriangulatedDisk,
    count_disk_intersections,
    curve_distance,
    point_polyline_distance,
    segment_distances,
)

DEFAULT_LEVEL_CAP = 4096
PATTERN_RESOLUTION = 64
CONTAINMENT_SLACK = 1e-9


def level_cap():
    """Cap on m**k; the DSL_LEVEL_CAP environment variable overrides the default."""
    value = os.environ.get("DSL_LEVEL_CAP")
    return int(value) if value else DEFAULT_LEVEL_CAP


def _rotate(v, axis, angle):
    """Rodrigues rotation of vectors v (n, 3) about unit axes (n, 3)."""
    c = np.cos(angle)[..., None]
    s = np.sin(angle)[..., None]
    return v * c + np.cross(axis, v) * s + axis * np.sum(axis * v, axis=-1, keepdims=True) * (1 - c)


def _transport(v, t_from, t_to):
    """Parallel transport of v along the rotation carrying t_from to t_to."""
    axis = np.cross(t_from, t_to)
    sin = np.linalg.norm(axis)
    cos = float(np.dot(t_from, t_to))
    if sin < 1e-14:
        if cos < 0:
            raise FrameDegeneracy("core reverses direction at a vertex")
        return v
    return _rotate(v[None], (axis / sin)[None], np.array([math.atan2(sin, cos)]))[0]


@dataclass(frozen=True, eq=False)
class TubeSpec:
    """Solid torus: closed polygonal core thickened by ``radius``."""

    core: PolyCycle
    radius: float
    _frames: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidPackage("tube radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "_frames", self._compute_frames())

    def _compute_frames(self):
        v = self.core.vertices
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.linalg.norm(edges, axis=1)
        if lengths.min() <= 0:
            raise FrameDegeneracy("zero-length core edge")
        unit = edges / lengths[:, None]
        tangents = unit + np.roll(unit, 1, axis=0)
        norms = np.linalg.norm(tangents, axis=1)
        if norms.min() < 1e-12:
            raise FrameDegeneracy("core reverses direction at a vertex")
        tangents /= norms[:, None]
        s = np.concatenate([[0.0], np.cumsum(lengths)])
        total = s[-1]

        radial = v[0] - v.mean(axis=0)
        radial -= np.dot(radial, tangents[0]) * tangents[0]
        if np.linalg.norm(radial) < 1e-9 * max(1.0, total):
            helper = np.eye(3)[np.argmin(np.abs(tangents[0]))]
            radial = np.cross(tangents[0], helper)
        normal0 = radial / np.linalg.norm(radial)

        n = len(v)
        normals = np.empty((n, 3))
        normals[0] = normal0
        for i in range(1, n):
            normals[i] = _transport(normals[i - 1], tangents[i - 1], tangents[i])
        closing = _transport(normals[-1], tangents[-1], tangents[0])
        holonomy = math.atan2(np.dot(np.cross(normal0, closing), tangents[0]), np.dot(normal0, closing))
        normals = _rotate(normals, tangents, -holonomy * s[:-1] / total)
        normals -= np.sum(normals * tangents, axis=1)[:, None] * tangents
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        return (s, tangents, normals)

    @property
    def length(self):
        return float(self._frames[0][-1])

    def frame_at(self, t):
        """Positions, tangents, normals and binormals at arclength fractions t."""
        s, tangents, normals = self._frames
        v = self.core.vertices
        n = len(v)
        sigma = np.mod(np.asarray(t, dtype=float), 1.0) * s[-1]
        idx = np.clip(np.searchsorted(s, sigma, side="right") - 1, 0, n - 1)
        u = ((sigma - s[idx]) / (s[idx + 1] - s[idx]))[:, None]
        nxt = (idx + 1) % n
        pos = v[idx] + u * (v[nxt] - v[idx])
        tan = (1 - u) * tangents[idx] + u * tangents[nxt]
        tan /= np.linalg.norm(tan, axis=1)[:, None]
        nor = (1 - u) * normals[idx] + u * normals[nxt]
        nor -= np.sum(nor * tan, axis=1)[:, None] * tan
        nor /= np.linalg.norm(nor, axis=1)[:, None]
        return pos, tan, nor, np.cross(tan, nor)

    def embed(self, pattern):
        """Map tube coordinates (t, a, b) to ambient points."""
        pattern = np.atleast_2d(np.asarray(pattern, dtype=float))
        pos, _, nor, bin_ = self.frame_at(pattern[:, 0])
        return pos + self.radius * (pattern[:, 1:2] * nor + pattern[:, 2:3] * bin_)

    def tube_coords(self, points):
        """Approximate inverse of ``embed`` via the nearest point of the core."""
        points = np.atleast_2d(points)
        a, b = self.core.edges
        d = b - a
        w = points[:, None, :] - a[None]
        par = np.clip(np.sum(w * d, axis=-1) / np.sum(d * d, axis=-1), 0.0, 1.0)
        dist = np.linalg.norm(w - par[..., None] * d[None], axis=-1)
        idx = np.argmin(dist, axis=1)
        s = self._frames[0]
        t = (s[idx] + par[np.arange(len(points)), idx] * (s[idx + 1] - s[idx])) / s[-1]
        pos, _, nor, bin_ = self.frame_at(t)
        off = points - pos
        return np.column_stack([t, np.sum(off * nor, axis=1) / self.radius, np.sum(off * bin_, axis=1) / self.radius])

    def distance_to_core(self, points):
        return point_polyline_distance(points, self.core)

    def diameter(self):
        return float(pdist(self.core.vertices).max() + 2 * self.radius)

    def self_clearance(self):
        """Min distance between core segments that are more than pi*radius apart along the core."""
        s = self._frames[0]
        a, b = self.core.edges
        d = segment_distances(a, b, a, b)
        mid = 0.5 * (s[:-1] + s[1:])
        gap = np.abs(mid[:, None] - mid[None, :])
        gap = np.minimum(gap, s[-1] - gap)
        half = 0.5 * (s[1:] - s[:-1])
        gap = gap - half[:, None] - half[None, :]
        far = gap > math.pi * self.radius
        if not np.any(far):
            return math.inf
        return float(d[far].min())

    def is_embedded(self):
        return self.self_clearance() > 2 * self.radius

    def contains_tube(self, other, slack=CONTAINMENT_SLACK):
        """Sampled containment: every core vertex of ``other`` sits radius-deep inside this tube."""
        d = self.distance_to_core(other.core.vertices)
        return bool(np.all(d + other.radius < self.radius * (1 + slack)))

    def to_dict(self):
        return {"core": self.core.vertices.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class ChildEmbedding:
    """Child core as a closed curve in parent tube coordinates."""

    pattern: np.ndarray
    radius_fraction: float
    contractible: bool = True

    def __post_init__(self):
        p = np.array(self.pattern, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3 or len(p) < 3:
            raise InvalidPackage("pattern must be an (n, 3) array of (t, a, b) rows with n >= 3")
        p[:, 0] = np.mod(p[:, 0], 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "pattern", p)
        f = float(self.radius_fraction)
        if not 0 < f < 1:
            raise InvalidPackage("radius_fraction must lie in (0, 1)")
        object.__setattr__(self, "radius_fraction", f)
        if np.hypot(p[:, 1], p[:, 2]).max() + f >= 1:
            raise InvalidPackage("child tube reaches the parent boundary")

    def to_dict(self):
        return {
            "pattern": self.pattern.tolist(),
            "radius_fraction": self.radius_fraction,
            "contractible": bool(self.contractible),
        }


@dataclass(frozen=True)
class LevelRealization:
    address: tuple
    tube: TubeSpec

    @property
    def depth(self):
        return len(self.address)


class InitialPackage:
    """Parent tube plus m child embeddings, validated on construction.

    Immutable after construction; ``realize`` memoizes per address.
    """

    def __init__(self, parent, children, genus=1, package_id="custom", meridian_t=None, validate=True):
        self.parent = parent
        self.children = tuple(children)
        self.genus = int(genus)
        self.package_id = package_id
        self._cache = {(): LevelRealization((), parent)}
        if not self.children:
            raise InvalidPackage("a package needs at least one child")
        if self.genus < 0:
            raise InvalidPackage("genus must be non-negative")
        self.meridian_t = self._choose_meridian() if meridian_t is None else float(meridian_t) % 1.0
        if validate:
            self.validate()

    @property
    def m(self):
        return len(self.children)

    @property
    def contractible_children(self):
        return all(c.contractible for c in self.children)

    def __repr__(self):
        return f"InitialPackage({self.package_id!r}, m={self.m}, genus={self.genus})"

    def validate(self):
        """Check the level-1 geometry: embedded tubes, nesting, pairwise disjointness."""
        if not self.parent.is_embedded():
            raise InvalidPackage("parent tube is not embedded")
        tubes = [self.realize((i,)).tube for i in range(1, self.m + 1)]
        for i, tube in enumerate(tubes, 1):
            if not self.parent.contains_tube(tube):
                raise InvalidPackage(f"child {i} leaves the parent tube")
            if not tube.is_embedded():
                raise InvalidPackage(f"child {i} tube is not embedded")
        for (i, s), (j, t) in itertools.combinations(enumerate(tubes, 1), 2):
            if curve_distance(s.core, t.core) <= s.radius + t.radius:
                raise InvalidPackage(f"children {i} and {j} overlap")

    def _choose_meridian(self, candidates=64):
        """Slice parameter with the fewest level-1 crossings; ties go to the smallest t."""
        best = None
        children = OneCycle(tuple(self.realize((i,)).tube.core for i in range(1, self.m + 1)))
        for j in range(candidates):
            t = (j + 0.5) / candidates
            try:
                count = count_disk_intersections(children, _normal_disk(self.parent, t))
            except Exception:
                continue
            if count > 0 and (best is None or count < best[0]):
                best = (count, t)
        return 0.0 if best is None else best[1]

    def realize(self, address):
        address = tuple(int(i) for i in address)
        for i in address:
            if not 1 <= i <= self.m:
                raise ValueError(f"address entry {i} out of range 1..{self.m}")
        hit = self._cache.get(address)
        if hit is not None:
            return hit
        host = self.realize(address[:-1]).tube
        child = self.children[address[-1] - 1]
        core = PolyCycle(host.embed(child.pattern), label="L" + ".".join(map(str, address)))
        out = LevelRealization(address, TubeSpec(core, host.radius * child.radius_fraction))
        self._cache[address] = out
        return out

    def to_dict(self):
        return {
            "id": self.package_id,
            "genus": self.genus,
            "meridian_t": self.meridian_t,
            "parent": self.parent.to_dict(),
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, data, validate=True):
        parent = TubeSpec(PolyCycle(data["parent"]["core"], "H"), data["parent"]["radius"])
        children = [
            ChildEmbedding(c["pattern"], c["radius_fraction"], bool(c.get("contractible", True)))
            for c in data["children"]
        ]
        return cls(
            parent,
            children,
            genus=data.get("genus", 1),
            package_id=data.get("id", "custom"),
            meridian_t=data.get("meridian_t"),
            validate=validate,
        )

    def dumps(self):
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text, validate=True):
        return cls.from_dict(json.loads(text), validate=validate)

    def transformed(self, rotation=None, translation=None):
        """The same package after a proper rigid motion of the ambient space.

        Frames are built from the core alone, so the child patterns carry over unchanged.
        """
        if rotation is not None and np.linalg.det(rotation) <= 0:
            raise ValueError("rotation must be orientation preserving")
        parent = TubeSpec(self.parent.core.transformed(rotation, translation), self.parent.radius)
        return InitialPackage(
            parent,
            self.children,
            genus=self.genus,
            package_id=self.package_id,
            meridian_t=self.meridian_t,
            validate=False,
        )


def realize(pkg, address, cap=None):
    """Tube of one component, refusing levels whose copy count m**k exceeds the cap."""
    cap = level_cap() if cap is None else cap
    if pkg.m ** len(address) > cap:
        raise LevelTooLarge(f"{pkg.m}**{len(address)} components exceeds the cap {cap}")
    return pkg.realize(address)


def level_components(pkg, k, cap=None):
    """All m**k addresses of depth k in lexicographic order (1-based entries)."""
    if k < 0:
        raise ValueError("level must be non-negative")
    cap = level_cap() if cap is None else cap
    if pkg.m**k > cap:
        raise LevelTooLarge(f"{pkg.m}**{k} components exceeds the cap {cap}")
    return [tuple(p) for p in itertools.product(range(1, pkg.m + 1), repeat=k)]


# ---------------------------------------------------------------------------
# meridians and longitudes

MERIDIAN_RESOLUTION = 64
APEX_OFFSET = 0.3
APEX_ANGLE = math.pi / MERIDIAN_RESOLUTION + 0.1234


def _normal_disk(tube, t, n=MERIDIAN_RESOLUTION):
    """Coned normal disk at the midpoint of the core edge containing parameter t."""
    s = tube._frames[0]
    sigma = (t % 1.0) * s[-1]
    i = min(int(np.searchsorted(s, sigma, side="right") - 1), len(s) - 2)
    t_mid = 0.5 * (s[i] + s[i + 1]) / s[-1]
    v = tube.core.vertices
    center = 0.5 * (v[i] + v[(i + 1) % len(v)])
    edge = v[(i + 1) % len(v)] - v[i]
    edge /= np.linalg.norm(edge)
    _, _, nor, _ = tube.frame_at([t_mid])
    nor = nor[0] - np.dot(nor[0], edge) * edge
    nor /= np.linalg.norm(nor)
    bin_ = np.cross(edge, nor)
    ang = 2 * math.pi * np.arange(n) / n
    ring = center + tube.radius * (np.cos(ang)[:, None] * nor + np.sin(ang)[:, None] * bin_)
    apex = center + APEX_OFFSET * tube.radius * (math.cos(APEX_ANGLE) * nor + math.sin(APEX_ANGLE) * bin_)
    return TriangulatedDisk(PolyCycle(ring, "meridian"), apex)


def meridian_disk(pkg):
    """Canonical meridian circle of the parent and the coned disk it bounds inside H."""
    disk = _normal_disk(pkg.parent, pkg.meridian_t)
    return disk.boundary, disk


def canonical_longitude(pkg, k):
    """Realized cores of all level-k components as one 1-cycle."""
    cycle = OneCycle(tuple(pkg.realize(a).tube.core for a in level_components(pkg, k)))
    _, disk = meridian_disk(pkg)
    if count_disk_intersections(cycle, disk) < 1:
        raise LongitudeCheckFailed(f"level-{k} canonical cycle misses the canonical meridian disk")
    return cycle


# ---------------------------------------------------------------------------
# built-in packages

CORE_RADIUS = 1.0
TUBE_RADIUS = 0.25
CORE_RESOLUTION = 64
STRAND_OFFSET = 0.55
TURN_ASPECT = 0.5
# the low-turn tip sits at this fraction of a loop's own length, which keeps the
# clasps of the next level on straight strands
LOOP_START = 0.25


def _parent(label="H"):
    ang = 2 * math.pi * np.arange(CORE_RESOLUTION) / CORE_RESOLUTION
    core = np.column_stack([CORE_RADIUS * np.cos(ang), CORE_RADIUS * np.sin(ang), np.zeros_like(ang)])
    return TubeSpec(PolyCycle(core, label), TUBE_RADIUS)


def _turn_extent(w):
    """Turn length along the core, in t units, for a half-ellipse of aspect TURN_ASPECT."""
    return TURN_ASPECT * w * TUBE_RADIUS / (2 * math.pi * CORE_RADIUS)


def _ease(s):
    return 0.5 * (1 - np.cos(np.pi * s))


def clasp_loop(t_low_end, t_high_end, w=STRAND_OFFSET, turn_points=10, strand_points=22):
    """Long loop running from a b-plane turn at t_low_end to an a-plane turn at t_high_end.

    The strands are antipodal and rotate by a quarter turn between the two
    ends. A low turn placed just inside another loop's high turn makes a clasp.
    """
    ext = _turn_extent(w)
    half = turn_points // 2
    rows = []
    # low turn, tip to upper strand
    for th in np.pi / 2 - np.arange(half) * (np.pi / 2) / half:
        rows.append((t_low_end - ext * math.sin(th), 0.0, w * math.cos(th)))
    s = np.arange(strand_points) / strand_points
    psi = 0.5 * np.pi * (1 - _ease(s))
    for si, p in zip(s, psi):
        rows.append((t_low_end + si * (t_high_end - t_low_end), w * math.cos(p), w * math.sin(p)))
    for th in np.arange(turn_points) * np.pi / turn_points:
        rows.append((t_high_end + ext * math.sin(th), w * math.cos(th), 0.0))
    psi = np.pi + 0.5 * np.pi * _ease(s)
    for si, p in zip(s, psi):
        rows.append((t_high_end - si * (t_high_end - t_low_end), w * math.cos(p), w * math.sin(p)))
    for th in np.pi - np.arange(half) * (np.pi / 2) / half:
        rows.append((t_low_end - ext * math.sin(th), 0.0, w * math.cos(th)))
    return _start_at_fraction(np.array(rows), 1 - LOOP_START)


def _start_at_fraction(rows, fraction):
    """Roll rows so the vertex at the given arclength fraction comes first.

    Arclength is measured on the parent built-ins' proportions, which is what
    the realized loop will roughly have.
    """
    scaled = rows * np.array([2 * math.pi * CORE_RADIUS, TUBE_RADIUS, TUBE_RADIUS])
    seg = np.linalg.norm(np.roll(scaled, -1, axis=0) - scaled, axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)[:-1]]) / seg.sum()
    return np.roll(rows, -int(np.argmin(np.abs(s - fraction))), axis=0)


def _clasp_overlap(w=STRAND_OFFSET):
    return 3 * _turn_extent(w)


def build_whitehead(radius_fraction=0.2):
    """m = 1: one curve running twice around H, clasping itself; null-homologous in H."""
    ext, overlap = _turn_extent(STRAND_OFFSET), _clasp_overlap()
    low = -overlap / 2 + ext
    high = 1 + overlap / 2 - ext
    child = ChildEmbedding(clasp_loop(low, high), radius_fraction, True)
    # Chosen from a scan of edge midpoints: the middle of the widest window giving 2, 4, 8 for k = 1..3.
    return InitialPackage(_parent(), [child], genus=1, package_id="whitehead", meridian_t=29 / 128)


def build_bing(radius_fraction=0.2):
    """m = 2: two loops, each spanning half of H, clasped at both ends."""
    ext, overlap = _turn_extent(STRAND_OFFSET), _clasp_overlap()
    children = []
    for start in (0.0, 0.5):
        low = start - overlap / 2 + ext
        high = start + 0.5 + overlap / 2 - ext
        children.append(ChildEmbedding(clasp_loop(low, high), radius_fraction, True))
    return InitialPackage(_parent(), children, genus=1, package_id="bing", meridian_t=0.125)


def build_antoine(m, radius_fraction=0.2, w=STRAND_OFFSET):
    """Necklace of m small loops; consecutive loops are clasped, the chain closes up."""
    if m < 3:
        raise TooFewTori(f"an Antoine necklace needs at least 3 tori, got {m}")
    half_len = 0.75 / m
    step = math.pi * math.ceil(m / 2) / m
    children = []
    for j in range(m):
        theta = j * step
        t, r = _stadium(j / m, half_len, w)
        children.append(
            ChildEmbedding(np.column_stack([t, r * math.cos(theta), r * math.sin(theta)]), radius_fraction, True)
        )
    return InitialPackage(_parent(), children, genus=1, package_id=f"antoine{m}", meridian_t=0.0)


def _stadium(center, half_len, w, n=PATTERN_RESOLUTION, end_points=12):
    """Rounded loop in the (t, r) half-plane: straight sides at r = +-w, semicircular ends.

    Returns t and signed offset r. The ends reach t = center +- half_len on the axis.
    """
    cap = w * TUBE_RADIUS / (2 * math.pi * CORE_RADIUS)
    side = (n - 2 * end_points) // 2
    lo, hi = center - half_len + cap, center + half_len - cap
    t, r = [], []
    for s in np.arange(side) / side:
        t.append(lo + s * (hi - lo))
        r.append(w)
    for th in np.arange(end_points) * np.pi / end_points:
        t.append(hi + cap * math.sin(th))
        r.append(w * math.cos(th))
    for s in np.arange(side) / side:
        t.append(hi - s * (hi - lo))
        r.append(-w)
    for th in np.arange(end_points) * np.pi / end_points:
        t.append(lo - cap * math.sin(th))
        r.append(-w * math.cos(th))
    return np.array(t), np.array(r)


BUILTINS = {
    "whitehead": build_whitehead,
    "bing": build_bing,
}


def load_package(source):
    """Built-in id (``whitehead``, ``bing``, ``antoineN``) or path to a descriptor JSON."""
    if source in BUILTINS:
        return BUILTINS[source]()
    if source.startswith("antoine") and source[7:].isdigit():
        return build_antoine(int(source[7:]))
    with open(source) as fh:
        return InitialPackage.loads(fh.read())
