"""Polygonal curves in 3-space: lengths, linking numbers, coned disks, intersection counts.

All predicates are tolerance based. Configurations within ``EPS_GEOM`` of a
degenerate one are rejected instead of guessed, so every count returned is an
exact integer for the input it was computed on.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import (
    CurvesIntersect,
    DegenerateTriangle,
    DSLError,
    InvalidCurve,
    NonGenericPosition,
)

EPS_GEOM = 1e-9
MIN_PLANE_ANGLE = 1e-6


class LinkingMismatch(DSLError):
    """The crossing count and the Gauss integral disagree."""


def _as_points(vertices):
    arr = np.array(vertices, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidCurve(f"expected an (n, 3) array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidCurve("non-finite coordinate")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PolyCycle:
    """Closed polygon; the last vertex connects back to the first."""

    vertices: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = _as_points(self.vertices)
        object.__setattr__(self, "vertices", v)
        if len(v) < 3:
            raise InvalidCurve(f"{self.label or 'curve'}: need at least 3 vertices")
        lengths = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        scale = max(1.0, float(np.abs(v).max()))
        if lengths.min() <= EPS_GEOM * scale:
            raise InvalidCurve(f"{self.label or 'curve'}: zero-length edge")

    def __len__(self):
        return len(self.vertices)

    @property
    def edges(self):
        """Return (starts, ends) arrays of shape (n, 3)."""
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def length(self):
        a, b = self.edges
        return float(np.linalg.norm(b - a, axis=1).sum())

    def reversed(self):
        return PolyCycle(self.vertices[::-1].copy(), self.label)

    def transformed(self, rotation=None, translation=None):
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return PolyCycle(v, self.label)

    def refined(self):
        """Split every edge at its midpoint."""
        a, b = self.edges
        out = np.empty((2 * len(a), 3))
        out[0::2] = a
        out[1::2] = 0.5 * (a + b)
        return PolyCycle(out, self.label)

    def to_dict(self):
        return {"label": self.label, "vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["vertices"], data.get("label", ""))


@dataclass(frozen=True, eq=False)
class OneCycle:
    """Finite sum of closed polygons."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidCurve("a 1-cycle needs at least one component")
        object.__setattr__(self, "components", comps)

    @classmethod
    def of(cls, *curves):
        return cls(tuple(curves))

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def segments(self):
        starts, ends = zip(*(c.edges for c in self.components))
        return np.concatenate(starts), np.concatenate(ends)

    def transformed(self, rotation=None, translation=None):
        return OneCycle(tuple(c.transformed(rotation, translation) for c in self.components))

    def refined(self):
        return OneCycle(tuple(c.refined() for c in self.components))


def as_one_cycle(curve):
    if isinstance(curve, OneCycle):
        return curve
    return OneCycle((curve,))


@dataclass(frozen=True, eq=False)
class TriangulatedDisk:
    """Cone over a closed polygon: triangles (apex, v_i, v_{i+1})."""

    boundary: PolyCycle
    apex: np.ndarray
    triangles: np.ndarray = field(default=None)

    def __post_init__(self):
        apex = np.array(self.apex, dtype=float).reshape(3)
        apex.setflags(write=False)
        object.__setattr__(self, "apex", apex)
        n = len(self.boundary)
        if self.triangles is None:
            tris = np.array([(n, i, (i + 1) % n) for i in range(n)], dtype=int)
            tris.setflags(write=False)
            object.__setattr__(self, "triangles", tris)

    @property
    def points(self):
        return np.vstack([self.boundary.vertices, self.apex[None, :]])

    def corners(self):
        """Return (v0, v1, v2) arrays of shape (l, 3)."""
        p = self.points
        t = self.triangles
        return p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]

    def normals(self):
        v0, v1, v2 = self.corners()
        n = np.cross(v1 - v0, v2 - v0)
        return n / np.linalg.norm(n, axis=1)[:, None]

    def area(self):
        v0, v1, v2 = self.corners()
        return float(0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1).sum())

    def translated(self, offset):
        offset = np.asarray(offset, dtype=float)
        return TriangulatedDisk(
            PolyCycle(self.boundary.vertices + offset, self.boundary.label),
            self.apex + offset,
            self.triangles,
        )


# ---------------------------------------------------------------------------
# lengths and distances


def cycle_length(c):
    return float(sum(comp.length() for comp in as_one_cycle(c)))


def segment_distances(p0, p1, q0, q1):
    """Pairwise minimum distances between segments [p0,p1] (n) and [q0,q1] (m)."""
    p0 = p0[:, None, :]
    d1 = (p1 - p0[:, 0, :])[:, None, :]
    q0 = q0[None, :, :]
    d2 = (q1 - q0[0])[None, :, :]
    r = p0 - q0
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-300, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        t_c = np.clip(t, 0.0, 1.0)
        s = np.where(t != t_c, np.clip((b * t_c - c) / a, 0.0, 1.0), s)
    diff = p0 + d1 * s[..., None] - (q0 + d2 * t_c[..., None])
    return np.linalg.norm(diff, axis=-1)


def curve_distance(a, b):
    pa0, pa1 = a.edges
    pb0, pb1 = b.edges
    return float(segment_distances(pa0, pa1, pb0, pb1).min())


def point_polyline_distance(points, curve):
    """Distance from each point to a closed polygon."""
    points = np.atleast_2d(points)
    a, b = curve.edges
    d = b - a
    w = points[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(w * d, axis=-1) / np.sum(d * d, axis=-1), 0.0, 1.0)
    proj = a[None] + t[..., None] * d[None]
    return np.linalg.norm(points[:, None, :] - proj, axis=-1).min(axis=1)


# ---------------------------------------------------------------------------
# generic directions


def _radical_inverse(i, base):
    inv = 1.0 / base
    f, out = inv, 0.0
    while i > 0:
        out += f * (i % base)
        i //= base
        f *= inv
    return out


def direction_sequence():
    """Infinite deterministic low-discrepancy sequence of unit vectors (Halton 2,3)."""
    i = 1
    while True:
        z = 2.0 * _radical_inverse(i, 2) - 1.0
        phi = 2.0 * math.pi * _radical_inverse(i, 3)
        r = math.sqrt(max(0.0, 1.0 - z * z))
        yield np.array([r * math.cos(phi), r * math.sin(phi), z])
        i += 1


def generic_direction(disk, max_tries=10000):
    """First direction of the fixed sequence making angle > 1e-6 rad with every triangle plane."""
    normals = disk.normals()
    for i, u in enumerate(direction_sequence()):
        if i >= max_tries:
            break
        if np.abs(normals @ u).min() > math.sin(MIN_PLANE_ANGLE):
            return u
    raise NonGenericPosition("no generic direction found")


def _projection_basis(d):
    d = d / np.linalg.norm(d)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(d, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    return d, e1, e2


# ---------------------------------------------------------------------------
# linking numbers


def gauss_linking(a, b):
    """Gauss linking integral as a float, summed exactly per segment pair.

    Each pair of straight segments contributes the signed solid angle of the
    quadrilateral they span, divided by 4 pi.
    """
    a0, a1 = a.edges
    b0, b1 = b.edges
    A0, A1 = a0[:, None, :], a1[:, None, :]
    B0, B1 = b0[None, :, :], b1[None, :, :]
    r13 = B0 - A0
    r14 = B1 - A0
    r23 = B0 - A1
    r24 = B1 - A1

    def unit_cross(u, v):
        c = np.cross(u, v)
        n = np.linalg.norm(c, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n > 1e-300, c / n, 0.0)

    n1 = unit_cross(r13, r14)
    n2 = unit_cross(r14, r24)
    n3 = unit_cross(r24, r23)
    n4 = unit_cross(r23, r13)

    def asin_dot(u, v):
        return np.arcsin(np.clip(np.sum(u * v, axis=-1), -1.0, 1.0))

    omega = asin_dot(n1, n2) + asin_dot(n2, n3) + asin_dot(n3, n4) + asin_dot(n4, n1)
    r34 = B1 - B0
    r12 = A1 - A0
    sign = np.sign(np.sum(np.cross(r34, r12) * r13, axis=-1))
    return float(np.sum(omega * sign) / (4.0 * math.pi))


def _crossing_sum(a, b, d):
    """Sum of crossing signs between a and b in the projection along d, or None if non-generic."""
    d, e1, e2 = _projection_basis(d)
    a0, a1 = a.edges
    b0, b1 = b.edges
    P = np.stack([a0 @ e1, a0 @ e2], axis=-1)[:, None, :]
    R = np.stack([(a1 - a0) @ e1, (a1 - a0) @ e2], axis=-1)[:, None, :]
    Q = np.stack([b0 @ e1, b0 @ e2], axis=-1)[None, :, :]
    U = np.stack([(b1 - b0) @ e1, (b1 - b0) @ e2], axis=-1)[None, :, :]

    def cross2(x, y):
        return x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0]

    denom = cross2(R, U)
    qp = Q - P
    scale = np.linalg.norm(R, axis=-1) * np.linalg.norm(U, axis=-1)
    parallel = np.abs(denom) <= EPS_GEOM * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        s = cross2(qp, U) / denom
        t = cross2(qp, R) / denom
    if np.any(parallel):
        # collinear overlap in projection is degenerate
        dist = np.abs(cross2(qp, R)) / np.maximum(np.linalg.norm(R, axis=-1), 1e-300)
        if np.any(parallel & (dist <= EPS_GEOM * np.maximum(1.0, np.abs(P).max()))):
            return None
    s = np.where(parallel, -1.0, s)
    t = np.where(parallel, -1.0, t)
    near = ((np.abs(s) < EPS_GEOM) | (np.abs(s - 1) < EPS_GEOM)) & (t > -EPS_GEOM) & (t < 1 + EPS_GEOM)
    near |= ((np.abs(t) < EPS_GEOM) | (np.abs(t - 1) < EPS_GEOM)) & (s > -EPS_GEOM) & (s < 1 + EPS_GEOM)
    if np.any(near):
        return None
    hit = (s > 0) & (s < 1) & (t > 0) & (t < 1)
    ia, ib = np.nonzero(hit)
    if len(ia) == 0:
        return 0
    sa, tb = s[ia, ib], t[ia, ib]
    ra = (a1 - a0)[ia]
    rb = (b1 - b0)[ib]
    za = (a0[ia] + sa[:, None] * ra) @ d
    zb = (b0[ib] + tb[:, None] * rb) @ d
    gap = za - zb
    if np.any(np.abs(gap) <= EPS_GEOM):
        raise CurvesIntersect("curves meet in a crossing")
    over = np.where(gap[:, None] > 0, ra, rb)
    under = np.where(gap[:, None] > 0, rb, ra)
    signs = np.sign(np.cross(over, under) @ d)
    return int(signs.sum())


def crossing_linking(a, b, max_tries=64):
    """Linking number as half the signed crossing count of a generic projection."""
    for i, d in enumerate(direction_sequence()):
        if i >= max_tries:
            break
        total = _crossing_sum(a, b, d)
        if total is None:
            continue
        if total % 2:
            continue
        return total // 2
    raise NonGenericPosition("no generic projection found for crossing count")


def linking_number(a, b):
    """Integer linking number of two disjoint closed polygons.

    Computed twice, by signed crossings over a generic projection and by the
    Gauss integral; the two must agree. Symmetric in its arguments.
    """
    scale = max(1.0, float(np.abs(a.vertices).max()), float(np.abs(b.vertices).max()))
    if curve_distance(a, b) <= EPS_GEOM * scale:
        raise CurvesIntersect(f"{a.label or 'a'} and {b.label or 'b'} intersect")
    by_crossing = crossing_linking(a, b)
    by_gauss = gauss_linking(a, b)
    if abs(by_gauss - round(by_gauss)) >= 0.1 or round(by_gauss) != by_crossing:
        raise LinkingMismatch(f"crossing count {by_crossing} vs Gauss integral {by_gauss:.6f}")
    return by_crossing


# ---------------------------------------------------------------------------
# disks and intersections


def cone_disk(boundary, apex):
    apex = np.asarray(apex, dtype=float)
    a, b = boundary.edges
    u = a - apex
    v = b - apex
    cross = np.linalg.norm(np.cross(u, v), axis=1)
    ref = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
    if np.any(ref <= EPS_GEOM**2) or np.any(cross <= EPS_GEOM * ref):
        raise DegenerateTriangle("apex is on or collinear with a boundary edge")
    return TriangulatedDisk(boundary, apex)


def _segment_triangle_hits(p0, p1, disk):
    """Matrix (segments x triangles) of transversal hits; raises on non-generic contact."""
    v0, v1, v2 = disk.corners()
    e1 = (v1 - v0)[None]
    e2 = (v2 - v0)[None]
    d = (p1 - p0)[:, None, :]
    pvec = np.cross(d, e2)
    det = np.sum(e1 * pvec, axis=-1)
    scale = np.linalg.norm(d, axis=-1) * np.linalg.norm(e1, axis=-1) * np.linalg.norm(e2, axis=-1)
    parallel = np.abs(det) <= EPS_GEOM * scale
    tvec = p0[:, None, :] - v0[None]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        u = np.sum(tvec * pvec, axis=-1) * inv
        qvec = np.cross(tvec, e1)
        v = np.sum(d * qvec, axis=-1) * inv
        t = np.sum(e2 * qvec, axis=-1) * inv
    if np.any(parallel):
        normals = np.cross(e1[0], e2[0])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        h0 = np.abs(np.sum((p0[:, None, :] - v0[None]) * normals[None], axis=-1))
        h1 = np.abs(np.sum((p1[:, None, :] - v0[None]) * normals[None], axis=-1))
        size = np.linalg.norm(e1, axis=-1)
        inplane = parallel & (h0 <= EPS_GEOM * size) & (h1 <= EPS_GEOM * size)
        if np.any(inplane):
            lo = np.minimum(p0, p1)[:, None, :]
            hi = np.maximum(p0, p1)[:, None, :]
            tlo = np.minimum(np.minimum(v0, v1), v2)[None]
            thi = np.maximum(np.maximum(v0, v1), v2)[None]
            overlap = np.all((lo <= thi) & (hi >= tlo), axis=-1)
            if np.any(inplane & overlap):
                raise NonGenericPosition("segment lies in a triangle plane")
    u = np.where(parallel, -1.0, u)
    v = np.where(parallel, -1.0, v)
    t = np.where(parallel, -1.0, t)
    w = 1.0 - u - v
    inside_closed = (u > -EPS_GEOM) & (v > -EPS_GEOM) & (w > -EPS_GEOM)
    on_span = (t > -EPS_GEOM) & (t < 1 + EPS_GEOM)
    edge_touch = inside_closed & on_span & ((u < EPS_GEOM) | (v < EPS_GEOM) | (w < EPS_GEOM))
    vertex_touch = inside_closed & ((np.abs(t) < EPS_GEOM) | (np.abs(t - 1) < EPS_GEOM))
    if np.any(edge_touch | vertex_touch):
        raise NonGenericPosition("curve touches a triangle edge or has a vertex on the disk")
    return inside_closed & (t > 0) & (t < 1)


def count_disk_intersections(sigma, disk, chunk=4096):
    """Number of transversal crossings of a 1-cycle with a triangulated disk."""
    p0, p1 = as_one_cycle(sigma).segments()
    lo = disk.points.min(axis=0)
    hi = disk.points.max(axis=0)
    slo = np.minimum(p0, p1)
    shi = np.maximum(p0, p1)
    pad = EPS_GEOM * max(1.0, float(np.abs(disk.points).max()))
    near = np.all((shi >= lo - pad) & (slo <= hi + pad), axis=1)
    p0, p1 = p0[near], p1[near]
    total = 0
    for start in range(0, len(p0), chunk):
        total += int(_segment_triangle_hits(p0[start:start + chunk], p1[start:start + chunk], disk).sum())
    return total


@dataclass(frozen=True)
class TranslateSweep:
    minimum: int
    counts: tuple
    skipped: tuple


def min_intersections_over_translates(sigma, disk, u, t_max, samples):
    """Minimum crossing count over translates disk + t*u, t sampled in [0, t_max].

    Non-generic samples are skipped and listed in ``skipped``.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    if np.abs(disk.normals() @ u).min() <= math.sin(MIN_PLANE_ANGLE):
        raise NonGenericPosition("direction is parallel to a triangle plane")
    ts = [0.0] if t_max == 0 or samples == 1 else list(np.linspace(0.0, t_max, samples))
    counts, skipped = [], []
    for t in ts:
        try:
            counts.append((float(t), count_disk_intersections(sigma, disk.translated(t * u))))
        except NonGenericPosition:
            skipped.append(float(t))
    if not counts:
        raise NonGenericPosition("every sampled translate was non-generic")
    return TranslateSweep(min(c for _, c in counts), tuple(counts), tuple(skipped))


# ---------------------------------------------------------------------------
# fixtures


def load_curve(path):
    with open(path) as fh:
        return PolyCycle.from_dict(json.load(fh))


def fixture(name):
    """Bundled fixture curve by file stem, e.g. ``hopf_a``."""
    ref = resources.files("dsl").joinpath("fixtures", f"{name}.json")
    return PolyCycle.from_dict(json.loads(ref.read_text()))


def circle(center, radius, normal, n=64, phase=0.0, label=""):
    """Regular n-gon inscribed in a circle."""
    center = np.asarray(center, dtype=float)
    _, e1, e2 = _projection_basis(np.asarray(normal, dtype=float))
    ang = phase + 2.0 * math.pi * np.arange(n) / n
    pts = center + radius * (np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2)
    return PolyCycle(pts, label)
