"""Branch data for covers of the 2-sphere, and combinatorial extension plans.

Permutations act on {1..n} and are stored by their images. Products are read
left to right: ``p * q`` applies ``p`` first, then ``q``. This is the usual
monodromy convention, where a loop around x_1 followed by a loop around x_2
acts as rho(x_1) then rho(x_2).

Plans are certificates, not maps: they list the tubes and disks of the
construction and the compatibility equations the branched cover must satisfy,
leaving the piecewise-linear extension to the cited existence theorems.
"""

import itertools
import json
import math
from dataclasses import dataclass, field

from .errors import DegreeMismatch, DegreeTooSmall, DegreeTwoObstruction, LambdaInfeasible, OddEuler
from .package import level_cap, level_components

FEASIBLE = "feasible"
UNKNOWN = "unknown"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Permutation:
    images: tuple

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise ValueError(f"{list(images)} is not a bijection on 1..{len(images)}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, n):
        return cls(range(1, n + 1))

    @classmethod
    def from_cycles(cls, n, *cycles):
        """Permutation of {1..n} from disjoint cycles, e.g. from_cycles(3, (1, 2))."""
        images = list(range(1, n + 1))
        seen = set()
        for cycle in cycles:
            if seen.intersection(cycle) or len(set(cycle)) != len(cycle):
                raise ValueError("cycles must be disjoint")
            seen.update(cycle)
            for a, b in zip(cycle, cycle[1:] + tuple(cycle[:1])):
                images[a - 1] = b
        return cls(images)

    @property
    def degree(self):
        return len(self.images)

    def __call__(self, i):
        return self.images[i - 1]

    def __mul__(self, other):
        if other.degree != self.degree:
            raise ValueError("permutations act on different sets")
        return Permutation(other(self(i)) for i in range(1, self.degree + 1))

    def inverse(self):
        out = [0] * self.degree
        for i, image in enumerate(self.images, start=1):
            out[image - 1] = i
        return Permutation(out)

    def is_identity(self):
        return all(image == i for i, image in enumerate(self.images, start=1))

    def cycles(self):
        """All cycles, fixed points included, each starting at its smallest element."""
        seen, out = set(), []
        for start in range(1, self.degree + 1):
            if start in seen:
                continue
            cycle, i = [], start
            while i not in seen:
                seen.add(i)
                cycle.append(i)
                i = self(i)
            out.append(tuple(cycle))
        return out

    def cycle_type(self):
        return tuple(sorted((len(c) for c in self.cycles()), reverse=True))

    def __str__(self):
        moved = [c for c in self.cycles() if len(c) > 1]
        return "".join("(" + " ".join(map(str, c)) + ")" for c in moved) or "()"


@dataclass(frozen=True)
class BranchData:
    degree: int
    permutations: tuple

    def __post_init__(self):
        object.__setattr__(self, "permutations", tuple(self.permutations))

    @property
    def k(self):
        return len(self.permutations)

    def to_dict(self):
        return {
            "degree": self.degree,
            "branch_points": self.k,
            "permutations": [list(p.images) for p in self.permutations],
        }

    @classmethod
    def from_dict(cls, data):
        perms = tuple(Permutation(images) for images in data["permutations"])
        if "branch_points" in data and data["branch_points"] != len(perms):
            raise ValueError("branch_points does not match the number of permutations")
        return cls(int(data["degree"]), perms)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def build_branch_data(g, n):
    """The canonical data: an n-cycle, its inverse, then 2g copies of (1 2)."""
    if n < 2:
        raise DegreeTooSmall(f"degree must be at least 2, got {n}")
    if g < 0:
        raise ValueError(f"genus must be non-negative, got {g}")
    cycle = Permutation(list(range(2, n + 1)) + [1])
    swap = Permutation.from_cycles(n, (1, 2))
    return BranchData(n, (cycle, cycle.inverse()) + (swap,) * (2 * g))


@dataclass(frozen=True)
class BranchReport:
    degree_ok: bool
    product_identity: bool
    transitive: bool
    local_degrees: tuple
    failed: tuple

    @property
    def ok(self):
        return not self.failed


def _orbit(perms, n):
    reached, frontier = {1}, [1]
    while frontier:
        i = frontier.pop()
        for p in perms:
            j = p(i)
            if j not in reached:
                reached.add(j)
                frontier.append(j)
    return reached


def verify_branch_data(data):
    """Check degrees, the product relation and transitivity; never raises."""
    failed = []
    degree_ok = data.degree >= 1 and data.k >= 1 and all(p.degree == data.degree for p in data.permutations)
    if not degree_ok:
        failed.append("degree")
        return BranchReport(False, False, False, (), tuple(failed))
    product = Permutation.identity(data.degree)
    for p in data.permutations:
        product = product * p
    identity = product.is_identity()
    if not identity:
        failed.append("product")
    transitive = len(_orbit(data.permutations, data.degree)) == data.degree
    if not transitive:
        failed.append("transitivity")
    local = tuple(p.cycle_type() for p in data.permutations)
    return BranchReport(True, identity, transitive, local, tuple(failed))


def euler_characteristic_of_cover(data):
    """n(2 - k) plus the number of cycles over all branch permutations."""
    return data.degree * (2 - data.k) + sum(len(p.cycles()) for p in data.permutations)


def cover_genus(data):
    chi = euler_characteristic_of_cover(data)
    if chi % 2:
        raise OddEuler(f"Euler characteristic {chi} is odd")
    return (2 - chi) // 2


# ---------------------------------------------------------------------------
# extension plans


@dataclass(frozen=True)
class Tube:
    j: int
    i: int

    @property
    def label(self):
        return f"U_{self.j},{self.i}"

    @property
    def source_disk(self):
        return f"D_{self.j},{self.i}"

    @property
    def target_disk(self):
        return f"D'_{self.j + 1},{self.i}"

    def to_dict(self):
        return {
            "j": self.j,
            "i": self.i,
            "label": self.label,
            "source_disk": self.source_disk,
            "target_disk": self.target_disk,
        }


BASE_CASE = "p = 2: a single boundary pair; the branched cover extends by the Berstein-Edmonds theorem"


@dataclass(frozen=True)
class ExtensionPlan:
    p: int
    n: int
    tubes: tuple = ()
    targets: tuple = ()
    compatibility: tuple = ()
    base_case: str = None

    def to_dict(self):
        return {
            "p": self.p,
            "n": self.n,
            "tubes": [t.to_dict() for t in self.tubes],
            "targets": list(self.targets),
            "compatibility": [dict(c) for c in self.compatibility],
            "base_case": self.base_case,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            int(data["p"]),
            int(data["n"]),
            tuple(Tube(int(t["j"]), int(t["i"])) for t in data["tubes"]),
            tuple(data["targets"]),
            tuple(dict(c) for c in data["compatibility"]),
            data.get("base_case"),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _degree_of(entry):
    return entry.degree if isinstance(entry, BranchData) else int(entry)


def extension_plan(p, n, boundary_data=()):
    """Tube table for extending degree-n covers of p boundary spheres across the filling.

    ``boundary_data`` may list BranchData or plain degrees for the boundary
    components; every one must have degree n.
    """
    if p < 2:
        raise ValueError(f"need at least two boundary components, got p={p}")
    if n == 2:
        raise DegreeTwoObstruction(
            "no 2-fold branched covering of the 3-sphere extends the boundary data (Fox); degree 2 is excluded"
        )
    if n < 2:
        raise DegreeTooSmall(f"degree must be at least 3, got {n}")
    degrees = sorted({_degree_of(b) for b in boundary_data})
    if degrees and degrees != [n]:
        raise DegreeMismatch(f"boundary degrees {degrees} differ from the plan degree {n}")
    if p == 2:
        return ExtensionPlan(p, n, base_case=BASE_CASE)
    tubes = tuple(Tube(j, i) for j in range(1, p - 1) for i in range(1, n + 1))
    targets = tuple(f"V_{j}" for j in range(1, p - 1))
    compatibility = tuple(
        {
            "tube": t.label,
            "boundary": t.j,
            "disk": t.source_disk,
            "equation": f"beta_{t.j} o alpha_{t.j},{t.i}^-1 = phi_{t.j} on {t.source_disk}",
        }
        for t in tubes
    )
    return ExtensionPlan(p, n, tubes, targets, compatibility)


def validate_plan(plan):
    """Problems found in a plan; an empty list means it is a well-formed certificate."""
    problems = []
    if plan.p < 2:
        problems.append("p below 2")
    if plan.n < 3:
        problems.append("degree below 3")
    if plan.p == 2:
        if plan.tubes or plan.targets:
            problems.append("the base case has no tubes")
        if not plan.base_case:
            problems.append("the base case record is missing")
        return problems
    want = {(j, i) for j in range(1, plan.p - 1) for i in range(1, plan.n + 1)}
    got = [(t.j, t.i) for t in plan.tubes]
    if len(set(got)) != len(got):
        problems.append("tube labels repeat")
    if set(got) != want:
        problems.append(f"expected {len(want)} tubes U_j,i with 1 <= j <= {plan.p - 2}, 1 <= i <= {plan.n}")
    if list(plan.targets) != [f"V_{j}" for j in range(1, plan.p - 1)]:
        problems.append("target tubes must be V_1..V_{p-2}")
    covered = {c.get("tube") for c in plan.compatibility}
    if covered != {t.label for t in plan.tubes}:
        problems.append("every tube needs one compatibility record")
    for j in range(1, plan.p - 1):
        count = sum(1 for t in plan.tubes if t.j == j)
        if count != plan.n:
            problems.append(f"boundary {j} carries {count} source tubes, expected {plan.n}")
    return problems


# ---------------------------------------------------------------------------
# the pipeline plan for a package


def _sphere_points(m):
    """Deterministic unit vectors (m >= 2): a Fibonacci spiral or an equatorial ring, whichever spreads wider."""
    golden = math.pi * (3 - math.sqrt(5))
    spiral = []
    for i in range(m):
        z = 1 - 2 * (i + 0.5) / m
        r = math.sqrt(1 - z * z)
        spiral.append((r * math.cos(golden * i), r * math.sin(golden * i), z))
    ring = [(math.cos(2 * math.pi * i / m), math.sin(2 * math.pi * i / m), 0.0) for i in range(m)]
    return max((spiral, ring), key=_min_separation)


def _min_separation(points):
    if len(points) < 2:
        return math.inf
    return min(math.dist(a, b) for a, b in itertools.combinations(points, 2))


def ball_packing(m, lam):
    """Centers of m disjoint balls of radius lam inside the unit ball, and a verdict.

    The volume bound m lam^3 <= 1 is necessary; placing the centers on the
    sphere of radius 1 - lam is a sufficient test. Anything in between is
    reported as unknown.
    """
    if m * lam**3 > 1:
        return INFEASIBLE, ()
    if m == 1:
        return FEASIBLE, ((0.0, 0.0, 0.0),)
    radius = 1 - lam
    centers = tuple(tuple(radius * c for c in u) for u in _sphere_points(m))
    if radius * _min_separation(_sphere_points(m)) > 2 * lam:
        return FEASIBLE, centers
    return UNKNOWN, centers


@dataclass(frozen=True)
class LevelMap:
    level: int
    address: tuple
    scale: float

    def to_dict(self):
        return {"level": self.level, "address": list(self.address), "scale": self.scale}


@dataclass(frozen=True)
class HrPlan:
    package_id: str
    lam: float
    degree: int
    boundary: BranchData
    packing: str
    ball_centers: tuple
    levels: tuple
    shell_plan: ExtensionPlan
    notes: tuple = field(default=())

    @property
    def feasible(self):
        return self.packing == FEASIBLE

    def to_dict(self):
        return {
            "package_id": self.package_id,
            "lambda": self.lam,
            "degree": self.degree,
            "boundary": self.boundary.to_dict(),
            "target": {
                "balls": len(self.ball_centers),
                "radius": self.lam,
                "centers": [list(c) for c in self.ball_centers],
                "packing": self.packing,
            },
            "levels": [lv.to_dict() for lv in self.levels],
            "shell_plan": self.shell_plan.to_dict(),
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def heinonen_rickman_plan(pkg, n, lam, depth=None):
    """Bundle the data a degree-n BLD map onto the package's Semmes space needs.

    Level records run to ``depth`` or, by default, as deep as the level cap
    allows for the total number of records.
    """
    if n < 3:
        raise DegreeTooSmall(f"the construction needs degree at least 3, got {n}")
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    m = pkg.m
    verdict, centers = ball_packing(m, lam)
    if verdict == INFEASIBLE:
        raise LambdaInfeasible(f"{m} balls of radius {lam} cannot fit in the unit ball ({m} * lambda^3 > 1)")
    if depth is None:
        cap, depth, total = level_cap(), 0, 1
        while total + m ** (depth + 1) <= cap:
            depth += 1
            total += m**depth
    levels = tuple(
        LevelMap(k, address, lam**k) for k in range(depth + 1) for address in level_components(pkg, k)
    )
    return HrPlan(
        pkg.package_id,
        float(lam),
        int(n),
        build_branch_data(pkg.genus, n),
        verdict,
        centers,
        levels,
        extension_plan(m + 1, n),
    )
