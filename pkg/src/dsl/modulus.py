"""Discrete conformal 3-modulus of curve families on weighted graphs.

A density rho >= 0 on edges is admissible when every family member has
rho-length sum(count * length * rho) >= 1, and the modulus is the least energy
sum(volume * rho**3) over admissible densities. The solver generates
constraints: it solves the problem restricted to the members found so far,
asks a separation oracle for the shortest member under the current density,
and stops once the admissible rescaling of that density is within the
requested tolerance of the dual lower bound.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from .errors import EmptyFamily, MappingFailed, NotConverged
from .semmes import VOLUME_PER_LENGTH, region_of

EPS_ADM = 1e-4
EPS_VALUE = 1e-3
MAX_ROUNDS = 100_000
BATCH = 64


# ---------------------------------------------------------------------------
# graphs and families


@dataclass(frozen=True, eq=False)
class ModulusGraph:
    """Undirected multigraph with edge lengths (for rho-length) and volumes (for energy)."""

    n_vertices: int
    edges: np.ndarray
    lengths: np.ndarray
    volumes: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        lengths = np.asarray(self.lengths, dtype=float)
        volumes = np.asarray(self.volumes, dtype=float)
        if not (len(edges) == len(lengths) == len(volumes)):
            raise ValueError("edges, lengths and volumes must have equal length")
        if np.any(lengths <= 0) or np.any(volumes <= 0):
            raise ValueError("edge lengths and volumes must be positive")
        if len(edges) and (edges.min() < 0 or edges.max() >= self.n_vertices):
            raise ValueError("edge endpoint out of range")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "volumes", volumes)

    @property
    def n_edges(self):
        return len(self.edges)

    @classmethod
    def unit(cls, n_vertices, edges):
        """All lengths and volumes equal to 1."""
        m = len(edges)
        return cls(n_vertices, edges, np.ones(m), np.ones(m))

    def scaled(self, s):
        """Lengths times s, volumes times s**3."""
        return ModulusGraph(self.n_vertices, self.edges, self.lengths * s, self.volumes * s**3)

    def energy(self, rho):
        return float(np.sum(self.volumes * rho**3))


class ExplicitFamily:
    """A finite list of members, each a multiset of edge ids (a path, cycle or 1-cycle)."""

    def __init__(self, members, n_edges):
        rows, cols = [], []
        for r, member in enumerate(members):
            member = np.asarray(member, dtype=int).ravel()
            if len(member) == 0:
                raise ValueError(f"member {r} has no edges")
            rows.append(np.full(len(member), r))
            cols.append(member)
        self.size = len(rows)
        if self.size == 0:
            self.counts = sp.csr_matrix((0, n_edges))
        else:
            r, c = np.concatenate(rows), np.concatenate(cols)
            self.counts = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(self.size, n_edges))

    def lengths(self, graph, rho):
        return self.counts @ (graph.lengths * rho)

    def shortest(self, graph, rho, batch=BATCH):
        """Rows of the shortest members (up to ``batch``) and the minimum length."""
        lengths = self.lengths(graph, rho)
        order = np.argsort(lengths, kind="stable")[:batch]
        return self.counts[order], float(lengths[order[0]])


@dataclass(frozen=True)
class Connection:
    """Paths from any source to any target using only the allowed edges."""

    sources: np.ndarray
    targets: np.ndarray
    allowed: np.ndarray


class ConnectionFamily:
    """Members are sums of one connecting path per connection.

    With a single connection this is the family of all paths joining two
    port sets. With one connection per tube copy it models 1-cycles that wind
    once through every copy.
    """

    def __init__(self, connections):
        self.connections = list(connections)
        for c in self.connections:
            if len(c.sources) == 0 or len(c.targets) == 0:
                raise EmptyFamily("a connection has no sources or no targets")

    @property
    def size(self):
        return math.inf

    @property
    def edge_disjoint(self):
        if not self.connections:
            return False
        return int(np.max(np.sum([c.allowed for c in self.connections], axis=0))) <= 1

    def shortest(self, graph, rho, batch=1):
        total, cols = 0.0, []
        for c in self.connections:
            length, path = _shortest_path(graph, graph.lengths * rho, c)
            total += length
            cols.append(path)
        cols = np.concatenate(cols)
        row = sp.csr_matrix((np.ones(len(cols)), (np.zeros(len(cols), dtype=int), cols)), shape=(1, graph.n_edges))
        return row, total


def _shortest_path(graph, weights, connection):
    """Length and edge ids of a shortest allowed path; ties go to the smallest ids."""
    ids = np.flatnonzero(connection.allowed)
    e = graph.edges[ids]
    w = weights[ids]
    lo, hi = e.min(axis=1), e.max(axis=1)
    # Keep the lightest of any parallel edges, preferring the smaller edge id.
    order = np.lexsort((ids, w, hi, lo))
    key = lo[order] * graph.n_vertices + hi[order]
    first = np.concatenate([[True], key[1:] != key[:-1]])
    pick = order[first]
    lo, hi, w, ids = lo[pick], hi[pick], w[pick], ids[pick]
    n = graph.n_vertices
    mat = sp.csr_matrix((w, (lo, hi)), shape=(n, n))
    dist, pred, _ = dijkstra(
        mat, directed=False, indices=np.sort(connection.sources), min_only=True, return_predecessors=True
    )
    targets = np.sort(connection.targets)
    best = targets[np.argmin(dist[targets])]
    if not math.isfinite(dist[best]):
        raise EmptyFamily("no allowed path joins the sources to the targets")
    lookup = {(a, b): i for a, b, i in zip(lo.tolist(), hi.tolist(), ids.tolist())}
    path, v = [], int(best)
    while pred[v] >= 0:
        u = int(pred[v])
        path.append(lookup[(min(u, v), max(u, v))])
        v = u
    return float(dist[best]), np.array(path, dtype=int)


@dataclass
class ModulusProblem:
    graph: ModulusGraph
    family: object
    description: str = ""
    p: int = field(default=3, init=False)


@dataclass(frozen=True)
class ModulusEstimate:
    value: float
    density: np.ndarray = field(repr=False)
    feasibility_gap: float
    iterations: int
    converged: bool
    lower_bound: float


def admissibility_check(graph, rho, family):
    """Smallest rho-length over the family (exact scan or shortest-path oracle)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be non-negative")
    return family.shortest(graph, rho, batch=1)[1]


# ---------------------------------------------------------------------------
# solver


def _dual(mu, A, v):
    """Negated dual function, its gradient, and the density it induces."""
    eta = A.T @ mu
    rho = np.sqrt(np.maximum(eta, 0.0) / (3.0 * v))
    value = float(mu.sum() - 2.0 * np.sum(v * rho**3))
    grad = 1.0 - A @ rho
    return -value, -grad, rho


def _solve_master(A, v, mu0):
    res = minimize(
        lambda x: _dual(x, A, v)[:2],
        mu0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * len(mu0),
        options={"maxiter": 20000, "maxcor": 30, "ftol": 1e-16, "gtol": 1e-13},
    )
    return _polish(A, v, np.maximum(res.x, 0.0))


def _polish(A, v, mu, steps=30):
    """Newton steps on the tight constraints, kept only while they reduce the residual."""
    active = mu > 1e-9 * max(mu.max(), 1e-300)
    if not np.any(active):
        return mu
    As = A[active]
    best_mu = mu
    best_res = np.abs(As @ _dual(mu, A, v)[2] - 1.0).max()
    for _ in range(steps):
        if best_res == 0.0:
            break
        eta = As.T @ best_mu[active]
        rho = np.sqrt(np.maximum(eta, 0.0) / (3.0 * v))
        d = np.where(eta > 0, rho / (2.0 * np.where(eta > 0, eta, 1.0)), 0.0)
        J = (As.multiply(d[None, :]) @ As.T).toarray() if sp.issparse(As) else (As * d) @ As.T
        F = As @ rho - 1.0
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        trial = best_mu.copy()
        trial[active] = np.maximum(best_mu[active] + step, 0.0)
        res = np.abs(As @ _dual(trial, A, v)[2] - 1.0).max()
        if not res < best_res:
            break
        best_mu, best_res = trial, res
    return best_mu


def discrete_modulus(problem, eps=EPS_VALUE, eps_adm=EPS_ADM, max_rounds=MAX_ROUNDS, method="auto"):
    """Modulus estimate with an admissible density certificate.

    ``value`` is the energy of the certificate, an upper bound on the modulus;
    ``lower_bound`` is a dual value, a lower bound. Converged means the two
    agree within relative ``eps`` and the unscaled density was admissible
    within ``eps_adm``.

    ``method`` is "constraints" (constraint generation, any family),
    "capacity" (connection families with edge-disjoint connections) or "auto",
    which picks capacity whenever it applies.
    """
    graph, family = problem.graph, problem.family
    if family.size == 0:
        raise EmptyFamily("the family has no members")
    use_capacity = isinstance(family, ConnectionFamily) and family.edge_disjoint
    if method == "capacity" and not use_capacity:
        raise ValueError("the capacity method needs a family of edge-disjoint connections")
    if method in ("auto", "capacity") and use_capacity:
        return _modulus_by_capacity(graph, family, eps, eps_adm, max_rounds)
    if method not in ("auto", "constraints", "capacity"):
        raise ValueError(f"unknown method {method!r}")
    return _modulus_by_constraints(graph, family, eps, eps_adm, max_rounds)


def _modulus_by_constraints(graph, family, eps, eps_adm, max_rounds):
    v = graph.volumes
    rho = np.zeros(graph.n_edges)
    rows, mu = [], np.zeros(0)
    best = None
    for rounds in range(1, max_rounds + 1):
        new, shortest = family.shortest(graph, rho)
        if shortest > 0:
            cert = rho / shortest
            upper = graph.energy(cert)
            lower = -_dual(mu, A, v)[0] if rows else 0.0
            gap = max(0.0, 1.0 - admissibility_check(graph, cert, family))
            best = ModulusEstimate(upper, cert, gap, rounds, False, lower)
            if shortest >= 1 - eps_adm and upper - lower <= eps * upper:
                return ModulusEstimate(upper, cert, gap, rounds, True, lower)
        rows.append(new.multiply(graph.lengths[None, :]).tocsr())
        A = sp.vstack(rows).tocsr()
        mu = _solve_master(A, v, np.concatenate([mu, np.zeros(new.shape[0])]))
        rho = _dual(mu, A, v)[2]
    raise NotConverged(max_rounds, None if best is None else best.value)


def _capacity(graph, connection, max_iter):
    """3-capacity of one connection: potentials u = 0 on sources, 1 on targets.

    Returns the unit density |du| / length on the allowed edges, a lower bound
    from the flow dual, and the number of optimizer iterations. The modulus of
    all connecting paths equals this capacity.
    """
    ids = np.flatnonzero(connection.allowed)
    e = graph.edges[ids]
    n = graph.n_vertices
    adj = sp.coo_matrix((np.ones(len(ids)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    src, dst = np.unique(connection.sources), np.unique(connection.targets)
    reach = np.isin(labels, labels[src])
    if not np.any(reach[dst]):
        raise EmptyFamily("no allowed path joins the sources to the targets")
    keep = reach[e[:, 0]]
    ids, e = ids[keep], e[keep]
    w = graph.volumes[ids] / graph.lengths[ids] ** 3
    fixed = np.full(n, np.nan)
    fixed[src], fixed[dst] = 0.0, 1.0
    free = np.flatnonzero(reach & np.isnan(fixed))
    pos = np.full(n, -1)
    pos[free] = np.arange(len(free))
    # Incidence of free vertices: delta_e = u[e1] - u[e0] = D @ x + c.
    rows = np.concatenate([np.arange(len(ids)), np.arange(len(ids))])
    cols = np.concatenate([pos[e[:, 1]], pos[e[:, 0]]])
    vals = np.concatenate([np.ones(len(ids)), -np.ones(len(ids))])
    ok = cols >= 0
    D = sp.csr_matrix((vals[ok], (rows[ok], cols[ok])), shape=(len(ids), len(free)))
    c = np.nan_to_num(fixed[e[:, 1]]) - np.nan_to_num(fixed[e[:, 0]])

    def energy(x):
        d = D @ x + c
        return float(np.sum(w * np.abs(d) ** 3)), D.T @ (3.0 * w * d * np.abs(d))

    x0 = np.full(len(free), 0.5)
    if len(free):
        # Start from the quadratic (p = 2) solution, which is one sparse solve away.
        lap = (D.T @ sp.diags(w) @ D).tocsc() + 1e-12 * sp.identity(len(free), format="csc")
        x0 = np.clip(spsolve(lap, -(D.T @ (w * c))), 0.0, 1.0)
        res = minimize(
            energy, x0, jac=True, method="L-BFGS-B",
            options={"maxiter": max_iter, "maxcor": 30, "ftol": 1e-15, "gtol": 1e-14},
        )
        x, iterations = res.x, int(res.nit)
    else:
        x, iterations = x0, 0
    delta = D @ x + c
    rho = np.zeros(graph.n_edges)
    rho[ids] = np.abs(delta) / graph.lengths[ids]
    return rho, _flow_bound(D, c, w, delta), iterations


def _flow_bound(D, c, w, delta):
    """Lower bound on the capacity from a conservative flow.

    For any flow J conserved at free vertices the potential drops pair with it
    to the net flux F, and Hoelder gives energy >= F^3 / (sum |J|^1.5 w^-0.5)^2.
    The flow w delta |delta| makes this tight at the optimum; it is first made
    exactly conservative by one Laplacian solve.
    """
    flow = w * delta * np.abs(delta)
    if D.shape[1]:
        lap = (D.T @ D).tocsc() + 1e-14 * sp.identity(D.shape[1], format="csc")
        flow = flow - D @ spsolve(lap, D.T @ flow)
    net = float(np.sum(flow * c))
    if net <= 0:
        return 0.0
    return net**3 / float(np.sum(np.abs(flow) ** 1.5 / np.sqrt(w))) ** 2


def _modulus_by_capacity(graph, family, eps, eps_adm, max_iter):
    """Edge-disjoint connections: Mod = (sum_i Cap_i^(-1/2))^(-2), Cap_i each solved directly."""
    parts = [_capacity(graph, c, max_iter) for c in family.connections]
    caps, lowers, iterations = [], [], 0
    for conn, (rho_i, lower_i, it) in zip(family.connections, parts):
        d = _shortest_path(graph, graph.lengths * rho_i, conn)[0]
        caps.append(graph.energy(rho_i / d))
        lowers.append(min(lower_i, caps[-1]))
        iterations += it
    weights = np.array(caps) ** -0.5
    t = weights / weights.sum()
    rho = np.sum([ti * r for ti, (r, _, _) in zip(t, parts)], axis=0)
    shortest = admissibility_check(graph, rho, family)
    cert = rho / shortest
    value = graph.energy(cert)
    lower = 0.0 if min(lowers) <= 0 else float(np.sum(np.array(lowers) ** -0.5) ** -2)
    lower = min(lower, value)  # they can cross by rounding only
    gap = max(0.0, 1.0 - admissibility_check(graph, cert, family))
    if shortest < 1 - eps_adm or value - lower > eps * value:
        raise NotConverged(iterations, value)
    return ModulusEstimate(value, cert, gap, iterations, True, lower)


# ---------------------------------------------------------------------------
# families on the glued Semmes space


@dataclass(frozen=True, eq=False)
class SpaceGraph:
    """Modulus graph of a glued space; leaves and zero-length glue are left out."""

    graph: ModulusGraph
    shell_edge_start: dict
    vertex_offsets: dict


def space_graph(space):
    shell = space.shell
    inner = shell.edges[shell.shell_edges]
    inner_unit = shell.unit_lengths[shell.shell_edges]
    collar = shell.edges[~shell.shell_edges]
    collar_unit = shell.unit_lengths[~shell.shell_edges]
    ends, lens, vols, starts = [], [], [], {}
    count = 0

    def add(e, length, pitch):
        nonlocal count
        keep = length > 0
        ends.append(e[keep])
        lens.append(length[keep])
        vols.append(length[keep] * pitch**2 * VOLUME_PER_LENGTH)
        count += int(keep.sum())

    for a in space.copies:
        pitch = space.lam ** len(a) * shell.h
        off = space.offsets[a]
        starts[a] = count
        add(off + inner, pitch * inner_unit, pitch)
        if not a:
            add(off + collar, pitch * collar_unit, pitch)
        for i in range(shell.m):
            child = a + (i + 1,)
            if child in space.offsets:
                pairs = shell.pairings[i]
                e = np.column_stack([off + pairs[:, 0], space.offsets[child] + pairs[:, 1]]).astype(int)
                add(e, space.lam ** len(child) * pairs[:, 2], space.lam ** len(child) * shell.h)
    n = max(space.offsets[a] + space.copy_size(a) for a in space.copies)
    graph = ModulusGraph(n, np.concatenate(ends), np.concatenate(lens), np.concatenate(vols))
    return SpaceGraph(graph, starts, dict(space.offsets))


def longitude_curve(region, clearance, samples=256):
    """Parallel copy of the parent core, pushed off to avoid the child tubes.

    The core itself is used when it keeps ``clearance`` from every child;
    otherwise the offset (a, b) with the largest clearance over a fixed grid of
    radii and angles is chosen. Any such copy is isotopic to the core in H.
    """
    core = region.parent
    t = np.arange(samples) / samples
    best = None
    for r in (0.0, 0.2, 0.4, 0.6, 0.7, 0.8):
        for ang in (np.arange(16) * math.pi / 8 if r else [0.0]):
            pattern = np.column_stack([t, np.full(samples, r * math.cos(ang)), np.full(samples, r * math.sin(ang))])
            pts = core.embed(pattern)
            gap = float(region.child_sdf(pts).min())
            if best is None or gap > best[0]:
                best = (gap, pts)
            if r == 0.0 and gap > clearance:
                return pts
    return best[1]


def snapped_core(space, spacing=4.0):
    """Local shell edge ids of a closed voxel path following the longitude curve.

    Waypoints about ``spacing`` pitches apart snap to their nearest shell
    voxel; waypoints within one pitch of a child tube are skipped. Consecutive
    waypoints are joined by a shortest path among the voxels whose tube
    parameter lies between theirs, so every leg moves forward along the tube.
    Returns the edge ids and the length of the polygonal curve that was snapped.
    """
    shell = space.shell
    region = region_of(space.pkg)
    if not hasattr(region, "parent"):
        raise MappingFailed("longitudes need a tube package")
    pts = longitude_curve(region, shell.h)
    curve_length = float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())
    count = max(8, int(round(curve_length / (spacing * shell.h))))
    way = pts[(np.arange(count) * len(pts)) // count]
    way_t = ((np.arange(count) * len(pts)) // count) / len(pts)
    clear = region.child_sdf(way).min(axis=1) > shell.h
    if clear.sum() < 3:
        raise MappingFailed("the longitude runs through child tubes almost everywhere")
    dist, idx = cKDTree(shell.points[: shell.n]).query(way[clear])
    if dist.max() > shell.h:
        raise MappingFailed(f"waypoint is {dist.max():.4g} from the nearest voxel (pitch {shell.h})")
    stops, stop_t = idx.tolist(), way_t[clear]
    vox_t = region.parent.tube_coords(shell.points[: shell.n])[:, 0]
    graph = shell.matrix().tocsr()
    slack = 1.0 / count
    lookup = {}
    for j, (u, v) in enumerate(shell.edges[shell.shell_edges].tolist()):
        lookup.setdefault((min(u, v), max(u, v)), j)
    out = []
    for j in range(len(stops)):
        a, b = stops[j], stops[(j + 1) % len(stops)]
        t0 = stop_t[j]
        span = np.mod(stop_t[(j + 1) % len(stops)] - t0, 1.0)
        rel = np.mod(vox_t - t0 + slack, 1.0)
        window = np.flatnonzero(rel <= span + 2 * slack)
        sub = graph[window][:, window]
        local = {int(v): r for r, v in enumerate(window)}
        if a not in local or b not in local:
            raise MappingFailed("waypoint voxel falls outside its tube window")
        d, pred = dijkstra(sub, directed=False, indices=local[a], return_predecessors=True)
        v = local[b]
        if not math.isfinite(d[v]):
            raise MappingFailed("consecutive waypoints are not connected inside their window")
        while v != local[a]:
            u = int(pred[v])
            gu, gv = int(window[u]), int(window[v])
            out.append(lookup[(min(gu, gv), max(gu, gv))])
            v = u
    return np.array(out, dtype=int), curve_length


def _meridian_cut(space):
    """Local shell edges crossing the canonical meridian and the voxels on each side."""
    shell = space.shell
    region = region_of(space.pkg)
    t = region.parent.tube_coords(shell.points[: shell.n])[:, 0]
    d = np.mod(t - space.pkg.meridian_t, 1.0)
    e = shell.edges[shell.shell_edges]
    before, after = d[e[:, 0]] > 0.75, d[e[:, 0]] < 0.25
    crosses = (before & (d[e[:, 1]] < 0.25)) | (after & (d[e[:, 1]] > 0.75))
    ends = e[crosses]
    first_before = d[ends[:, 0]] > 0.75
    sources = np.where(first_before, ends[:, 0], ends[:, 1])
    targets = np.where(first_before, ends[:, 1], ends[:, 0])
    return np.flatnonzero(crosses), np.unique(sources), np.unique(targets)


def longitude_family_problem(space, k, mode="explicit", sg=None):
    """Modulus problem for the level-k longitude family of a glued space.

    explicit: one member, the 1-cycle made of the snapped longitude in every
    level-k copy (the canonical longitude of L_k in shell coordinates).
    implicit: members are sums over level-k copies of any path inside that
    copy's own shell that winds once around it, i.e. joins the two sides of
    its meridian cut without crossing it. This family contains the explicit
    member, so its modulus is an upper proxy for the canonical one.
    """
    if not 0 <= k <= space.depth:
        raise ValueError(f"level {k} outside 0..{space.depth}")
    sg = space_graph(space) if sg is None else sg
    level = [a for a in space.copies if len(a) == k]
    if mode == "explicit":
        cycle, _ = snapped_core(space)
        member = np.concatenate([sg.shell_edge_start[a] + cycle for a in level])
        family = ExplicitFamily([member], sg.graph.n_edges)
    elif mode == "implicit":
        cut, sources, targets = _meridian_cut(space)
        n_local = int(space.shell.shell_edges.sum())
        connections = []
        for a in level:
            allowed = np.zeros(sg.graph.n_edges, dtype=bool)
            start = sg.shell_edge_start[a]
            allowed[start : start + n_local] = True
            allowed[start + cut] = False
            off = space.offsets[a]
            connections.append(Connection(off + sources, off + targets, allowed))
        family = ConnectionFamily(connections)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ModulusProblem(sg.graph, family, f"{space.package_id} level {k} {mode}")


# ---------------------------------------------------------------------------
# scaling experiment


@dataclass(frozen=True)
class ScalingRow:
    k: int
    modulus: float
    ratio: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ScalingTable:
    package_id: str
    mode: str
    rows: tuple
    fitted_ratio: float
    fitted_constant: float

    def to_csv(self):
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["k", "modulus", "ratio", "iterations", "converged"])
        for r in self.rows:
            ratio = "" if math.isnan(r.ratio) else repr(r.ratio)
            out.writerow([r.k, repr(r.modulus), ratio, r.iterations, str(r.converged).lower()])
        return buf.getvalue()


def scaling_experiment(pkg, lam, k_max, mode="explicit", space=None, h=None, eps=EPS_VALUE):
    """Level-by-level modulus of the longitude family and a fitted geometric decay.

    The fit is least squares of log(modulus) against k; the per-level ratio is
    exp(slope) and the constant exp(intercept).
    """
    from .semmes import assemble

    if space is None:
        space = assemble(pkg, lam, k_max, h=h)
    if k_max > space.depth:
        raise ValueError("k_max exceeds the depth of the space")
    sg = space_graph(space)
    rows, prev = [], None
    for k in range(k_max + 1):
        est = discrete_modulus(longitude_family_problem(space, k, mode, sg=sg), eps=eps)
        ratio = math.nan if prev is None else est.value / prev
        rows.append(ScalingRow(k, est.value, ratio, est.iterations, est.converged))
        prev = est.value
    ks = np.array([r.k for r in rows], dtype=float)
    logs = np.log([r.modulus for r in rows])
    if len(rows) > 1:
        slope, intercept = np.polyfit(ks, logs, 1)
    else:
        slope, intercept = 0.0, float(logs[0])
    return ScalingTable(space.package_id, mode, tuple(rows), float(math.exp(slope)), float(math.exp(intercept)))
