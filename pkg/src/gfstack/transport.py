"""Exact optimal transport between empirical measures, and the TL^p metric.

Distances are computed by an in-repo network simplex on the dense
transportation graph: Bland's entering rule plus a 1e-13 perturbation of the
marginals while pivoting, with the final flows re-solved on the optimal
spanning tree from the exact marginals (dual feasibility, hence optimality
of the basis, does not depend on the marginals).

The TL^p distance between pairs (u, mu) and (v, nu) uses the ground cost
|u_i - v_j|^p + |x_i - y_j|^p; the spatial part alone is the plan's
stagnation cost, the certificate of measure convergence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, PreconditionError, SolverDiagnosticError

MARGINAL_TOL = 1e-9
_PIVOT_EPS = 1e-13
_RC_TOL = 1e-12
_MAX_PIVOTS = 200_000


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finitely many atoms in R^d with positive weights summing to one."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        if atoms.ndim != 2:
            raise ConstructionError("atoms must be an (n, d) array")
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size != atoms.shape[0]:
            raise ConstructionError("one weight per atom required")
        if np.any(w <= 0):
            raise ConstructionError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConstructionError(f"weights must sum to 1 within 1e-12, got {w.sum()!r}")
        if not np.all(np.isfinite(atoms)):
            raise ConstructionError("atoms must be finite")
        atoms = atoms.copy()
        w = w.copy()
        atoms.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]


def uniform_measure(points) -> EmpiricalMeasure:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and pts.shape[1] > 1 and np.asarray(points).ndim == 1:
        pts = pts.T
    n = pts.shape[0]
    return EmpiricalMeasure(atoms=pts, weights=np.full(n, 1.0 / n))


@dataclass(frozen=True)
class TLpPoint:
    """A function sampled on the atoms of an empirical measure."""

    measure: EmpiricalMeasure
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.size != self.measure.n_atoms:
            raise ConstructionError("one value per atom required")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def lq_norm(self, q: float) -> float:
        """Weighted L^q norm of the values (max over atoms for q = inf)."""
        a = np.abs(self.values)
        if np.isinf(q):
            return float(np.max(a)) if a.size else 0.0
        return float(np.sum(self.measure.weights * a**q) ** (1.0 / q))


@dataclass
class TransportPlan:
    """A coupling with prescribed marginals plus its cost bookkeeping."""

    pi: np.ndarray
    source: EmpiricalMeasure
    target: EmpiricalMeasure
    cost: float
    stagnation_cost: float
    cost_matrix: np.ndarray

    def marginal_errors(self):
        row = np.abs(self.pi.sum(axis=1) - self.source.weights).max()
        col = np.abs(self.pi.sum(axis=0) - self.target.weights).max()
        return float(row), float(col)

    def check(self, tol: float = MARGINAL_TOL):
        row, col = self.marginal_errors()
        if row > tol or col > tol:
            raise PreconditionError(f"plan marginals off by ({row:.3e}, {col:.3e})")
        recomputed = float(np.sum(self.pi * self.cost_matrix))
        if abs(recomputed - self.cost) > tol:
            raise PreconditionError("stored cost disagrees with the cost matrix")


def _pow_p(vals: np.ndarray, p: float) -> np.ndarray:
    """|vals|^p, evaluated in log space for large p to limit overflow."""
    a = np.abs(vals)
    if p <= 8:
        return a**p
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = np.exp(p * np.log(a[pos]))
    return out


class _SpanningTree:
    """Spanning-tree basis bookkeeping for the transportation simplex."""

    def __init__(self, m: int, n: int):
        self.m, self.n = m, n
        self.adj = [set() for _ in range(m + n)]  # node -> neighbor nodes
        self.flows = {}  # (i, j) arc -> flow

    def add(self, i, j, flow):
        self.adj[i].add(self.m + j)
        self.adj[self.m + j].add(i)
        self.flows[(i, j)] = flow

    def remove(self, i, j):
        self.adj[i].discard(self.m + j)
        self.adj[self.m + j].discard(i)
        del self.flows[(i, j)]

    def path(self, start, goal):
        """Node path from start to goal through the tree (BFS)."""
        parent = {start: None}
        queue = [start]
        while queue:
            nxt = []
            for node in queue:
                if node == goal:
                    out = [node]
                    while parent[out[-1]] is not None:
                        out.append(parent[out[-1]])
                    return out[::-1]
                for nb in self.adj[node]:
                    if nb not in parent:
                        parent[nb] = node
                        nxt.append(nb)
            queue = nxt
        raise SolverDiagnosticError("basis lost connectivity")

    def potentials(self, C):
        """Node potentials with u_0 = 0 so that u_i + v_j = C_ij on basic arcs."""
        m, n = self.m, self.n
        u = np.full(m, np.nan)
        v = np.full(n, np.nan)
        u[0] = 0.0
        stack = [0]
        seen = {0}
        while stack:
            node = stack.pop()
            for nb in self.adj[node]:
                if nb in seen:
                    continue
                seen.add(nb)
                if node < m:  # source -> sink
                    v[nb - m] = C[node, nb - m] - u[node]
                else:
                    u[nb] = C[nb, node - m] - v[node - m]
                stack.append(nb)
        if len(seen) != m + n:
            raise SolverDiagnosticError("basis tree is not spanning")
        return u, v


def _northwest_corner(a, b):
    m, n = len(a), len(b)
    tree = _SpanningTree(m, n)
    i = j = 0
    ra, rb = a.copy(), b.copy()
    while True:
        f = min(ra[i], rb[j])
        tree.add(i, j, f)
        ra[i] -= f
        rb[j] -= f
        if i == m - 1 and j == n - 1:
            break
        # advance in the direction with remaining mass; ties go down-right
        if i < m - 1 and (ra[i] <= rb[j] or j == n - 1):
            i += 1
        else:
            j += 1
    return tree


def _resolve_tree_flows(tree: _SpanningTree, a, b):
    """Exact flows on the basis tree for the unperturbed marginals.

    Leaf elimination: a leaf's single incident arc must carry the leaf's
    remaining supply (or demand); tiny float negatives are clipped.
    """
    m, n = tree.m, tree.n
    rem = np.concatenate([a, b]).astype(float)
    arcs_at = [list() for _ in range(m + n)]
    for (i, j) in tree.flows:
        arcs_at[i].append((i, j))
        arcs_at[m + j].append((i, j))
    alive = set(tree.flows)
    deg = np.array([len(arcs_at[k]) for k in range(m + n)])
    leaves = [k for k in range(m + n) if deg[k] == 1]
    flows = {}
    while leaves:
        node = leaves.pop()
        arc = next((c for c in arcs_at[node] if c in alive), None)
        if arc is None:
            continue
        i, j = arc
        other = (m + j) if node == i else i
        f = rem[node]
        flows[arc] = f
        alive.discard(arc)
        rem[node] = 0.0
        rem[other] -= f
        deg[node] -= 1
        deg[other] -= 1
        if deg[other] == 1:
            leaves.append(other)
    return {arc: max(f, 0.0) for arc, f in flows.items()}


def solve_transport(a, b, C):
    """Minimize sum_ij P_ij C_ij over couplings with marginals (a, b).

    Returns (plan matrix, optimal cost).  Dense network simplex with a
    northwest-corner start, Bland's entering rule, and perturbed marginals
    during pivoting only.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    C = np.asarray(C, dtype=float)
    m, n = C.shape
    if len(a) != m or len(b) != n:
        raise PreconditionError("marginal sizes must match the cost matrix")
    if abs(a.sum() - b.sum()) > 1e-9:
        raise PreconditionError("marginals must have equal total mass")

    # tiny distinct supply perturbations break degeneracy while pivoting
    eps = _PIVOT_EPS * (np.arange(m) + 1.0) / m
    a_pert = a + eps
    b_pert = b.copy()
    b_pert[-1] += eps.sum()

    tree = _northwest_corner(a_pert, b_pert)
    for _ in range(_MAX_PIVOTS):
        u, v = tree.potentials(C)
        rc = C - u[:, None] - v[None, :]
        mask = rc < -_RC_TOL
        flat = np.flatnonzero(mask.reshape(-1))
        if flat.size == 0:
            break
        enter = int(flat[0])  # Bland: lowest-index eligible arc
        ei, ej = divmod(enter, n)
        # cycle: entering arc plus the tree path from sink ej back to source ei
        nodes = tree.path(m + ej, ei)
        cycle = [(ei, ej, +1)]
        sign = -1
        for k in range(len(nodes) - 1):
            x, y = nodes[k], nodes[k + 1]
            arc = (x, y - m) if x < m else (y, x - m)
            cycle.append((arc[0], arc[1], sign))
            sign = -sign
        theta = np.inf
        leave = None
        for i, j, s in cycle[1:]:
            if s < 0 and tree.flows[(i, j)] < theta:
                theta = tree.flows[(i, j)]
                leave = (i, j)
        if leave is None:
            raise SolverDiagnosticError("unbounded pivot in a bounded transportation problem")
        for i, j, s in cycle[1:]:
            tree.flows[(i, j)] += s * theta
        tree.remove(*leave)
        tree.add(ei, ej, theta)
    else:
        raise SolverDiagnosticError(f"network simplex exceeded {_MAX_PIVOTS} pivots")

    flows = _resolve_tree_flows(tree, a, b)
    P = np.zeros((m, n))
    for (i, j), f in flows.items():
        P[i, j] = f
    return P, float(np.sum(P * C))


def _spatial_cost_matrix(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float) -> np.ndarray:
    diff = mu.atoms[:, None, :] - nu.atoms[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return _pow_p(dist, p)


def wasserstein(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float = 2.0):
    """p-Wasserstein distance and an optimal plan between empirical measures."""
    if mu.dim != nu.dim:
        raise PreconditionError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if p < 1:
        raise PreconditionError("p must be >= 1")
    C = _spatial_cost_matrix(mu, nu, p)
    P, cost = solve_transport(mu.weights, nu.weights, C)
    plan = TransportPlan(
        pi=P, source=mu, target=nu, cost=cost, stagnation_cost=cost, cost_matrix=C
    )
    plan.check()
    return float(max(cost, 0.0) ** (1.0 / p)), plan


def tlp_distance(a: TLpPoint, b: TLpPoint, p: float = 2.0):
    """TL^p distance between (u, mu) and (v, nu) and an optimal plan."""
    mu, nu = a.measure, b.measure
    if mu.dim != nu.dim:
        raise PreconditionError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if p < 1:
        raise PreconditionError("p must be >= 1")
    spatial = _spatial_cost_matrix(mu, nu, p)
    vdiff = a.values[:, None] - b.values[None, :]
    C = spatial + _pow_p(vdiff, p)
    P, cost = solve_transport(mu.weights, nu.weights, C)
    plan = TransportPlan(
        pi=P,
        source=mu,
        target=nu,
        cost=cost,
        stagnation_cost=float(np.sum(P * spatial)),
        cost_matrix=C,
    )
    plan.check()
    return float(max(cost, 0.0) ** (1.0 / p)), plan


def barycentric_map(plan: TransportPlan, target_values) -> np.ndarray:
    """Conditional averages of target values under the plan's disintegration.

    u(x_i) = sum_j pi_ij v_j / sum_j pi_ij: the recovery construction that
    turns a limit function into approximations on the source atoms.
    """
    v = np.asarray(target_values, dtype=float).reshape(-1)
    if v.size != plan.pi.shape[1]:
        raise PreconditionError("one target value per target atom required")
    rows = plan.pi.sum(axis=1)
    if np.any(rows <= 0):
        raise PreconditionError("every source atom needs positive plan mass")
    return plan.pi @ v / rows


@dataclass
class InterpolationReport:
    lhs: float
    rhs: float
    theta: float
    ok: bool


def interpolation_bound_check(
    a: TLpPoint, b: TLpPoint, p: float, q: float, r: float, C: float
) -> InterpolationReport:
    """Check d_{TL^r} <= d_r(mu, nu) + (2C)^{q(1-theta)/r} d_{TL^p}^{theta p / r}.

    Requires 1 <= p < q <= inf, p <= r < q, theta = (q - r)/(q - p), and both
    L^q norms bounded by C.
    """
    if not (1 <= p < q and p <= r < q):
        raise PreconditionError(f"need 1 <= p < q and p <= r < q, got p={p}, q={q}, r={r}")
    norm_bound = max(a.lq_norm(q), b.lq_norm(q))
    if norm_bound > C:
        raise PreconditionError(f"C={C} is smaller than the actual L^q norms ({norm_bound})")
    if np.isinf(q):
        theta = 1.0
        exponent = (r - p) / r
    else:
        theta = (q - r) / (q - p)
        exponent = q * (1.0 - theta) / r
    lhs, _ = tlp_distance(a, b, r)
    d_r, _ = wasserstein(a.measure, b.measure, r)
    d_p, _ = tlp_distance(a, b, p)
    rhs = d_r + (2.0 * C) ** exponent * d_p ** (theta * p / r)
    return InterpolationReport(lhs=lhs, rhs=rhs, theta=theta, ok=lhs <= rhs + 1e-9)


@dataclass
class PushforwardReport:
    gaps: np.ndarray  # (n_points, n_fns)
    bounds: np.ndarray
    within_bounds: bool
    decreasing: bool


def pushforward_weak_check(seq, limit: TLpPoint, test_fns) -> PushforwardReport:
    """Weak convergence of the value distributions u_n # mu_n -> u # mu.

    test_fns is a list of (f, lipschitz_constant) pairs of bounded Lipschitz
    maps.  Each integral gap is compared against L times the TL^1 distance,
    and the per-function gap columns are checked for a decreasing trend
    (first vs last entry).
    """
    fns = [(f, float(L)) for f, L in test_fns]
    lim_ints = [
        float(np.sum(limit.measure.weights * np.asarray([f(t) for t in limit.values])))
        for f, _ in fns
    ]
    gaps = np.zeros((len(seq), len(fns)))
    bounds = np.zeros_like(gaps)
    for k, pt in enumerate(seq):
        d1, _ = tlp_distance(pt, limit, 1.0)
        for c, (f, L) in enumerate(fns):
            val = float(np.sum(pt.measure.weights * np.asarray([f(t) for t in pt.values])))
            gaps[k, c] = abs(val - lim_ints[c])
            bounds[k, c] = L * d1
    within = bool(np.all(gaps <= bounds + 1e-9))
    decreasing = bool(np.all(gaps[-1] <= gaps[0] + 1e-12)) if len(seq) > 1 else True
    return PushforwardReport(gaps=gaps, bounds=bounds, within_bounds=within, decreasing=decreasing)


# ---------------------------------------------------------------------------
# serialization used by the CLI


def tlp_point_to_record(pt: TLpPoint) -> dict:
    return {
        "dim": pt.measure.dim,
        "atoms": pt.measure.atoms.tolist(),
        "weights": pt.measure.weights.tolist(),
        "values": pt.values.tolist(),
    }


def tlp_point_from_record(rec: dict) -> TLpPoint:
    atoms = np.asarray(rec["atoms"], dtype=float)
    if atoms.ndim == 1:
        atoms = atoms[:, None]
    if atoms.shape[1] != int(rec["dim"]):
        raise ConstructionError("record dim disagrees with atom coordinates")
    measure = EmpiricalMeasure(atoms=atoms, weights=np.asarray(rec["weights"], dtype=float))
    return TLpPoint(measure=measure, values=np.asarray(rec["values"], dtype=float))


def dump_tlp_point(pt: TLpPoint) -> str:
    return json.dumps(tlp_point_to_record(pt), indent=1)


def load_tlp_point(text: str) -> TLpPoint:
    return tlp_point_from_record(json.loads(text))
