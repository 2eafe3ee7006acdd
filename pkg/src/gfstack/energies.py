"""Concrete convex energies on weighted node spaces, and P0-convexity checks.

A graph energy F(u) = sum_ij A_ij L(u_i - u_j) with convex L >= 0 is stable
under the smooth-truncation exchange

    F(u + g(v - u)) + F(v - g(v - u)) <= F(u) + F(v)

for every g in the test class (smooth, g == 0 near 0, 0 <= g' <= 1, g'
compactly supported).  This module builds a three-parameter family of such
g, evaluates the exchange inequality exactly, reproduces the lambda-convex
counterexample that fails it, and provides weighted proxes and L^r
contraction checks for graph flows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import cho_factor, cho_solve

from .convex import ProperFunctional, as_point
from .errors import ConstructionError, PreconditionError, SolverDiagnosticError
from .flow import gradient_flow

SPLIT_TOL = 1e-10
SPLIT_MAX_ITER = 100_000


# ---------------------------------------------------------------------------
# adaptive Simpson quadrature (pinned for the g-family construction)


def _simpson(f, a, fa, b, fb, m, fm):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12, depth: int = 50) -> float:
    """Recursive adaptive Simpson integral of f over [a, b]."""
    if a == b:
        return 0.0
    m = 0.5 * (a + b)
    fa, fb, fm = f(a), f(b), f(m)
    whole = _simpson(f, a, fa, b, fb, m, fm)

    def recurse(a, fa, b, fb, m, fm, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = _simpson(f, a, fa, m, fm, lm, flm)
        right = _simpson(f, m, fm, b, fb, rm, frm)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) + recurse(
            m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1
        )

    return recurse(a, fa, b, fb, m, fm, whole, tol, depth)


def _bump(s: float) -> float:
    if abs(s) >= 1.0:
        return 0.0
    return float(np.exp(-1.0 / (1.0 - s * s)))


_BUMP_MASS = adaptive_simpson(_bump, -1.0, 1.0, 1e-14)
_SMOOTHSTEP_SPLINE = None


def _smoothstep_table():
    """Cumulative bump integral on a dense grid, splined once per process.

    Per-interval Simpson on 2^14 uniform cells keeps the table error far
    below 1e-14, so the ramp profile is exact to working precision.
    """
    global _SMOOTHSTEP_SPLINE
    if _SMOOTHSTEP_SPLINE is None:
        n = 16384
        xs = np.linspace(-1.0, 1.0, n + 1)
        mids = 0.5 * (xs[:-1] + xs[1:])
        inner = np.zeros(xs.size)
        inner[1:-1] = np.exp(-1.0 / (1.0 - xs[1:-1] ** 2))
        fm = np.exp(-1.0 / (1.0 - mids**2))
        h = xs[1] - xs[0]
        cells = (h / 6.0) * (inner[:-1] + 4.0 * fm + inner[1:])
        cum = np.concatenate([[0.0], np.cumsum(cells)])
        _SMOOTHSTEP_SPLINE = CubicSpline(xs, cum / cum[-1])
    return _SMOOTHSTEP_SPLINE


def _smoothstep(s: float) -> float:
    """Integral of the normalized bump from -1 to s: a smooth 0 -> 1 ramp."""
    if s <= -1.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    return float(_smoothstep_table()(s))


@dataclass(frozen=True)
class P0TestFunction:
    """Smooth truncation profile: zero near 0, slope in [0, 1], eventual plateau.

    evaluator uses a cached cubic-spline antiderivative on the transition
    bands and exact closed forms on the dead zone and the plateau;
    exact_value integrates the derivative by adaptive Simpson instead.
    """

    a: float
    rise_width: float
    plateau: float
    slope: float
    one_sided: bool
    evaluator: Callable[[float], float]
    derivative_evaluator: Callable[[float], float]
    support_end: float  # derivative vanishes beyond this (mirrored if two-sided)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.evaluator(float(x))
        return np.asarray([self.evaluator(float(t)) for t in np.asarray(x).reshape(-1)])

    def derivative(self, x: float) -> float:
        return self.derivative_evaluator(float(x))

    def exact_value(self, x: float) -> float:
        """Quadrature of the derivative, for oracle-grade evaluations."""
        x = float(x)
        if x >= self.support_end:
            return self.plateau
        if self.one_sided and x <= self.a:
            return 0.0
        if not self.one_sided:
            if abs(x) <= self.a:
                return 0.0
            if x <= -self.support_end:
                return -self.plateau
            if x < 0:
                return -self.exact_value(-x)
        return adaptive_simpson(self.derivative_evaluator, self.a, x, 1e-13)


def p0_family(a: float, w: float, cap: Optional[float] = None, slope: float = 1.0,
              one_sided: bool = False) -> P0TestFunction:
    """Build a test function with dead zone (-a, a), rise width w, plateau cap.

    The derivative ramps smoothly from 0 to the chosen slope over [a, a+w],
    stays constant until the accumulated value would reach the cap, then
    descends symmetrically back to 0, making the total value exactly the
    plateau.  Without a cap the plateau is slope * w (immediate descent).
    The default is the odd extension; one_sided leaves the negative axis
    identically zero (the asymmetric variant the counterexample needs).
    """
    if a <= 0 or w <= 0:
        raise ConstructionError("need a > 0 and w > 0")
    if not 0.0 < slope <= 1.0:
        raise ConstructionError(f"slope {slope} would push the derivative outside [0, 1]")
    if cap is not None:
        if cap <= 0:
            raise ConstructionError("cap must be positive")
        if cap < slope * w:
            slope = cap / w
        plateau = float(cap)
    else:
        plateau = slope * w
    ramp_end = a + w
    flat_end = a + plateau / slope  # == ramp_end when the cap binds immediately
    support_end = flat_end + w

    def deriv(x: float) -> float:
        x = float(x)
        if not one_sided:
            x = abs(x)
        if x <= a or x >= support_end:
            return 0.0
        if x < ramp_end:
            return slope * _smoothstep(2.0 * (x - a) / w - 1.0)
        if x <= flat_end:
            return slope
        return slope * _smoothstep(1.0 - 2.0 * (x - flat_end) / w)

    # antiderivative cache: exact on the flat segment and beyond by ramp
    # symmetry (the up and down ramps each integrate to slope*w/2)
    grid = np.linspace(a, ramp_end, 512)
    ss = np.empty(grid.size)
    acc, prev = 0.0, -1.0
    for k, x in enumerate(grid):
        s = 2.0 * (x - a) / w - 1.0
        acc += adaptive_simpson(_bump, prev, s, 1e-14)
        ss[k] = acc
        prev = s
    ramp_vals = slope * ss / _BUMP_MASS
    ramp_anti = CubicSpline(grid, ramp_vals).antiderivative()
    up_area = slope * w / 2.0

    def value_pos(x: float) -> float:
        if x <= a:
            return 0.0
        if x < ramp_end:
            return float(ramp_anti(x))
        if x <= flat_end:
            return up_area + slope * (x - ramp_end)
        if x < support_end:
            # the descent mirrors the rise, so the area still to come equals
            # the rise antiderivative at the mirrored abscissa
            return plateau - float(ramp_anti(ramp_end - (x - flat_end)))
        return plateau

    def value(x: float) -> float:
        x = float(x)
        if one_sided:
            return value_pos(x) if x > 0 else 0.0
        return value_pos(x) if x >= 0 else -value_pos(-x)

    return P0TestFunction(
        a=a,
        rise_width=w,
        plateau=plateau,
        slope=slope,
        one_sided=one_sided,
        evaluator=value,
        derivative_evaluator=deriv,
        support_end=support_end,
    )


# ---------------------------------------------------------------------------
# graph energies


def _pair_matrix(adjacency: np.ndarray) -> np.ndarray:
    """Symmetric quadratic-form matrix K with u' K u = sum_ij A_ij (u_i-u_j)^2."""
    A = adjacency
    row = A.sum(axis=1)
    col = A.sum(axis=0)
    return np.diag(row + col) - (A + A.T)


@dataclass(frozen=True)
class GraphEnergy:
    """F(u) = sum_ij A_ij L(u_i - u_j) over weighted nodes.

    loss_kind is "squared" or "absolute".  node_weights are the discrete
    measure entering the prox quadratic term and every norm; they are
    validated positive but not forced to sum to one (shipped measure-based
    instances use probability weights).
    """

    adjacency: np.ndarray
    loss_kind: str = "squared"
    node_weights: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConstructionError("adjacency must be square")
        if np.any(A < 0):
            raise ConstructionError("adjacency entries must be nonnegative")
        if self.loss_kind not in ("squared", "absolute"):
            raise ConstructionError(f"unknown loss kind {self.loss_kind!r}")
        w = self.node_weights
        w = np.full(A.shape[0], 1.0 / A.shape[0]) if w is None else np.asarray(w, dtype=float)
        if w.size != A.shape[0] or np.any(w <= 0):
            raise ConstructionError("node_weights must be positive, one per node")
        A = A.copy()
        w = w.copy()
        A.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "node_weights", w)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def value(self, u) -> float:
        u = as_point(u, self.n_nodes)
        diff = u[:, None] - u[None, :]
        if self.loss_kind == "squared":
            return float(np.sum(self.adjacency * diff * diff))
        return float(np.sum(self.adjacency * np.abs(diff)))

    def pair_matrix(self) -> np.ndarray:
        return _pair_matrix(self.adjacency)

    def spectral_factors(self):
        """(W^{-1/2}-whitened eigensystem) of the squared-loss generator."""
        if self.loss_kind != "squared":
            raise PreconditionError("spectral factors exist for the squared loss only")
        K = self.pair_matrix()
        w = self.node_weights
        s = 1.0 / np.sqrt(w)
        B = (K * s[None, :]) * s[:, None]
        evals, Q = np.linalg.eigh(B)
        evals = np.maximum(evals, 0.0)
        return evals, Q, s

    def to_functional(self) -> ProperFunctional:
        """View as a convex functional on the weighted node space.

        Requires probability node weights, matching the weighted-space
        conventions of the prox and flow machinery.
        """
        w = self.node_weights
        if abs(w.sum() - 1.0) > 1e-9:
            raise PreconditionError("to_functional needs probability node weights")
        if self.loss_kind == "squared":
            evals, Q, s = self.spectral_factors()

            def apply_power(gamma, n, h):
                h = as_point(h, self.n_nodes)
                coef = Q.T @ (h / s)
                coef = coef * np.exp(-n * np.log1p(2.0 * gamma * evals))
                return s * (Q @ coef)

            K = self.pair_matrix()

            def slope(u):
                u = as_point(u, self.n_nodes)
                grad_w = 2.0 * (K @ u) / w
                return float(np.sqrt(np.sum(w * grad_w * grad_w)))

            return ProperFunctional(
                dim=self.n_nodes,
                value=self.value,
                lam=0.0,
                weights=w,
                prox_closed_form=lambda g, h: graph_prox(self, g, h),
                prox_iterated=apply_power,
                slope_norm=slope,
                name=self.name or "graph-squared",
            )
        return ProperFunctional(
            dim=self.n_nodes,
            value=self.value,
            lam=0.0,
            weights=w,
            prox_closed_form=lambda g, h: graph_prox(self, g, h),
            name=self.name or "graph-absolute",
        )


def graph_prox(ge: GraphEnergy, gamma: float, h) -> np.ndarray:
    """Minimizer of F(u) + sum_i w_i (u_i - h_i)^2 / (2 gamma).

    Squared loss: one symmetric positive-definite solve (W + 2 gamma K) u =
    W h.  Absolute loss: ADMM splitting over the edge differences, tolerance
    1e-10 on the primal/dual residuals.
    """
    if gamma <= 0:
        raise PreconditionError("gamma must be positive")
    h = as_point(h, ge.n_nodes)
    W = np.diag(ge.node_weights)
    if ge.loss_kind == "squared":
        K = ge.pair_matrix()
        return np.linalg.solve(W + 2.0 * gamma * K, ge.node_weights * h)

    # absolute loss: minimize (1/2g)||u-h||_W^2 + sum_e c_e |u_i - u_j|
    A = ge.adjacency
    iu, ju = np.nonzero(np.triu(A + A.T, k=1))
    c = (A + A.T)[iu, ju]
    if len(iu) == 0:
        return h.copy()
    n = ge.n_nodes
    D = np.zeros((len(iu), n))
    D[np.arange(len(iu)), iu] = 1.0
    D[np.arange(len(iu)), ju] = -1.0
    rho = 1.0 / gamma
    M = W / gamma + rho * (D.T @ D)
    chol = cho_factor(M)
    u = h.copy()
    z = D @ u
    y = np.zeros(len(iu))
    thresh = c / rho
    for it in range(SPLIT_MAX_ITER):
        u = cho_solve(chol, ge.node_weights * h / gamma + rho * (D.T @ (z - y)))
        Du = D @ u
        z_new = Du + y
        z_new = np.sign(z_new) * np.maximum(np.abs(z_new) - thresh, 0.0)
        primal = float(np.linalg.norm(Du - z_new))
        dual = float(rho * np.linalg.norm(D.T @ (z_new - z)))
        z = z_new
        y = y + Du - z
        if primal <= SPLIT_TOL and dual <= SPLIT_TOL:
            return u
    raise SolverDiagnosticError(
        f"edge splitting did not reach {SPLIT_TOL} in {SPLIT_MAX_ITER} iterations",
        last_iterate=u,
        residual=max(primal, dual),
    )


def quadratic_map_energy(weights) -> ProperFunctional:
    """Q(u) = (1/2) sum_i w_i u_i^2: the squared weighted L2 norm, exchange-stable."""
    w = np.asarray(weights, dtype=float)
    return ProperFunctional(
        dim=w.size,
        value=lambda u: 0.5 * float(np.sum(w * u * u)),
        lam=1.0,
        weights=w,
        prox_closed_form=lambda g, x: x / (1.0 + g),
        prox_iterated=lambda g, n, x: x * np.exp(-n * np.log1p(g)),
        slope_norm=lambda x: float(np.sqrt(np.sum(w * x * x))),
        name="quadratic-map",
    )


def graph_energy_to_record(ge: GraphEnergy) -> dict:
    return {
        "n": ge.n_nodes,
        "A": ge.adjacency.tolist(),
        "weights": ge.node_weights.tolist(),
        "loss": ge.loss_kind,
    }


def graph_energy_from_record(rec: dict) -> GraphEnergy:
    A = np.asarray(rec["A"], dtype=float)
    if A.shape != (int(rec["n"]), int(rec["n"])):
        raise ConstructionError("record n disagrees with the adjacency shape")
    return GraphEnergy(adjacency=A, loss_kind=rec["loss"],
                       node_weights=np.asarray(rec["weights"], dtype=float))


def dump_graph_energy(ge: GraphEnergy) -> str:
    import json

    return json.dumps(graph_energy_to_record(ge), indent=1)


def load_graph_energy(text: str) -> GraphEnergy:
    import json

    return graph_energy_from_record(json.loads(text))


# ---------------------------------------------------------------------------
# exchange-inequality checks


def _value_fn(phi):
    if isinstance(phi, GraphEnergy):
        return phi.value
    if isinstance(phi, ProperFunctional):
        return phi.evaluate
    if callable(phi):
        return phi
    raise PreconditionError(f"cannot evaluate {type(phi).__name__} as a functional")


@dataclass
class ExchangeReport:
    lhs: float
    rhs: float
    slack: float

    def ok(self, tol: float = 1e-9) -> bool:
        return self.slack >= -tol


def p0_convexity_check(phi, u, v, g, exact: bool = False) -> ExchangeReport:
    """Evaluate the exchange inequality for one (u, v, g) triple.

    slack = F(u) + F(v) - F(u + g(v-u)) - F(v - g(v-u)); nonnegative slack
    is a pass.  g is a P0TestFunction or any scalar callable; exact=True
    evaluates a P0TestFunction by quadrature instead of the cache.
    """
    f = _value_fn(phi)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if isinstance(g, P0TestFunction):
        geval = g.exact_value if exact else g.evaluator
    else:
        geval = g
    gv = np.asarray([geval(t) for t in (v - u)])
    lhs = f(u + gv) + f(v - gv)
    rhs = f(u) + f(v)
    return ExchangeReport(lhs=float(lhs), rhs=float(rhs), slack=float(rhs - lhs))


@dataclass
class CounterexampleReport:
    lam: float
    lambda_convexity_ok: bool
    n_lambda_samples: int
    exchange: ExchangeReport
    expected_slack: float
    functional: ProperFunctional
    g: P0TestFunction


def counterexample_functional(lam: float) -> ProperFunctional:
    """F(u) = (lam+1)(u_0 + u_1)^2 + (lam/2)(u_0^2 + u_1^2) on two atoms of mass 1/2.

    lam-convex with respect to the weighted norm for every lam >= 0, yet for
    the one-sided g with g(-1) = 0, g(1) = 1/2 the exchange inequality fails
    by exactly 1/2 + lam/4 on the canonical pair u = (1, 0), v = (0, 1).
    """
    if lam < 0:
        raise PreconditionError("lam must be nonnegative")
    w = np.array([0.5, 0.5])

    def val(u):
        return (lam + 1.0) * (u[0] + u[1]) ** 2 + 0.5 * lam * (u[0] ** 2 + u[1] ** 2)

    return ProperFunctional(
        dim=2,
        value=val,
        lam=lam,
        weights=w,
        domain_hint=(np.array([-3.0, -3.0]), np.array([3.0, 3.0])),
        name=f"exchange-counterexample(lam={lam:g})",
    )


def counterexample_demo(lam: float, rng=None, n_lambda_samples: int = 1000) -> CounterexampleReport:
    """Reproduce the lambda-convex-but-not-exchange-stable example.

    Verifies lambda-convexity by sampling (expected: no violations) and the
    exchange inequality on the canonical triple (expected: slack exactly
    -(1/2 + lam/4)).
    """
    from .convex import check_lambda_convexity, default_triple_sampler

    phi = counterexample_functional(lam)
    rng = np.random.default_rng(0) if rng is None else rng
    sampler = default_triple_sampler(phi, rng, scale=50.0)
    conv = check_lambda_convexity(phi, lam, sampler, n_lambda_samples)
    g = p0_family(a=0.1, w=0.1, cap=0.5, one_sided=True)
    exch = p0_convexity_check(phi, np.array([1.0, 0.0]), np.array([0.0, 1.0]), g, exact=True)
    return CounterexampleReport(
        lam=lam,
        lambda_convexity_ok=conv.ok,
        n_lambda_samples=conv.n_checked,
        exchange=exch,
        expected_slack=-(0.5 + 0.25 * lam),
        functional=phi,
        g=g,
    )


# ---------------------------------------------------------------------------
# L^r contraction of graph flows


def weighted_lr_norm(values, weights, r) -> float:
    a = np.abs(np.asarray(values, dtype=float))
    if np.isinf(r):
        return float(np.max(a)) if a.size else 0.0
    w = np.asarray(weights, dtype=float)
    return float(np.sum(w * a**r) ** (1.0 / r))


@dataclass
class LrContractionReport:
    r: float
    lhs: float
    rhs: float
    allowance: float
    ok: bool


def lr_contraction_check(ge: GraphEnergy, x, y, t: float, r: float,
                         tol: float = 1e-6) -> LrContractionReport:
    """Check that the flow of an exchange-stable graph energy contracts L^r.

    Flows are computed in the weighted L^2 geometry; the solver certificates
    are converted into an L^r allowance through the weighted L^2 -> sup
    comparison (factor 1/sqrt(min weight)).
    """
    phi = ge.to_functional()
    x = as_point(x, ge.n_nodes)
    y = as_point(y, ge.n_nodes)
    times = np.array([t]) if t > 0 else np.array([0.0])
    fx = gradient_flow(phi, x, times, tol)
    fy = gradient_flow(phi, y, times, tol)
    ux, uy = fx.trajectory.states[-1], fy.trajectory.states[-1]
    lhs = weighted_lr_norm(ux - uy, ge.node_weights, r)
    rhs = weighted_lr_norm(x - y, ge.node_weights, r)
    certs = float(fx.certificates[-1].value + fy.certificates[-1].value)
    allowance = certs / np.sqrt(float(np.min(ge.node_weights))) + 1e-12
    return LrContractionReport(r=r, lhs=lhs, rhs=rhs, allowance=allowance,
                               ok=lhs <= rhs + allowance)
