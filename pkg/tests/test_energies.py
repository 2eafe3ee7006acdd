"""Graph energies, the smooth-truncation test family, and exchange checks."""

import numpy as np
import pytest

from gfstack.convex import check_lambda_convexity, default_triple_sampler
from gfstack.energies import (
    GraphEnergy,
    adaptive_simpson,
    counterexample_demo,
    counterexample_functional,
    graph_prox,
    lr_contraction_check,
    p0_convexity_check,
    p0_family,
    quadratic_map_energy,
    weighted_lr_norm,
)
from gfstack.errors import ConstructionError, PreconditionError

from oracles import grid_prox_2d


class TestAdaptiveSimpson:
    def test_polynomial_exact(self):
        assert abs(adaptive_simpson(lambda x: x**3 - x, 0.0, 2.0) - 2.0) < 1e-12

    def test_smooth_function(self):
        assert abs(adaptive_simpson(np.sin, 0.0, np.pi) - 2.0) < 1e-11


class TestP0Family:
    def test_dead_zone(self):
        g = p0_family(a=1.0, w=5.0)
        assert g(1.0) == 0.0 and g(-1.0) == 0.0 and g(0.0) == 0.0

    def test_cap_variant_for_counterexample(self):
        g = p0_family(a=0.1, w=0.1, cap=0.5, one_sided=True)
        assert g(1.0) == 0.5
        assert g(-1.0) == 0.0

    def test_plateau_default_is_ramp_area(self):
        g = p0_family(a=0.5, w=0.3)
        assert abs(g(10.0) - 0.3) < 1e-14
        assert abs(g(-10.0) + 0.3) < 1e-14

    def test_derivative_bounds_and_support(self):
        g = p0_family(a=0.2, w=0.3, cap=1.2)
        xs = np.linspace(-5, 5, 2001)
        dv = np.array([g.derivative(float(x)) for x in xs])
        assert dv.min() >= 0.0 and dv.max() <= 1.0 + 1e-12
        assert np.all(dv[np.abs(xs) <= g.a] == 0.0)
        assert np.all(dv[np.abs(xs) >= g.support_end] == 0.0)

    def test_value_below_identity_and_sign(self):
        for g in (p0_family(a=0.3, w=0.4), p0_family(a=0.1, w=0.2, cap=0.5, one_sided=True)):
            xs = np.linspace(-4, 4, 801)
            vals = np.asarray(g(xs))
            assert np.all(np.abs(vals) <= np.abs(xs) + 1e-12)
            assert np.all(vals * xs >= -1e-15)

    def test_cached_matches_exact_quadrature(self):
        g = p0_family(a=0.25, w=0.5, cap=0.4)
        for x in (0.3, 0.55, 0.8, 1.1, 2.0, -0.6):
            assert abs(g(x) - g.exact_value(x)) < 1e-10

    def test_slope_cap_interaction(self):
        g = p0_family(a=0.1, w=1.0, cap=0.25)
        # cap smaller than slope*w forces a gentler slope
        assert g.slope == pytest.approx(0.25)
        assert abs(g(10.0) - 0.25) < 1e-14

    def test_invalid_parameters(self):
        with pytest.raises(ConstructionError):
            p0_family(a=0.0, w=1.0)
        with pytest.raises(ConstructionError):
            p0_family(a=1.0, w=1.0, slope=1.5)
        with pytest.raises(ConstructionError):
            p0_family(a=1.0, w=1.0, cap=-0.1)


class TestExchangeInequality:
    def test_graph_squared_random_instances(self, rng):
        g = p0_family(a=0.3, w=0.4)
        for _ in range(25):
            A = rng.random((5, 5))
            A[np.diag_indices(5)] = 0.0
            ge = GraphEnergy(adjacency=A, loss_kind="squared")
            rep = p0_convexity_check(ge, rng.normal(size=5) * 2, rng.normal(size=5) * 2, g)
            assert rep.slack >= -1e-10

    def test_graph_absolute_random_instances(self, rng):
        g = p0_family(a=0.2, w=0.2, cap=0.8)
        for _ in range(25):
            A = rng.random((4, 4))
            A[np.diag_indices(4)] = 0.0
            ge = GraphEnergy(adjacency=A, loss_kind="absolute")
            rep = p0_convexity_check(ge, rng.normal(size=4) * 2, rng.normal(size=4) * 2, g)
            assert rep.slack >= -1e-10

    def test_quadratic_map(self, rng):
        g = p0_family(a=0.3, w=0.4)
        Q = quadratic_map_energy(np.full(4, 0.25))
        for _ in range(25):
            rep = p0_convexity_check(Q, rng.normal(size=4) * 3, rng.normal(size=4) * 3, g)
            assert rep.slack >= -1e-10

    def test_scaling_and_sum_stability_exact(self, rng):
        g = p0_family(a=0.3, w=0.4)
        A = rng.random((4, 4))
        A[np.diag_indices(4)] = 0.0
        ge = GraphEnergy(adjacency=A)
        Q = quadratic_map_energy(np.full(4, 0.25))
        u, v = rng.normal(size=4), rng.normal(size=4)
        s1 = p0_convexity_check(ge, u, v, g).slack
        s2 = p0_convexity_check(Q, u, v, g).slack
        lam = 3.7
        assert p0_convexity_check(lambda z: lam * ge.value(z), u, v, g).slack == pytest.approx(lam * s1, abs=1e-9)
        both = p0_convexity_check(lambda z: ge.value(z) + Q.evaluate(z), u, v, g).slack
        assert both == pytest.approx(s1 + s2, abs=1e-9)

    def test_exchange_stable_implies_plain_convex(self, rng):
        # every shipped exchange-stable energy passes the lam = 0 sampling check
        A = rng.random((4, 4))
        A[np.diag_indices(4)] = 0.0
        for phi in (GraphEnergy(adjacency=A).to_functional(),
                    quadratic_map_energy(np.full(3, 1 / 3))):
            rep = check_lambda_convexity(phi, 0.0,
                                         default_triple_sampler(phi, rng, scale=5.0), 200)
            assert rep.ok

    def test_g_composition_contracts_lp_norms(self, rng):
        g = p0_family(a=0.3, w=0.4)
        w = np.full(6, 1 / 6)
        for _ in range(20):
            u = rng.normal(size=6) * 3
            gu = np.asarray(g(u))
            for p in (1.0, 2.0, 4.0):
                assert weighted_lr_norm(gu, w, p) <= weighted_lr_norm(u, w, p) + 1e-12


class TestCounterexample:
    def test_slack_at_zero(self):
        rep = counterexample_demo(0.0)
        assert rep.lambda_convexity_ok
        assert rep.exchange.slack == pytest.approx(-0.5, abs=1e-12)
        assert rep.exchange.lhs == pytest.approx(2.5, abs=1e-12)
        assert rep.exchange.rhs == pytest.approx(2.0, abs=1e-12)

    def test_slack_at_four(self):
        rep = counterexample_demo(4.0)
        assert rep.lambda_convexity_ok
        assert rep.exchange.lhs == pytest.approx(15.5, abs=1e-12)
        assert rep.exchange.rhs == pytest.approx(14.0, abs=1e-12)
        assert rep.exchange.slack == pytest.approx(-1.5, abs=1e-12)

    def test_zero_truncation_degenerate_pass(self):
        phi = counterexample_functional(0.0)
        rep = p0_convexity_check(phi, np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                                 lambda x: 0.0)
        assert rep.slack == 0.0

    def test_negative_modulus_rejected(self):
        with pytest.raises(PreconditionError):
            counterexample_functional(-0.5)


class TestGraphEnergy:
    def test_value_and_pair_matrix(self):
        ge = GraphEnergy(adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert ge.value([1.0, 0.0]) == 2.0
        assert ge.value([3.0, 3.0]) == 0.0
        u = np.array([0.4, -1.2])
        assert ge.value(u) == pytest.approx(u @ ge.pair_matrix() @ u)

    def test_adjacency_validation(self):
        with pytest.raises(ConstructionError):
            GraphEnergy(adjacency=np.array([[0.0, -1.0], [0.0, 0.0]]))
        with pytest.raises(ConstructionError):
            GraphEnergy(adjacency=np.zeros((2, 3)))

    def test_two_node_prox_linear_solve(self):
        ge = GraphEnergy(adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]),
                         node_weights=np.array([1.0, 1.0]))
        out = graph_prox(ge, 0.125, [1.0, 0.0])
        assert np.allclose(out, [0.75, 0.25], atol=1e-12)

    def test_zero_adjacency_identity(self, rng):
        ge = GraphEnergy(adjacency=np.zeros((3, 3)))
        h = rng.normal(size=3)
        assert np.allclose(graph_prox(ge, 0.7, h), h)
        ge_abs = GraphEnergy(adjacency=np.zeros((3, 3)), loss_kind="absolute")
        assert np.allclose(graph_prox(ge_abs, 0.7, h), h)

    def test_constant_vector_fixed_point(self, rng):
        A = rng.random((4, 4))
        A[np.diag_indices(4)] = 0.0
        for kind in ("squared", "absolute"):
            ge = GraphEnergy(adjacency=A, loss_kind=kind)
            h = np.full(4, 1.7)
            assert np.allclose(graph_prox(ge, 0.5, h), h, atol=1e-9)

    def test_squared_prox_matches_grid(self):
        ge = GraphEnergy(adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]))
        h = np.array([1.0, -0.5])
        gamma = 0.2
        got = graph_prox(ge, gamma, h)
        vec = lambda pts: 2.0 * (pts[0] - pts[1]) ** 2
        y, _ = grid_prox_2d(vec, gamma, h, (-2.0, -2.0), (2.0, 2.0), n=2001,
                            weights=ge.node_weights)
        assert np.allclose(got, y, atol=3e-3)

    def test_absolute_prox_matches_grid(self):
        ge = GraphEnergy(adjacency=np.array([[0.0, 2.0], [0.0, 0.0]]), loss_kind="absolute")
        h = np.array([1.0, -1.0])
        gamma = 0.15
        got = graph_prox(ge, gamma, h)
        vec = lambda pts: 2.0 * np.abs(pts[0] - pts[1])
        y, _ = grid_prox_2d(vec, gamma, h, (-2.0, -2.0), (2.0, 2.0), n=2001,
                            weights=ge.node_weights)
        assert np.allclose(got, y, atol=3e-3)

    def test_absolute_prox_three_nodes_vs_grid(self):
        # coarse 3-D grid plus objective comparison at the reported point
        ge = GraphEnergy(adjacency=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 2.0],
                                             [0.5, 0.0, 0.0]]), loss_kind="absolute")
        h = np.array([1.0, -0.5, 0.25])
        gamma = 0.3
        u = graph_prox(ge, gamma, h)
        w = ge.node_weights
        grid = np.linspace(-1.2, 1.2, 61)
        G = np.stack(np.meshgrid(grid, grid, grid, indexing="ij")).reshape(3, -1)
        A = ge.adjacency
        energy = sum(
            A[i, j] * np.abs(G[i] - G[j]) for i in range(3) for j in range(3) if A[i, j]
        )
        quad = sum(w[i] * (G[i] - h[i]) ** 2 for i in range(3)) / (2 * gamma)
        best = float(np.min(energy + quad))
        obj_u = ge.value(u) + float(np.sum(w * (u - h) ** 2)) / (2 * gamma)
        assert obj_u <= best + 1e-9

    def test_spectral_power_matches_repeated_solves(self, rng):
        A = rng.random((6, 6))
        A[np.diag_indices(6)] = 0.0
        phi = GraphEnergy(adjacency=A).to_functional()
        h = rng.normal(size=6)
        ge = GraphEnergy(adjacency=A)
        direct = h
        for _ in range(4):
            direct = graph_prox(ge, 0.07, direct)
        assert np.allclose(phi.prox_iterated(0.07, 4, h), direct, atol=1e-11)

    def test_probability_weights_required_for_functional(self):
        ge = GraphEnergy(adjacency=np.zeros((2, 2)), node_weights=np.array([1.0, 1.0]))
        with pytest.raises(PreconditionError):
            ge.to_functional()


class TestLrContraction:
    def test_identical_states(self):
        ge = GraphEnergy(adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]))
        rep = lr_contraction_check(ge, [1.0, 0.0], [1.0, 0.0], 0.5, 2.0)
        assert rep.ok and rep.lhs == 0.0 and rep.rhs == 0.0

    def test_two_node_closed_form(self):
        ge = GraphEnergy(adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]))
        for r in (1.0, 2.0, 4.0):
            rep = lr_contraction_check(ge, [1.0, 0.0], [0.0, 0.0], 0.5, r)
            assert rep.ok

    def test_five_node_random(self, rng):
        A = rng.random((5, 5))
        A[np.diag_indices(5)] = 0.0
        ge = GraphEnergy(adjacency=A)
        x, y = rng.normal(size=5), rng.normal(size=5)
        rep = lr_contraction_check(ge, x, y, 0.5, 3.0, tol=1e-6)
        assert rep.ok

    def test_infinity_norm_proxy(self, rng):
        A = rng.random((4, 4))
        A[np.diag_indices(4)] = 0.0
        ge = GraphEnergy(adjacency=A)
        rep = lr_contraction_check(ge, rng.normal(size=4), rng.normal(size=4), 0.25, np.inf)
        assert rep.ok

    def test_prox_contracts_all_lr_norms(self, rng):
        # resolvent form of the exchange-stability contraction property
        A = rng.random((5, 5))
        A[np.diag_indices(5)] = 0.0
        ge = GraphEnergy(adjacency=A)
        for _ in range(20):
            x, y = rng.normal(size=5), rng.normal(size=5)
            g = float(rng.uniform(0.05, 1.0))
            px, py = graph_prox(ge, g, x), graph_prox(ge, g, y)
            for r in (1.0, 2.0, 3.0, np.inf):
                lhs = weighted_lr_norm(px - py, ge.node_weights, r)
                rhs = weighted_lr_norm(x - y, ge.node_weights, r)
                assert lhs <= rhs + 1e-10


class TestGraphEnergySerialization:
    def test_roundtrip(self, rng):
        from gfstack.energies import dump_graph_energy, load_graph_energy

        A = rng.random((4, 4))
        A[np.diag_indices(4)] = 0.0
        ge = GraphEnergy(adjacency=A, loss_kind="absolute",
                         node_weights=np.full(4, 0.25))
        text = dump_graph_energy(ge)
        back = load_graph_energy(text)
        assert np.allclose(back.adjacency, ge.adjacency)
        assert np.allclose(back.node_weights, ge.node_weights)
        assert back.loss_kind == "absolute"
        for key in ('"n"', '"A"', '"weights"', '"loss"'):
            assert key in text

    def test_shape_mismatch_rejected(self):
        from gfstack.energies import graph_energy_from_record

        with pytest.raises(ConstructionError):
            graph_energy_from_record({"n": 3, "A": [[0.0]], "weights": [1.0], "loss": "squared"})


    def test_cap_exactly_ramp_area(self):
        g = p0_family(a=0.2, w=0.4, cap=0.4)  # cap == slope * w: immediate descent
        assert abs(g(10.0) - 0.4) < 1e-14
        assert g.derivative(0.2 + 0.4 + 0.2) < 1.0  # already descending

    def test_tiny_rise_width(self):
        g = p0_family(a=0.05, w=0.01)
        xs = np.linspace(-1, 1, 401)
        dv = np.array([g.derivative(float(x)) for x in xs])
        assert dv.max() <= 1.0 + 1e-12
        assert abs(g(0.5) - g.plateau) < 1e-14
