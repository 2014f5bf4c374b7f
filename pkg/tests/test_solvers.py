import numpy as np
import pytest

from sdnfilt.filters import GraphFilter, Signal
from sdnfilt.graphs import Graph
from sdnfilt.preconditioners import build_pgda_preconditioner, build_spgda_preconditioner
from sdnfilt.solvers import (
    METHODS,
    NumericError,
    SolverConfig,
    direct_solve_oracle,
    imia_diagonal,
    iteration_matrix,
    optimal_step,
    solve,
)
from sdnfilt.filters import power_spectral_radius

from conftest import (
    dense_of,
    make_invertible,
    make_spd,
    make_well_conditioned_spd,
    random_connected_graph,
)


def edge2():
    return Graph.from_edges(2, [(0, 1)])


def two_by_two():
    return GraphFilter.from_dense(edge2(), [[2.0, 1.0], [1.0, 2.0]])


def single_vertex():
    return Graph.from_edges(1, [])


class TestSolveBasics:
    @pytest.mark.parametrize("method", ["pgda", "spgda"])
    def test_identity_one_step(self, method, rng):
        g = random_connected_graph(rng, 7)
        y = Signal(g, rng.standard_normal(7))
        x, trace = solve(GraphFilter.identity(g), y,
                         SolverConfig(method=method, max_iter=1))
        assert np.array_equal(x.values, y.values)
        assert trace.residuals[-1] == 0.0

    def test_spgda_two_by_two_limit_and_rate(self):
        h = two_by_two()
        y = Signal(h.graph, np.array([1.0, 1.0]))
        ref = direct_solve_oracle(h, y)
        assert np.allclose(ref.values, [1.0 / 3.0, 1.0 / 3.0], atol=1e-14)
        x, trace = solve(h, y, SolverConfig(method="spgda", max_iter=80),
                         reference=ref)
        assert np.allclose(x.values, [1.0 / 3.0, 1.0 / 3.0], atol=1e-12)
        w = trace.weighted_errors
        for m in range(1, len(w)):
            if w[m - 1] > 1e-13:
                assert w[m] <= (2.0 / 3.0) * w[m - 1] + 1e-13

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="unknown method"):
            SolverConfig(method="cg")

    def test_spgda_asymmetric_rejected(self):
        h = GraphFilter.from_dense(edge2(), [[1.0, 0.7], [0.1, 1.0]])
        y = Signal(h.graph, np.ones(2))
        with pytest.raises(ValueError, match="not symmetric"):
            solve(h, y, SolverConfig(method="spgda", max_iter=3))

    def test_graph_mismatch(self):
        h = two_by_two()
        other = Graph.from_edges(2, [(0, 1)])
        with pytest.raises(ValueError, match="share the same graph"):
            solve(h, Signal(other, np.ones(2)), SolverConfig(method="pgda"))

    def test_trace_shapes(self, rng):
        g = random_connected_graph(rng, 9)
        h = make_spd(rng, g, 1)
        y = Signal(g, rng.standard_normal(9))
        M = 17
        _, trace = solve(h, y, SolverConfig(method="imia", max_iter=M),
                         reference=direct_solve_oracle(h, y))
        assert len(trace.residuals) <= M + 1
        assert len(trace.relative_errors) == len(trace.residuals)
        assert len(trace.snrs) == len(trace.residuals)
        assert all(s <= 300.0 for s in trace.snrs)

    def test_residual_tol_stops_early(self, rng):
        g = random_connected_graph(rng, 9)
        h = make_spd(rng, g, 1, margin=2.0)
        y = Signal(g, rng.standard_normal(9))
        _, trace = solve(h, y, SolverConfig(method="spgda", max_iter=5000,
                                            residual_tol=1e-10))
        assert trace.status == "converged"
        assert trace.iterations < 5000

    def test_nonzero_initial(self, rng):
        g = random_connected_graph(rng, 6)
        h = make_spd(rng, g, 1)
        y = Signal(g, rng.standard_normal(6))
        x0 = Signal(g, rng.standard_normal(6))
        _, tr_zero = solve(h, y, SolverConfig(method="imia", max_iter=1))
        _, tr_warm = solve(h, y, SolverConfig(method="imia", max_iter=1, initial=x0))
        assert tr_zero.residuals[0] != tr_warm.residuals[0]

    def test_keep_iterates(self, rng):
        g = random_connected_graph(rng, 5)
        h = make_spd(rng, g, 1)
        y = Signal(g, rng.standard_normal(5))
        _, trace = solve(h, y, SolverConfig(method="spgda", max_iter=4,
                                            keep_iterates=True))
        assert len(trace.iterates) == len(trace.residuals)
        assert np.array_equal(trace.iterates[0], np.zeros(5))

    def test_deterministic_bitwise(self, rng):
        g = random_connected_graph(rng, 21)
        h = make_invertible(rng, g, 2, symmetric=True)
        y = Signal(g, rng.standard_normal(21))
        ref = direct_solve_oracle(h, y)
        for method in METHODS:
            x1, t1 = solve(h, y, SolverConfig(method=method, max_iter=40), reference=ref)
            x2, t2 = solve(h, y, SolverConfig(method=method, max_iter=40), reference=ref)
            assert np.array_equal(x1.values, x2.values)
            assert t1.residuals == t2.residuals
            assert t1.relative_errors == t2.relative_errors


class TestDivergenceHandling:
    def indefinite(self):
        # symmetric, invertible, not positive definite: eigenvalues {3, -1};
        # the row-sum preconditioner cannot contract it
        return GraphFilter.from_dense(edge2(), [[1.0, 2.0], [2.0, 1.0]])

    def test_spgda_diverges_with_status(self):
        h = self.indefinite()
        y = Signal(h.graph, np.array([1.0, -1.0]))
        _, trace = solve(h, y, SolverConfig(method="spgda", max_iter=500))
        assert trace.status == "diverged"
        assert trace.residuals[-1] > 1e6 * trace.residuals[0]

    def test_nonfinite_raises_with_iteration(self):
        # with divergence detection off, the growing iterate overflows and
        # mixed-sign infinite sums turn into NaN
        h = self.indefinite()
        y = Signal(h.graph, np.array([1.0, -1.0]))
        cfg = SolverConfig(method="spgda", max_iter=10000,
                           divergence_factor=float("inf"))
        with pytest.raises(NumericError, match="iteration"):
            solve(h, y, cfg)

    def test_pgda_converges_where_spgda_diverges(self):
        # invertible-but-indefinite filters are exactly the regime where
        # the gram-dominance iteration still contracts
        h = self.indefinite()
        y = Signal(h.graph, np.array([1.0, -1.0]))
        ref = direct_solve_oracle(h, y)
        x, trace = solve(h, y, SolverConfig(method="pgda", max_iter=4000),
                         reference=ref)
        assert trace.status != "diverged"
        assert trace.relative_errors[-1] < 1e-6


class TestIterationMatrix:
    def test_fixture_radii(self):
        h = two_by_two()
        expected = {"pgda": 8.0 / 9.0, "spgda": 2.0 / 3.0, "opgd": 0.8,
                    "imia": 0.6}
        for method, value in expected.items():
            est = power_spectral_radius(iteration_matrix(h, method),
                                        tol=1e-13, max_iter=20000)
            assert est.converged
            assert est.value == pytest.approx(value, abs=1e-10)

    def test_matches_dense_oracle(self, rng):
        for _ in range(8):
            g = random_connected_graph(rng, int(rng.integers(2, 25)))
            h = make_spd(rng, g, 1)
            dense = dense_of(h)
            p = build_pgda_preconditioner(h).diag
            oracle = {
                "pgda": np.abs(np.linalg.eigvalsh(
                    np.eye(g.n) - (dense.T @ dense) / p[:, None] / p[None, :]
                )).max(),
                "spgda": np.abs(np.linalg.eigvalsh(
                    np.eye(g.n) - dense / np.sqrt(
                        np.outer(np.abs(dense).sum(1), np.abs(dense).sum(1)))
                )).max(),
            }
            for method, val in oracle.items():
                est = power_spectral_radius(iteration_matrix(h, method),
                                            tol=1e-12, max_iter=50000)
                assert est.value == pytest.approx(val, abs=1e-7)

    def test_imia_needs_positive_diagonal(self):
        g = edge2()
        h = GraphFilter.from_dense(g, [[-2.0, 1.0], [1.0, -2.0]])
        with pytest.raises(ValueError, match="nonpositive"):
            iteration_matrix(h, "imia")


class TestOptimalStep:
    def test_identity(self, rng):
        g = random_connected_graph(rng, 4)
        assert optimal_step(GraphFilter.identity(g)) == pytest.approx(1.0, abs=1e-9)

    def test_two_by_two(self):
        assert optimal_step(two_by_two(), tol=1e-13) == pytest.approx(0.2, abs=1e-8)

    def test_diagonal(self):
        h = GraphFilter.from_dense(edge2(), np.diag([5.0, 2.0]))
        assert optimal_step(h, tol=1e-13) == pytest.approx(2.0 / 29.0, abs=1e-9)

    def test_near_singular_rejected(self):
        h = GraphFilter.from_dense(edge2(), [[1.0, 1.0], [1.0, 1.0 + 1e-14]])
        with pytest.raises(ValueError, match="singular"):
            optimal_step(h)


class TestImiaDiagonal:
    def test_identity(self, rng):
        g = random_connected_graph(rng, 5)
        assert np.array_equal(imia_diagonal(GraphFilter.identity(g)), np.ones(5))

    def test_two_by_two(self):
        assert np.allclose(imia_diagonal(two_by_two()), [0.4, 0.4], atol=1e-15)

    def test_single_vertex(self):
        h = GraphFilter.from_dense(single_vertex(), [[4.0]])
        assert np.array_equal(imia_diagonal(h), np.array([0.25]))

    def test_zero_diagonal_rejected(self):
        h = GraphFilter.from_dense(edge2(), [[0.0, 1.0], [1.0, 2.0]])
        with pytest.raises(ValueError, match=r"H\(0,0\)"):
            imia_diagonal(h)


class TestDirectSolveOracle:
    def test_identity(self, rng):
        g = random_connected_graph(rng, 6)
        y = Signal(g, rng.standard_normal(6))
        x = direct_solve_oracle(GraphFilter.identity(g), y)
        assert np.allclose(x.values, y.values, atol=1e-15)

    def test_two_by_two_hand_inverse(self):
        h = two_by_two()
        x = direct_solve_oracle(h, Signal(h.graph, np.array([1.0, 1.0])))
        assert np.allclose(x.values, [1.0 / 3.0, 1.0 / 3.0], atol=1e-14)

    def test_diagonal(self):
        h = GraphFilter.from_dense(edge2(), np.diag([2.0, 4.0]))
        x = direct_solve_oracle(h, Signal(h.graph, np.array([2.0, 4.0])))
        assert np.allclose(x.values, [1.0, 1.0], atol=1e-15)

    def test_singular_reports_pivot(self):
        h = GraphFilter.from_dense(edge2(), [[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(np.linalg.LinAlgError, match="pivot"):
            direct_solve_oracle(h, Signal(h.graph, np.ones(2)))

    def test_residual_gate(self, rng):
        g = random_connected_graph(rng, 15)
        h = make_invertible(rng, g, 1)
        y = Signal(g, rng.standard_normal(15))
        x = direct_solve_oracle(h, y)
        assert np.linalg.norm(h.matvec(x.values) - y.values) <= 1e-8 * y.norm()


class TestTheoremEnvelopes:
    """Per-iteration contraction spot checks; the 50-instance acceptance
    suite repeats these at scale."""

    def test_pgda_weighted_envelope(self, rng):
        for _ in range(5):
            g = random_connected_graph(rng, int(rng.integers(3, 35)))
            h = make_invertible(rng, g, int(rng.integers(1, 3)), margin=0.2)
            y = Signal(g, rng.standard_normal(g.n))
            ref = direct_solve_oracle(h, y)
            p = build_pgda_preconditioner(h).diag
            dense = dense_of(h)
            r = np.abs(np.linalg.eigvalsh(
                np.eye(g.n) - (dense.T @ dense) / p[:, None] / p[None, :]
            )).max()
            _, trace = solve(h, y, SolverConfig(method="pgda", max_iter=60),
                             reference=ref)
            w = trace.weighted_errors
            for m in range(len(w)):
                assert w[m] <= (r ** m) * w[0] * (1 + 1e-8) + 1e-12

    def test_spgda_weighted_envelope(self, rng):
        for _ in range(5):
            g = random_connected_graph(rng, int(rng.integers(3, 35)))
            h = make_spd(rng, g, int(rng.integers(1, 3)))
            y = Signal(g, rng.standard_normal(g.n))
            ref = direct_solve_oracle(h, y)
            ps = build_spgda_preconditioner(h).diag
            dense = dense_of(h)
            r = np.abs(np.linalg.eigvalsh(
                np.eye(g.n) - dense / np.sqrt(np.outer(ps, ps))
            )).max()
            _, trace = solve(h, y, SolverConfig(method="spgda", max_iter=60),
                             reference=ref)
            w = trace.weighted_errors
            for m in range(len(w)):
                assert w[m] <= (r ** m) * w[0] * (1 + 1e-8) + 1e-12


class TestOracleAgreement:
    def test_all_methods_reach_oracle(self, rng):
        # well-conditioned positive definite filters: every method's
        # M -> 500 iterate matches the dense solve
        for _ in range(4):
            g = random_connected_graph(rng, int(rng.integers(3, 41)))
            h = make_well_conditioned_spd(rng, g, 1)
            lam = np.linalg.eigvalsh(dense_of(h))
            assert lam.min() > 0 and lam.max() / lam.min() <= 20.0
            y = Signal(g, rng.standard_normal(g.n))
            ref = direct_solve_oracle(h, y)
            for method in METHODS:
                x, trace = solve(h, y, SolverConfig(method=method, max_iter=500),
                                 reference=ref)
                assert trace.relative_errors[-1] <= 1e-6, method


class TestTraceSummary:
    def test_record_fields(self, rng):
        from sdnfilt.solvers import trace_summary

        g = random_connected_graph(rng, 8)
        h = make_well_conditioned_spd(rng, g, 1)
        y = Signal(g, rng.standard_normal(8))
        ref = direct_solve_oracle(h, y)
        _, trace = solve(h, y, SolverConfig(method="spgda", max_iter=30),
                         reference=ref)
        record = trace_summary(trace, spectral_radius=0.5, wall_time_s=0.01)
        assert record["method"] == "spgda"
        assert record["status"] in ("max_iter", "converged")
        assert record["iterations"] == trace.iterations
        assert record["estimated_rate"] is not None
        import json
        json.dumps(record)  # must stay JSON-compatible
