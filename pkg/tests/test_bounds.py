import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lyapbounds import (
    AlphaPair,
    ExponentEstimate,
    analyze_structure,
    block_triangular_reduce,
    bound_sandwich_check,
    build_shape_graph,
    finite_iid,
    shape_bound_lower,
    shape_bound_upper,
    top_exponent,
    triangular_bounds,
    triangular_exact,
    validate_shape_set,
)
from lyapbounds.bounds import estimate_loop_exponents
from lyapbounds.errors import (
    DisjointnessViolation,
    EmptyW,
    MissingLoopExponent,
    NonnegativityUnverified,
    SandwichViolated,
    StructuralViolation,
)
from lyapbounds.shapes import StructuralReport, entropy_refinement

from conftest import MIX_A, MIX_B


def est(value, se=0.0):
    return ExponentEstimate(value, se, 0, 1, "exact-diagonal")


def pairs_strategy():
    return st.lists(
        st.tuples(
            st.floats(-3, 3, allow_nan=False), st.floats(0, 2, allow_nan=False)
        ).map(lambda t: AlphaPair(t[0], t[0] + t[1], window=8)),
        min_size=1,
        max_size=5,
    )


class TestTriangularBounds:
    def test_converged_averages_collapse(self):
        alphas = [AlphaPair(0.4, 0.4, 8), AlphaPair(-0.1, -0.1, 8)]
        rep = triangular_bounds(alphas)
        assert rep.lower == rep.upper == pytest.approx(0.4)

    def test_spread_correction(self):
        rep = triangular_bounds([AlphaPair(0.0, 1.0, 8), AlphaPair(0.0, 0.0, 8)])
        assert rep.lower == pytest.approx(1.0)
        assert rep.upper == pytest.approx(1.0)  # max(1, 0 + (1-0)) = 1

    def test_single_coordinate(self):
        rep = triangular_bounds([AlphaPair(-0.2, 0.3, 8)])
        assert rep.lower == rep.upper == pytest.approx(0.3)

    @given(pairs_strategy())
    def test_lower_never_exceeds_upper(self, alphas):
        rep = triangular_bounds(alphas)
        assert rep.lower <= rep.upper + 1e-12


class TestTriangularExact:
    def test_max(self):
        assert triangular_exact([math.log(2), 0.0, -math.log(3)]) == pytest.approx(math.log(2))

    def test_all_equal(self):
        assert triangular_exact([0.7, 0.7, 0.7]) == pytest.approx(0.7)

    def test_mixture_diagonals(self):
        vals = [0.5 * math.log(2), 0.5 * math.log(2), 0.5 * math.log(3), 1.5 * math.log(2)]
        assert triangular_exact(vals) == pytest.approx(1.5 * math.log(2))


class TestBlockReduce:
    def test_max(self):
        out = block_triangular_reduce([est(math.log(2)), est(math.log(3))])
        assert out.value == pytest.approx(math.log(3))

    def test_single(self):
        e = est(0.12)
        assert block_triangular_reduce([e]) is e

    def test_tie_lowest_index(self):
        a, b = est(1.0, 0.1), est(1.0, 0.9)
        assert block_triangular_reduce([a, b]) is a

    def test_diagonal_block_families(self):
        from lyapbounds import BlockStructure, diagonal_block_families

        fam = finite_iid([MIX_A], [1.0])  # upper triangular, any split works
        subs = diagonal_block_families(fam, BlockStructure((1, 3)))
        assert [sub.dim for sub in subs] == [1, 3]
        assert subs[0].atoms[0][0, 0] == 2.0
        assert np.array_equal(subs[1].atoms[0], MIX_A[1:, 1:])

    def test_diagonal_block_families_refuses_lower_coupling(self, mixture_family):
        from lyapbounds import BlockStructure, diagonal_block_families

        # the second mixture atom couples (4,1), below the block diagonal
        with pytest.raises(StructuralViolation):
            diagonal_block_families(mixture_family, BlockStructure((2, 2)))

    def test_mc_cross_check(self):
        rng = np.random.default_rng(77)
        for _ in range(3):
            blocks = []
            for _ in range(2):
                pair = []
                for _ in range(2):
                    m = rng.uniform(-1.2, 1.2, size=(2, 2))
                    while abs(np.linalg.det(m)) < 0.2:
                        m = rng.uniform(-1.2, 1.2, size=(2, 2))
                    pair.append(m)
                blocks.append(pair)
            coupling = [rng.uniform(-1.0, 1.0, size=(2, 2)) for _ in range(2)]
            atoms = []
            for idx in range(2):
                top = np.block([[blocks[0][idx], coupling[idx]], [np.zeros((2, 2)), blocks[1][idx]]])
                atoms.append(top)
            full = finite_iid(atoms, [0.5, 0.5], seed=int(rng.integers(1 << 30)))
            subs = [
                finite_iid([blocks[j][0], blocks[j][1]], [0.5, 0.5], seed=full.seed + j + 1)
                for j in range(2)
            ]
            n = 20000
            reduced = block_triangular_reduce([top_exponent(s, n, 8) for s in subs])
            direct = top_exponent(full, n, 8)
            tol = 3 * (reduced.std_error + direct.std_error) + 0.015
            assert abs(reduced.value - direct.value) <= tol


def mixture_setup():
    fam = finite_iid([MIX_A, MIX_B], [0.5, 0.5], seed=20260810)
    l1 = np.eye(4, dtype=int)
    l2 = np.zeros((4, 4), dtype=int)
    l2[3, 0] = 1
    l3 = np.zeros((4, 4), dtype=int)
    l3[1, 2] = 1
    l3[1, 3] = 1
    return fam, validate_shape_set([l1, l2, l3])


class TestShapeBoundUpper:
    def test_mixture_worked_values(self):
        fam, s = mixture_setup()
        graph = build_shape_graph(s)
        report = analyze_structure(graph)
        betas, _ = estimate_loop_exponents(fam, s, report, 1000, 2, 16, 1)
        out = shape_bound_upper(report, betas, refinement=True, entropy=entropy_refinement(graph))
        assert out.components["beta"] == pytest.approx(1.5 * math.log(2), abs=1e-12)
        assert out.upper == pytest.approx(2.5 * math.log(2), abs=1e-12)
        assert out.components["log_k_star"] == pytest.approx(math.log(2))
        assert out.components["refined_upper_heuristic"] == pytest.approx(
            1.5 * math.log(2), abs=1e-9
        )

    def test_identity_only_tight(self):
        s = validate_shape_set([np.eye(2, dtype=int)])
        report = analyze_structure(build_shape_graph(s))
        out = shape_bound_upper(report, {0: est(math.log(3.0))})
        assert out.upper == pytest.approx(math.log(3.0))  # log k = log 1 = 0

    def test_cycle_refused(self):
        e12 = np.zeros((2, 2), dtype=int)
        e12[0, 1] = 1
        e21 = np.zeros((2, 2), dtype=int)
        e21[1, 0] = 1
        report = analyze_structure(build_shape_graph(validate_shape_set([e12, e21])))
        with pytest.raises(StructuralViolation):
            shape_bound_upper(report, {})

    def test_missing_exponent(self):
        _, s = mixture_setup()
        report = analyze_structure(build_shape_graph(s))
        with pytest.raises(MissingLoopExponent):
            shape_bound_upper(report, {})


class TestShapeBoundLower:
    def dag_setup(self):
        # nonnegative diagonal plus chain hooks below the diagonal
        d1 = np.diag([math.exp(-1), math.exp(-2), math.exp(-3), math.exp(-4)])
        hooks = np.zeros((4, 4))
        hooks[1, 0] = hooks[2, 1] = hooks[3, 2] = 1.0
        fam = finite_iid([d1 + hooks], [1.0], seed=4)
        labels = [np.eye(4, dtype=int)]
        for i, j in ((1, 0), (2, 1), (3, 2)):
            m = np.zeros((4, 4), dtype=int)
            m[i, j] = 1
            labels.append(m)
        return fam, validate_shape_set(labels)

    def test_dag_lower_is_diagonal_rate(self):
        fam, s = self.dag_setup()
        graph = build_shape_graph(s)
        report = analyze_structure(graph)
        betas, _ = estimate_loop_exponents(fam, s, report, 100, 1, 16, 1)
        out = shape_bound_lower(report, betas, nonneg_checked=True)
        assert out.lower == pytest.approx(-1.0, abs=1e-12)

    def test_nonnegativity_gate(self):
        fam, s = self.dag_setup()
        report = analyze_structure(build_shape_graph(s))
        betas, _ = estimate_loop_exponents(fam, s, report, 100, 1, 16, 1)
        with pytest.raises(NonnegativityUnverified):
            shape_bound_lower(report, betas, nonneg_checked=False)

    def test_empty_w(self):
        e12 = np.zeros((2, 2), dtype=int)
        e12[0, 1] = 1
        report = analyze_structure(build_shape_graph(validate_shape_set([e12])))
        with pytest.raises(EmptyW):
            shape_bound_lower(report, {}, nonneg_checked=True)

    def test_disjointness_gate(self):
        report = StructuralReport(
            acyclic_except_self_loops=True,
            at_most_one_self_loop_per_vertex=True,
            loop_vertices=(0,),
            loop_labels=(0,),
            k_star=None,
            w_vertices=(0,),
            w_labels=(0,),
            stabilization={0: 1},
            disjointness_ok={0: False},
            num_labels=1,
            contains_zero=False,
        )
        with pytest.raises(DisjointnessViolation):
            shape_bound_lower(report, {0: est(0.0)}, nonneg_checked=True)

    def test_scalar_case_tight(self):
        s = validate_shape_set([np.eye(1, dtype=int)])
        report = analyze_structure(build_shape_graph(s))
        c = math.log(2.5)
        lower = shape_bound_lower(report, {0: est(c)}, nonneg_checked=True)
        upper = shape_bound_upper(report, {0: est(c)})
        assert lower.lower == pytest.approx(c)
        assert upper.upper == pytest.approx(c)


class TestSandwich:
    def test_mixture_flagship(self):
        fam, s = mixture_setup()
        rep = bound_sandwich_check(fam, s, n=20000, replicas=8, seed=7)
        assert rep.upper == pytest.approx(2.5 * math.log(2), abs=1e-12)
        assert rep.lower is None  # negative entries block the lower hypotheses
        assert rep.mc_gamma1.value <= rep.upper + 3 * rep.mc_gamma1.std_error
        assert rep.slack > 0
        assert rep.structural.k_star == 2

    def test_pure_diagonal_tight(self):
        s = validate_shape_set([np.eye(2, dtype=int)])
        constant = finite_iid([np.diag([2.0, 0.5])], [1.0], seed=3)
        rep = bound_sandwich_check(constant, s, n=4000, replicas=1, seed=1)
        assert rep.slack == pytest.approx(0.0, abs=1e-9)
        assert rep.lower == pytest.approx(rep.upper, abs=1e-12)
        # stochastic diagonal family: slack is pure Monte Carlo noise
        fam = finite_iid([np.diag([2.0, 0.5]), np.diag([1.5, 0.8])], [0.5, 0.5], seed=3)
        rep = bound_sandwich_check(fam, s, n=4000, replicas=8, seed=1)
        assert abs(rep.slack) <= 4 * rep.mc_gamma1.std_error + 1e-9

    def test_two_label_alternative_same_upper(self, mixture_family, two_label_set):
        # the coarser two-label split of the same family recomputes k* = 2
        # from its own graph and lands on the same upper bound
        rep = bound_sandwich_check(mixture_family, two_label_set, n=4000, replicas=4, seed=11)
        assert rep.structural.k_star == 2
        assert rep.structural.num_labels == 2
        assert rep.upper == pytest.approx(2.5 * math.log(2), abs=1e-12)
        assert rep.mc_gamma1.value <= rep.upper + 3 * rep.mc_gamma1.std_error

    def test_dag_two_sided(self):
        fam, s = TestShapeBoundLower().dag_setup()
        rep = bound_sandwich_check(fam, s, n=4096, replicas=1, seed=2)
        assert rep.lower == pytest.approx(-1.0, abs=1e-12)
        assert rep.upper == pytest.approx(-1.0 + math.log(2), abs=1e-12)
        assert rep.lower - 1e-6 <= rep.mc_gamma1.value <= rep.upper + 1e-6

    def test_dense_block_label_uses_mc_loop_rate(self):
        # a full block mask self-loops without being diagonal, forcing the
        # Monte Carlo branch for the loop rate; with one label the bound
        # collapses onto the estimate from both sides
        rng = np.random.default_rng(12)
        atoms = [np.abs(rng.uniform(0.4, 1.5, size=(2, 2))) for _ in range(2)]
        fam = finite_iid(atoms, [0.5, 0.5], seed=31)
        s = validate_shape_set([np.ones((2, 2), dtype=int)])
        rep = bound_sandwich_check(fam, s, n=20000, replicas=8, seed=5)
        beta = rep.beta_estimates[0]
        assert beta.method == "norm-renorm"
        assert rep.lower is not None  # sheltered dense vertex, nonneg atoms
        assert rep.upper == pytest.approx(beta.value)  # log k = log 1 = 0
        tol = 3 * (beta.std_error + rep.mc_gamma1.std_error)
        assert abs(rep.mc_gamma1.value - beta.value) <= tol

    def test_corrupted_beta_trips_violation(self, monkeypatch):
        fam, s = mixture_setup()

        def corrupted(*args, **kwargs):
            return {0: est(-10.0)}, []

        monkeypatch.setattr("lyapbounds.bounds.estimate_loop_exponents", corrupted)
        with pytest.raises(SandwichViolated):
            bound_sandwich_check(fam, s, n=2000, replicas=4, seed=7)

    def test_randomized_families_respect_upper(self):
        # random nonnegative diagonal-plus-DAG-hook families at desk scale
        rng = np.random.default_rng(8)
        for trial in range(20):
            d = int(rng.integers(2, 5))
            labels = [np.eye(d, dtype=int)]
            edges = [(i, j) for i in range(d) for j in range(d) if i > j]
            rng.shuffle(edges)
            for i, j in edges[: int(rng.integers(1, min(3, len(edges)) + 1))]:
                m = np.zeros((d, d), dtype=int)
                m[i, j] = 1
                labels.append(m)
            s = validate_shape_set(labels)
            atoms = []
            for _ in range(2):
                diag = np.diag(rng.uniform(0.3, 2.5, size=d))
                off = np.zeros((d, d))
                for l in labels[1:]:
                    off += np.array(l) * rng.uniform(0.0, 2.0)
                atoms.append(diag + off)
            fam = finite_iid(atoms, [0.5, 0.5], seed=int(rng.integers(1 << 30)))
            rep = bound_sandwich_check(fam, s, n=4000, replicas=4, seed=trial)
            assert rep.mc_gamma1.value <= rep.upper + 3 * rep.mc_gamma1.std_error + 1e-9
            if rep.lower is not None:
                assert rep.lower - 3 * rep.mc_gamma1.std_error - 1e-9 <= rep.mc_gamma1.value
