import math

import numpy as np
import pytest

from lyapbounds import (
    PerturbationSpec,
    block_embedding_exponents,
    invariant_subspace_identity_check,
    rank_m_duality,
    rank_m_scaled_bounds,
    rank_one_scaled_bounds,
    rank_one_spectrum,
    spectrum,
    top_exponent,
)
from lyapbounds.errors import (
    CommutationViolated,
    RankDeficientV,
    RankOutOfRange,
    SingularBase,
    ValidationError,
)
from lyapbounds.perturbation import explicit_family, quotient_family


def e(i, d):
    v = np.zeros(d)
    v[i] = 1.0
    return v


def simple_spec(**kw):
    args = dict(
        dim=3,
        rank=1,
        base=None,
        V=e(0, 3),
        etas=(3.0,),
        U_atoms=(e(0, 3),),
        probs=(1.0,),
    )
    args.update(kw)
    return PerturbationSpec(**args)


class TestRankOneSpectrum:
    def test_constant_atoms(self):
        got = rank_one_spectrum(simple_spec())
        assert got == pytest.approx([math.log(4), math.log(3), math.log(3)])

    def test_zero_right_vector(self):
        spec = simple_spec(V=np.zeros(3), etas=(2.0, 0.5), U_atoms=(e(0, 3), e(1, 3)), probs=(0.5, 0.5))
        got = rank_one_spectrum(spec)
        expected = 0.5 * (math.log(2) + math.log(0.5))
        assert got == pytest.approx([expected] * 3)

    def test_two_atom_mixture(self):
        spec = simple_spec(etas=(1.0, 2.0), U_atoms=(e(0, 3), e(0, 3)), probs=(0.5, 0.5))
        got = rank_one_spectrum(spec)
        assert got[0] == pytest.approx(0.5 * (math.log(2) + math.log(3)))
        assert got[1] == pytest.approx(0.5 * math.log(2))

    def test_matches_mc_spectrum(self):
        spec = simple_spec(
            etas=(0.8, 1.5),
            U_atoms=(0.6 * e(0, 3) + 0.2 * e(1, 3), -0.3 * e(0, 3) + 0.5 * e(2, 3)),
            probs=(0.4, 0.6),
            seed=12,
        )
        closed = rank_one_spectrum(spec)
        mc = spectrum(explicit_family(spec), 20000, 8, seed=5)
        for want, got in zip(closed, mc):
            assert abs(want - got.value) <= 3 * got.std_error + 1e-3

    def test_ordering_warning(self):
        spec = simple_spec(etas=(1.0, 2.0), U_atoms=(-1.5 * e(0, 3), -1.5 * e(0, 3)), probs=(0.5, 0.5))
        with pytest.warns(RuntimeWarning):
            got = rank_one_spectrum(spec)
        assert got[0] == pytest.approx(0.5 * math.log(2))  # eta rate now on top

    def test_degenerate_atom_reports_neg_inf(self):
        spec = simple_spec(etas=(1.0,), U_atoms=(-1.0 * e(0, 3),), probs=(1.0,))
        with pytest.warns(RuntimeWarning):
            got = rank_one_spectrum(spec)
        assert got[-1] == -math.inf

    def test_needs_rank_one(self):
        with pytest.raises(RankOutOfRange):
            rank_one_spectrum(
                simple_spec(rank=2, V=np.eye(3)[:, :2], U_atoms=(np.zeros((3, 2)),))
            )


class TestRankOneScaledBounds:
    def test_conformal_base_width_zero(self):
        rep = rank_one_scaled_bounds(simple_spec(base=2.0 * np.eye(3)))
        center = rep.components["center"]
        assert rep.lower == pytest.approx(center + math.log(2))
        assert rep.upper == pytest.approx(center + math.log(2))

    def test_identity_base_degenerates_to_exact(self):
        spec = simple_spec(base=np.eye(3))
        rep = rank_one_scaled_bounds(spec)
        assert rep.lower == pytest.approx(rep.upper)
        assert rep.upper == pytest.approx(math.log(4))

    def test_commuting_diagonal_base_contains_mc(self):
        spec = simple_spec(
            base=np.diag([2.0, 3.0, 1.0]),
            etas=(0.9, 1.4),
            U_atoms=(0.7 * e(0, 3), 1.2 * e(0, 3)),
            probs=(0.5, 0.5),
            seed=3,
        )
        rep = rank_one_scaled_bounds(spec)
        mc = top_exponent(explicit_family(spec), 20000, 8, seed=9)
        assert rep.lower - 3 * mc.std_error <= mc.value <= rep.upper + 3 * mc.std_error

    def test_commutation_violated(self):
        spec = simple_spec(base=np.array([[2.0, 1.0], [0.0, 3.0]]), dim=2, V=e(1, 2), U_atoms=(e(0, 2),))
        with pytest.raises(CommutationViolated):
            rank_one_scaled_bounds(spec)

    def test_singular_base(self):
        with pytest.raises(SingularBase):
            rank_one_scaled_bounds(simple_spec(base=np.diag([1.0, 1.0, 0.0])))


class TestBlockEmbedding:
    def test_rank_one_is_max(self):
        got = block_embedding_exponents([math.log(3), math.log(2)], 0.0, m=2, r=1)
        assert got == pytest.approx(math.log(3))

    def test_dominant_scalar_rate(self):
        got = block_embedding_exponents([math.log(3), math.log(2)], math.log(4), m=2, r=2)
        assert got == pytest.approx(math.log(4))

    def test_interleaved(self):
        # gamma1 > eta > gamma2: second exponent of the embedding is eta
        got = block_embedding_exponents([1.0, -1.0], 0.2, m=2, r=2)
        assert got == pytest.approx(0.2)

    def test_matches_block_diagonal_union(self):
        gammas = [0.9, 0.1]
        eta = 0.4
        union = sorted(gammas + [eta, eta], reverse=True)
        for r in (1, 2):
            assert block_embedding_exponents(gammas, eta, m=2, r=r) == pytest.approx(union[r - 1])

    def test_neg_inf_scalar_rate_recovers_inner_exponents(self):
        got = block_embedding_exponents([0.5, 0.1], -math.inf, m=2, r=2)
        assert got == pytest.approx(0.1)

    def test_out_of_range(self):
        with pytest.raises(RankOutOfRange):
            block_embedding_exponents([0.5], 0.0, m=2, r=2)

    def test_requires_descending(self):
        with pytest.raises(ValidationError):
            block_embedding_exponents([0.1, 0.5], 0.0, m=2, r=2)


class TestDuality:
    def rank2_spec(self, seed=11):
        rng = np.random.default_rng(seed)
        return PerturbationSpec(
            dim=3,
            rank=2,
            base=None,
            V=rng.normal(size=(3, 2)),
            etas=tuple(rng.uniform(0.7, 1.6, size=3)),
            U_atoms=tuple(0.6 * rng.normal(size=(3, 2)) for _ in range(3)),
            probs=(0.3, 0.4, 0.3),
            seed=seed,
        )

    def test_m_equals_d_families_coincide(self):
        spec = PerturbationSpec(
            dim=2,
            rank=2,
            base=None,
            V=np.eye(2),
            etas=(0.9, 1.3),
            U_atoms=(np.zeros((2, 2)), np.zeros((2, 2))),
            probs=(0.5, 0.5),
            seed=6,
        )
        rep = rank_m_duality(spec, n=4000, replicas=6, seed=1)
        assert abs(rep.sum_identity_residual) <= 3 * rep.combined_std_error + 1e-12

    def test_rank_one_consistency(self):
        spec = simple_spec(etas=(1.0, 2.0), U_atoms=(e(0, 3), e(0, 3)), probs=(0.5, 0.5), seed=4)
        rep = rank_m_duality(spec, n=8000, replicas=6, seed=2)
        expected_top = 0.5 * (math.log(2) + math.log(3))
        assert rep.gamma_tilde[0].value == pytest.approx(expected_top, abs=0.02)
        assert abs(rep.sum_identity_residual) <= 3 * rep.combined_std_error + 1e-9

    def test_random_rank2_instance(self):
        rep = rank_m_duality(self.rank2_spec(), n=10000, replicas=8, seed=3)
        assert abs(rep.sum_identity_residual) <= 3 * rep.combined_std_error + 1e-9
        top = rep.gamma_pairs[0]
        if top["margin_over_eta_mean"]:
            assert top["equal_within_tol"]

    def test_residual_shrinks_with_n(self):
        # residual stays within 3 combined std errors at both scales, and
        # the uncertainty itself contracts roughly like 1/sqrt(n)
        spec = self.rank2_spec(seed=23)
        small = rank_m_duality(spec, n=1000, replicas=8, seed=4)
        large = rank_m_duality(spec, n=10000, replicas=8, seed=5)
        for rep in (small, large):
            assert abs(rep.sum_identity_residual) <= 3 * rep.combined_std_error + 1e-9
        assert large.combined_std_error < small.combined_std_error


class TestRankMScaledBounds:
    def test_rank_one_identity_collapse(self):
        spec = simple_spec(etas=(1.0, 2.0), U_atoms=(e(0, 3), e(0, 3)), probs=(0.5, 0.5))
        rep = rank_m_scaled_bounds(spec)
        exact_top = rank_one_spectrum(spec)[0]
        assert rep.lower == pytest.approx(exact_top)
        assert rep.upper == pytest.approx(exact_top)

    def test_conformal_base(self):
        spec = simple_spec(base=1.5 * np.eye(3))
        rep = rank_m_scaled_bounds(spec)
        assert rep.upper - rep.lower == pytest.approx(0.0, abs=1e-12)
        assert rep.upper == pytest.approx(math.log(1.5) + max(math.log(3), math.log(3 + 1 / 1.5)))

    def test_block_commuting_instance_contains_mc(self):
        rng = np.random.default_rng(15)
        u_atoms = []
        for _ in range(2):
            u = np.zeros((4, 2))
            u[:2, :] = rng.normal(size=(2, 2))
            u_atoms.append(u)
        v = np.zeros((4, 2))
        v[:2, :] = np.eye(2)
        spec = PerturbationSpec(
            dim=4,
            rank=2,
            base=np.diag([2.0, 2.0, 0.7, 0.7]),
            V=v,
            etas=(0.9, 1.2),
            U_atoms=tuple(u_atoms),
            probs=(0.5, 0.5),
            seed=8,
        )
        rep = rank_m_scaled_bounds(spec, n=20000, replicas=8, seed=5)
        mc = top_exponent(explicit_family(spec), 20000, 8, seed=31)
        slack = 3 * (mc.std_error + rep.components["gamma1_quotient_std_error"])
        assert rep.lower - slack <= mc.value <= rep.upper + slack

    def test_rank_deficient_v(self):
        spec = simple_spec(rank=2, V=np.zeros((3, 2)), U_atoms=(np.zeros((3, 2)),))
        with pytest.raises(RankDeficientV):
            rank_m_scaled_bounds(spec)

    def test_commutation_violated(self):
        rng = np.random.default_rng(1)
        spec = PerturbationSpec(
            dim=3,
            rank=2,
            base=np.diag([1.0, 2.0, 3.0]),
            V=rng.normal(size=(3, 2)),
            etas=(1.0,),
            U_atoms=(rng.normal(size=(3, 2)),),
            probs=(1.0,),
        )
        with pytest.raises(CommutationViolated):
            rank_m_scaled_bounds(spec)


class TestIdentityChecks:
    def test_covector_residual_machine_eps(self):
        spec = simple_spec(
            etas=(0.8, 1.3, 2.1),
            U_atoms=(0.4 * e(0, 3) + e(1, 3), -0.7 * e(0, 3), 0.2 * e(2, 3)),
            probs=(0.3, 0.3, 0.4),
            seed=5,
        )
        rep = invariant_subspace_identity_check(spec, n_samples=128, n=4000, replicas=4)
        assert rep.covector_residual_max <= 1e-12

    def test_constant_sum(self):
        rep = invariant_subspace_identity_check(simple_spec(), n_samples=16, n=2000, replicas=2)
        assert rep.expected_sum == pytest.approx(2 * math.log(3) + math.log(4))
        assert rep.spectrum_sum == pytest.approx(rep.expected_sum, abs=1e-10)
        assert rep.det_identity_ok

    def test_random_spec_det_identity(self):
        rng = np.random.default_rng(33)
        spec = simple_spec(
            etas=tuple(rng.uniform(0.6, 1.8, size=3)),
            U_atoms=tuple(0.5 * rng.normal(size=3) for _ in range(3)),
            probs=(0.25, 0.5, 0.25),
            seed=14,
        )
        rep = invariant_subspace_identity_check(spec, n_samples=64, n=8000, replicas=8)
        assert rep.det_identity_ok


class TestQuotientFamily:
    def test_rank_one_scalar_cocycle(self):
        spec = simple_spec(etas=(1.0, 2.0), U_atoms=(e(0, 3), e(0, 3)), probs=(0.5, 0.5))
        tf = quotient_family(spec)
        assert tf.dim == 1
        assert tf.atoms[0][0, 0] == pytest.approx(2.0)  # eta + v.u
        assert tf.atoms[1][0, 0] == pytest.approx(3.0)

    def test_determinant_lemma_per_atom(self):
        # det(eta I + u v^T) = eta^(d-1) * (eta + v.u), exactly per atom
        rng = np.random.default_rng(71)
        spec = simple_spec(
            etas=tuple(rng.uniform(0.5, 2.0, size=3)),
            U_atoms=tuple(rng.normal(size=3) for _ in range(3)),
            probs=(0.2, 0.5, 0.3),
            V=rng.normal(size=3),
        )
        fam = explicit_family(spec)
        v = spec.V[:, 0]
        for atom, eta, u in zip(fam.atoms, spec.etas, spec.U_atoms):
            expected = eta ** (spec.dim - 1) * (eta + float(v @ u[:, 0]))
            assert np.linalg.det(atom) == pytest.approx(expected, rel=1e-12)
