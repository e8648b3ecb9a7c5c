import numpy as np
import pytest

from whfactor import (MatrixFunction, NoUnstablePair, PartialIndices, PROBE_GRID,
                      combine, sup_norm)
from whfactor.factorizer import BaseFactorization
from whfactor.gallery import (by_name, example_solvable, example_unsolvable,
                              gk_diagonal, gk_singular, oracle_first_step,
                              singular_perturbation, step1_constants)
from whfactor.indices import build_lambda, lambda_entry_values

SPARSE = PROBE_GRID.points()[::10]


def matmul_grid(A, B, xs):
    return np.einsum("kij,kjl->kil", A.eval_grid(xs), B.eval_grid(xs))


class TestBaseConsistency:
    @pytest.mark.parametrize("name", ["gk0", "gk-singular", "solvable", "unsolvable"])
    def test_builder_at_zero_reproduces_base_product(self, name):
        entry = by_name(name, 0.1)
        got = entry.builder(0.0).eval_grid(SPARSE)
        want = entry.base.product_grid(SPARSE)
        assert np.max(np.abs(got - want)) < 1e-10

    @pytest.mark.parametrize("name", ["gk0", "solvable", "unsolvable"])
    def test_perturbation_is_builder_minus_base(self, name):
        entry = by_name(name, 0.3)
        got = entry.perturbation(0.3).eval_grid(SPARSE)
        want = entry.builder(0.3).eval_grid(SPARSE) - entry.base.product_grid(SPARSE)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_base_inverses_validate(self):
        gk_diagonal().base.validate(PROBE_GRID)


class TestDiagonalShowcase:
    def test_indices_and_stability(self):
        entry = gk_diagonal()
        assert entry.base.indices.kappa == (1, -1)

    def test_det_is_one(self):
        vals = gk_diagonal().matrix.eval_grid(SPARSE)
        assert np.max(np.abs(np.linalg.det(vals) - 1.0)) < 1e-12


class TestSingularWitness:
    def test_canonical_factors_multiply_back(self):
        entry, fac = gk_singular(0.5)
        prod = matmul_grid(fac.minus, fac.plus, SPARSE)
        want = entry.matrix.eval_grid(SPARSE)
        assert np.max(np.abs(prod - want)) < 1e-12

    def test_distance_to_base(self):
        entry, _ = gk_singular(0.25)
        diff = combine(entry.matrix, gk_diagonal().matrix, "sub")
        assert abs(sup_norm(diff, PROBE_GRID) - 0.25) < 1e-14

    def test_factor_norms_blow_up(self):
        norms = {}
        for eps in (0.1, 0.01):
            _, fac = gk_singular(eps)
            norms[eps] = max(sup_norm(fac.minus, PROBE_GRID),
                             sup_norm(fac.plus, PROBE_GRID))
        assert norms[0.01] >= 5.0 * norms[0.1]

    def test_eps_zero_rejected(self):
        with pytest.raises(ValueError):
            gk_singular(0.0)


class TestSolvableFamily:
    def test_builder_at_zero_is_diagonal_base(self):
        entry = example_solvable(0.1)
        got = entry.builder(0.0).eval_grid(SPARSE)
        want = gk_diagonal().matrix.eval_grid(SPARSE)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_perturbation_linear_in_eps(self):
        from whfactor import DEFAULT_GRID
        sups = {eps: sup_norm(example_solvable(eps).perturbation(eps), DEFAULT_GRID)
                for eps in (0.1, 0.01)}
        ratio = sups[0.1] / sups[0.01]
        assert 5.0 < ratio < 20.0  # within 2x of linear scaling

    def test_perturbation_tail_decay(self):
        N = example_solvable(0.1).perturbation(0.1)
        for i in range(2):
            for j in range(2):
                assert N.entry(i, j).decay_order == 1.0
                assert N.entry(i, j).check_decay()

    def test_difference_confined_to_corner_entry(self):
        eps = 0.1
        G = example_solvable(eps).builder(eps)
        H = example_unsolvable(eps).builder(eps)
        diff = combine(H, G, "sub").eval_grid(SPARSE)
        assert np.max(np.abs(diff[:, [0, 1, 1], [0, 0, 1]])) < 1e-14
        assert np.max(np.abs(diff[:, 0, 1])) > 1e-3

    def test_difference_size_linear_in_eps(self):
        sups = {}
        for eps in (0.1, 0.01):
            G = example_solvable(eps).builder(eps)
            H = example_unsolvable(eps).builder(eps)
            sups[eps] = sup_norm(combine(H, G, "sub"), PROBE_GRID)
        assert 5.0 < sups[0.1] / sups[0.01] < 20.0


class TestStepOneOracle:
    def test_frozen_spot_value(self):
        # (2,2) entry of the plus correction at x = 0, eps = 0.1
        _, op = oracle_first_step(0.1, 0.0)
        got = op.entry(1, 1)(0.0)
        E = np.exp(-0.1)
        want = 8.0 * (1.0 - E) - (4.0 * (1.0 - E) + 0.4 * E)
        assert abs(want - 0.0187154) < 1e-6  # frozen from the closed form
        assert abs(got - want) < 1e-12

    def test_boundary_identity_of_printed_forms(self):
        # Lambda+ N1+ + N1- Lambda- must reproduce the perturbation exactly
        eps = 0.1
        om, op = oracle_first_step(eps, c21=0.7 - 0.2j)
        N = example_solvable(eps).perturbation(eps)
        idx = PartialIndices((1, -1))
        lam_p = lambda_entry_values(idx, "plus", SPARSE)
        lam_m = lambda_entry_values(idx, "minus", SPARSE)
        lhs = (lam_p[:, :, None] * op.eval_grid(SPARSE)
               + om.eval_grid(SPARSE) * lam_m[:, None, :])
        assert np.max(np.abs(lhs - N.eval_grid(SPARSE))) < 1e-8

    def test_eps_zero_vanishes(self):
        om, op = oracle_first_step(0.0, 0.0)
        assert np.max(np.abs(om.eval_grid(SPARSE))) < 1e-14
        assert np.max(np.abs(op.eval_grid(SPARSE))) < 1e-14

    def test_constants_closed_forms(self):
        cc = step1_constants(0.1)
        assert abs(cc["c11"] + 0.74258530) < 1e-7
        assert abs(cc["c22"] - 0.74258530) < 1e-7
        assert abs(cc["c12"] - 1.11387794) < 1e-7


class TestSingularPerturbation:
    def test_reproduces_constant_bump(self):
        got = singular_perturbation(gk_diagonal().base, 0.5, 1)
        want, _ = gk_singular(0.5)
        assert np.max(np.abs(got.eval_grid(SPARSE) - want.matrix.eval_grid(SPARSE))) < 1e-14

    def test_distance_scales_with_eps_power(self):
        base = gk_diagonal().base
        for k in (1, 2):
            for eps in (0.1, 0.05):
                pert = singular_perturbation(base, eps, k)
                diff = combine(pert, gk_diagonal().matrix, "sub")
                assert abs(sup_norm(diff, PROBE_GRID) - eps ** k) < 1e-12

    def test_stable_indices_rejected(self):
        base = BaseFactorization.with_identity_outer(PartialIndices((0, 0)))
        with pytest.raises(NoUnstablePair):
            singular_perturbation(base, 0.1, 1)

    def test_general_base_sandwich(self):
        idx = PartialIndices((2, 0, -1))
        base = BaseFactorization.with_identity_outer(idx)
        pert = singular_perturbation(base, 0.2, 2)
        lam = build_lambda(idx, "full")
        diff = combine(pert, lam, "sub").eval_grid(SPARSE)
        assert np.max(np.abs(diff[:, 0, 2] - 0.04)) < 1e-14
        diff[:, 0, 2] = 0.0
        assert np.max(np.abs(diff)) < 1e-14
