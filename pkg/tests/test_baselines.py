import itertools

import numpy as np
import pytest

from ttquad.baselines import dense_weighted_sum, monte_carlo, random_exact_tt
from ttquad.exceptions import DimensionError, NonFiniteError, SizeError
from ttquad.quadrature import make_grid
from ttquad.tensor_train import TTTensor, tt_contract_rank1, tt_element, tt_to_dense


class TestDenseWeightedSum:
    def test_constant_one(self):
        assert abs(dense_weighted_sum(lambda x: np.ones(x.shape[0]), make_grid(3, nodes=7)) - 1.0) <= 1e-14

    def test_linear_two_nodes(self):
        assert abs(dense_weighted_sum(lambda x: x[:, 0], make_grid(1, nodes=2)) - 0.5) <= 1e-15

    def test_monomial(self):
        val = dense_weighted_sum(lambda x: x[:, 0] ** 3 * x[:, 1] ** 2, make_grid(2, nodes=2))
        assert abs(val - 1 / 12) <= 1e-13

    def test_cap(self):
        with pytest.raises(SizeError):
            dense_weighted_sum(lambda x: x[:, 0], make_grid(4, nodes=10), cap=9999)

    def test_nonfinite(self):
        grid = make_grid(1, nodes=3)
        with pytest.raises(NonFiniteError):
            dense_weighted_sum(lambda x: 1 / (x[:, 0] - 0.5), grid)
        val = dense_weighted_sum(lambda x: 1 / (x[:, 0] - 0.5), grid, replace_nonfinite=True)
        assert np.isfinite(val)

    def test_chunking_independent(self):
        grid = make_grid(5, nodes=11)  # 161051 points, three chunks
        f = lambda x: np.cos(x @ np.arange(1, 6))  # noqa: E731
        total = dense_weighted_sum(f, grid)
        # brute force over the same points in one shot, compensated
        idx = np.array(list(itertools.product(range(11), repeat=5)))
        w = np.prod([grid.weights[k][idx[:, k]] for k in range(5)], axis=0)
        import math

        assert total == math.fsum((f(grid.points(idx)) * w).tolist())

    def test_equals_full_rank_tt_contraction(self, rng):
        grid = make_grid(3, nodes=[3, 4, 2], substitution="power:2")
        f = lambda x: np.exp(x[:, 0] - x[:, 1] * x[:, 2])  # noqa: E731
        idx = np.array(list(itertools.product(range(3), range(4), range(2))))
        dense = f(grid.points(idx)).reshape(3, 4, 2)
        # exact TT by successive unfolding SVDs with full ranks
        cores, rest, r = [], dense, 1
        for n in (3, 4):
            U, s, Vt = np.linalg.svd(rest.reshape(r * n, -1), full_matrices=False)
            cores.append(U.reshape(r, n, -1))
            r = U.shape[1]
            rest = s[:, None] * Vt
        cores.append(rest.reshape(r, 2, 1))
        tt = TTTensor(cores)
        assert tt_contract_rank1(tt, grid.weights) == pytest.approx(dense_weighted_sum(f, grid), rel=1e-10)


class TestMonteCarlo:
    def test_constant_is_exact(self):
        est, se = monte_carlo(lambda x: np.full(x.shape[0], 3.0), 100, box=[(0, 2), (1, 2)])
        assert est == 6.0 and se == 0.0

    def test_linear(self):
        est, se = monte_carlo(lambda x: x[:, 0], 10**6, seed=3, dim=1)
        assert abs(est - 0.5) <= 4 * se

    def test_log_two_dims(self):
        est, se = monte_carlo(lambda x: np.log(x[:, 0] * x[:, 1]), 10**6, seed=5, dim=2)
        assert abs(est + 2) <= 5 * se

    def test_standard_error_formula(self):
        f = lambda x: x[:, 0] ** 2  # noqa: E731
        est, se = monte_carlo(f, 1000, seed=9, box=[(0, 2)])
        x = 2 * np.random.default_rng(9).random((1000, 1))
        vals = f(x)
        assert est == pytest.approx(2 * vals.mean(), rel=1e-14)
        assert se == pytest.approx(2 * vals.std(ddof=1) / np.sqrt(1000), rel=1e-12)

    def test_rate(self):
        f = lambda x: np.log(x[:, 0] * x[:, 1])  # noqa: E731
        med = []
        for n in (1000, 16000):
            med.append(np.median([abs(monte_carlo(f, n, seed=s, dim=2)[0] + 2) for s in range(32)]))
        assert med[0] / med[1] >= 2

    def test_errors(self):
        with pytest.raises(ValueError):
            monte_carlo(lambda x: x[:, 0], 0, dim=1)
        with pytest.raises(DimensionError):
            monte_carlo(lambda x: x[:, 0], 10, box=[(1, 1)])
        with pytest.raises(NonFiniteError):
            monte_carlo(lambda x: np.full(x.shape[0], np.inf), 10, dim=1)


class TestRandomExactTT:
    def test_rank_one_separable(self, rng):
        tt, _ = random_exact_tt((3, 4, 2), (1, 1, 1, 1), rng)
        dense = tt_to_dense(tt)
        assert np.linalg.matrix_rank(dense.reshape(3, 8)) == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_unfolding_ranks(self, seed):
        rng = np.random.default_rng(seed)
        shape, ranks = (4, 3, 5, 3), (1, 3, 4, 3, 1)
        tt, _ = random_exact_tt(shape, ranks, rng)
        dense = tt_to_dense(tt)
        for k in range(1, 4):
            s = np.linalg.svd(dense.reshape(int(np.prod(shape[:k])), -1), compute_uv=False)
            assert int(np.sum(s > 1e-8 * s[0])) == ranks[k]

    def test_black_box_matches(self, rng):
        tt, A = random_exact_tt((3, 2, 4), (1, 2, 2, 1), rng)
        idx = np.array(list(itertools.product(range(3), range(2), range(4))))
        np.testing.assert_allclose(A(idx), [tt_element(tt, i) for i in idx], rtol=1e-14, atol=1e-15)

    def test_invalid_chain(self, rng):
        for shape, ranks in [((3, 3), (1, 4, 1)), ((3, 3), (2, 2, 1)), ((3, 3), (1, 2)), ((3, 3, 3), (1, 3, 4, 1))]:
            with pytest.raises(DimensionError):
                random_exact_tt(shape, ranks, rng)
