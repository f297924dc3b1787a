import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_oracle, random_tt
from ttquad.exceptions import DimensionError, SizeError
from ttquad.tensor_train import (
    TTTensor,
    tt_contract_rank1,
    tt_diff_norm,
    tt_diff_norm_orth,
    tt_dot,
    tt_element,
    tt_elements,
    tt_from_rank1,
    tt_norm,
    tt_to_dense,
)


@st.composite
def tt_instances(draw, max_d=4, max_n=4, max_r=3):
    d = draw(st.integers(1, max_d))
    shape = [draw(st.integers(1, max_n)) for _ in range(d)]
    ranks = [1] + [draw(st.integers(1, max_r)) for _ in range(d - 1)] + [1]
    seed = draw(st.integers(0, 2**32 - 1))
    return random_tt(np.random.default_rng(seed), shape, ranks)


class TestTTTensorValidation:
    def test_ranks_and_shape(self, rng):
        tt = random_tt(rng, (3, 4, 2), (1, 2, 3, 1))
        assert tt.shape == (3, 4, 2)
        assert tt.ranks == (1, 2, 3, 1)
        assert tt.ndim == 3

    def test_boundary_ranks_must_be_one(self):
        with pytest.raises(DimensionError):
            TTTensor([np.ones((2, 3, 1))])
        with pytest.raises(DimensionError):
            TTTensor([np.ones((1, 3, 2))])

    def test_adjacent_ranks_must_agree(self):
        with pytest.raises(DimensionError):
            TTTensor([np.ones((1, 2, 2)), np.ones((3, 2, 1))])

    def test_cores_must_be_three_dimensional(self):
        with pytest.raises(DimensionError):
            TTTensor([np.ones((2, 2))])

    def test_empty_core_list(self):
        with pytest.raises(DimensionError):
            TTTensor([])


class TestElement:
    def test_rank_one_separable(self):
        a = np.array([2.0, -1.0, 0.5])
        b = np.array([3.0, 4.0])
        tt = TTTensor([a.reshape(1, 3, 1), b.reshape(1, 2, 1)])
        for i, j in itertools.product(range(3), range(2)):
            assert tt_element(tt, (i, j)) == a[i] * b[j]

    def test_all_ones(self):
        tt = TTTensor([np.ones((1, 3, 1)), np.ones((1, 2, 1)), np.ones((1, 5, 1))])
        assert tt_element(tt, (2, 1, 4)) == 1.0

    def test_matches_dense_oracle(self, rng):
        tt = random_tt(rng, (3, 4, 2), (1, 2, 3, 1))
        ref = dense_oracle(tt.cores)
        for idx in itertools.product(range(3), range(4), range(2)):
            assert tt_element(tt, idx) == pytest.approx(ref[idx], rel=1e-13, abs=1e-14)

    def test_out_of_range_names_mode(self, rng):
        tt = random_tt(rng, (3, 4, 2), (1, 2, 3, 1))
        with pytest.raises(IndexError, match="mode 1"):
            tt_element(tt, (0, 4, 0))

    def test_wrong_index_length(self, rng):
        tt = random_tt(rng, (3, 4), (1, 2, 1))
        with pytest.raises((IndexError, DimensionError)):
            tt_element(tt, (0,))

    def test_batched_elements_agree(self, rng):
        tt = random_tt(rng, (3, 4, 2), (1, 2, 3, 1))
        idx = np.array(list(itertools.product(range(3), range(4), range(2))))
        batch = tt_elements(tt, idx)
        single = np.array([tt_element(tt, row) for row in idx])
        np.testing.assert_allclose(batch, single, rtol=1e-14, atol=1e-15)


class TestDot:
    def test_rank_one_separable_sum(self, rng):
        u = [rng.standard_normal(n) for n in (3, 4, 2)]
        v = [rng.standard_normal(n) for n in (3, 4, 2)]
        expected = np.prod([np.dot(a, b) for a, b in zip(u, v)])
        assert tt_dot(tt_from_rank1(u), tt_from_rank1(v)) == pytest.approx(expected, rel=1e-13)

    def test_all_ones_counts_entries(self):
        ones = tt_from_rank1([[1, 1], [1, 1]])
        assert tt_dot(ones, ones) == 4.0

    def test_matches_dense(self, rng):
        a = random_tt(rng, (3, 3, 3), (1, 2, 2, 1))
        b = random_tt(rng, (3, 3, 3), (1, 2, 1, 1))
        expected = np.sum(dense_oracle(a.cores) * dense_oracle(b.cores))
        assert tt_dot(a, b) == pytest.approx(expected, rel=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            tt_dot(random_tt(rng, (3, 3), (1, 2, 1)), random_tt(rng, (3, 2), (1, 2, 1)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetry(self, seed):
        r = np.random.default_rng(seed)
        a = random_tt(r, (2, 3, 4), (1, 2, 3, 1))
        b = random_tt(r, (2, 3, 4), (1, 3, 2, 1))
        assert tt_dot(a, b) == pytest.approx(tt_dot(b, a), rel=1e-12, abs=1e-300)


class TestNorm:
    def test_all_ones(self):
        assert tt_norm(tt_from_rank1([[1, 1], [1, 1]])) == 2.0

    def test_zero_tensor(self):
        assert tt_norm(TTTensor.zeros((3, 2, 5))) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(tt_instances())
    def test_matches_dense_frobenius(self, tt):
        dense = dense_oracle(tt.cores)
        assert tt_norm(tt) == pytest.approx(np.linalg.norm(dense.ravel()), rel=1e-12)
        assert tt_norm(tt) ** 2 == pytest.approx(tt_dot(tt, tt), rel=1e-12)


class TestDiffNorm:
    def test_self_difference_is_zero(self, rng):
        a = random_tt(rng, (3, 4, 2), (1, 2, 3, 1))
        assert tt_diff_norm(a, a) <= 1e-10 * tt_norm(a)
        assert tt_diff_norm_orth(a, a) <= 1e-14 * tt_norm(a)

    def test_against_zero(self, rng):
        a = random_tt(rng, (3, 4, 2), (1, 2, 3, 1))
        z = TTTensor.zeros(a.shape)
        assert tt_diff_norm(a, z) == pytest.approx(tt_norm(a), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_dense(self, seed):
        r = np.random.default_rng(seed)
        a = random_tt(r, (3, 2, 4), (1, 2, 2, 1))
        b = random_tt(r, (3, 2, 4), (1, 3, 1, 1))
        expected = np.linalg.norm((dense_oracle(a.cores) - dense_oracle(b.cores)).ravel())
        assert tt_diff_norm(a, b) == pytest.approx(expected, rel=1e-10)
        assert tt_diff_norm_orth(a, b) == pytest.approx(expected, rel=1e-12)

    def test_orthogonalized_form_resolves_small_differences(self, rng):
        a = random_tt(rng, (4, 4, 4), (1, 3, 3, 1))
        b = TTTensor([c.copy() for c in a.cores])
        b.cores[1][0, 0, 0] += 1e-11
        expected = np.linalg.norm((dense_oracle(a.cores) - dense_oracle(b.cores)).ravel())
        assert tt_diff_norm_orth(a, b) == pytest.approx(expected, rel=1e-4)

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            tt_diff_norm(random_tt(rng, (3, 3), (1, 2, 1)), random_tt(rng, (3, 2), (1, 2, 1)))


class TestRankOne:
    def test_vector(self):
        tt = tt_from_rank1([[3.0]])
        assert tt.shape == (1,)
        assert tt_to_dense(tt).tolist() == [3.0]

    def test_all_ones_matrix(self):
        np.testing.assert_array_equal(tt_to_dense(tt_from_rank1([[1, 1], [1, 1]])), np.ones((2, 2)))

    def test_product_at_random_indices(self, rng):
        vals = [rng.standard_normal(n) for n in (4, 3, 5)]
        tt = tt_from_rank1(vals)
        for _ in range(10):
            idx = [int(rng.integers(len(v))) for v in vals]
            expected = vals[0][idx[0]] * vals[1][idx[1]] * vals[2][idx[2]]
            assert tt_element(tt, idx) == pytest.approx(expected, rel=1e-15)

    def test_empty_axis_list(self):
        with pytest.raises(DimensionError):
            tt_from_rank1([])


class TestContractRankOne:
    def test_ones_with_normalized_weights(self):
        w = [np.full(4, 0.25), np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5])]
        assert tt_contract_rank1(tt_from_rank1([np.ones(len(x)) for x in w]), w) == pytest.approx(1.0, rel=1e-15)

    def test_zero_axis_values(self, rng):
        tt = random_tt(rng, (3, 4), (1, 2, 1))
        assert tt_contract_rank1(tt, [np.zeros(3), np.zeros(4)]) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(tt_instances())
    def test_equals_dot_with_rank_one(self, tt):
        r = np.random.default_rng(len(tt.shape))
        w = [r.random(n) for n in tt.shape]
        assert tt_contract_rank1(tt, w) == pytest.approx(tt_dot(tt, tt_from_rank1(w)), rel=1e-12, abs=1e-13)

    def test_shape_mismatch(self, rng):
        tt = random_tt(rng, (3, 4), (1, 2, 1))
        with pytest.raises(DimensionError):
            tt_contract_rank1(tt, [np.ones(3), np.ones(5)])
        with pytest.raises(DimensionError):
            tt_contract_rank1(tt, [np.ones(3)])


class TestToDense:
    def test_outer_product(self):
        np.testing.assert_array_equal(tt_to_dense(tt_from_rank1([[1, 2], [3, 4]])), [[3, 4], [6, 8]])

    @settings(max_examples=40, deadline=None)
    @given(tt_instances())
    def test_round_trip_exhaustive(self, tt):
        dense = tt_to_dense(tt)
        assert dense.shape == tt.shape
        for idx in itertools.product(*(range(n) for n in tt.shape)):
            assert dense[idx] == pytest.approx(tt_element(tt, idx), rel=1e-13, abs=1e-14)

    def test_cap(self):
        with pytest.raises(SizeError):
            tt_to_dense(TTTensor.zeros((100, 100, 101)))
        with pytest.raises(SizeError):
            tt_to_dense(TTTensor.zeros((10, 10)), cap=99)
