import numpy as np
import pytest

from ttreg import tensor_ops as top
from ttreg.tt_tensor import InterfacePair, TTTensor, clamp_ranks


def total_coefficients(dims, cap):
    ranks = clamp_ranks(dims, cap)
    return sum(ranks[k] * d * ranks[k + 1] for k, d in enumerate(dims))


def test_clamp_ranks_examples():
    assert clamp_ranks([2] * 10, 4) == (1, 2, 4, 4, 4, 4, 4, 4, 4, 2, 1)
    assert total_coefficients([2] * 10, 4) == 232
    assert total_coefficients([3] * 10, 2) == 108
    assert clamp_ranks([3] * 4, 4) == (1, 3, 4, 3, 1)
    assert total_coefficients([3] * 4, 4) == 90


@pytest.mark.parametrize(
    "cap,count",
    [(4, 232), (6, 424), (8, 680), (10, 888), (12, 1128), (14, 1400),
     (20, 1960), (25, 2280), (30, 2600), (40, 2728)],
)
def test_clamp_ranks_reproduces_published_counts_s2(cap, count):
    assert total_coefficients([2] * 10, cap) == count


@pytest.mark.parametrize(
    "cap,count",
    [(2, 108), (4, 378), (6, 774), (8, 1314), (10, 1920), (12, 2556), (14, 3288)],
)
def test_clamp_ranks_reproduces_published_counts_s3(cap, count):
    assert total_coefficients([3] * 10, cap) == count


@pytest.mark.parametrize(
    "dims,cap,count",
    [([2] * 4, 2, 24), ([2] * 4, 4, 40), ([3] * 4, 4, 90), ([3] * 4, 9, 180),
     ([4] * 4, 16, 544), ([5] * 4, 25, 1300)],
)
def test_clamp_ranks_fourth_order_budgets(dims, cap, count):
    assert total_coefficients(dims, cap) == count


def test_param_count():
    rng = np.random.default_rng(0)
    assert TTTensor.random([2] * 4, 2, rng).param_count() == 24
    assert TTTensor.random([5] * 4, 25, rng).param_count() == 1300
    rank_one = TTTensor.random([4, 3, 5], 1, rng)
    assert rank_one.param_count() == 4 + 3 + 5


def test_evaluate_entry_all_ones_rank_one():
    cores = [np.ones((1, 3, 1)) for _ in range(4)]
    tt = TTTensor(cores)
    assert tt.evaluate_entry((0, 1, 2, 0)) == 1.0


def test_evaluate_entry_matrix_case():
    rng = np.random.default_rng(1)
    g1 = rng.normal(size=(1, 3, 2))
    g2 = rng.normal(size=(2, 4, 1))
    tt = TTTensor([g1, g2])
    prod = g1[0] @ g2[:, :, 0]
    for i in range(3):
        for j in range(4):
            assert np.isclose(tt.evaluate_entry((i, j)), prod[i, j])


def test_to_dense_matches_entrywise_evaluation():
    rng = np.random.default_rng(2)
    for dims, cap in [((2, 3, 2), 2), ((3, 2, 4, 2), 3), ((2, 2, 2, 2), 2)]:
        tt = TTTensor.random(dims, cap, rng)
        dense = tt.to_dense()
        for idx in np.ndindex(*dims):
            assert np.isclose(dense[idx], tt.evaluate_entry(idx), atol=1e-12)


def test_to_dense_rank_one_is_outer_product():
    rng = np.random.default_rng(3)
    tt = TTTensor.random((3, 4, 2), 1, rng)
    fibers = [c[0, :, 0] for c in tt.cores]
    assert np.allclose(tt.to_dense(), top.outer(*fibers), atol=1e-12)


def test_to_dense_guard():
    tt = TTTensor.random([10] * 8, 2, np.random.default_rng(4))
    with pytest.raises(ValueError):
        tt.to_dense()


def test_interfaces_boundaries_are_ones():
    tt = TTTensor.random((2, 3, 2, 3), 2, np.random.default_rng(5))
    pair = tt.interfaces(0)
    assert isinstance(pair, InterfacePair)
    assert np.array_equal(pair.left, [[1.0]])
    assert np.array_equal(tt.interfaces(tt.order - 1).right, [[1.0]])


def test_interfaces_reconstruct_unfolding():
    # unfold_k(W) == G2 @ kron(left, right)^T at every position
    rng = np.random.default_rng(6)
    tt = TTTensor.random((2, 3, 2, 3), 3, rng)
    dense = tt.to_dense()
    for k in range(tt.order):
        left, right = tt.interfaces(k)
        g2 = top.unfold(tt.cores[k], 1)
        want = top.unfold(dense, k)
        got = g2 @ top.kronecker(left, right).T
        assert np.allclose(got, want, atol=1e-10)


def test_frobenius_identity_via_explicit_regularizer():
    rng = np.random.default_rng(7)
    tt = TTTensor.random((3, 2, 3, 2), 3, rng)
    w_norm_sq = np.linalg.norm(tt.to_dense()) ** 2
    for k in range(tt.order):
        left, right = tt.interfaces(k)
        l_mat = top.kronecker(np.eye(tt.dims[k]), top.kronecker(left, right))
        theta = top.unfold(tt.cores[k], 1).ravel()
        assert np.isclose(np.linalg.norm(l_mat @ theta) ** 2, w_norm_sq, rtol=1e-10)


def test_interface_grams_match_explicit_interfaces():
    rng = np.random.default_rng(8)
    tt = TTTensor.random((2, 3, 4, 2), 3, rng)
    for k in range(tt.order):
        left, right = tt.interfaces(k)
        gl, gr = tt.interface_grams(k)
        assert np.allclose(gl, left.T @ left, atol=1e-12)
        assert np.allclose(gr, right.T @ right, atol=1e-12)


def test_random_init_bounds_and_determinism():
    dims, cap = (3, 3, 3, 3), 4
    tt = TTTensor.random(dims, cap, 42)
    for c in tt.cores:
        delta = 1.0 / np.sqrt(c.size)
        assert np.all(np.abs(c) <= delta)
    tt2 = TTTensor.random(dims, cap, 42)
    for a, b in zip(tt.cores, tt2.cores):
        assert np.array_equal(a, b)
    tt3 = TTTensor.random(dims, cap, 43)
    assert any(not np.array_equal(a, b) for a, b in zip(tt.cores, tt3.cores))


def test_random_init_mean_statistics():
    tt = TTTensor.random((100, 1000), 100, 7)
    draws = tt.cores[1].ravel()  # 100*1000 uniform draws with one delta
    delta = 1.0 / np.sqrt(draws.size)
    three_sigma = 3.0 * delta / np.sqrt(3.0 * draws.size)
    assert abs(draws.mean()) < three_sigma


def test_save_load_round_trip(tmp_path):
    tt = TTTensor.random((2, 4, 3), 3, 11)
    path = tmp_path / "model.npz"
    tt.save(path)
    back = TTTensor.load(path)
    assert back.dims == tt.dims
    assert back.ranks == tt.ranks
    for a, b in zip(tt.cores, back.cores):
        assert np.array_equal(a, b)


def test_evaluate_entry_bounds():
    tt = TTTensor.random((2, 3), 2, np.random.default_rng(13))
    with pytest.raises(IndexError):
        tt.evaluate_entry((2, 0))
    with pytest.raises(IndexError):
        tt.evaluate_entry((0, 0, 0))


def test_clamp_ranks_rejects_bad_cap():
    with pytest.raises(ValueError):
        clamp_ranks((2, 2), 0)


def test_validation_rejects_bad_trains():
    with pytest.raises(ValueError):
        TTTensor([np.ones((1, 2, 2)), np.ones((3, 2, 1))])  # adjacency
    with pytest.raises(ValueError):
        TTTensor([np.ones((2, 2, 2)), np.ones((2, 2, 1))])  # boundary
    with pytest.raises(ValueError):
        TTTensor([np.ones((1, 2, 5)), np.ones((5, 2, 1))])  # rank bound (5 > 2)
