import numpy as np
import pytest

from anchorgae.numerics import (
    make_rng,
    matmul,
    pairwise_sq_dist,
    spawn_rngs,
    sym_eig_topc,
)
from oracles import matmul_loops, pairwise_loops


def test_matmul_identity():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(np.eye(2), m), m)


def test_matmul_hand_case():
    out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0], [1.0]]))
    assert np.array_equal(out, np.array([[3.0], [7.0]]))


def test_matmul_matches_triple_loop_oracle():
    rng = make_rng(11)
    a = rng.normal(size=(5, 7))
    b = rng.normal(size=(7, 3))
    assert np.max(np.abs(matmul(a, b) - matmul_loops(a, b))) < 1e-12


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(np.zeros((2, 3)), np.zeros((2, 2)))


def test_matmul_associativity():
    rng = make_rng(12)
    for _ in range(10):
        a = rng.normal(size=(4, 5))
        b = rng.normal(size=(5, 6))
        c = rng.normal(size=(6, 3))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        assert np.max(np.abs(left - right)) < 1e-10


def test_pairwise_three_four_five():
    out = pairwise_sq_dist(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]))
    assert out.shape == (1, 1)
    assert out[0, 0] == 25.0


def test_pairwise_self_distance_diagonal_is_zero():
    m = make_rng(13).normal(size=(9, 5)) * 50.0
    d = pairwise_sq_dist(m, m)
    assert np.array_equal(np.diagonal(d), np.zeros(9))


def test_pairwise_matches_per_pair_oracle():
    rng = make_rng(14)
    a = rng.normal(size=(10, 4))
    b = rng.normal(size=(6, 4))
    assert np.max(np.abs(pairwise_sq_dist(a, b) - pairwise_loops(a, b))) < 1e-10


def test_pairwise_symmetry():
    rng = make_rng(15)
    a = rng.normal(size=(8, 3))
    b = rng.normal(size=(5, 3))
    assert np.max(np.abs(pairwise_sq_dist(a, b) - pairwise_sq_dist(b, a).T)) < 1e-12


def test_pairwise_nonnegative():
    rng = make_rng(16)
    a = rng.normal(size=(40, 6)) * 1e4  # cancellation-prone scale
    assert pairwise_sq_dist(a, a.copy()).min() >= 0.0


def test_pairwise_dim_mismatch():
    with pytest.raises(ValueError, match="feature dims"):
        pairwise_sq_dist(np.zeros((2, 3)), np.zeros((2, 4)))


def test_sym_eig_diagonal_case():
    vals, vecs = sym_eig_topc(np.diag([3.0, 2.0, 1.0]), 2)
    assert np.allclose(vals, [3.0, 2.0])
    assert np.allclose(np.abs(vecs), np.eye(3)[:, :2])


def test_sym_eig_identity():
    vals, vecs = sym_eig_topc(np.eye(4), 1)
    assert np.allclose(vals, [1.0])
    resid = np.eye(4) @ vecs[:, 0] - vals[0] * vecs[:, 0]
    assert np.linalg.norm(resid) < 1e-8


def test_sym_eig_residual_oracle_random():
    rng = make_rng(17)
    s = rng.normal(size=(8, 8))
    s = s + s.T
    vals, vecs = sym_eig_topc(s, 8)
    assert np.all(np.diff(vals) <= 1e-12)  # descending
    for j in range(8):
        assert np.linalg.norm(s @ vecs[:, j] - vals[j] * vecs[:, j]) < 1e-8


def test_sym_eig_orthonormal_vectors():
    rng = make_rng(18)
    s = rng.normal(size=(10, 10))
    s = s + s.T
    _, vecs = sym_eig_topc(s, 6)
    assert np.max(np.abs(vecs.T @ vecs - np.eye(6))) < 1e-8


def test_sym_eig_rejects_nonsymmetric():
    s = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="not symmetric"):
        sym_eig_topc(s, 1)


def test_sym_eig_rejects_c_too_large():
    with pytest.raises(ValueError, match="1 <= c"):
        sym_eig_topc(np.eye(3), 4)


def test_rng_same_seed_same_stream():
    a = make_rng(123).random(10_000)
    b = make_rng(123).random(10_000)
    assert np.array_equal(a, b)


def test_rng_different_seeds_differ():
    assert not np.array_equal(make_rng(1).random(16), make_rng(2).random(16))


def test_spawn_rngs_deterministic_and_independent():
    first = [r.random(5) for r in spawn_rngs(42, 3)]
    second = [r.random(5) for r in spawn_rngs(42, 3)]
    for a, b in zip(first, second):
        assert np.array_equal(a, b)
    assert not np.array_equal(first[0], first[1])
