import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imgraph import product_graph as pg
from imgraph.errors import DimMismatch
from oracles import cartesian_sum_loop, kron_loop, masked_product_loop

ONES2 = np.ones((2, 2), dtype=int)


def sym_binary(max_n=6):
    def sym(M):
        return np.triu(M) | np.triu(M, 1).T
    return st.integers(2, max_n).flatmap(
        lambda n: st.tuples(arrays(np.uint8, (n, n), elements=st.integers(0, 1)).map(sym),
                            arrays(np.uint8, (n, n), elements=st.integers(0, 1)).map(sym)))


def test_kron_examples():
    assert np.array_equal(pg.kron(np.eye(2), np.eye(2)), np.eye(4))
    swap = np.array([[0, 1], [1, 0]])
    assert pg.kron(swap, np.eye(2)).tolist() == [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]]


def test_kron_random_3x3(rng):
    A, B = rng.random((3, 3)), rng.random((3, 3))
    assert np.allclose(pg.kron(A, B), kron_loop(A, B))


def test_cartesian_sum_examples():
    assert not pg.cartesian_sum(np.zeros((3, 3)), np.zeros((3, 3))).any()
    assert pg.cartesian_sum(ONES2, ONES2).tolist() == [[2, 1, 1, 0], [1, 2, 0, 1], [1, 0, 2, 1], [0, 1, 1, 2]]


def test_masked_product_examples():
    assert pg.masked_product(ONES2, ONES2).tolist() == [[1, 1, 1, 0], [1, 1, 0, 1], [1, 0, 1, 1], [0, 1, 1, 1]]
    I3 = np.eye(3, dtype=int)
    assert np.array_equal(pg.masked_product(I3, I3), np.eye(9))


def test_backbone_needs_self_loops(rng):
    N = 4
    Ar = np.triu(rng.integers(0, 2, (N, N)), 1)
    Ar = Ar + Ar.T
    Ac = np.triu(rng.integers(0, 2, (N, N)), 1)
    Ac = Ac + Ac.T
    Ac[2, 2] = 1
    P = pg.masked_product(Ar, Ac)
    for i, j, u in itertools.product(range(N), range(N), range(N)):
        if i != j and P[i * N + u, j * N + u]:
            assert Ac[u, u]


def test_dim_mismatch():
    with pytest.raises(DimMismatch):
        pg.cartesian_sum(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(DimMismatch):
        pg.masked_product(np.zeros((2, 2)), np.zeros((3, 3)))


@given(sym_binary())
def test_cartesian_sum_closed_form(pair):
    Ar, Ac = pair
    assert np.array_equal(pg.cartesian_sum(Ar, Ac), cartesian_sum_loop(Ar.tolist(), Ac.tolist()))


@given(sym_binary(4))
def test_masked_product_oracle_and_support(pair):
    Ar, Ac = pair
    P = pg.masked_product(Ar, Ac)
    assert np.array_equal(P, masked_product_loop(Ar.tolist(), Ac.tolist()))
    assert np.array_equal(P, P.T)
    assert (pg.cartesian_sum(Ar, Ac)[P == 1] >= 1).all()
    M = pg.product_mask(Ar, Ac)
    assert np.array_equal(M, M.T)


@given(sym_binary(4), st.data())
def test_permutation_equivariance_shared_relabel(pair, data):
    Ar, Ac = pair
    N = len(Ar)
    perm = data.draw(st.permutations(range(N)))
    Pm = np.eye(N, dtype=int)[list(perm)]
    R = np.kron(Pm, Pm)
    lhs = pg.masked_product(Pm @ Ar @ Pm.T, Pm @ Ac @ Pm.T)
    assert np.array_equal(lhs, R @ pg.masked_product(Ar, Ac) @ R.T)


def test_independent_relabels_are_not_equivariant():
    # the A_c (x) A_r half of the mask moves with Q (x) P, so distinct row and
    # column relabelings do not commute with the product in general
    Ar = np.array([[1, 1, 1], [1, 0, 0], [1, 0, 0]])
    Ac = np.ones((3, 3), dtype=int)
    Pm = np.eye(3, dtype=int)
    Qm = np.eye(3, dtype=int)[[1, 0, 2]]
    R = np.kron(Pm, Qm)
    lhs = pg.masked_product(Pm @ Ar @ Pm.T, Qm @ Ac @ Qm.T)
    assert not np.array_equal(lhs, R @ pg.masked_product(Ar, Ac) @ R.T)
    # the unmasked Cartesian sum does commute
    assert np.array_equal(pg.cartesian_sum(Pm @ Ar @ Pm.T, Qm @ Ac @ Qm.T),
                          R @ pg.cartesian_sum(Ar, Ac) @ R.T)
