import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imgraph import features as ft
from imgraph.errors import DimMismatch, ImageTooSmall
from oracles import correlation_feature_loop, kron_loop, standard_features_loop

A22 = np.array([[1.0, 2.0], [3.0, 4.0]])


def images(min_n=2, max_n=7):
    return st.integers(min_n, max_n).flatmap(
        lambda n: arrays(np.float64, (n, n), elements=st.floats(0, 1, width=32)))


class TestPixel:
    def test_row_column_product(self):
        assert ft.pixel_features(A22, "row").tolist() == [[1, 2], [3, 4]]
        assert ft.pixel_features(A22, "column").tolist() == [[1, 3], [2, 4]]
        assert ft.pixel_features(A22, "product").ravel().tolist() == [1, 2, 3, 4]

    def test_product_order_matches_node_index(self, rng):
        A = rng.random((4, 4))
        x = ft.pixel_features(A, "product")
        for i in range(4):
            for u in range(4):
                assert x[i * 4 + u, 0] == A[i, u]


class TestStandard:
    def test_constant(self):
        f = ft.standard_features(np.full((5, 5), 0.3))
        assert np.allclose(f[:, 0], 0.3)
        assert np.allclose(f[:, 1], 0)
        assert np.allclose(f[:, 2], 0)

    def test_horizontal_ramp_direction(self):
        N = 6
        A = np.tile(np.arange(N) / N, (N, 1))
        d = ft.standard_features(A)[:, 3].reshape(N, N)
        assert np.all(d[1:-1, 1:-1] == 0.0)

    def test_direction_range(self, rng):
        d = ft.standard_features(rng.random((8, 8)))[:, 3]
        assert (d > -math.pi).all() and (d <= math.pi).all()
        # -pi from atan2(-0.0, negative) must fold onto +pi
        A = np.tile(np.arange(5)[::-1] / 5, (5, 1))
        assert (ft.standard_features(A)[:, 3] > -math.pi).all()

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            ft.standard_features(np.zeros((2, 2)))

    def test_five_by_five_oracle(self, rng):
        A = rng.random((5, 5))
        assert np.allclose(ft.standard_features(A), standard_features_loop(A.tolist()), atol=1e-12)

    @given(images(3, 7))
    def test_matches_loop(self, A):
        assert np.allclose(ft.standard_features(A), standard_features_loop(A.tolist()), atol=1e-6)


class TestCorrelation:
    def test_two_by_two(self):
        assert ft.correlation_feature_matrix(A22, "row").tolist() == [[1.5, 2.0], [3.0, 3.5]]

    def test_zero(self):
        assert not ft.correlation_feature_matrix(np.zeros((4, 4)), "row").any()

    @given(images(2, 8))
    def test_lag_sum_oracle_and_closed_form(self, A):
        G = ft.correlation_feature_matrix(A, "row")
        assert np.allclose(G, correlation_feature_loop(A.tolist()), atol=1e-12)
        closed = A / 2 + A.mean(axis=0)[:, None] / 2
        assert np.allclose(G, closed, atol=1e-12)

    @given(images(2, 6))
    def test_column_axis_uses_transpose(self, A):
        assert np.allclose(ft.correlation_feature_matrix(A, "column"), ft.correlation_feature_matrix(A.T, "row"))


class TestGMean:
    def test_identity(self):
        assert np.array_equal(ft.g_mean(np.eye(3), np.eye(3)), np.eye(9))

    def test_random_2x2_loop(self, rng):
        Gr, Gc = rng.random((2, 2)), rng.random((2, 2))
        assert np.allclose(ft.g_mean(Gr, Gc), (kron_loop(Gr, Gc) + kron_loop(Gc, Gr)) / 2)

    @given(images(2, 5), images(2, 5))
    def test_argument_symmetric(self, Gr, Gc):
        if Gr.shape != Gc.shape:
            with pytest.raises(DimMismatch):
                ft.g_mean(Gr, Gc)
            return
        assert np.array_equal(ft.g_mean(Gr, Gc), ft.g_mean(Gc, Gr))

    @given(images(2, 6), st.integers(1, 5))
    def test_lazy_matches_dense(self, A, k):
        lazy = ft.correlation_features(A, lazy=True)
        dense = ft.correlation_features(A, lazy=False)
        W = np.random.default_rng(k).standard_normal((len(A) ** 2, k))
        assert lazy.shape == dense.shape
        assert np.allclose(lazy @ W, dense @ W, atol=1e-12)
        assert np.allclose(lazy.T @ W, dense.T @ W, atol=1e-12)
        assert np.allclose(lazy @ W[:, 0], dense @ W[:, 0], atol=1e-12)
        assert np.array_equal(np.asarray(lazy), dense)

    def test_real_size_feature_dim(self, rng):
        assert ft.correlation_features(rng.random((28, 28))).shape == (784, 784)

    def test_feature_image_is_diagonal(self, rng):
        A = rng.random((5, 5))
        img = ft.correlation_feature_image(A)
        assert np.allclose(img.ravel(), np.diag(ft.correlation_features(A, lazy=False)))


@given(images(3, 6))
def test_builders_deterministic(A):
    assert ft.standard_features(A).tobytes() == ft.standard_features(A.copy()).tobytes()
    assert ft.correlation_features(A, lazy=False).tobytes() == ft.correlation_features(A.copy(), lazy=False).tobytes()


def test_separable_gradient_matches_kernels(rng):
    A = rng.random((6, 6))
    win = ft._windows(A)
    f = ft.standard_features(A)
    gx = np.einsum("ab,abij->ij", ft.SOBEL_X, win)
    gy = np.einsum("ab,abij->ij", ft.SOBEL_Y, win)
    assert np.allclose(f[:, 2], np.hypot(gx, gy).ravel(), atol=1e-12)
