import numpy as np
import pytest
import scipy.sparse as sp

from config import CONFIG
from errors import InertiaError
from inertia import (assemble_blocks, count_negative_blocks, count_negative_matrix, negative_count_block_tridiagonal,
                     negative_count_ldl, negative_count_spectral, negative_count_tridiagonal, split_blocks)


def random_symmetric(rng, n):
    M = rng.standard_normal((n, n))
    return 0.5 * (M + M.T)


def random_block_tridiagonal(rng, count, block):
    diag = np.array([random_symmetric(rng, block) for _ in range(count)])
    off = rng.standard_normal((count - 1, block, block))
    return diag, off


def neumann_laplacian(n):
    main = np.full(n, 2.0)
    main[0] = main[-1] = 1.0
    return main, -np.ones(n - 1)


class TestSpectralCount:
    def test_diagonal(self):
        assert negative_count_spectral(np.diag([-3.0, -1.0, 0.0, 2.0])) == 2

    def test_kernel_not_counted(self):
        assert negative_count_spectral(np.array([[1.0, -1.0], [-1.0, 1.0]])) == 0

    def test_empty(self):
        assert negative_count_spectral(np.zeros((0, 0))) == 0


class TestLdlCount:
    def test_two_by_two_pivot(self):
        assert negative_count_ldl(np.array([[0.0, 1.0], [1.0, 0.0]])) == 1

    def test_matches_spectrum(self):
        rng = np.random.default_rng(0)
        for n in (1, 2, 5, 17, 60):
            A = random_symmetric(rng, n) + rng.uniform(-1, 1) * np.eye(n)
            assert negative_count_ldl(A) == negative_count_spectral(A)

    def test_sparse_input(self):
        A = sp.diags([[-1.0, 2.0, -3.0]], [0])
        assert negative_count_ldl(A) == 2


class TestTridiagonalCount:
    def test_neumann_kernel(self):
        main, off = neumann_laplacian(50)
        assert negative_count_tridiagonal(main, off) == 0

    def test_shifted_laplacian(self):
        main, off = neumann_laplacian(40)
        dense = np.diag(main) + np.diag(off, 1) + np.diag(off, -1) - 0.5 * np.eye(40)
        assert negative_count_tridiagonal(main - 0.5, off) == negative_count_spectral(dense)

    def test_zero_pivot_does_not_break(self):
        assert negative_count_tridiagonal([0.0, 0.0, -1.0], [1.0, 1.0], shift=0.0) == negative_count_spectral(
            np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, -1.0]]), 0.0)

    def test_empty(self):
        assert negative_count_tridiagonal([], []) == 0


class TestBlockTridiagonalCount:
    def test_matches_spectrum(self):
        rng = np.random.default_rng(1)
        for count, block in ((1, 3), (4, 2), (10, 5)):
            diag, off = random_block_tridiagonal(rng, count, block)
            A = assemble_blocks(diag, off)
            assert negative_count_block_tridiagonal(diag, off) == negative_count_spectral(A)

    def test_split_recovers_blocks(self):
        rng = np.random.default_rng(2)
        diag, off = random_block_tridiagonal(rng, 6, 3)
        got_diag, got_off = split_blocks(assemble_blocks(diag, off), 3)
        np.testing.assert_allclose(got_diag, diag)
        np.testing.assert_allclose(got_off, off)

    def test_split_rejects_wide_bandwidth(self):
        A = np.eye(6)
        A[0, 5] = A[5, 0] = 1.0
        with pytest.raises(InertiaError):
            split_blocks(A, 2)

    def test_split_rejects_size_mismatch(self):
        with pytest.raises(InertiaError):
            split_blocks(np.eye(5), 2)

    def test_singular_schur_falls_back(self):
        diag, off = np.zeros((3, 2, 2)), np.zeros((2, 2, 2))
        assert count_negative_blocks(diag, off, shift=0.0) == 0

    def test_fallback_limit(self, monkeypatch):
        monkeypatch.setattr(CONFIG, 'DENSE_LIMIT', 0)
        with pytest.raises(InertiaError):
            count_negative_blocks(np.zeros((3, 2, 2)), np.zeros((2, 2, 2)), shift=0.0)


class TestCountNegativeMatrix:
    def test_block_route(self):
        rng = np.random.default_rng(3)
        diag, off = random_block_tridiagonal(rng, 8, 4)
        A = assemble_blocks(diag, off)
        assert count_negative_matrix(A, block=4) == negative_count_spectral(A)

    def test_scalar_block_route(self):
        main, off = neumann_laplacian(30)
        A = sp.diags([off, main - 0.3, off], [-1, 0, 1], format='csr')
        assert count_negative_matrix(A, block=1) == negative_count_spectral(A)

    def test_dense_route(self):
        A = random_symmetric(np.random.default_rng(4), 30)
        assert count_negative_matrix(A) == negative_count_spectral(A)

    def test_large_without_blocks_rejected(self, monkeypatch):
        monkeypatch.setattr(CONFIG, 'DENSE_LIMIT', 2)
        with pytest.raises(InertiaError):
            count_negative_matrix(np.eye(3))
