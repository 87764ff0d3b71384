"""
Negative-eigenvalue counts of symmetric matrices via Sylvester's law of inertia.

Three factorization routes, all counting eigenvalues below −τ with the kernel
shift τ = KERNEL_SHIFT·max|A| (the Neumann constants sit at 0 and must not be
counted):

* tridiagonal LDLᵀ (Sturm sequence of pivots), O(n);
* block-tridiagonal LDLᵀ: inertia(A) = Σ_k inertia(S_k) over the Schur
  complements S_k = A_kk − B_{k−1}ᵀ S_{k−1}⁻¹ B_{k−1} (Haynsworth additivity);
* dense symmetric-indefinite (Bunch–Kaufman) LDLᵀ via ``scipy.linalg.ldl``,
  reading the inertia off the 1×1 and 2×2 pivot blocks.

The dense spectral count (``scipy.linalg.eigvalsh``) is the oracle and the
fallback when a factorization breaks down.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from config import CONFIG
from errors import InertiaError

logger = logging.getLogger(__name__)


def max_abs(A) -> float:
    if sp.issparse(A):
        return float(abs(A).max()) if A.nnz else 0.0
    A = np.asarray(A)
    return float(np.max(np.abs(A))) if A.size else 0.0


def kernel_shift(scale: float, shift: Optional[float] = None) -> float:
    return CONFIG.KERNEL_SHIFT * scale if shift is None else shift


def negative_count_spectral(A, shift: Optional[float] = None) -> int:
    """Dense eigensolver count of eigenvalues < −τ."""
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if dense.size == 0:
        return 0
    tau = kernel_shift(max_abs(dense), shift)
    return int(np.sum(scipy.linalg.eigvalsh(dense) < -tau))


def _pivot_inertia(D: np.ndarray) -> int:
    """Negative eigenvalues of the block-diagonal pivot matrix of an LDLᵀ factorization."""
    n = D.shape[0]
    negatives, k = 0, 0
    while k < n:
        if k + 1 < n and D[k + 1, k] != 0.0:
            a, b, c = D[k, k], D[k + 1, k], D[k + 1, k + 1]
            det = a * c - b * b
            if det < 0:
                negatives += 1
            elif a + c < 0:
                negatives += 2
            k += 2
        else:
            if D[k, k] < 0:
                negatives += 1
            k += 1
    return negatives


def negative_count_ldl(A, shift: Optional[float] = None) -> int:
    """Bunch–Kaufman LDLᵀ inertia of a dense symmetric matrix."""
    dense = A.toarray() if sp.issparse(A) else np.array(A, dtype=float)
    n = dense.shape[0]
    if n == 0:
        return 0
    tau = kernel_shift(max_abs(dense), shift)
    dense[np.diag_indices(n)] += tau
    _, D, _ = scipy.linalg.ldl(dense, lower=True)
    return _pivot_inertia(D)


def negative_count_tridiagonal(diag: Sequence[float], off: Sequence[float],
                               shift: Optional[float] = None) -> int:
    """Sturm count: number of negative pivots of the LDLᵀ of a symmetric tridiagonal matrix."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    n = diag.size
    if n == 0:
        return 0
    scale = max(float(np.max(np.abs(diag))), float(np.max(np.abs(off))) if off.size else 0.0)
    tau = kernel_shift(scale, shift)
    tiny = np.finfo(float).eps * max(scale, np.finfo(float).tiny)
    off_sq = (off * off).tolist()
    shifted = (diag + tau).tolist()

    negatives = 0
    pivot = shifted[0]
    for i in range(n):
        if i > 0:
            pivot = shifted[i] - off_sq[i - 1] / pivot
        if pivot == 0.0:
            pivot = tiny
        if pivot < 0:
            negatives += 1
    return negatives


def negative_count_block_tridiagonal(diag_blocks: Sequence[np.ndarray], off_blocks: Sequence[np.ndarray],
                                     shift: Optional[float] = None) -> int:
    """Inertia by block LDLᵀ; off_blocks[k] couples block k to block k+1."""
    if len(diag_blocks) == 0:
        return 0
    scale = max(max_abs(b) for b in list(diag_blocks) + list(off_blocks))
    tau = kernel_shift(scale, shift)
    negatives = 0
    schur = None
    for k, block in enumerate(diag_blocks):
        current = np.array(block, dtype=float)
        current[np.diag_indices(current.shape[0])] += tau
        if k > 0:
            coupling = off_blocks[k - 1]
            current -= coupling.T @ scipy.linalg.solve(schur, coupling, assume_a='sym')
            current = 0.5 * (current + current.T)
        eigenvalues = scipy.linalg.eigvalsh(current)
        if np.any(eigenvalues == 0.0):
            raise np.linalg.LinAlgError(f"singular Schur complement at block {k}")
        negatives += int(np.sum(eigenvalues < 0))
        schur = current
    return negatives


def split_blocks(A, block: int) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal and super-diagonal blocks of a block-tridiagonal matrix.

    Returns stacked arrays of shape (m, block, block) and (m−1, block, block).
    """
    A = sp.coo_matrix(A)
    n = A.shape[0]
    if n % block:
        raise InertiaError(f"matrix size {n} is not a multiple of block size {block}")
    count = n // block
    bi, bj = A.row // block, A.col // block
    if np.any(np.abs(bi - bj) > 1):
        raise InertiaError(f"matrix is not block tridiagonal for block size {block}")
    diag_blocks = np.zeros((count, block, block))
    off_blocks = np.zeros((max(count - 1, 0), block, block))
    on = bi == bj
    np.add.at(diag_blocks, (bi[on], A.row[on] % block, A.col[on] % block), A.data[on])
    up = bj == bi + 1
    np.add.at(off_blocks, (bi[up], A.row[up] % block, A.col[up] % block), A.data[up])
    return diag_blocks, off_blocks


def assemble_blocks(diag_blocks: np.ndarray, off_blocks: np.ndarray) -> sp.csr_matrix:
    """Inverse of split_blocks."""
    count = len(diag_blocks)
    grid = [[None] * count for _ in range(count)]
    for k in range(count):
        grid[k][k] = sp.csr_matrix(diag_blocks[k])
        if k + 1 < count:
            grid[k][k + 1] = sp.csr_matrix(off_blocks[k])
            grid[k + 1][k] = sp.csr_matrix(off_blocks[k].T)
    return sp.bmat(grid, format='csr')


def _fallback(A, tau: float, error: Exception) -> int:
    n = A.shape[0]
    logger.warning(f"⚠️ factorization broke down ({error}), trying the dense spectral count")
    if n <= CONFIG.DENSE_LIMIT:
        return negative_count_spectral(A, tau)
    raise InertiaError(f"factorization failed for size {n} > {CONFIG.DENSE_LIMIT}: {error}") from error


def count_negative_blocks(diag_blocks: np.ndarray, off_blocks: np.ndarray,
                          shift: Optional[float] = None) -> int:
    """Negative count of a block-tridiagonal matrix given by its stacked blocks."""
    if len(diag_blocks) == 0:
        return 0
    scale = max(max_abs(diag_blocks), max_abs(off_blocks))
    tau = kernel_shift(scale, shift)
    try:
        if diag_blocks.shape[1] == 1:
            return negative_count_tridiagonal(diag_blocks[:, 0, 0], off_blocks[:, 0, 0], tau)
        return negative_count_block_tridiagonal(diag_blocks, off_blocks, tau)
    except (np.linalg.LinAlgError, ValueError) as e:
        return _fallback(assemble_blocks(diag_blocks, off_blocks), tau, e)


def count_negative_matrix(A, block: Optional[int] = None, shift: Optional[float] = None) -> int:
    """Negative count of a symmetric (sparse or dense) matrix, picking the cheapest exact route."""
    n = A.shape[0]
    if n == 0:
        return 0
    tau = kernel_shift(max_abs(A), shift)
    if block is not None:
        diag_blocks, off_blocks = split_blocks(A, block)
        return count_negative_blocks(diag_blocks, off_blocks, tau)
    if n > CONFIG.DENSE_LIMIT:
        raise InertiaError(f"no block structure given for a matrix of size {n} > {CONFIG.DENSE_LIMIT}")
    try:
        return negative_count_ldl(A, tau)
    except (np.linalg.LinAlgError, ValueError) as e:
        return _fallback(A, tau, e)
