"""Zero-fill incomplete LU on the CSR pattern of the input."""

from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp


class ZeroPivotError(ArithmeticError):
    def __init__(self, row: int):
        super().__init__(f"zero pivot in ILU(0) at row {row}")
        self.row = row


@numba.njit(cache=True)
def _ilu0(indptr, indices, data, diag_ptr, pivot_tol):
    n = indptr.shape[0] - 1
    lu = data.copy()
    pos = -np.ones(n, dtype=np.int64)
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            pos[indices[k]] = k
        for kk in range(indptr[i], diag_ptr[i]):
            k = indices[kk]
            dk = lu[diag_ptr[k]]
            lu[kk] /= dk
            lik = lu[kk]
            for jj in range(diag_ptr[k] + 1, indptr[k + 1]):
                p = pos[indices[jj]]
                if p >= 0:
                    lu[p] -= lik * lu[jj]
        for k in range(indptr[i], indptr[i + 1]):
            pos[indices[k]] = -1
        if abs(lu[diag_ptr[i]]) <= pivot_tol:
            return lu, i
    return lu, -1


@numba.njit(cache=True)
def _ilu0_solve(indptr, indices, lu, diag_ptr, b):
    n = b.shape[0]
    x = b.copy()
    for i in range(n):
        s = x[i]
        for k in range(indptr[i], diag_ptr[i]):
            s -= lu[k] * x[indices[k]]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(diag_ptr[i] + 1, indptr[i + 1]):
            s -= lu[k] * x[indices[k]]
        x[i] = s / lu[diag_ptr[i]]
    return x


class ILU0:
    """ILU(0) factors stored in one CSR array (unit-lower L below the diagonal)."""

    def __init__(self, matrix, pivot_tol: float = 0.0):
        M = sp.csr_matrix(matrix, dtype=float)
        if M.shape[0] != M.shape[1]:
            raise ValueError("ILU(0) needs a square matrix")
        M.sum_duplicates()
        M.sort_indices()
        n = M.shape[0]
        indptr, indices = M.indptr.astype(np.int64), M.indices.astype(np.int64)
        diag_ptr = np.empty(n, dtype=np.int64)
        for i in range(n):
            row = indices[indptr[i]:indptr[i + 1]]
            k = np.searchsorted(row, i)
            if k >= len(row) or row[k] != i:
                raise ZeroPivotError(i)
            diag_ptr[i] = indptr[i] + k
        lu, bad = _ilu0(indptr, indices, M.data.astype(float), diag_ptr, pivot_tol)
        if bad >= 0:
            raise ZeroPivotError(int(bad))
        self.shape = M.shape
        self._indptr, self._indices, self._diag = indptr, indices, diag_ptr
        self.lu = lu

    def apply(self, r: np.ndarray) -> np.ndarray:
        return _ilu0_solve(self._indptr, self._indices, self.lu, self._diag,
                           np.asarray(r, dtype=float))

    __call__ = apply

    def factors(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        M = sp.csr_matrix((self.lu, self._indices, self._indptr), shape=self.shape)
        L = sp.tril(M, -1, format="csr") + sp.identity(self.shape[0], format="csr")
        U = sp.triu(M, 0, format="csr")
        return L, U


def ilu0_build(matrix, pivot_tol: float = 0.0) -> ILU0:
    return ILU0(matrix, pivot_tol)


def ilu0_apply(factors: ILU0, r: np.ndarray) -> np.ndarray:
    return factors.apply(r)


class Jacobi:
    """Point Jacobi: r / diag(A), zero diagonal entries treated as 1."""

    def __init__(self, matrix):
        d = sp.csr_matrix(matrix).diagonal().astype(float)
        self.inv = np.where(d != 0, 1.0 / np.where(d != 0, d, 1.0), 1.0)

    def apply(self, r):
        return self.inv * r

    __call__ = apply
