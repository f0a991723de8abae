"""Dense kernels: Cholesky with failure reporting, triangular solves, ID.

The interpolative decomposition here is the column-pivoted-QR realization:
pivot columns whose R-diagonal stays above eps * |R11| become skeletons, the
rest are expressed through them by a triangular solve.  With eps = 0 every
numerically independent column is kept (cutoff at machine precision scaled
by the matrix size), so downstream use amounts to exact elimination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import NotSpdError

_EPS = float(np.finfo(np.float64).eps)


def cholesky(S: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of symmetric S; NotSpdError on a pivot <= 0."""
    S = np.ascontiguousarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if S.shape[0] == 0:
        return np.zeros((0, 0))
    c, info = lapack.dpotrf(S, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotSpdError(pivot=info - 1)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of dpotrf")
    return c


def tri_solve(L: np.ndarray, B: np.ndarray, trans: bool = False,
              side: str = "left") -> np.ndarray:
    """Solve with a lower-triangular factor: L^-1 B, L^-T B, B L^-1 or B L^-T.

    side="left" solves op(L) X = B, side="right" solves X op(L) = B, where
    op is transposition when trans is set.  A zero diagonal entry propagates
    as NotSpdError.
    """
    L = np.asarray(L)
    B = np.asarray(B)
    if L.shape[0] != L.shape[1]:
        raise ValueError("triangular factor must be square")
    if L.shape[0] and np.any(np.diag(L) == 0.0):
        raise NotSpdError(pivot=int(np.argmin(np.abs(np.diag(L)))))
    if L.shape[0] == 0 or B.size == 0:
        return np.zeros_like(B, dtype=np.float64)
    if side == "left":
        return scipy.linalg.solve_triangular(L, B, lower=True,
                                             trans="T" if trans else "N")
    if side == "right":
        # X op(L) = B  <=>  op(L)^T X^T = B^T
        Xt = scipy.linalg.solve_triangular(L, B.T, lower=True,
                                           trans="N" if trans else "T")
        return Xt.T
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


@dataclass(frozen=True)
class IdResult:
    """Disjoint split of the input columns plus the interpolation matrix.

    skeleton and redundant are column indices into the input; interp has
    shape (len(skeleton), len(redundant)) and satisfies
    M[:, redundant] ~= M[:, skeleton] @ interp with Frobenius residual at
    most sqrt(ncols) * eps * ||M||_F (observed constant well below that).
    """

    skeleton: np.ndarray
    redundant: np.ndarray
    interp: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.skeleton)


def interpolative_decomposition(M: np.ndarray, eps: float) -> IdResult:
    """Column ID of M at relative tolerance eps via column-pivoted QR."""
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a 2-d array")
    nrows, ncols = M.shape
    empty = np.array([], dtype=np.intp)
    if ncols == 0:
        return IdResult(empty, empty, np.zeros((0, 0)))
    if nrows == 0 or not np.any(M):
        # nothing to couple to: every column is trivially redundant
        return IdResult(empty, np.arange(ncols, dtype=np.intp),
                        np.zeros((0, ncols)))

    R, piv = scipy.linalg.qr(M, mode="r", pivoting=True)
    diag = np.abs(np.diag(R))
    cut = max(eps, _EPS * max(nrows, ncols)) * diag[0]
    rank = int(np.count_nonzero(diag > cut))
    if rank == len(piv):
        return IdResult(np.sort(piv.astype(np.intp)), empty,
                        np.zeros((len(piv), 0)))

    skel_pos = piv[:rank]
    red_pos = piv[rank:]
    # interpolation in pivot order: R11 T = R12
    T = scipy.linalg.solve_triangular(R[:rank, :rank], R[:rank, rank:])
    # restore natural column order on both axes
    skel_order = np.argsort(skel_pos)
    red_order = np.argsort(red_pos)
    return IdResult(
        skel_pos[skel_order].astype(np.intp),
        red_pos[red_order].astype(np.intp),
        np.ascontiguousarray(T[np.ix_(skel_order, red_order)]),
    )
