"""Greedy cross approximation of black-box matrices.

The residual ``M - sum_k u_k v_k^T`` is never formed: every residual entry the
pivot search needs is recomputed from sampled entries of ``M`` and the stored
rank-one terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import DimensionError, NumericalError, with_context

__all__ = [
    "BlackBoxMatrix",
    "RankOneTerm",
    "CrossResult",
    "cross_approximate",
    "residual_entry",
    "accumulated_norm",
    "tau_pseudoinverse",
    "TINY_PIVOT",
    "TAU_RELATIVE",
]

TINY_PIVOT = 1e-14
TAU_RELATIVE = 1e-10
_MAX_RETRIES = 5


class BlackBoxMatrix:
    """Matrix accessible only through a batched entry evaluator.

    Parameters
    ----------
    shape : (int, int)
        Number of rows and columns.
    evaluator : callable
        ``evaluator(rows, cols)`` receives two equal-length integer arrays and
        returns the entries ``M[rows[t], cols[t]]``.
    """

    def __init__(self, shape: tuple[int, int], evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        m, n = (int(s) for s in shape)
        if m < 1 or n < 1:
            raise DimensionError(f"matrix must be non-empty, got shape {(m, n)}")
        self.shape = (m, n)
        self._evaluator = evaluator
        self.n_evals = 0

    @classmethod
    def from_array(cls, a) -> "BlackBoxMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise DimensionError("expected a 2-d array")
        return cls(a.shape, lambda rows, cols: a[rows, cols])

    def __call__(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.intp).ravel()
        cols = np.asarray(cols, dtype=np.intp).ravel()
        if rows.shape != cols.shape:
            raise DimensionError("row and column index batches differ in length")
        if rows.size == 0:
            return np.empty(0)
        m, n = self.shape
        if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
            raise IndexError(f"entry index out of range for matrix of shape {self.shape}")
        try:
            values = np.asarray(self._evaluator(rows, cols), dtype=float).reshape(-1)
        except (IndexError, DimensionError):
            raise
        except Exception as exc:
            context = f"while evaluating {rows.size} entries starting at ({rows[0]}, {cols[0]})"
            wrapped = with_context(exc, context)
            if wrapped is exc:
                raise
            raise wrapped from exc
        if values.shape != rows.shape:
            raise DimensionError(f"evaluator returned {values.size} values for {rows.size} entries")
        self.n_evals += rows.size
        return values


@dataclass
class RankOneTerm:
    """One cross term ``u v^T`` with ``u`` a residual column and ``v`` the scaled residual row."""

    u: np.ndarray
    v: np.ndarray


@dataclass
class CrossResult:
    row_indices: np.ndarray
    col_indices: np.ndarray
    skeleton_rows: np.ndarray
    skeleton_cols: np.ndarray
    pivot_block: np.ndarray
    rank: int
    residual_estimate: float
    approx_norm: float
    terms: list[RankOneTerm] = field(default_factory=list, repr=False)

    def reconstruct(self, tau: float | None = None) -> np.ndarray:
        """Dense skeleton ``M[:, J] pinv_tau(M[I, J]) M[I, :]``."""
        m, n = self.skeleton_cols.shape[0], self.skeleton_rows.shape[1]
        if self.rank == 0:
            return np.zeros((m, n))
        return self.skeleton_cols @ tau_pseudoinverse(self.pivot_block, tau) @ self.skeleton_rows


def residual_entry(M: BlackBoxMatrix, terms: Sequence[RankOneTerm], i: int, j: int) -> float:
    """``M[i, j] - sum_k u_k[i] v_k[j]``; queries ``M`` once."""
    m, n = M.shape
    if not (0 <= i < m and 0 <= j < n):
        raise IndexError(f"entry ({i}, {j}) out of range for matrix of shape {M.shape}")
    value = float(M([i], [j])[0])
    for t in terms:
        value -= t.u[i] * t.v[j]
    return value


def accumulated_norm(terms: Sequence[RankOneTerm]) -> float:
    """Frobenius norm of ``sum_k u_k v_k^T`` via ``Tr((U^T U)(V^T V))``."""
    if len(terms) == 0:
        return 0.0
    U = np.column_stack([t.u for t in terms])
    V = np.column_stack([t.v for t in terms])
    sq = float(np.sum((U.T @ U) * (V.T @ V)))
    return float(np.sqrt(max(sq, 0.0)))


def tau_pseudoinverse(G, tau: float | None = None) -> np.ndarray:
    """Pseudoinverse after zeroing singular values below ``tau``.

    ``tau`` defaults to ``1e-10`` times the largest singular value.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {G.shape}")
    if tau is not None and tau < 0:
        raise ValueError("tau must be non-negative")
    if G.size == 0:
        return G.copy()
    try:
        U, s, Vt = np.linalg.svd(G)
    except np.linalg.LinAlgError as exc:
        finite = bool(np.all(np.isfinite(G)))
        raise NumericalError(
            f"SVD did not converge for {G.shape} matrix (finite entries: {finite}, "
            f"max |entry|: {np.max(np.abs(G)) if finite else np.inf})"
        ) from exc
    if tau is None:
        tau = TAU_RELATIVE * s[0]
    keep = s >= tau
    if tau == 0.0:
        keep &= s > 0.0
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


class _SampledEntries:
    """Full rows and columns of ``M`` fetched so far; shared entries are evaluated once."""

    def __init__(self, M: BlackBoxMatrix):
        self.M = M
        self.rows: dict[int, np.ndarray] = {}
        self.cols: dict[int, np.ndarray] = {}
        self.scale = 0.0

    def column(self, j: int) -> np.ndarray:
        if j in self.cols:
            return self.cols[j]
        m = self.M.shape[0]
        out = np.empty(m)
        known = np.zeros(m, dtype=bool)
        for i, row in self.rows.items():
            out[i] = row[j]
            known[i] = True
        todo = np.flatnonzero(~known)
        out[todo] = self.M(todo, np.full(todo.size, j))
        self.cols[j] = out
        self.scale = max(self.scale, float(np.max(np.abs(out))))
        return out

    def row(self, i: int) -> np.ndarray:
        if i in self.rows:
            return self.rows[i]
        n = self.M.shape[1]
        out = np.empty(n)
        known = np.zeros(n, dtype=bool)
        for j, col in self.cols.items():
            out[j] = col[i]
            known[j] = True
        todo = np.flatnonzero(~known)
        out[todo] = self.M(np.full(todo.size, i), todo)
        self.rows[i] = out
        self.scale = max(self.scale, float(np.max(np.abs(out))))
        return out


def cross_approximate(
    M: BlackBoxMatrix,
    tol: float,
    max_rank: int | None = None,
    rng: np.random.Generator | None = None,
    random_start: bool = True,
) -> CrossResult:
    """Greedy cross approximation with partial pivoting.

    Starting from a column, the row of the largest residual entry in that
    column is taken as pivot row, and the next column is the argmax of the
    pivot row's residual over columns not chosen yet. Iteration stops once
    ``mu * sqrt((m - r) * (n - r)) < tol * ||sum of terms||_F``, where ``mu`` is
    the modulus of the next candidate pivot and ``r`` the current rank, or
    when ``max_rank`` terms exist, or when no column with a non-negligible
    residual pivot can be found (``residual_estimate`` is then reported as 0).

    Parameters
    ----------
    M : BlackBoxMatrix
    tol : float
        Relative tolerance, must be positive.
    max_rank : int, optional
        Defaults to ``min(m, n)``.
    rng : numpy.random.Generator, optional
        Source for the starting column and for the retry columns.
    random_start : bool
        If False the first column is 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m, n = M.shape
    full = min(m, n)
    if max_rank is None:
        max_rank = full
    if max_rank < 1 or max_rank > full:
        raise ValueError(f"max_rank must lie in [1, {full}], got {max_rank}")
    if rng is None:
        rng = np.random.default_rng()

    sampled = _SampledEntries(M)
    terms: list[RankOneTerm] = []
    rows_used: list[int] = []
    cols_used: list[int] = []
    col_free = np.ones(n, dtype=bool)
    row_free = np.ones(m, dtype=bool)
    # V^T V and U^T U grown one row/column per term
    gram_u = np.zeros((0, 0))
    gram_v = np.zeros((0, 0))
    approx_norm = 0.0
    residual_estimate = 0.0

    def residual_column(j):
        col = sampled.column(j).copy()
        for t in terms:
            col -= t.u * t.v[j]
        return col

    def residual_row(i):
        row = sampled.row(i).copy()
        for t in terms:
            row -= t.u[i] * t.v
        return row

    j = int(rng.integers(n)) if random_start else 0
    dead = np.zeros(n, dtype=bool)
    while True:
        # find a pivot in column j; fall back to random unused columns
        pivot = None
        retries = 0
        while True:
            col = residual_column(j)
            masked = np.where(row_free, np.abs(col), -1.0)
            i = int(np.argmax(masked))
            mu = masked[i]
            if mu > TINY_PIVOT * sampled.scale:
                pivot = (i, j, col)
                break
            dead[j] = True
            retries += 1
            candidates = np.flatnonzero(col_free & ~dead)
            if retries > min(n, _MAX_RETRIES) or candidates.size == 0:
                break
            j = int(rng.choice(candidates))
        if pivot is None:
            residual_estimate = 0.0
            break

        i, j, col = pivot
        r = len(terms)
        # the candidate pivot bounds the entries of the current residual
        residual_estimate = mu * np.sqrt(float((m - r) * (n - r)))
        if r > 0 and residual_estimate < tol * approx_norm:
            break

        row = residual_row(i)
        u = col
        v = row / col[i]
        terms.append(RankOneTerm(u=u, v=v))
        rows_used.append(i)
        cols_used.append(j)
        row_free[i] = False
        col_free[j] = False
        r += 1

        cu = np.array([t.u @ u for t in terms])
        cv = np.array([t.v @ v for t in terms])
        gram_u = np.block([[gram_u, cu[:-1, None]], [cu[None, :-1], cu[-1:, None]]])
        gram_v = np.block([[gram_v, cv[:-1, None]], [cv[None, :-1], cv[-1:, None]]])
        approx_norm = float(np.sqrt(max(float(np.sum(gram_u * gram_v)), 0.0)))

        if r >= max_rank:
            break
        candidates = col_free & ~dead
        if not candidates.any():
            residual_estimate = 0.0 if r == full else residual_estimate
            break
        j = int(np.argmax(np.where(candidates, np.abs(row), -1.0)))

    I = np.array(rows_used, dtype=np.intp)
    J = np.array(cols_used, dtype=np.intp)
    skel_rows = np.array([sampled.row(i) for i in rows_used]).reshape(len(I), n)
    skel_cols = np.array([sampled.column(j) for j in cols_used]).reshape(len(J), m).T
    return CrossResult(
        row_indices=I,
        col_indices=J,
        skeleton_rows=skel_rows,
        skeleton_cols=skel_cols,
        pivot_block=skel_rows[:, J],
        rank=len(I),
        residual_estimate=float(residual_estimate),
        approx_norm=approx_norm,
        terms=terms,
    )
