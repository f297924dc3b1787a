"""Alternating TT-cross approximation of black-box tensors.

Each sweep visits the ``d - 1`` unfolding boundaries. At boundary ``k`` a
sampled submatrix of the ``k``-th unfolding, with rows built from the
already selected prefixes and columns from given suffixes (or the mirror
image of this), is approximated by :func:`cross_approximate` at tolerance
``eps / sqrt(d - 1)``; the cross columns times the pseudoinverse of the pivot
block become the next core.

The driver :func:`tt_cross` runs a cheap test sweep, derives a working
tolerance from the evaluation budget, and alternates sweeps until two
consecutive approximations agree.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import BudgetExhausted, DimensionError
from .matrix_cross import BlackBoxMatrix, cross_approximate, tau_pseudoinverse
from .tensor_train import TTTensor, tt_diff_norm_orth, tt_norm

__all__ = [
    "BlackBoxTensor",
    "BudgetPolicy",
    "SweepResult",
    "CrossDiagnostics",
    "sweep_left_to_right",
    "sweep_right_to_left",
    "effective_tolerance",
    "random_multi_indices",
    "extend_index_sets",
    "tt_cross",
    "EPS_FLOOR",
    "CONVERGENCE_FLOOR",
]

logger = logging.getLogger(__name__)

EPS_FLOOR = 1e-14
# Two sweeps assembled from different pivots agree only to about 1e-13 even on
# exactly representable tensors, so the stopping test never asks for more.
CONVERGENCE_FLOOR = 1e-12


class BlackBoxTensor:
    """Tensor accessible through a batched element evaluator.

    ``evaluator(idx)`` receives an integer array of shape ``(batch, d)`` and
    returns ``batch`` values. ``n_evals`` counts every element requested.
    """

    def __init__(self, shape: Sequence[int], evaluator: Callable[[np.ndarray], np.ndarray]):
        shape = tuple(int(n) for n in shape)
        if len(shape) == 0 or min(shape) < 1:
            raise DimensionError(f"invalid tensor shape {shape}")
        self.shape = shape
        self._evaluator = evaluator
        self.n_evals = 0

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @classmethod
    def from_array(cls, a) -> "BlackBoxTensor":
        a = np.asarray(a, dtype=float)
        return cls(a.shape, lambda idx: a[tuple(idx.T)])

    def __call__(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.intp)
        if idx.ndim != 2 or idx.shape[1] != self.ndim:
            raise DimensionError(f"expected index array of shape (batch, {self.ndim}), got {idx.shape}")
        if idx.shape[0] == 0:
            return np.empty(0)
        values = np.asarray(self._evaluator(idx), dtype=float).reshape(-1)
        if values.shape[0] != idx.shape[0]:
            raise DimensionError(f"evaluator returned {values.shape[0]} values for {idx.shape[0]} indices")
        self.n_evals += idx.shape[0]
        return values


@dataclass
class BudgetPolicy:
    """Evaluation budget and sweep controls.

    Attributes
    ----------
    max_evals : int
        Soft limit on element evaluations. A sweep that has started always
        finishes, so the final count may exceed it by one sweep.
    tol_test : float
        Tolerance of the initial test sweep.
    max_passes : int
        Maximum number of sweeps, the test sweep included.
    max_rank : int
        Cap on every TT rank.
    oversample : int
        Random multi-indices added to each index set before a sweep.
    tol : float, optional
        Fixed working tolerance. When given, the budget-derived effective
        tolerance is not used.
    random_start : bool
        Start each matrix cross at a random column (else column 0).
    """

    max_evals: int = 1_000_000
    tol_test: float = 0.01
    max_passes: int = 10
    max_rank: int = 64
    oversample: int = 4
    tol: float | None = None
    random_start: bool = True

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be at least 1")
        if not 0 < self.tol_test < 1:
            raise ValueError("tol_test must lie in (0, 1)")
        if self.max_passes < 1 or self.max_rank < 1 or self.oversample < 0:
            raise ValueError("max_passes and max_rank must be positive, oversample non-negative")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class SweepResult:
    tt: TTTensor
    index_sets: list[np.ndarray]
    ranks: tuple[int, ...]
    evaluations: int


@dataclass
class CrossDiagnostics:
    passes: int
    ranks: tuple[int, ...]
    convergence: float
    evaluations: int
    test_evaluations: int
    eps_eff: float
    sweep_evaluations: list[int] = field(default_factory=list)
    converged: bool = False
    budget_exhausted: bool = False


def effective_tolerance(n_lim: int, n_test: int, eps_test: float) -> float:
    """Tolerance for the remaining sweeps under the squared-log cost model.

    Solves ``(ln eps_eff / ln eps_test)**2 = (n_lim - n_test) / n_test``.
    Raises :class:`BudgetExhausted` if ``n_lim <= n_test``.
    """
    if not 0 < eps_test < 1:
        raise ValueError("eps_test must lie in (0, 1)")
    if n_test < 1:
        raise ValueError("n_test must be positive")
    if n_lim <= n_test:
        raise BudgetExhausted(f"budget {n_lim} does not exceed the test sweep cost {n_test}")
    return math.exp(-math.log(1.0 / eps_test) * math.sqrt((n_lim - n_test) / n_test))


def random_multi_indices(
    shape: Sequence[int], count: int, rng: np.random.Generator, exclude: np.ndarray | None = None
) -> np.ndarray:
    """Up to ``count`` distinct random multi-indices over ``shape``, avoiding ``exclude``."""
    shape = tuple(int(n) for n in shape)
    taken = set() if exclude is None else {tuple(row) for row in np.asarray(exclude).tolist()}
    space = math.prod(shape)
    count = max(0, min(count, space - len(taken)))
    if count == 0:
        return np.zeros((0, len(shape)), dtype=np.intp)
    if space <= 4 * (count + len(taken)) or space <= 1 << 16:
        flat = np.ravel_multi_index(np.array(list(taken), dtype=np.intp).T, shape) if taken else []
        pool = np.setdiff1d(np.arange(space), flat)
        pick = rng.choice(pool, size=count, replace=False)
        return np.column_stack(np.unravel_index(pick, shape)).astype(np.intp).reshape(count, len(shape))
    out = []
    while len(out) < count:
        cand = tuple(int(rng.integers(n)) for n in shape)
        if cand not in taken:
            taken.add(cand)
            out.append(cand)
    return np.array(out, dtype=np.intp).reshape(count, len(shape))


def extend_index_sets(
    sets: Sequence[np.ndarray], shapes: Sequence[Sequence[int]], count: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Append ``count`` fresh random multi-indices to each set."""
    out = []
    for s, shp in zip(sets, shapes):
        extra = random_multi_indices(shp, count, rng, exclude=s)
        out.append(np.vstack([s, extra]) if extra.size else s.copy())
    return out


def _suffix_shapes(shape):
    return [shape[k + 1:] for k in range(len(shape) - 1)]


def _prefix_shapes(shape):
    return [shape[: k + 1] for k in range(len(shape) - 1)]


def _check_sets(sets, shapes, what):
    if len(sets) != len(shapes):
        raise DimensionError(f"expected {len(shapes)} {what} sets, got {len(sets)}")
    for k, (s, shp) in enumerate(zip(sets, shapes)):
        s = np.asarray(s)
        if s.ndim != 2 or s.shape[1] != len(shp) or s.shape[0] == 0:
            raise DimensionError(f"{what} set {k}: expected shape (R, {len(shp)}), got {s.shape}")
        if np.any(s < 0) or np.any(s >= np.array(shp)):
            raise IndexError(f"{what} set {k} contains out-of-range indices")
        if len({tuple(r) for r in s.tolist()}) != s.shape[0]:
            raise DimensionError(f"{what} set {k} contains duplicate multi-indices")


def _boundary_cross(A, left, n, right, tol, max_rank, rng, random_start, transpose):
    """Cross-approximate one sampled unfolding.

    Without ``transpose`` the matrix rows are ``(left[p], i)`` for ``p`` major,
    ``i`` minor, and the columns are ``right``. With ``transpose`` the rows are
    ``(i, right[q])`` with ``q`` major and the columns are ``left``.
    """

    def element_index(lp, i, rq):
        return np.hstack([left[lp], i[:, None], right[rq]])

    if not transpose:
        shape = (left.shape[0] * n, right.shape[0])

        def evaluate(rows, cols):
            return A(element_index(rows // n, rows % n, cols))

    else:
        shape = (right.shape[0] * n, left.shape[0])

        def evaluate(rows, cols):
            return A(element_index(cols, rows % n, rows // n))

    M = BlackBoxMatrix(shape, evaluate)
    rank_cap = min(max_rank, shape[0], shape[1])
    return cross_approximate(M, tol, rank_cap, rng, random_start=random_start), M.n_evals


def _edge_core(A, fixed, n, known_sets, known_values, transpose):
    """Sample ``A`` on ``fixed x {0..n-1}`` (or ``{0..n-1} x fixed``), reusing known entries.

    ``known_sets`` is a column of single indices whose entries
    ``known_values[:, t]`` (one row per fixed multi-index) were sampled
    already. Returns an array of shape ``(len(fixed), n)``.
    """
    r = fixed.shape[0]
    out = np.empty((r, n))
    have = np.zeros(n, dtype=bool)
    for t, i in enumerate(known_sets[:, 0]):
        out[:, i] = known_values[:, t]
        have[i] = True
    missing = np.flatnonzero(~have)
    if missing.size:
        ff = np.repeat(np.arange(r), missing.size)
        ii = np.tile(missing, r)
        if transpose:
            idx = np.hstack([ii[:, None], fixed[ff]])
        else:
            idx = np.hstack([fixed[ff], ii[:, None]])
        out[:, missing] = A(idx).reshape(r, missing.size)
    return out


def sweep_left_to_right(
    A: BlackBoxTensor,
    col_sets: Sequence[np.ndarray],
    tol: float,
    max_rank: int,
    rng: np.random.Generator,
    random_start: bool = True,
) -> SweepResult:
    """One left-to-right TT-cross sweep.

    Parameters
    ----------
    col_sets : sequence of int arrays
        ``col_sets[k]`` holds suffix multi-indices of length ``d - k - 1``
        (zero-based ``k``).

    Returns
    -------
    SweepResult
        ``index_sets[k]`` are the selected prefix multi-indices of length
        ``k + 1``.
    """
    d = A.ndim
    if d < 2:
        raise DimensionError("a sweep needs at least two modes")
    col_sets = [np.asarray(s, dtype=np.intp) for s in col_sets]
    _check_sets(col_sets, _suffix_shapes(A.shape), "column")
    start = A.n_evals
    eps_hat = tol / math.sqrt(d - 1)
    prefixes = np.zeros((1, 0), dtype=np.intp)
    cores, selected = [], []
    last = None
    for k in range(d - 1):
        n = A.shape[k]
        res, _ = _boundary_cross(A, prefixes, n, col_sets[k], eps_hat, max_rank, rng, random_start, False)
        rows = res.row_indices
        if res.rank == 0:
            cores.append(np.zeros((prefixes.shape[0], n, 1)))
            rows = np.array([0], dtype=np.intp)
            last = None
        else:
            core = res.skeleton_cols @ tau_pseudoinverse(res.pivot_block)
            cores.append(core.reshape(prefixes.shape[0], n, res.rank))
            last = res
        prefixes = np.hstack([prefixes[rows // n], (rows % n)[:, None]])
        selected.append(prefixes)
    if last is None:
        final = _edge_core(A, prefixes, A.shape[-1], np.zeros((0, 1), dtype=np.intp), None, False)
    else:
        final = _edge_core(A, prefixes, A.shape[-1], col_sets[-1], last.skeleton_rows, False)
    cores.append(final[:, :, None])
    tt = TTTensor(cores)
    return SweepResult(tt=tt, index_sets=selected, ranks=tt.ranks, evaluations=A.n_evals - start)


def sweep_right_to_left(
    A: BlackBoxTensor,
    row_sets: Sequence[np.ndarray],
    tol: float,
    max_rank: int,
    rng: np.random.Generator,
    random_start: bool = True,
) -> SweepResult:
    """One right-to-left TT-cross sweep, the mirror image of :func:`sweep_left_to_right`.

    ``row_sets[k]`` holds prefix multi-indices of length ``k + 1``; the result's
    ``index_sets[k]`` are selected suffix multi-indices of length ``d - k - 1``.
    """
    d = A.ndim
    if d < 2:
        raise DimensionError("a sweep needs at least two modes")
    row_sets = [np.asarray(s, dtype=np.intp) for s in row_sets]
    _check_sets(row_sets, _prefix_shapes(A.shape), "row")
    start = A.n_evals
    eps_hat = tol / math.sqrt(d - 1)
    suffixes = np.zeros((1, 0), dtype=np.intp)
    cores = [None] * d
    selected = [None] * (d - 1)
    last = None
    for k in range(d - 2, -1, -1):
        n = A.shape[k + 1]
        res, _ = _boundary_cross(A, row_sets[k], n, suffixes, eps_hat, max_rank, rng, random_start, True)
        rows = res.row_indices
        if res.rank == 0:
            cores[k + 1] = np.zeros((1, n, suffixes.shape[0]))
            rows = np.array([0], dtype=np.intp)
            last = None
        else:
            core = res.skeleton_cols @ tau_pseudoinverse(res.pivot_block)
            # row (q, i) of ``core`` is core[q * n + i]; TT core axes are (rank, i, q)
            cores[k + 1] = core.reshape(suffixes.shape[0], n, res.rank).transpose(2, 1, 0)
            last = res
        suffixes = np.hstack([(rows % n)[:, None], suffixes[rows // n]])
        selected[k] = suffixes
    if last is None:
        first = _edge_core(A, suffixes, A.shape[0], np.zeros((0, 1), dtype=np.intp), None, True)
    else:
        first = _edge_core(A, suffixes, A.shape[0], row_sets[0], last.skeleton_rows, True)
    cores[0] = first.T[None, :, :]
    tt = TTTensor(cores)
    return SweepResult(tt=tt, index_sets=selected, ranks=tt.ranks, evaluations=A.n_evals - start)


def _initial_column_sets(shape, max_rank, oversample, rng):
    sets = []
    for shp in _suffix_shapes(shape):
        size = min(max_rank + oversample, math.prod(shp))
        sets.append(random_multi_indices(shp, size, rng))
    return sets


def tt_cross(
    A: BlackBoxTensor, policy: BudgetPolicy | None = None, rng: np.random.Generator | None = None
) -> tuple[TTTensor, CrossDiagnostics]:
    """Build a TT approximation of ``A`` within a soft evaluation budget.

    A left-to-right test sweep at ``policy.tol_test`` measures its cost
    ``N_test``; the remaining sweeps use :func:`effective_tolerance`, clamped
    to ``[1e-14, tol_test]`` (or ``policy.tol`` if set). Sweeps alternate
    direction, each starting from the index sets chosen by the previous sweep
    extended with ``policy.oversample`` random multi-indices, until
    ``||new - old||_F <= max(eps, 1e-12) * ||new||_F``, ``max_passes`` sweeps have run, or
    the evaluation count has reached ``max_evals``.

    If the budget is not larger than ``N_test`` the test sweep result is
    returned with ``diagnostics.budget_exhausted`` set.
    """
    policy = policy or BudgetPolicy()
    rng = rng if rng is not None else np.random.default_rng()
    start = A.n_evals
    d = A.ndim

    if d == 1:
        values = A(np.arange(A.shape[0])[:, None])
        tt = TTTensor([values.reshape(1, -1, 1)])
        used = A.n_evals - start
        return tt, CrossDiagnostics(1, tt.ranks, 0.0, used, used, 0.0, [used], converged=True)

    col_sets = _initial_column_sets(A.shape, policy.max_rank, policy.oversample, rng)
    res = sweep_left_to_right(A, col_sets, policy.tol_test, policy.max_rank, rng, policy.random_start)
    n_test = res.evaluations
    sweep_evals = [n_test]
    passes = 1
    budget_exhausted = False

    if policy.tol is not None:
        eps = policy.tol
    else:
        try:
            eps = effective_tolerance(policy.max_evals, n_test, policy.tol_test)
            eps = min(max(eps, EPS_FLOOR), policy.tol_test)
        except BudgetExhausted:
            budget_exhausted = True
            eps = policy.tol_test
    logger.debug("test sweep: %d evaluations, ranks %s, eps_eff %.3g", n_test, res.ranks, eps)

    convergence = math.inf
    converged = False
    current = res
    prefix_sets = res.index_sets
    suffix_sets = None
    left_to_right = False
    while not budget_exhausted and passes < policy.max_passes:
        if A.n_evals - start >= policy.max_evals:
            budget_exhausted = True
            break
        if left_to_right:
            sets = extend_index_sets(suffix_sets, _suffix_shapes(A.shape), policy.oversample, rng)
            new = sweep_left_to_right(A, sets, eps, policy.max_rank, rng, policy.random_start)
            prefix_sets = new.index_sets
        else:
            sets = extend_index_sets(prefix_sets, _prefix_shapes(A.shape), policy.oversample, rng)
            new = sweep_right_to_left(A, sets, eps, policy.max_rank, rng, policy.random_start)
            suffix_sets = new.index_sets
        passes += 1
        sweep_evals.append(new.evaluations)
        diff = tt_diff_norm_orth(new.tt, current.tt)
        norm = tt_norm(new.tt)
        convergence = diff / norm if norm > 0 else (0.0 if diff == 0 else math.inf)
        current = new
        left_to_right = not left_to_right
        logger.debug("pass %d: ranks %s, relative change %.3g", passes, new.ranks, convergence)
        if diff <= max(eps, CONVERGENCE_FLOOR) * norm:
            converged = True
            break

    return current.tt, CrossDiagnostics(
        passes=passes,
        ranks=current.ranks,
        convergence=convergence,
        evaluations=A.n_evals - start,
        test_evaluations=n_test,
        eps_eff=eps,
        sweep_evaluations=sweep_evals,
        converged=converged,
        budget_exhausted=budget_exhausted,
    )
