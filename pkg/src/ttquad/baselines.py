"""Reference computations: full-grid summation, plain Monte Carlo, exact-TT generators."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .exceptions import DimensionError, NonFiniteError, SizeError
from .integrator import Integrand, as_integrand
from .quadrature import ProductGrid
from .tensor_train import TTTensor, tt_elements
from .tt_cross import BlackBoxTensor

__all__ = ["dense_weighted_sum", "monte_carlo", "random_exact_tt", "DENSE_SUM_CAP"]

DENSE_SUM_CAP = 10**7
_CHUNK = 1 << 16


def _check_finite(values, points, replace):
    bad = ~np.isfinite(values)
    if bad.any():
        if not replace:
            first = int(np.flatnonzero(bad)[0])
            raise NonFiniteError(
                f"integrand is not finite ({values[first]}) at point {points[first].tolist()}",
                point=points[first],
            )
        values = np.where(bad, 0.0, values)
    return values


def dense_weighted_sum(f, grid: ProductGrid, cap: int = DENSE_SUM_CAP, replace_nonfinite: bool = False) -> float:
    """Sum ``f`` times the product weight over every grid point.

    Products are accumulated with :func:`math.fsum`, so the result is the
    correctly rounded sum of the computed terms regardless of chunking.
    """
    f = as_integrand(f, grid.dim)
    shape = grid.shape
    total = math.prod(shape)
    if total > cap:
        raise SizeError(f"{total} grid points exceed the cap of {cap}")
    partials = []
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.column_stack(np.unravel_index(flat, shape))
        pts = grid.points(idx)
        with np.errstate(all="ignore"):
            vals = _check_finite(f(pts), pts, replace_nonfinite)
        w = np.ones(flat.size)
        for k, wk in enumerate(grid.weights):
            w = w * wk[idx[:, k]]
        partials.extend((vals * w).tolist())
    return math.fsum(partials)


def monte_carlo(
    f,
    n_samples: int,
    seed: int = 0,
    box: Sequence[tuple[float, float]] | None = None,
    dim: int | None = None,
    replace_nonfinite: bool = False,
) -> tuple[float, float]:
    """Plain Monte Carlo with uniform samples over the box.

    Returns ``(estimate, standard_error)`` with ``estimate = volume * mean``
    and ``standard_error = volume * std / sqrt(N)`` (sample std, ``ddof=1``).
    """
    f = as_integrand(f, dim if dim is not None else (len(box) if box is not None else None))
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    d = f.dim
    box = [(0.0, 1.0)] * d if box is None else [tuple(map(float, ab)) for ab in box]
    if len(box) != d:
        raise DimensionError(f"box has {len(box)} intervals for dimension {d}")
    lo = np.array([a for a, _ in box])
    width = np.array([b - a for a, b in box])
    if np.any(width <= 0):
        raise DimensionError("degenerate box interval")
    volume = float(np.prod(width))
    rng = np.random.default_rng(seed)
    values = np.empty(n_samples)
    for start in range(0, n_samples, _CHUNK):
        stop = min(start + _CHUNK, n_samples)
        pts = lo + width * rng.random((stop - start, d))
        with np.errstate(all="ignore"):
            values[start:stop] = _check_finite(f(pts), pts, replace_nonfinite)
    if np.all(values == values[0]):
        return volume * float(values[0]), 0.0
    mean = float(np.mean(values))
    if n_samples < 2:
        return volume * mean, float("nan")
    std = float(np.std(values, ddof=1))
    return volume * mean, volume * std / math.sqrt(n_samples)


def random_exact_tt(
    shape: Sequence[int], ranks: Sequence[int], rng: np.random.Generator
) -> tuple[TTTensor, BlackBoxTensor]:
    """TT tensor with standard normal cores plus a black-box view of it."""
    shape = [int(n) for n in shape]
    ranks = [int(r) for r in ranks]
    d = len(shape)
    if d == 0 or len(ranks) != d + 1:
        raise DimensionError(f"need {d + 1} ranks for {d} modes, got {len(ranks)}")
    if ranks[0] != 1 or ranks[-1] != 1 or min(ranks) < 1:
        raise DimensionError("rank chain must start and end with 1 and be positive")
    for k in range(1, d):
        left = ranks[k - 1] * shape[k - 1]
        right = math.prod(shape[k:])
        if ranks[k] > min(left, right):
            raise DimensionError(f"rank r_{k} = {ranks[k]} exceeds min({left}, {right})")
    tt = TTTensor([rng.standard_normal((ranks[k], shape[k], ranks[k + 1])) for k in range(d)])
    return tt, BlackBoxTensor(shape, lambda idx: tt_elements(tt, idx))
