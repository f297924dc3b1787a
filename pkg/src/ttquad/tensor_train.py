"""Tensor-train container and the exact multilinear operations on it.

A tensor ``A`` of shape ``n_1 x ... x n_d`` is stored as ``d`` cores, core
``k`` being an array of shape ``(r_{k-1}, n_k, r_k)`` with ``r_0 = r_d = 1``,
so that ``A[i_1, ..., i_d] = G_1[:, i_1, :] @ ... @ G_d[:, i_d, :]``.

Only real double-precision scalars are supported.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import DimensionError, SizeError

__all__ = [
    "TTTensor",
    "tt_element",
    "tt_elements",
    "tt_dot",
    "tt_norm",
    "tt_diff_norm",
    "tt_diff_norm_orth",
    "tt_from_rank1",
    "tt_contract_rank1",
    "tt_to_dense",
    "roundoff_clamps",
]

DENSE_CAP = 10**6

# number of times a negative squared norm was clamped to zero
_clamps = 0


def roundoff_clamps() -> int:
    """Return how many negative squared norms have been clamped to zero."""
    return _clamps


def _clamped_sqrt(value: float) -> float:
    global _clamps
    if value < 0.0:
        _clamps += 1
        return 0.0
    return float(np.sqrt(value))


class TTTensor:
    """Tensor in TT format.

    Parameters
    ----------
    cores : sequence of ndarray
        Cores of shape ``(r_{k-1}, n_k, r_k)``. Two-dimensional cores of shape
        ``(n_k, r_k)`` (first) or ``(r_{k-1}, n_k)`` (last) are not accepted;
        reshape them explicitly.
    """

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = [np.ascontiguousarray(c, dtype=float) for c in cores]
        if len(cores) == 0:
            raise DimensionError("a TT tensor needs at least one core")
        for k, core in enumerate(cores):
            if core.ndim != 3:
                raise DimensionError(f"core {k} has {core.ndim} dimensions, expected 3")
            if min(core.shape) < 1:
                raise DimensionError(f"core {k} has an empty extent: {core.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise DimensionError("boundary ranks r_0 and r_d must equal 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise DimensionError(
                    f"rank mismatch between cores {k} and {k + 1}: "
                    f"{cores[k].shape[2]} != {cores[k + 1].shape[0]}"
                )
        self.cores = cores

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    def __getitem__(self, idx) -> float:
        return tt_element(self, idx)

    def __repr__(self) -> str:
        return f"TTTensor(shape={self.shape}, ranks={self.ranks})"

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "TTTensor":
        return cls([np.zeros((1, n, 1)) for n in shape])


def _check_same_shape(a: TTTensor, b: TTTensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def tt_element(tt: TTTensor, idx: Sequence[int]) -> float:
    """Evaluate one entry as a product of core slices."""
    idx = tuple(int(i) for i in idx)
    if len(idx) != tt.ndim:
        raise DimensionError(f"expected {tt.ndim} indices, got {len(idx)}")
    vec = np.ones(1)
    for k, (core, i) in enumerate(zip(tt.cores, idx)):
        if not 0 <= i < core.shape[1]:
            raise IndexError(f"index {i} out of range for mode {k} of size {core.shape[1]}")
        vec = vec @ core[:, i, :]
    return float(vec[0])


def tt_elements(tt: TTTensor, idx: np.ndarray) -> np.ndarray:
    """Batched :func:`tt_element` for an integer array of shape ``(batch, d)``."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 2 or idx.shape[1] != tt.ndim:
        raise DimensionError(f"expected index array of shape (batch, {tt.ndim}), got {idx.shape}")
    for k, n in enumerate(tt.shape):
        col = idx[:, k]
        if col.size and (col.min() < 0 or col.max() >= n):
            raise IndexError(f"index out of range for mode {k} of size {n}")
    vec = np.ones((idx.shape[0], 1))
    for k, core in enumerate(tt.cores):
        # (batch, r_{k-1}) x (batch, r_{k-1}, r_k)
        vec = np.einsum("ba,bac->bc", vec, core[:, idx[:, k], :].transpose(1, 0, 2))
    return vec[:, 0]


def tt_dot(a: TTTensor, b: TTTensor) -> float:
    """Sum over all entries of ``a * b``, computed core by core."""
    _check_same_shape(a, b)
    z = np.ones((1, 1))
    for ga, gb in zip(a.cores, b.cores):
        # z[b, b'] = sum_{a, a', i} z[a, a'] ga[a, i, b] gb[a', i, b']
        t = np.tensordot(z, ga, axes=(0, 0))  # (a', i, b)
        z = np.tensordot(t, gb, axes=([0, 1], [0, 1]))  # (b, b')
    return float(z[0, 0])


def tt_norm(a: TTTensor) -> float:
    """Frobenius norm."""
    return _clamped_sqrt(tt_dot(a, a))


def tt_diff_norm(a: TTTensor, b: TTTensor) -> float:
    """Frobenius norm of ``a - b`` from three dot products."""
    _check_same_shape(a, b)
    return _clamped_sqrt(tt_dot(a, a) + tt_dot(b, b) - 2.0 * tt_dot(a, b))


def tt_diff_norm_orth(a: TTTensor, b: TTTensor) -> float:
    """Frobenius norm of ``a - b`` by QR-orthogonalizing the stacked difference.

    Unlike :func:`tt_diff_norm`, whose squared-norm identity loses half the
    digits to cancellation (relative floor near ``1e-8``), the error here is
    of order machine precision times ``max(||a||, ||b||)``.
    """
    _check_same_shape(a, b)
    d = a.ndim
    if d == 1:
        return float(np.linalg.norm(a.cores[0] - b.cores[0]))
    R = np.ones((1, 1))
    for k in range(d):
        ga, gb = a.cores[k], b.cores[k]
        if k == 0:
            c = np.concatenate([ga, -gb], axis=2)
        elif k == d - 1:
            c = np.concatenate([ga, gb], axis=0)
        else:
            ra0, n, ra1 = ga.shape
            rb0, _, rb1 = gb.shape
            c = np.zeros((ra0 + rb0, n, ra1 + rb1))
            c[:ra0, :, :ra1] = ga
            c[ra0:, :, ra1:] = gb
        c = np.tensordot(R, c, axes=(1, 0))
        if k == d - 1:
            return float(np.linalg.norm(c))
        r0, n, r1 = c.shape
        R = np.linalg.qr(c.reshape(r0 * n, r1), mode="r")
    raise AssertionError("unreachable")


def tt_from_rank1(axis_values: Sequence[Sequence[float]]) -> TTTensor:
    """Rank-1 TT tensor whose entries are products of per-axis values."""
    if len(axis_values) == 0:
        raise DimensionError("at least one axis is required")
    return TTTensor([np.asarray(v, dtype=float).reshape(1, -1, 1) for v in axis_values])


def tt_contract_rank1(tt: TTTensor, axis_values: Sequence[Sequence[float]]) -> float:
    """Contract every mode of ``tt`` with its axis vector.

    Equivalent to ``tt_dot(tt, tt_from_rank1(axis_values))`` at a cost of
    ``O(sum_k n_k r_{k-1} r_k)``.
    """
    if len(axis_values) != tt.ndim:
        raise DimensionError(f"expected {tt.ndim} axis vectors, got {len(axis_values)}")
    vec = np.ones(1)
    for k, (core, w) in enumerate(zip(tt.cores, axis_values)):
        w = np.asarray(w, dtype=float)
        if w.shape != (core.shape[1],):
            raise DimensionError(
                f"axis {k}: expected {core.shape[1]} values, got shape {w.shape}"
            )
        vec = vec @ np.tensordot(core, w, axes=(1, 0))
    return float(vec[0])


def tt_to_dense(tt: TTTensor, cap: int = DENSE_CAP) -> np.ndarray:
    """Materialize the full array (test oracle only)."""
    total = int(np.prod(tt.shape, dtype=object))
    if total > cap:
        raise SizeError(f"dense size {total} exceeds cap {cap}")
    out = np.ones((1, 1))
    for core in tt.cores:
        r0, n, r1 = core.shape
        out = (out @ core.reshape(r0, n * r1)).reshape(-1, r1)
    return out.reshape(tt.shape)
