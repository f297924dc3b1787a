"""Integration over a box via TT-cross approximation of the sampled integrand."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .exceptions import DimensionError, NonFiniteError
from .quadrature import DEFAULT_NODES, ProductGrid, Substitution, make_grid, parse_substitution
from .tensor_train import tt_contract_rank1
from .tt_cross import BlackBoxTensor, BudgetPolicy, tt_cross

__all__ = [
    "Integrand",
    "IntegrationConfig",
    "IntegrationReport",
    "integrate",
    "grid_point",
    "grid_tensor",
    "as_integrand",
]


@dataclass
class Integrand:
    """Batched integrand.

    ``func`` maps an array of points of shape ``(batch, dim)`` to ``batch``
    values. ``singularities`` holds one of ``None``, ``"at_zero"`` or
    ``"at_one"`` per axis; ``"at_one"`` mirrors that axis's substitution.
    """

    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    singularities: Sequence[str | None] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError("integrand dimension must be at least 1")
        if self.singularities is not None:
            if len(self.singularities) != self.dim:
                raise DimensionError("one singularity hint per axis is required")
            for s in self.singularities:
                if s not in (None, "none", "at_zero", "at_one"):
                    raise ValueError(f"unknown singularity hint {s!r}")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        values = np.asarray(self.func(points), dtype=float).reshape(-1)
        if values.shape[0] != points.shape[0]:
            raise DimensionError(f"integrand returned {values.shape[0]} values for {points.shape[0]} points")
        return values


def as_integrand(f, dim: int | None = None) -> Integrand:
    if isinstance(f, Integrand):
        if dim is not None and dim != f.dim:
            raise DimensionError(f"dimension {dim} does not match integrand dimension {f.dim}")
        return f
    if dim is None:
        raise DimensionError("dimension is required for a plain callable")
    return Integrand(f, dim)


@dataclass
class IntegrationConfig:
    """User-facing knobs; per-axis fields accept one value or one per axis."""

    nodes: Union[int, Sequence[int]] = DEFAULT_NODES
    substitution: Union[str, Substitution, None, Sequence] = None
    box: Sequence[tuple[float, float]] | None = None
    quadrature: str = "gauss-legendre"
    max_evals: int = 1_000_000
    tol_test: float = 0.01
    max_passes: int = 10
    max_rank: int = 64
    oversample: int = 4
    tol: float | None = None
    seed: int = 0
    replace_nonfinite: bool = False

    def policy(self) -> BudgetPolicy:
        return BudgetPolicy(
            max_evals=self.max_evals,
            tol_test=self.tol_test,
            max_passes=self.max_passes,
            max_rank=self.max_rank,
            oversample=self.oversample,
            tol=self.tol,
        )

    def grid(self, f: Integrand) -> ProductGrid:
        if self.quadrature != "gauss-legendre":
            raise ValueError(f"unsupported quadrature {self.quadrature!r}")
        subs = self.substitution
        d = f.dim
        if not isinstance(subs, (list, tuple)):
            subs = [subs] * d
        if len(subs) != d:
            raise DimensionError(f"substitution: expected {d} entries, got {len(subs)}")
        subs = [parse_substitution(s) for s in subs]
        if f.singularities is not None:
            subs = [
                Substitution(s.kind, s.p, mirror=(hint == "at_one"), half_width=s.half_width)
                for s, hint in zip(subs, f.singularities)
            ]
        return make_grid(d, self.nodes, subs, self.box)


@dataclass
class IntegrationReport:
    value: float
    evaluations_used: int
    passes: int
    final_ranks: list[int]
    convergence_estimate: float
    wall_time: float
    eps_eff: float = float("nan")
    test_evaluations: int = 0
    nonfinite_replaced: int = 0
    budget_exhausted: bool = False
    sweep_evaluations: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def grid_point(grid: ProductGrid, idx: Sequence[int]) -> np.ndarray:
    """Coordinates of the grid point with multi-index ``idx``."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.shape != (grid.dim,):
        raise DimensionError(f"expected {grid.dim} indices, got shape {idx.shape}")
    return grid.points(idx[None, :])[0]


def grid_tensor(f: Integrand, grid: ProductGrid, replace_nonfinite: bool = False) -> BlackBoxTensor:
    """Black-box tensor of integrand values on the grid; one integrand call per batch."""
    counter = {"replaced": 0}

    def evaluate(idx):
        pts = grid.points(idx)
        with np.errstate(all="ignore"):
            vals = f(pts)
        bad = ~np.isfinite(vals)
        if bad.any():
            if not replace_nonfinite:
                first = int(np.flatnonzero(bad)[0])
                raise NonFiniteError(
                    f"integrand is not finite ({vals[first]}) at point {pts[first].tolist()}",
                    point=pts[first],
                )
            vals = np.where(bad, 0.0, vals)
            counter["replaced"] += int(bad.sum())
        return vals

    A = BlackBoxTensor(grid.shape, evaluate)
    A.nonfinite = counter
    return A


def integrate(f, config: IntegrationConfig | None = None, dim: int | None = None) -> IntegrationReport:
    """Integrate ``f`` over the configured box.

    The integrand sampled on the product grid is approximated in TT format by
    :func:`tt_cross` and contracted with the per-axis weights.

    Parameters
    ----------
    f : Integrand or callable
        A plain callable takes points of shape ``(batch, dim)``; ``dim`` is
        then required.
    config : IntegrationConfig, optional
    dim : int, optional
    """
    t0 = time.perf_counter()
    f = as_integrand(f, dim)
    config = config or IntegrationConfig()
    grid = config.grid(f)
    A = grid_tensor(f, grid, config.replace_nonfinite)
    rng = np.random.default_rng(config.seed)
    tt, diag = tt_cross(A, config.policy(), rng)
    value = tt_contract_rank1(tt, grid.weights)
    return IntegrationReport(
        value=value,
        evaluations_used=diag.evaluations,
        passes=diag.passes,
        final_ranks=list(diag.ranks),
        convergence_estimate=diag.convergence,
        wall_time=time.perf_counter() - t0,
        eps_eff=diag.eps_eff,
        test_evaluations=diag.test_evaluations,
        nonfinite_replaced=A.nonfinite["replaced"],
        budget_exhausted=diag.budget_exhausted,
        sweep_evaluations=list(diag.sweep_evaluations),
    )
