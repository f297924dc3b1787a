"""One-dimensional rules on [0, 1], endpoint substitutions, and product grids.

A substitution ``x = g(s)`` maps ``[0, 1]`` monotonically onto ``[0, 1]``.
Rather than integrating ``f(g(s)) g'(s)`` with the base rule, the base rule is
transformed to nodes ``g(s_i)`` and weights ``w_i g'(s_i)`` and applied to
``f`` directly. Every substitution here places the clustered end of the
rule at ``x = 0``; ``mirror=True`` moves it to ``x = 1``.

Truncated substitutions use ``s -> t = T (2 s - 1)`` onto ``[-T, T]``:

* tanh-sinh: ``x = (1 + tanh(pi/2 sinh t)) / 2`` with ``T = 3.2``
* erf: ``x = (1 + erf(t)) / 2`` with ``T = 4`` (the reflection of
  ``(1 - erf(t)) / 2``, so that ``g`` is increasing)

Beyond these ``T`` the derivative ``g'`` falls under ``1e-17`` relative to its
peak and the nodes saturate in double precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.special import erfc, expit

from .exceptions import DimensionError

__all__ = [
    "QuadratureRule1D",
    "Substitution",
    "ProductGrid",
    "gauss_legendre",
    "transform_rule",
    "make_grid",
    "parse_substitution",
    "MAX_GL_NODES",
    "DEFAULT_NODES",
]

MAX_GL_NODES = 512
DEFAULT_NODES = 13
TANH_SINH_T = 3.2
ERF_T = 4.0


@dataclass(frozen=True)
class QuadratureRule1D:
    nodes: np.ndarray
    weights: np.ndarray
    clamped: int = 0

    @property
    def n(self) -> int:
        return len(self.nodes)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def to_dict(self) -> dict:
        return {
            "nodes": [float(x) for x in self.nodes],
            "weights": [float(w) for w in self.weights],
            "clamped": self.clamped,
        }

    def to_json(self) -> str:
        # repr-based float output round-trips exactly (up to 17 significant digits)
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "QuadratureRule1D":
        data = json.loads(text)
        return cls(np.array(data["nodes"]), np.array(data["weights"]), data.get("clamped", 0))


def _legendre_with_derivative(n: int, x: np.ndarray):
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(n: int) -> QuadratureRule1D:
    """``n``-point Gauss-Legendre rule on [0, 1].

    Roots of ``P_n`` are found by Newton iteration from the Tricomi
    asymptotic guesses, then mapped affinely from [-1, 1].
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_GL_NODES:
        raise ValueError(f"node count must be an integer in [1, {MAX_GL_NODES}], got {n!r}")
    nodes, weights = _gauss_legendre_cached(int(n))
    return QuadratureRule1D(nodes=nodes.copy(), weights=weights.copy())


@lru_cache(maxsize=None)
def _gauss_legendre_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 1:
        return np.array([0.5]), np.array([1.0])
    k = np.arange(1, n + 1)
    theta = np.pi * (4 * k - 1) / (4 * n + 2)
    x = (1.0 - (n - 1) / (8.0 * n**3)) * np.cos(theta)
    for _ in range(100):
        p, dp = _legendre_with_derivative(n, x)
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    p, dp = _legendre_with_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    # roots come out in decreasing order; symmetrize to remove round-off drift
    x = x[::-1]
    w = w[::-1]
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return (1.0 + x) / 2.0, w / 2.0


@dataclass(frozen=True)
class Substitution:
    """Monotone change of variables ``x = g(s)`` on [0, 1].

    ``kind`` is one of ``identity``, ``power`` (needs ``p > 1``), ``tanh-sinh``
    and ``erf``.
    """

    kind: str = "identity"
    p: float | None = None
    mirror: bool = False
    half_width: float | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "power", "tanh-sinh", "erf"):
            raise ValueError(f"unknown substitution kind {self.kind!r}")
        if self.kind == "power" and (self.p is None or not self.p > 1):
            raise ValueError("power substitution requires p > 1")

    def _t(self, s):
        T = self.half_width
        if T is None:
            T = TANH_SINH_T if self.kind == "tanh-sinh" else ERF_T
        return T, T * (2.0 * s - 1.0)

    def forward(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(g(s), 1 - g(s))`` computed without cancellation."""
        s = np.asarray(s, dtype=float)
        if self.kind == "identity":
            return s.copy(), 1.0 - s
        if self.kind == "power":
            with np.errstate(divide="ignore"):
                return s**self.p, -np.expm1(self.p * np.log(s))
        if self.kind == "tanh-sinh":
            _, t = self._t(s)
            y = np.pi * np.sinh(t)
            return expit(y), expit(-y)
        _, t = self._t(s)
        return 0.5 * erfc(-t), 0.5 * erfc(t)

    def g(self, s) -> np.ndarray:
        return self.forward(s)[0]

    def derivative(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "identity":
            return np.ones_like(s)
        if self.kind == "power":
            return self.p * s ** (self.p - 1.0)
        T, t = self._t(s)
        if self.kind == "tanh-sinh":
            y = 0.5 * np.pi * np.sinh(t)
            return T * 0.5 * np.pi * np.cosh(t) / np.cosh(y) ** 2
        return 2.0 * T * np.exp(-t * t) / np.sqrt(np.pi)

    def label(self) -> str:
        base = f"power:{self.p:g}" if self.kind == "power" else self.kind
        return base + ("@1" if self.mirror else "")


def parse_substitution(spec: Union[str, Substitution, None]) -> Substitution:
    """Parse ``none``, ``power:<p>``, ``tanh-sinh`` or ``erf``; suffix ``@1`` mirrors."""
    if spec is None:
        return Substitution()
    if isinstance(spec, Substitution):
        return spec
    text = spec.strip().lower()
    mirror = text.endswith("@1")
    if mirror:
        text = text[:-2]
    elif text.endswith("@0"):
        text = text[:-2]
    if text in ("none", "identity", ""):
        return Substitution(mirror=mirror)
    if text.startswith("power:"):
        try:
            p = float(text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad power exponent in {spec!r}") from None
        return Substitution("power", p=p, mirror=mirror)
    if text in ("tanh-sinh", "tanh_sinh", "tanhsinh"):
        return Substitution("tanh-sinh", mirror=mirror)
    if text == "erf":
        return Substitution("erf", mirror=mirror)
    raise ValueError(f"unknown substitution {spec!r}")


def transform_rule(rule: QuadratureRule1D, sub: Substitution) -> QuadratureRule1D:
    """Apply ``x = g(s)`` to a rule: nodes ``g(s_i)``, weights ``w_i g'(s_i)``."""
    if sub.kind == "identity" and not sub.mirror:
        return rule
    x, one_minus_x = sub.forward(rule.nodes)
    w = rule.weights * sub.derivative(rule.nodes)
    if sub.mirror:
        x = one_minus_x[::-1]
        w = w[::-1]
    x = np.array(x, dtype=float)
    lo = np.nextafter(0.0, 1.0)
    hi = np.nextafter(1.0, 0.0)
    bad = (x <= 0.0) | (x >= 1.0)
    x = np.clip(x, lo, hi)
    # saturated nodes collapse onto each other; keep them distinct, one ulp apart
    for i in range(len(x) - 2, -1, -1):
        if x[i] >= x[i + 1]:
            x[i] = np.nextafter(x[i + 1], 0.0)
            bad[i] = True
    for i in range(1, len(x)):
        if x[i] <= x[i - 1]:
            x[i] = np.nextafter(x[i - 1], 1.0)
            bad[i] = True
    return QuadratureRule1D(nodes=x, weights=np.array(w, dtype=float), clamped=rule.clamped + int(bad.sum()))


@dataclass(frozen=True)
class ProductGrid:
    """Tensor grid of per-axis rules mapped to a box.

    ``weights[k]`` already contains the interval length ``b_k - a_k``, so the
    weight tensor is the rank-1 product of the axis weight vectors.
    """

    rules: tuple[QuadratureRule1D, ...]
    box: tuple[tuple[float, float], ...]
    nodes: tuple[np.ndarray, ...] = field(repr=False)
    weights: tuple[np.ndarray, ...] = field(repr=False)
    substitutions: tuple[Substitution, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.rules)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.nodes)

    def points(self, idx: np.ndarray) -> np.ndarray:
        """Map an integer array ``(batch, d)`` of multi-indices to grid points."""
        idx = np.asarray(idx, dtype=np.intp)
        if idx.ndim != 2 or idx.shape[1] != self.dim:
            raise DimensionError(f"expected index array of shape (batch, {self.dim}), got {idx.shape}")
        out = np.empty(idx.shape, dtype=float)
        for k, x in enumerate(self.nodes):
            col = idx[:, k]
            if col.size and (col.min() < 0 or col.max() >= len(x)):
                raise IndexError(f"grid index out of range on axis {k} (size {len(x)})")
            out[:, k] = x[col]
        return out

    def weight_norm_squared(self) -> float:
        """``||W||_F^2`` as the product of per-axis sums of squared weights."""
        return float(np.prod([np.sum(w * w) for w in self.weights]))


def _per_axis(value, d: int, name: str) -> list:
    if isinstance(value, (list, tuple)) and not (name == "box" and _is_interval(value)):
        if len(value) != d:
            raise DimensionError(f"{name}: expected {d} entries, got {len(value)}")
        return list(value)
    return [value] * d


def _is_interval(value) -> bool:
    return len(value) == 2 and all(isinstance(v, (int, float, np.floating, np.integer)) for v in value)


def make_grid(
    d: int,
    nodes: Union[int, Sequence[int]] = DEFAULT_NODES,
    substitution=None,
    box=None,
) -> ProductGrid:
    """Build the product grid.

    Parameters
    ----------
    d : int
        Dimension.
    nodes : int or sequence of int
        Gauss-Legendre node count, shared or per axis.
    substitution : str, Substitution, None or sequence of these
        Shared or per-axis substitution.
    box : sequence of (a, b), or a single (a, b), optional
        Integration intervals; the unit cube by default.
    """
    if d < 1:
        raise DimensionError("dimension must be at least 1")
    counts = _per_axis(nodes, d, "nodes")
    subs = [parse_substitution(s) for s in _per_axis(substitution, d, "substitution")]
    intervals = _per_axis(box if box is not None else (0.0, 1.0), d, "box")
    rules, xs, ws, bx = [], [], [], []
    for k in range(d):
        a, b = (float(v) for v in intervals[k])
        if not (np.isfinite(a) and np.isfinite(b) and b > a):
            raise DimensionError(f"axis {k}: degenerate interval [{a}, {b}]")
        rule = transform_rule(gauss_legendre(counts[k]), subs[k])
        rules.append(rule)
        xs.append(a + (b - a) * rule.nodes)
        ws.append((b - a) * rule.weights)
        bx.append((a, b))
    return ProductGrid(tuple(rules), tuple(bx), tuple(xs), tuple(ws), tuple(subs))
