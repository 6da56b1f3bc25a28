"""Weighted power means and the Hoelder-type bounds built on them.

The power mean of order ``p`` of values ``x`` with positive weights ``w`` is

    M_p(x, w) = (sum_i w_i x_i^p / sum_i w_i) ** (1 / p)

``p = 1`` is the weighted arithmetic mean and ``p -> inf`` is ``max(x)``.
Finite orders are evaluated as ``m * M_p(x / m, w)`` with ``m = max(x)`` so
that large orders (``p = 1e4`` is fine) neither overflow nor lose the top
value.  Only orders ``p >= 1`` are supported; zeros are allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

PLUS_INFINITY = math.inf


def validate_order(p: float) -> float:
    """Return ``p`` as a float, rejecting orders below one and NaN."""
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise ValueError(f"power mean order must be >= 1 or PLUS_INFINITY, got {p}")
    return p


@dataclass(frozen=True)
class WeightedSample:
    """Non-negative values with strictly positive weights."""

    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        weights = tuple(float(w) for w in self.weights)
        if not values:
            raise ValueError("empty sample")
        if len(values) != len(weights):
            raise ValueError("values and weights differ in length")
        if not all(math.isfinite(v) for v in values + weights):
            raise ValueError("non-finite value")
        if any(v < 0 for v in values):
            raise ValueError("values must be non-negative")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, values: Sequence[float]) -> "WeightedSample":
        return cls(tuple(values), (1.0,) * len(values))

    def mean(self, p: float) -> float:
        return float(power_mean(self.values, p, self.weights))


def power_mean(values, p: float, weights=None, axis: int = -1):
    """Weighted power mean of order ``p`` along ``axis``.

    ``values`` may be a :class:`WeightedSample` (then ``weights`` must be
    omitted), a sequence, or an array of any shape.  Returns a float for 1-d
    input and an array otherwise.

    Raises ``ValueError`` for an empty sample, non-finite input, negative
    values, non-positive weights, or an order below one.
    """
    p = validate_order(p)
    if isinstance(values, WeightedSample):
        if weights is not None:
            raise ValueError("weights are carried by the WeightedSample")
        values, weights = values.values, values.weights

    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.broadcast_to(np.asarray(weights, dtype=float), x.shape)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise ValueError("non-finite value")
    if np.any(x < 0):
        raise ValueError("values must be non-negative")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")

    top = np.max(x, axis=axis, keepdims=True)
    # below, rounding in the last ulp can push a mean just past the max
    if math.isinf(p):
        out = top
    elif p == 1.0:
        out = np.sum(w * x, axis=axis, keepdims=True) / np.sum(w, axis=axis, keepdims=True)
        out = np.minimum(out, top)
    else:
        safe_top = np.where(top > 0, top, 1.0)
        ratio = np.sum(w * (x / safe_top) ** p, axis=axis, keepdims=True)
        ratio /= np.sum(w, axis=axis, keepdims=True)
        out = np.where(top > 0, safe_top * ratio ** (1.0 / p), 0.0)
        out = np.minimum(out, top)

    out = np.squeeze(out, axis=axis)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HoelderBounds:
    """Bounds on ``M_p - M_q`` and ``M_p / M_q`` for values in ``[l, U]``."""

    l: float
    U: float
    p: float
    q: float
    C: float
    a: float
    b: float
    x_star: float
    theta: float
    H: float
    L: float

    def h(self, x):
        """Gap between the order-p root and the chord image at ``x``."""
        return _h(x, self.a, self.b, self.p, self.q)


def _h(x, a, b, p, q):
    x = np.asarray(x, dtype=float)
    return x ** (1.0 / p) - (a * x + b) ** (1.0 / q)


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 500) -> float:
    """Maximizer of a unimodal ``f`` on ``[lo, hi]`` to absolute tolerance ``tol``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def hoelder_bounds(l: float, U: float, p: float, q: float) -> HoelderBounds:
    """Difference bound ``H`` and ratio bound ``L`` between orders ``p > q >= 1``.

    For every weighted sample with values in ``[l, U]``:
    ``M_p - M_q <= H`` and ``M_p / M_q <= L``.  The maximizer of ``h`` is
    bracketed on a coarse grid and then refined by golden-section search,
    which keeps the result correct even if ``h`` were not unimodal.
    """
    l, U, p, q = float(l), float(U), float(p), float(q)
    if not l > 0:
        raise ValueError("the Hoelder bounds require l > 0")
    if U < l:
        raise ValueError("requires U >= l")
    if not p > q:
        raise ValueError("requires p > q")
    if q < 1:
        raise ValueError("requires q >= 1")

    C = U / l
    if U == l:
        return HoelderBounds(l, U, p, q, C, a=1.0, b=0.0, x_star=l**p, theta=0.0, H=0.0, L=1.0)

    lp, Up, lq, Uq = l**p, U**p, l**q, U**q
    a = (Uq - lq) / (Up - lp)
    b = (Up * lq - Uq * lp) / (Up - lp)

    def f(x):
        return float(_h(x, a, b, p, q))

    grid = np.linspace(lp, Up, 1025)
    k = int(np.argmax(_h(grid, a, b, p, q)))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    x_star = golden_section_max(f, lo, hi, tol=1e-12 * max(1.0, Up))
    theta = min(max((x_star - lp) / (Up - lp), 0.0), 1.0)
    H = (theta * Up + (1 - theta) * lp) ** (1 / p) - (theta * Uq + (1 - theta) * lq) ** (1 / q)
    H = max(H, 0.0)

    L = (q * (C**p - C**q) / ((p - q) * (C**q - 1))) ** (1 / p) * (
        p * (C**q - C**p) / ((q - p) * (C**p - 1))
    ) ** (-1 / q)
    return HoelderBounds(l, U, p, q, C, a, b, x_star, theta, H, L)


def concentration_bound(
    n: int,
    epsilon: float,
    p: float,
    l: float,
    U: float,
    value_range: tuple[float, float] = (0.0, 1.0),
    weights=None,
) -> float:
    """Tail bound on ``|M_p(X_1..X_n) - mu| > epsilon`` for independent draws.

    Returns ``2 exp(H_{p,1}) exp(-2 eps^2 W^2 / (sum w^2 (b-a)^2))``; with unit
    weights ``W^2 / sum w^2 = n``.  Values ``>= 1`` are vacuous.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    p = validate_order(p)
    if math.isinf(p):
        raise ValueError("concentration bound needs a finite order")
    lo, hi = value_range
    if not hi > lo:
        raise ValueError("value_range must satisfy a < b")

    if weights is None:
        ess = float(n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w <= 0):
            raise ValueError("weights must be n positive numbers")
        ess = float(w.sum() ** 2 / np.sum(w**2))

    H = 0.0 if p == 1.0 else hoelder_bounds(l, U, p, 1.0).H
    return 2.0 * math.exp(H) * math.exp(-2.0 * epsilon**2 * ess / (hi - lo) ** 2)
