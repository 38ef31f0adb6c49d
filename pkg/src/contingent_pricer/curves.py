"""Deterministic functions of policy time: forces of interest, benefits, payment rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFiniteInput
from .numerics import simpson_intervals


class Curve:
    """Vectorized function of time with known jump points and running integral.

    Subclasses expose ``breakpoints``, the times where the curve may jump.
    """

    def __call__(self, t):
        raise NotImplementedError

    def integral(self, t):
        """``int_0^t curve(s) ds``, elementwise."""
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Curve):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NonFiniteInput("curve value must be finite")

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value))

    def integral(self, t):
        return self.value * np.asarray(t, dtype=float)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.empty(0)


@dataclass(frozen=True)
class PiecewiseConstant(Curve):
    """``values[i]`` on ``[breakpoints[i-1], breakpoints[i])``; one more value than breakpoints."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).ravel()
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size != bp.size + 1:
            raise ValueError("piecewise curve needs exactly one more value than breakpoints")
        if np.any(np.diff(bp) <= 0) or np.any(bp <= 0):
            raise ValueError("breakpoints must be positive and strictly increasing")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(vals))):
            raise NonFiniteInput("piecewise curve has non-finite entries")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __call__(self, t):
        return self.values[np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), side="right")]

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        edges = np.concatenate([[0.0], self.breakpoints])
        at_edges = np.concatenate([[0.0], np.cumsum(np.diff(edges) * self.values[:-1])])
        k = np.searchsorted(self.breakpoints, t, side="right")
        return at_edges[k] + self.values[k] * (t - edges[k])


@dataclass(frozen=True)
class Polynomial(Curve):
    """``c0 + c1 t + c2 t^2 + ...``"""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(self.coefficients))
        if not coeffs or not all(math.isfinite(c) for c in coeffs):
            raise NonFiniteInput("polynomial needs finite coefficients")
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.coefficients)

    def integral(self, t):
        anti = np.polynomial.polynomial.polyint(self.coefficients)
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), anti)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.empty(0)


@dataclass(frozen=True)
class CallableCurve(Curve):
    func: Callable[[np.ndarray], np.ndarray]
    breakpoints: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.broadcast_to(np.asarray(self.func(t), dtype=float), t.shape)
        if not np.all(np.isfinite(out)):
            raise NonFiniteInput("callable curve returned non-finite values")
        return out

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        bp = np.asarray(self.breakpoints, dtype=float)
        edges = np.unique(np.concatenate([[0.0], flat, bp[(bp > 0) & (bp < flat.max(initial=0.0))]]))
        pieces = simpson_intervals(lambda u, _a: self(u), edges, jumps=bp)
        cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
        return cumulative[np.searchsorted(edges, flat)].reshape(t.shape)


def as_curve(obj) -> Curve:
    """Coerce a number, callable, config mapping, or Curve into a Curve."""
    if isinstance(obj, Curve):
        return obj
    if isinstance(obj, (int, float)):
        return Constant(float(obj))
    if callable(obj):
        return CallableCurve(obj)
    if isinstance(obj, dict):
        kind = obj.get("kind", "constant")
        if kind == "constant":
            return Constant(float(obj["value"]))
        if kind == "piecewise_constant":
            return PiecewiseConstant(np.array(obj["breakpoints"]), np.array(obj["values"]))
        if kind == "polynomial":
            return Polynomial(tuple(obj["coefficients"]))
        raise ValueError(f"unknown curve kind {kind!r}")
    raise TypeError(f"cannot interpret {obj!r} as a curve")

