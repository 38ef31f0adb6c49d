"""Composite Simpson quadrature and fixed-step RK4 for linear ODEs.

Both routines work on a partition supplied by the caller. Discontinuities of
the integrand or of the ODE coefficients must sit on partition edges; those
edges can be flagged so that the function is evaluated just inside the
interval instead of on the jump.
"""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

SIMPSON_RTOL = 1e-10
MAX_PANELS = 2**20
EDGE_NUDGE = 1e-9


def _simpson_weights(n: int) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def simpson_intervals(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    edges,
    rtol: float = SIMPSON_RTOL,
    max_panels: int = MAX_PANELS,
    jumps=None,
) -> np.ndarray:
    """Integral of ``f`` over every interval ``[edges[i], edges[i+1]]``.

    ``f(u, a)`` receives the evaluation points ``u`` with shape ``(k, n+1)``
    and the left edge ``a`` of each interval with shape ``(k, 1)``, so
    integrands may depend on where their interval starts. Each interval is
    refined by doubling the panel count until two successive composite
    Simpson estimates agree to ``rtol``; the Richardson combination of the
    last two is returned. ``jumps`` lists edge values where ``f`` is
    discontinuous; there the endpoint sample is taken a hair inside the
    interval.
    """
    edges = np.asarray(edges, dtype=float)
    a_all, b_all = edges[:-1], edges[1:]
    n_int = a_all.size
    if n_int == 0:
        return np.empty(0)
    jumps = np.empty(0) if jumps is None else np.asarray(jumps, dtype=float)
    nudge_a = np.isin(a_all, jumps)
    nudge_b = np.isin(b_all, jumps)

    def estimate(idx: np.ndarray, n: int) -> np.ndarray:
        a = a_all[idx, None]
        width = b_all[idx, None] - a
        s = np.linspace(0.0, 1.0, n + 1)[None, :]
        u = a + width * s
        u[:, 0] += np.where(nudge_a[idx], EDGE_NUDGE * width[:, 0], 0.0)
        u[:, -1] -= np.where(nudge_b[idx], EDGE_NUDGE * width[:, 0], 0.0)
        vals = np.broadcast_to(np.asarray(f(u, a), dtype=float), u.shape)
        return (vals @ _simpson_weights(n)) * (width[:, 0] / n)

    result = np.empty(n_int)
    idx = np.arange(n_int)
    n = 2
    coarse = estimate(idx, n)
    while idx.size:
        n *= 2
        fine = estimate(idx, n)
        diff = np.abs(fine - coarse)
        done = diff <= rtol * np.abs(fine)
        if n >= max_panels:
            log.warning("Simpson refinement hit %d panels on %d intervals", n, int((~done).sum()))
            done[:] = True
        result[idx[done]] = fine[done] + (fine[done] - coarse[done]) / 15.0
        idx, coarse = idx[~done], fine[~done]
    return result


def simpson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, rtol: float = SIMPSON_RTOL,
            max_panels: int = MAX_PANELS, breakpoints=()) -> float:
    """Adaptive composite Simpson on ``[a, b]``, split at any interior ``breakpoints``."""
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    inner = [p for p in np.asarray(breakpoints, dtype=float).ravel() if a < p < b]
    edges = np.unique(np.concatenate([[a], inner, [b]]))
    parts = simpson_intervals(lambda u, _a: f(u), edges, rtol, max_panels, jumps=inner)
    return sign * float(parts.sum())


def rk4_linear_backward(
    times,
    rate: Callable[[np.ndarray], np.ndarray],
    source: Callable[[np.ndarray], np.ndarray],
    terminal: float,
    jumps=(),
) -> np.ndarray:
    """Classical RK4 for ``y' = rate(t) y - source(t)`` from ``y(times[-1]) = terminal`` back to ``times[0]``.

    The ODE is linear, so the coefficients at every stage point are
    evaluated up front in one vectorized call each. Step endpoints that
    coincide with a coefficient jump are evaluated just inside the step.
    """
    t = np.asarray(times, dtype=float)
    h = t[:-1] - t[1:]  # negative: marching backward
    jumps = np.asarray(jumps, dtype=float)
    start = t[1:].copy()
    end = t[:-1].copy()
    start[np.isin(start, jumps)] += EDGE_NUDGE * h[np.isin(start, jumps)]
    end[np.isin(end, jumps)] -= EDGE_NUDGE * h[np.isin(end, jumps)]
    mid = t[1:] + 0.5 * h

    def at(fn, x):
        return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)

    a1, g1 = at(rate, start), at(source, start)
    am, gm = at(rate, mid), at(source, mid)
    a4, g4 = at(rate, end), at(source, end)

    # plain floats: the loop is sequential and numpy scalar access is slow
    a1, g1, am, gm, a4, g4, hs = (np.asarray(v, dtype=float).tolist() for v in (a1, g1, am, gm, a4, g4, h))
    out = [0.0] * t.size
    cur = out[-1] = float(terminal)
    for k in range(t.size - 2, -1, -1):
        hk = hs[k]
        k1 = a1[k] * cur - g1[k]
        k2 = am[k] * (cur + 0.5 * hk * k1) - gm[k]
        k3 = am[k] * (cur + 0.5 * hk * k2) - gm[k]
        k4 = a4[k] * (cur + hk * k3) - g4[k]
        cur = cur + hk / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = cur
    return np.array(out)
