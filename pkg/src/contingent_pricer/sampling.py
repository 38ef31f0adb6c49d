"""Random fixtures and brute-force oracles used by the verification suites.

The oracles here deliberately avoid the simplex code: arbitrage is decided
by enumerating basic solutions (Caratheodory) and by a lattice search over
portfolios.
"""

from __future__ import annotations

import itertools

import numpy as np

from .market_core import PayoffMatrix
from .tree_engine import TreeNode, UncertaintyTree


def random_market(rng: np.random.Generator, max_assets: int = 5, max_states: int = 5) -> PayoffMatrix:
    m = int(rng.integers(1, max_assets + 1))
    n = int(rng.integers(1, max_states + 1))
    return PayoffMatrix(rng.uniform(-2.0, 2.0, (m, n)), rng.uniform(-1.0, 2.0, m))


def strict_sdf_exists(A, b, tol: float = 1e-9) -> bool:
    """True iff some ``m > 0`` solves ``A m = b``, by enumerating basic solutions.

    Equivalent system: ``[A | -b] x = b - A 1`` with ``x >= 0`` (``m = (1 + w) / (1 + s)``).
    If it is feasible, some feasible point is supported on linearly
    independent columns, so trying every such column subset is exhaustive.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    M = np.hstack([A, -b[:, None]])
    r = b - A.sum(axis=1)
    scale = max(1.0, float(np.abs(M).max()), float(np.abs(r).max()))
    if np.max(np.abs(r)) <= tol * scale:
        return True
    rows, cols = M.shape
    for size in range(1, min(rows, cols) + 1):
        for subset in itertools.combinations(range(cols), size):
            sub = M[:, subset]
            if np.linalg.matrix_rank(sub, tol=1e-10 * scale) < size:
                continue
            x, *_ = np.linalg.lstsq(sub, r, rcond=None)
            if np.max(np.abs(sub @ x - r)) <= tol * scale and np.all(x >= -tol * scale):
                return True
    return False


def lattice_arbitrage(A, b, resolution: int = 4, margin: float = 1e-9) -> np.ndarray | None:
    """Search portfolios on the grid ``{-1, ..., 1}`` with step ``1/resolution``.

    Returns the first arbitrage portfolio found, or None. Only a positive
    answer is conclusive; a coarse lattice can miss thin arbitrage cones.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    axis = np.arange(-resolution, resolution + 1) / resolution
    grid = np.array(np.meshgrid(*([axis] * A.shape[0]), indexing="ij")).reshape(A.shape[0], -1).T
    cost = grid @ b
    payoff = grid @ A
    ok = (cost <= margin) & np.all(payoff >= -margin, axis=1)
    strict = (cost < -margin) | np.any(payoff > margin, axis=1)
    hits = np.flatnonzero(ok & strict)
    return grid[hits[0]] if hits.size else None


def random_tree(rng: np.random.Generator, max_depth: int = 4, max_branching: int = 3,
                dividend_probability: float = 0.5, zero_dividends: bool = False) -> UncertaintyTree:
    depth = int(rng.integers(1, max_depth + 1))
    nodes = [TreeNode("r", 0, None, 1.0, 1.0, None if depth else float(rng.uniform(0, 2)), 0.0)]
    frontier = ["r"]
    for t in range(1, depth + 1):
        nxt = []
        for parent in frontier:
            k = int(rng.integers(1, max_branching + 1))
            weights = rng.uniform(0.1, 1.0, k)
            probs = weights / weights.sum()
            probs[-1] = 1.0 - probs[:-1].sum()
            for i in range(k):
                nid = f"{parent}.{i}"
                div = 0.0
                if not zero_dividends and rng.uniform() < dividend_probability:
                    div = float(rng.uniform(0.0, 1.0))
                price = float(rng.uniform(0.0, 2.0)) if t == depth else None
                nodes.append(TreeNode(nid, t, parent, float(probs[i]), float(rng.uniform(0.5, 1.1)), price, div))
                nxt.append(nid)
        frontier = nxt
    return UncertaintyTree(nodes)
