"""Dense phase-one simplex for feasibility of ``{x : A x = b, x >= 0}``.

Bland's rule is used for both the entering and the leaving variable, so the
method terminates on degenerate problems. Sizes here are tiny (a few dozen
rows at most) and the tableau is kept as a plain numpy array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhaseOneResult:
    """Outcome of the phase-one LP ``min 1's`` s.t. ``D A x + s = D b``.

    ``objective`` is the optimal sum of artificial variables; it is zero
    (up to roundoff) exactly when the original system is feasible.
    ``x`` is the basic solution restricted to the structural columns.
    ``dual`` is read off the final tableau and transformed back so that,
    when ``objective > 0``, ``A.T @ dual >= 0`` and ``b @ dual < 0``.
    """

    x: np.ndarray
    objective: float
    dual: np.ndarray
    basis: tuple[int, ...]
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def phase_one(A, b, pivot_tol: float = 1e-12, max_iter: int = 10_000) -> PhaseOneResult:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    eps = pivot_tol * scale

    # columns: n structural, m artificial, then rhs
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = sign[:, None] * A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = sign * b
    T[m, :n] = -T[:m, :n].sum(axis=0)
    T[m, -1] = -T[:m, -1].sum()
    basis = list(range(n, n + m))

    iterations = 0
    while iterations < max_iter:
        reduced = T[m, :-1]
        candidates = np.flatnonzero(reduced < -eps)
        if candidates.size == 0:
            break
        # Bland: first improving column with a usable pivot. A negative
        # reduced cost over an all-nonpositive column is roundoff, since the
        # phase-one objective is bounded below by zero.
        col = None
        for c in candidates:
            rows = np.flatnonzero(T[:m, c] > eps)
            if rows.size:
                col = int(c)
                break
        if col is None:
            break
        column = T[:m, col]
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + eps * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        iterations += 1
    else:
        raise RuntimeError(f"phase-one simplex did not terminate in {max_iter} pivots")

    x = np.zeros(n)
    for r, var in enumerate(basis):
        if var < n:
            x[var] = T[r, -1]
    # reduced cost of artificial i is 1 - w_i, with w = c_B B^{-1}
    w = 1.0 - T[m, n : n + m]
    dual = -sign * w
    return PhaseOneResult(
        x=x,
        objective=float(-T[m, -1]),
        dual=dual,
        basis=tuple(basis),
        iterations=iterations,
    )
