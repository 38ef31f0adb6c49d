"""One-step markets: arbitrage detection, stochastic discount factors, completeness.

A market is a payoff matrix ``A`` (assets x states, entries are next-period
price plus dividend) and a cost vector ``b`` of current prices. The Farkas
alternative is decided with a phase-one simplex:

* either there is an SDF ``m >= 0`` with ``A m = b``,
* or there is a portfolio ``theta`` with ``A.T theta >= 0`` and ``b theta <= 0``,
  strict somewhere (an arbitrage).
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ArbitrageExists,
    DegenerateDichotomy,
    DimensionMismatch,
    MarketFormatError,
    NonFiniteInput,
    NotNormalizable,
)
from .simplex import phase_one

EPS_FEAS = 1e-9
RANK_TOL = 1e-10
RISK_FREE_ID = "RF"


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PayoffMatrix:
    """Payoffs ``entries[j, k]`` of asset ``j`` in state ``k`` and costs ``costs[j]``.

    When ``has_risk_free`` is set, row 0 is the risk-free asset: constant
    ``1 + r`` across states with cost 1.
    """

    entries: np.ndarray
    costs: np.ndarray
    has_risk_free: bool = False
    risk_free_rate: float | None = None
    asset_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        entries = _frozen_array(self.entries, 2, "entries")
        costs = _frozen_array(self.costs, 1, "costs")
        m, n = entries.shape
        if m < 1 or n < 1:
            raise DimensionMismatch("payoff matrix needs at least one asset and one state")
        if costs.shape[0] != m:
            raise DimensionMismatch(f"costs has length {costs.shape[0]}, expected {m}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "costs", costs)
        if self.asset_ids is not None:
            ids = tuple(str(a) for a in self.asset_ids)
            if len(ids) != m:
                raise DimensionMismatch("asset_ids length does not match number of assets")
            object.__setattr__(self, "asset_ids", ids)

        if self.has_risk_free:
            gross = entries[0]
            rate = float(gross[0] - 1.0) if self.risk_free_rate is None else float(self.risk_free_rate)
            if not np.isfinite(rate) or rate <= -1.0:
                raise ValueError(f"risk-free rate must exceed -1, got {rate}")
            if not np.allclose(gross, 1.0 + rate, rtol=1e-12, atol=1e-12):
                raise ValueError("risk-free row must equal 1 + r in every state")
            if abs(costs[0] - 1.0) > 1e-12:
                raise ValueError("risk-free asset must cost 1")
            object.__setattr__(self, "risk_free_rate", rate)
        elif self.risk_free_rate is not None:
            raise ValueError("risk_free_rate given without has_risk_free")

    @classmethod
    def with_risk_free(cls, rate: float, entries, costs, asset_ids=None) -> "PayoffMatrix":
        """Prepend the constant ``1 + rate`` row with unit cost."""
        entries = np.atleast_2d(np.asarray(entries, dtype=float))
        n = entries.shape[1]
        full = np.vstack([np.full((1, n), 1.0 + rate), entries])
        ids = None if asset_ids is None else (RISK_FREE_ID, *asset_ids)
        return cls(full, np.concatenate([[1.0], np.asarray(costs, dtype=float)]), True, rate, ids)

    @property
    def n_assets(self) -> int:
        return self.entries.shape[0]

    @property
    def n_states(self) -> int:
        return self.entries.shape[1]

    def scale(self) -> float:
        return max(1.0, float(np.abs(self.entries).max()), float(np.abs(self.costs).max()))


@dataclass(frozen=True)
class SdfVector:
    """Nonnegative state prices ``m`` with optional ``(pi, v)`` factorization.

    ``unique`` is True when the market is complete, False when the solution
    is one of many, and None when it was not determined.
    """

    values: np.ndarray
    unique: bool | None = None
    factorization: tuple[np.ndarray, np.ndarray] | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = _frozen_array(self.values, 1, "sdf values")
        if np.any(values < -EPS_FEAS):
            raise ValueError(f"SDF has negative components: {values}")
        object.__setattr__(self, "values", values)
        if self.factorization is not None:
            pi = _frozen_array(self.factorization[0], 1, "state probabilities")
            v = _frozen_array(self.factorization[1], 1, "discount factors")
            if pi.shape != values.shape or v.shape != values.shape:
                raise DimensionMismatch("factorization length differs from SDF length")
            if np.any(pi < -EPS_FEAS) or abs(pi.sum() - 1.0) > 1e-9 or np.any(v <= 0):
                raise ValueError("factorization needs probabilities summing to 1 and positive discounts")
            if not np.allclose(pi * v, values, rtol=1e-9, atol=1e-12):
                raise ValueError("pi * v does not reproduce the SDF")
            object.__setattr__(self, "factorization", (pi, v))


@dataclass(frozen=True)
class ArbitrageCertificate:
    """Portfolio ``weights`` with ``cost <= 0`` and nonnegative ``state_payoffs``."""

    weights: np.ndarray
    cost: float
    state_payoffs: np.ndarray

    def is_valid(self, tolerance: float = EPS_FEAS) -> bool:
        return bool(
            self.cost <= tolerance
            and np.all(self.state_payoffs >= -tolerance)
            and (self.cost < -tolerance or np.any(self.state_payoffs > tolerance))
        )


def _risk_neutral_factorization(market: PayoffMatrix, values: np.ndarray):
    if not market.has_risk_free:
        return None
    gross = 1.0 + market.risk_free_rate
    pi = values * gross
    total = pi.sum()
    if total <= 0 or abs(total - 1.0) > 1e-9:
        return None
    return pi / total, np.full_like(values, 1.0 / gross)


def detect_arbitrage(market: PayoffMatrix, tolerance: float = EPS_FEAS) -> ArbitrageCertificate | SdfVector:
    """Decide the Farkas alternative for ``market``.

    The LP solved is the strict version of the alternative: find ``z >= 1``
    and ``tau >= 1`` with ``A z = tau b``. A solution gives the strictly
    positive SDF ``z / tau``. Infeasibility yields, through the phase-one
    dual, a ``theta`` with ``A.T theta >= 0``, ``b theta <= 0`` and
    ``sum(A.T theta) > b theta``, which is an arbitrage whether the strict
    part comes from the cost or from some state payoff.

    Raises ``DegenerateDichotomy`` if the LP stops at a point that does not
    clear either branch's checks at ``tolerance``.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    A, b = market.entries, market.costs
    m, n = A.shape
    tol = tolerance * market.scale()

    # substitute z = 1 + w, tau = 1 + sigma with w, sigma >= 0
    lhs = np.hstack([A, -b[:, None]])
    rhs = b - A.sum(axis=1)
    lp = phase_one(lhs, rhs)

    if lp.objective <= tol:
        w, sigma = lp.x[:n], lp.x[n]
        values = (1.0 + w) / (1.0 + sigma)
        residual = float(np.max(np.abs(A @ values - b)))
        if residual > tolerance * (1.0 + float(np.max(np.abs(b)))) or np.any(values < -tolerance):
            raise DegenerateDichotomy(
                f"LP objective {lp.objective:.3e} is within tolerance but SDF residual is {residual:.3e}"
            )
        complete = check_completeness(market)
        return SdfVector(
            values,
            unique=complete,
            factorization=_risk_neutral_factorization(market, values),
            metadata={"residual": residual, "pivots": lp.iterations, "strictly_positive": True},
        )

    theta = lp.dual
    norm = float(np.max(np.abs(theta)))
    if norm == 0.0:
        raise DegenerateDichotomy("phase-one dual vanished although the LP is infeasible")
    theta = theta / norm
    cert = ArbitrageCertificate(weights=theta, cost=float(b @ theta), state_payoffs=A.T @ theta)
    if not cert.is_valid(tol):
        raise DegenerateDichotomy(
            f"LP infeasible (objective {lp.objective:.3e}) but dual certificate fails checks: "
            f"cost={cert.cost:.3e}, min payoff={cert.state_payoffs.min():.3e}"
        )
    return cert


def solve_sdf(market: PayoffMatrix, tolerance: float = EPS_FEAS) -> SdfVector:
    """Basic feasible solution of ``A m = b, m >= 0``.

    In a complete market this is the unique SDF. Otherwise it is one vertex of
    the solution set and ``unique`` is False.
    """
    A, b = market.entries, market.costs
    tol = tolerance * market.scale()
    lp = phase_one(A, b)
    if lp.objective > tol:
        raise ArbitrageExists(
            f"no nonnegative solution of A m = b (phase-one objective {lp.objective:.3e}); "
            "run detect_arbitrage for a certificate"
        )
    values = np.where((lp.x < 0) & (lp.x >= -tol), 0.0, lp.x)
    residual = float(np.max(np.abs(A @ values - b)))
    if residual > tolerance * (1.0 + float(np.max(np.abs(b)))):
        raise DegenerateDichotomy(f"phase-one solution has residual {residual:.3e}")
    return SdfVector(
        values,
        unique=check_completeness(market),
        factorization=_risk_neutral_factorization(market, values),
        metadata={"residual": residual, "pivots": lp.iterations, "basis": lp.basis},
    )


def numerical_rank(matrix, rank_tolerance: float = RANK_TOL) -> int:
    """Rank by Gaussian elimination with partial pivoting.

    A pivot counts when its magnitude is at least ``rank_tolerance`` times the
    largest entry of the matrix.
    """
    M = np.array(matrix, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NonFiniteInput("matrix contains NaN or infinite entries")
    rows, cols = M.shape
    threshold = rank_tolerance * float(np.max(np.abs(M), initial=0.0))
    if threshold == 0.0:
        return 0
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        p = rank + int(np.argmax(np.abs(M[rank:, col])))
        if abs(M[p, col]) < threshold:
            continue
        M[[rank, p]] = M[[p, rank]]
        M[rank + 1 :] -= np.outer(M[rank + 1 :, col] / M[rank, col], M[rank])
        rank += 1
    return rank


def check_completeness(market: PayoffMatrix | np.ndarray, rank_tolerance: float = RANK_TOL) -> bool:
    entries = market.entries if isinstance(market, PayoffMatrix) else np.asarray(market, dtype=float)
    return numerical_rank(entries, rank_tolerance) == entries.shape[1]


def extract_risk_neutral(sdf: SdfVector | Sequence[float], risk_free_rate: float, tolerance: float = EPS_FEAS):
    """Return ``(pi, 1 / (1 + r))`` with ``pi = m (1 + r)``.

    Raises ``NotNormalizable`` when ``sum(m) (1 + r)`` is not 1, i.e. the SDF
    does not price a risk-free asset at that rate.
    """
    values = sdf.values if isinstance(sdf, SdfVector) else np.asarray(sdf, dtype=float)
    gross = 1.0 + risk_free_rate
    if gross <= 0:
        raise ValueError("1 + r must be positive")
    if np.any(values < -tolerance):
        raise ValueError("SDF must be nonnegative")
    pi = values * gross
    total = float(pi.sum())
    if abs(total - 1.0) > tolerance:
        raise NotNormalizable(f"sum(m) * (1 + r) = {total!r}, expected 1")
    return pi / total, 1.0 / gross


def price_one_step(payoff_next, dividend_next, sdf: SdfVector | Sequence[float]) -> float:
    values = sdf.values if isinstance(sdf, SdfVector) else np.asarray(sdf, dtype=float)
    payoff_next = np.asarray(payoff_next, dtype=float)
    dividend_next = np.asarray(dividend_next, dtype=float)
    if payoff_next.shape != values.shape or dividend_next.shape != values.shape:
        raise DimensionMismatch(
            f"payoffs {payoff_next.shape}, dividends {dividend_next.shape}, SDF {values.shape}"
        )
    return float(values @ (payoff_next + dividend_next))


def read_payoff_csv(source: str | os.PathLike | io.TextIOBase) -> PayoffMatrix:
    """Parse ``asset,s1,...,sn,cost`` rows. An ``RF`` row becomes the risk-free row 0."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    rows = [(i, r) for i, r in enumerate(csv.reader(io.StringIO(text)), start=1) if any(c.strip() for c in r)]
    if not rows:
        raise MarketFormatError("empty payoff file", line=1)

    header_line, header = rows[0]
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "asset" or header[-1] != "cost":
        raise MarketFormatError("header must be 'asset,s1,...,sn,cost'", line=header_line)
    n = len(header) - 2
    if header[1:-1] != [f"s{k}" for k in range(1, n + 1)]:
        raise MarketFormatError("state columns must be named s1..sn", line=header_line)
    if len(rows) == 1:
        raise MarketFormatError("no asset rows", line=header_line + 1)

    ids, entries, costs, rf_index, rf_line = [], [], [], None, None
    for line, row in rows[1:]:
        if len(row) != n + 2:
            raise MarketFormatError(f"expected {n + 2} fields, got {len(row)}", line=line)
        asset = row[0].strip()
        if asset in ids:
            raise MarketFormatError(f"duplicate asset id {asset!r}", line=line)
        try:
            numbers = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise MarketFormatError(str(exc), line=line) from None
        if not all(np.isfinite(numbers)):
            raise MarketFormatError("non-finite value", line=line)
        if asset == RISK_FREE_ID:
            rf_index, rf_line = len(ids), line
        ids.append(asset)
        entries.append(numbers[:-1])
        costs.append(numbers[-1])

    if rf_index is not None:
        order = [rf_index] + [i for i in range(len(ids)) if i != rf_index]
        ids = [ids[i] for i in order]
        entries = [entries[i] for i in order]
        costs = [costs[i] for i in order]
        try:
            return PayoffMatrix(entries, costs, True, None, tuple(ids))
        except ValueError as exc:
            raise MarketFormatError(str(exc), line=rf_line) from None
    return PayoffMatrix(entries, costs, False, None, tuple(ids))
