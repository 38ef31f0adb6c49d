"""Continuous-time valuation of risk-free and life-contingent cash flows.

Every contract here has a price path ``p_t`` on ``[0, H]`` solving the
backward linear ODE

    dp/dt = (delta_t + mu_t) p_t - g_t,    p_H = terminal,

where ``g_t`` is ``mu_t b_t`` for a whole-life benefit ``b_t`` and the
payment rate for annuities and risk-free streams (which have ``mu = 0``).
Two independent routes produce the path:

* quadrature of the closed-form solution on each grid interval, composed
  backward with the exact one-interval discount, and
* classical RK4 on the ODE itself.

With a finite limiting age the hazard is unbounded near ``H``. The RK4 route
then integrates ``q_t = t_p_x * p_t``, which obeys ``dq/dt = delta_t q_t - G_t``
with ``G_t`` built from the (bounded) death density or survival curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import tree_engine
from .curves import Constant, Curve, as_curve
from .errors import DeadCohort, NonFiniteInput, StepTooLarge, ZeroAnnuity
from .mortality import SurvivalModel, TRUNCATION_SURVIVAL
from .numerics import SIMPSON_RTOL, rk4_linear_backward, simpson_intervals

DEFAULT_GRID_STEP = 1.0 / 256.0
AGREEMENT_TOL = 1e-6
RECURSION_TOL = 1e-8


@dataclass(frozen=True)
class WholeLife:
    """Benefit ``b_t`` paid at the moment of death."""

    benefit: Curve = Constant(1.0)

    def __post_init__(self):
        object.__setattr__(self, "benefit", as_curve(self.benefit))


@dataclass(frozen=True)
class ContinuousAnnuity:
    """Payments at rate ``payment_rate(t)`` per year while alive."""

    payment_rate: Curve = Constant(1.0)

    def __post_init__(self):
        object.__setattr__(self, "payment_rate", as_curve(self.payment_rate))


@dataclass(frozen=True)
class RiskFree:
    """Certain payment stream up to ``horizon`` plus ``terminal_value`` at the horizon."""

    payment_rate: Curve = Constant(0.0)
    terminal_value: float = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "payment_rate", as_curve(self.payment_rate))
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("risk-free horizon must be positive and finite")
        if not math.isfinite(self.terminal_value):
            raise NonFiniteInput("terminal value must be finite")


Contract = Union[WholeLife, ContinuousAnnuity, RiskFree]


@dataclass(frozen=True)
class ValuationRequest:
    contract: Contract
    foi: Curve = Constant(0.0)
    survival: SurvivalModel | None = None
    issue_age: float = 0.0
    grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self):
        object.__setattr__(self, "foi", as_curve(self.foi))
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if isinstance(self.contract, RiskFree):
            return
        if self.survival is None:
            raise ValueError("life-contingent contracts need a survival model")
        if self.issue_age < 0:
            raise ValueError("issue age must be nonnegative")
        if self.issue_age >= self.survival.limiting_age or float(self.survival.survival(self.issue_age)) <= 0:
            raise DeadCohort(f"no survivors at issue age {self.issue_age}")

    @property
    def life_contingent(self) -> bool:
        return not isinstance(self.contract, RiskFree)

    @property
    def finite_omega(self) -> bool:
        return self.life_contingent and math.isfinite(self.survival.limiting_age)

    def horizon(self) -> float:
        """Contract horizon in policy years, truncated where survival drops below 1e-12."""
        if isinstance(self.contract, RiskFree):
            return float(self.contract.horizon)
        if self.finite_omega:
            return self.survival.limiting_age - self.issue_age
        raw = self.survival.truncation_duration(self.issue_age, TRUNCATION_SURVIVAL)
        return math.ceil(raw / self.grid_step - 1e-9) * self.grid_step

    def jumps(self) -> np.ndarray:
        """Policy times where an integrand or ODE coefficient may jump."""
        pts = [self.foi.breakpoints]
        flow = self.contract.benefit if isinstance(self.contract, WholeLife) else self.contract.payment_rate
        pts.append(flow.breakpoints)
        if self.life_contingent:
            pts.append(np.asarray(self.survival.breakpoints, dtype=float) - self.issue_age)
        H = self.horizon()
        allpts = np.concatenate([np.asarray(p, dtype=float).ravel() for p in pts])
        return np.unique(allpts[(allpts > 0) & (allpts < H)])

    def grid(self) -> np.ndarray:
        H = self.horizon()
        n = int(math.floor(H / self.grid_step + 1e-9))
        uniform = np.arange(n + 1) * self.grid_step
        uniform = uniform[uniform < H - 1e-12 * max(1.0, H)]
        return np.unique(np.concatenate([uniform, self.jumps(), [H]]))


@dataclass(frozen=True)
class ValuationResult:
    times: np.ndarray
    prices: np.ndarray
    method: str
    grid_step: float
    request: ValuationRequest = field(repr=False)
    evaluations: int = 0
    max_deviation: float | None = None

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def price_at(self, t: float) -> float:
        """Price at any ``t`` in ``[0, H]``.

        Grid times return the stored value. Between grid points the price is
        rolled back from the next grid time over the partial interval.
        """
        if not 0.0 <= t <= self.horizon + 1e-12:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.times, t))
        if k < self.times.size and abs(self.times[k] - t) <= 1e-12 * max(1.0, t):
            return float(self.prices[k])
        if k > 0 and abs(self.times[k - 1] - t) <= 1e-12 * max(1.0, t):
            return float(self.prices[k - 1])
        flows, discount = interval_flows(self.request, t, float(self.times[k]))
        return flows + discount * float(self.prices[k])


# --- integrands -------------------------------------------------------------

def _flow_curve(request: ValuationRequest) -> Curve:
    c = request.contract
    return c.benefit if isinstance(c, WholeLife) else c.payment_rate


def _local_integrand(request: ValuationRequest):
    """Integrand of one interval's cash flows, discounted to the interval start.

    Returns ``f(u, a)`` = (cash-flow rate at ``u``) x (discount and survival
    from ``a`` to ``u``); integrating it over ``[a, b]`` gives the value at
    ``a`` of everything paid in ``[a, b]``.
    """
    foi = request.foi
    flow = _flow_curve(request)
    x0 = request.issue_age
    model = request.survival

    def discount(u, a):
        return np.exp(-(foi.integral(u) - foi.integral(a)))

    if isinstance(request.contract, RiskFree):
        return lambda u, a: flow(u) * discount(u, a)
    if isinstance(request.contract, WholeLife):
        return lambda u, a: flow(u) * model.density(x0 + a, u - a) * discount(u, a)
    return lambda u, a: flow(u) * model.tpx(x0 + a, u - a) * discount(u, a)


def _interval_discount(request: ValuationRequest, a, b):
    """Discount-with-survival factor from ``a`` to ``b`` (vectorized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = np.exp(-(request.foi.integral(b) - request.foi.integral(a)))
    if request.life_contingent:
        d = d * request.survival.tpx(request.issue_age + a, b - a)
    return d


def interval_flows(request: ValuationRequest, a: float, b: float) -> tuple[float, float]:
    """Value at ``a`` of the cash flows on ``[a, b]``, and the factor carrying ``p_b`` back to ``a``."""
    if b < a:
        raise ValueError("need a <= b")
    if b == a:
        return 0.0, 1.0
    inner = request.jumps()
    edges = np.unique(np.concatenate([[a], inner[(inner > a) & (inner < b)], [b]]))
    parts = simpson_intervals(_local_integrand(request), edges, jumps=inner)
    factors = _interval_discount(request, edges[:-1], edges[1:])
    value, carry = 0.0, 1.0
    for part, fac in zip(parts, factors):
        value += carry * part
        carry *= fac
    return float(value), float(carry)


def _terminal(request: ValuationRequest) -> float:
    return float(request.contract.terminal_value) if isinstance(request.contract, RiskFree) else 0.0


# --- quadrature route -------------------------------------------------------

def _quadrature_path(request: ValuationRequest, times: np.ndarray) -> np.ndarray:
    jumps = request.jumps()
    pieces = simpson_intervals(_local_integrand(request), times, rtol=SIMPSON_RTOL, jumps=jumps)
    factors = _interval_discount(request, times[:-1], times[1:])
    if not (np.all(np.isfinite(pieces)) and np.all(np.isfinite(factors))):
        raise NonFiniteInput("non-finite integrand encountered")
    prices = np.empty(times.size)
    cur = prices[-1] = _terminal(request)
    for k in range(times.size - 2, -1, -1):
        cur = pieces[k] + factors[k] * cur
        prices[k] = cur
    return prices


def value_quadrature(request: ValuationRequest) -> ValuationResult:
    times = request.grid()
    prices = _quadrature_path(request, times)
    return ValuationResult(times, prices, "quadrature", request.grid_step, request, evaluations=times.size - 1)


def value_risk_free(request: ValuationRequest, method: str = "quadrature") -> ValuationResult:
    if not isinstance(request.contract, RiskFree):
        raise TypeError("value_risk_free needs a RiskFree contract")
    if method == "quadrature":
        return value_quadrature(request)
    if method == "ode":
        return value_ode(request, verify_tolerance=None)
    raise ValueError(f"unknown method {method!r}")


def value_whole_life_quadrature(request: ValuationRequest) -> ValuationResult:
    if not isinstance(request.contract, WholeLife):
        raise TypeError("needs a WholeLife contract")
    return value_quadrature(request)


def value_annuity_quadrature(request: ValuationRequest) -> ValuationResult:
    if not isinstance(request.contract, ContinuousAnnuity):
        raise TypeError("needs a ContinuousAnnuity contract")
    return value_quadrature(request)


# --- ODE route --------------------------------------------------------------

def _ode_path(request: ValuationRequest, times: np.ndarray) -> np.ndarray:
    foi = request.foi
    flow = _flow_curve(request)
    jumps = request.jumps()
    terminal = _terminal(request)

    if not request.life_contingent:
        return rk4_linear_backward(times, foi, flow, terminal, jumps)

    model, x0 = request.survival, request.issue_age
    whole_life = isinstance(request.contract, WholeLife)
    if not request.finite_omega:
        def rate(t):
            return foi(t) + model.hazard(x0 + t)

        def source(t):
            return model.hazard(x0 + t) * flow(t) if whole_life else flow(t)

        return rk4_linear_backward(times, rate, source, terminal, jumps)

    # survival-weighted form: q = t_p_x * p stays regular at the limiting age
    def weighted_source(t):
        if whole_life:
            return flow(t) * model.density(x0, t)
        return flow(t) * model.tpx(x0, t)

    q = rk4_linear_backward(times, foi, weighted_source, 0.0, jumps)
    surv = model.tpx(x0, times)
    prices = np.zeros_like(q)
    alive = surv > 0
    prices[alive] = q[alive] / surv[alive]
    prices[-1] = 0.0
    return prices


def value_ode(request: ValuationRequest, verify_tolerance: float | None = None) -> ValuationResult:
    times = request.grid()
    prices = _ode_path(request, times)
    if not np.all(np.isfinite(prices)):
        raise NonFiniteInput("ODE integration produced non-finite prices")
    deviation = None
    if verify_tolerance is not None:
        reference = _quadrature_path(request, times)
        deviation = float(np.max(np.abs(prices - reference)))
        if deviation > verify_tolerance:
            raise StepTooLarge(
                f"RK4 path deviates from quadrature by {deviation:.3e} > {verify_tolerance:.1e} "
                f"at grid_step {request.grid_step}"
            )
    return ValuationResult(times, prices, "ode", request.grid_step, request,
                           evaluations=times.size - 1, max_deviation=deviation)


def _default_agreement(grid_step: float) -> float:
    return max(AGREEMENT_TOL, grid_step**4)


def value_whole_life_ode(request: ValuationRequest, grid_step: float | None = None,
                         verify_tolerance: float | None | str = "default") -> ValuationResult:
    """RK4 price path for a whole-life benefit.

    The path is checked against the quadrature route unless
    ``verify_tolerance`` is None; by default the allowed gap is
    ``max(1e-6, grid_step**4)``.
    """
    if not isinstance(request.contract, WholeLife):
        raise TypeError("needs a WholeLife contract")
    return _ode_entry(request, grid_step, verify_tolerance)


def value_annuity_ode(request: ValuationRequest, grid_step: float | None = None,
                      verify_tolerance: float | None | str = "default") -> ValuationResult:
    if not isinstance(request.contract, ContinuousAnnuity):
        raise TypeError("needs a ContinuousAnnuity contract")
    return _ode_entry(request, grid_step, verify_tolerance)


def _ode_entry(request, grid_step, verify_tolerance):
    if grid_step is not None:
        request = ValuationRequest(request.contract, request.foi, request.survival, request.issue_age, grid_step)
    if verify_tolerance == "default":
        verify_tolerance = _default_agreement(request.grid_step)
    return value_ode(request, verify_tolerance)


# --- actuarial symbols and premiums -----------------------------------------

def _epv_at_issue(request: ValuationRequest) -> float:
    """Value at time 0 on a coarse partition (yearly edges plus jumps)."""
    H = request.horizon()
    edges = np.unique(np.concatenate([np.arange(0.0, H, 1.0), request.jumps(), [H]]))
    return float(_quadrature_path(request, edges)[0])


def _constant_foi(delta) -> Curve:
    foi = as_curve(delta)
    if isinstance(foi, Constant) and foi.value < 0:
        raise ValueError("force of interest must be nonnegative")
    return foi


def a_bar(model: SurvivalModel, x: float, delta: float) -> float:
    """EPV of a life annuity paid continuously at unit rate from age ``x``."""
    return _epv_at_issue(ValuationRequest(ContinuousAnnuity(Constant(1.0)), _constant_foi(delta), model, x))


def A_bar(model: SurvivalModel, x: float, delta: float) -> float:
    """EPV of a unit benefit paid at the moment of death of a life aged ``x``."""
    return _epv_at_issue(ValuationRequest(WholeLife(Constant(1.0)), _constant_foi(delta), model, x))


def solve_net_premium_rate(model: SurvivalModel, x: float, delta: float, benefit=1.0) -> float:
    """Level premium rate balancing the EPV of premiums against the benefit EPV."""
    foi = _constant_foi(delta)
    benefit_epv = _epv_at_issue(ValuationRequest(WholeLife(as_curve(benefit)), foi, model, x))
    annuity = a_bar(model, x, delta)
    if not annuity > 0:
        raise ZeroAnnuity(f"annuity value {annuity!r} is not positive")
    return benefit_epv / annuity


# --- recursion --------------------------------------------------------------

def check_recursion(result: ValuationResult, t0: float, t1: float, t2: float) -> float:
    """Largest relative residual of the backward recursion over ``t0 <= t1 <= t2``.

    Three identities are checked: rolling ``p_t1`` back to ``t0``, rolling
    ``p_t2`` back to ``t1``, and rolling ``p_t2`` straight back to ``t0``.
    """
    if not 0.0 <= t0 <= t1 <= t2 <= result.horizon + 1e-12:
        raise ValueError("need 0 <= t0 <= t1 <= t2 <= horizon")
    p0, p1, p2 = (result.price_at(t) for t in (t0, t1, t2))
    req = result.request
    f01, d01 = interval_flows(req, t0, t1)
    f12, d12 = interval_flows(req, t1, t2)
    f02, d02 = interval_flows(req, t0, t2)
    residuals = (
        abs(p0 - (f01 + d01 * p1)) / max(1.0, abs(p0)),
        abs(p1 - (f12 + d12 * p2)) / max(1.0, abs(p1)),
        abs(p0 - (f02 + d02 * p2)) / max(1.0, abs(p0)),
    )
    return max(residuals)


# --- discrete die/survive tree ----------------------------------------------

def survival_tree(model: SurvivalModel, issue_age: float, foi, benefit, dt: float) -> tree_engine.UncertaintyTree:
    """Whole-life contract as a die/survive uncertainty tree with step ``dt``.

    From an alive node at time ``t`` the insured dies with probability
    ``mu_t dt`` (benefit ``b_{t+dt}`` paid at the next node) or survives with
    probability ``1 - mu_t dt``; both edges discount by ``1 / (1 + delta_t dt)``.
    Dead states carry on with zero cash flows until the horizon so the tree
    stays leveled.
    """
    if not math.isfinite(model.limiting_age):
        raise ValueError("the die/survive tree needs a finite limiting age")
    foi, benefit = as_curve(foi), as_curve(benefit)
    H = model.limiting_age - issue_age
    steps = int(round(H / dt))
    if steps < 1 or abs(steps * dt - H) > 1e-9 * max(1.0, H):
        raise ValueError(f"dt={dt} does not divide the remaining lifetime {H}")

    Node = tree_engine.TreeNode
    nodes = [Node(("alive", 0), 0)]
    for k in range(steps):
        t = k * dt
        q = min(float(model.hazard(issue_age + t)) * dt, 1.0)
        sdf = 1.0 / (1.0 + float(foi(t)) * dt)
        parent = ("alive", k)
        last = k + 1 == steps
        nodes.append(Node(("dead", k + 1, k + 1), k + 1, parent, q, sdf,
                          0.0 if last else None, float(benefit(t + dt))))
        for j in range(k + 2, steps + 1):
            nodes.append(Node(("dead", k + 1, j), j, ("dead", k + 1, j - 1), 1.0, 1.0,
                              0.0 if j == steps else None, 0.0))
        if q < 1.0:
            nodes.append(Node(("alive", k + 1), k + 1, parent, 1.0 - q, sdf, 0.0 if last else None, 0.0))
        else:
            break
    return tree_engine.UncertaintyTree(nodes)


def price_survival_tree(model: SurvivalModel, issue_age: float, foi, benefit, dt: float) -> float:
    tree = survival_tree(model, issue_age, foi, benefit, dt)
    return tree_engine.price_backward_induction(tree)[tree.root]
