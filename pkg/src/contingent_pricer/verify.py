"""Built-in invariant suites run by ``contingent-pricer verify``.

Every suite is seeded and returns a SuiteResult whose ``detail`` is plain
JSON data, so a run with a fixed seed serializes byte-identically.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import contingent_valuation as cv
from .market_core import EPS_FEAS, SdfVector, detect_arbitrage, price_one_step
from .mortality import ConstantForce, DeMoivre, Gompertz, LifeTable, SurvivalModel
from .sampling import lattice_arbitrage, random_market, random_tree, strict_sdf_exists
from .tree_engine import (
    UncertaintyTree,
    binomial_tree,
    check_martingale,
    conditional_expectation,
    price_backward_induction,
    price_reduced_lottery,
)

log = logging.getLogger(__name__)

DEFAULT_SEED = 20240601
WITNESS_TOL = 1e-7


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def witness_residual(market, verdict) -> float:
    """Back-substitution residual of either branch; 0 means the witness checks out exactly."""
    A, b = market.entries, market.costs
    if isinstance(verdict, SdfVector):
        m = verdict.values
        return float(max(np.max(np.abs(A @ m - b)), -float(m.min()), 0.0))
    theta = verdict.weights
    return float(max(0.0, float(theta @ b), -float((theta @ A).min())))


def witness_is_strict(market, verdict, tol: float = EPS_FEAS) -> bool:
    """SDF entries strictly positive, or the certificate has a strict side beyond ``tol`` (scaled)."""
    if isinstance(verdict, SdfVector):
        return bool(verdict.values.min() > 0)
    tol = tol * market.scale()
    theta = verdict.weights
    return bool(float(theta @ market.costs) < -tol or float((theta @ market.entries).max()) > tol)


def suite_farkas(seed: int = DEFAULT_SEED, n_markets: int = 1000, n_oracle: int = 100) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    counts = {"sdf": 0, "arbitrage": 0}
    weak = 0
    for _ in range(n_markets):
        market = random_market(rng)
        verdict = detect_arbitrage(market)
        counts["sdf" if isinstance(verdict, SdfVector) else "arbitrage"] += 1
        worst = max(worst, witness_residual(market, verdict))
        if not witness_is_strict(market, verdict):
            weak += 1
    mismatches = 0
    lattice_conflicts = 0
    for _ in range(n_oracle):
        market = random_market(rng, max_states=3)
        claims_sdf = isinstance(detect_arbitrage(market), SdfVector)
        if claims_sdf != strict_sdf_exists(market.entries, market.costs):
            mismatches += 1
        if claims_sdf and lattice_arbitrage(market.entries, market.costs) is not None:
            lattice_conflicts += 1
    passed = worst <= WITNESS_TOL and weak == 0 and mismatches == 0 and lattice_conflicts == 0
    return SuiteResult("farkas", passed, {
        "markets": n_markets, "counts": counts, "max_witness_residual": worst, "weak_witnesses": weak,
        "oracle_markets": n_oracle, "oracle_mismatches": mismatches, "lattice_conflicts": lattice_conflicts,
    })


def suite_sdf_pricing(seed: int = DEFAULT_SEED, n_markets: int = 300) -> SuiteResult:
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    checked = 0
    for _ in range(n_markets):
        market = random_market(rng)
        sdf = detect_arbitrage(market)
        if not isinstance(sdf, SdfVector):
            continue
        checked += 1
        zeros = np.zeros(market.n_states)
        for row, cost in zip(market.entries, market.costs):
            worst = max(worst, _rel(price_one_step(row, zeros, sdf), float(cost)))
    return SuiteResult("sdf_pricing", worst <= 1e-8, {"markets": checked, "max_relative_error": worst})


def suite_tower(seed: int = DEFAULT_SEED, n_trees: int = 100) -> SuiteResult:
    rng = np.random.default_rng(seed + 2)
    worst = 0.0
    for _ in range(n_trees):
        tree = random_tree(rng)
        values = {leaf: float(rng.uniform(-5, 5)) for leaf in tree.leaves}
        direct = conditional_expectation(tree, values, tree.root)
        for level in range(tree.horizon + 1):
            inner = {nid: conditional_expectation(tree, values, nid)
                     for nid in tree.order if tree.nodes[nid].time == level}
            outer = sum(w * inner[nid] for nid, w in tree.descendants_at(tree.root, level))
            worst = max(worst, abs(outer - direct))
    return SuiteResult("tower", worst <= 1e-12, {"trees": n_trees, "max_abs_error": worst})


def suite_reduced_lottery(seed: int = DEFAULT_SEED, n_trees: int = 200) -> SuiteResult:
    rng = np.random.default_rng(seed + 3)
    worst = 0.0
    for _ in range(n_trees):
        tree = random_tree(rng)
        backward = price_backward_induction(tree)
        for nid in tree.order:
            worst = max(worst, _rel(price_reduced_lottery(tree, nid), backward[nid]))
    return SuiteResult("reduced_lottery", worst <= 1e-10, {"trees": n_trees, "max_relative_error": worst})


def martingale_fixture(inject_dividend: bool = False) -> UncertaintyTree:
    """Two-step binomial tree at 5% with zero dividends, optionally paying 1 at t=1."""
    disc = 1.0 / 1.05
    return binomial_tree(2, 0.5, disc, disc, leaf_price=lambda ups, n: 1.0 + 0.5 * ups,
                         dividend=lambda t, ups: 1.0 if (inject_dividend and t == 1) else 0.0)


def suite_martingale(seed: int = DEFAULT_SEED, inject_dividend: bool = False) -> SuiteResult:
    rng = np.random.default_rng(seed + 4)
    trees = [martingale_fixture(inject_dividend)]
    trees += [random_tree(rng, zero_dividends=True) for _ in range(20)]
    worst = 0.0
    verdicts = []
    for tree in trees:
        report = check_martingale(tree, price_backward_induction(tree))
        worst = max(worst, report.max_residual)
        verdicts.append(report.verdict)
    # a paying tree must be flagged, otherwise the check is toothless
    rng_div = np.random.default_rng(seed + 5)
    paying = random_tree(rng_div, dividend_probability=1.0)
    flagged = not check_martingale(paying, price_backward_induction(paying)).is_martingale
    passed = all(v == "martingale" for v in verdicts) and flagged
    return SuiteResult("martingale", passed, {
        "trees": len(trees), "max_residual": worst, "non_martingale": verdicts.count("not_martingale"),
        "dividend_tree_flagged": flagged, "injected_dividend": inject_dividend,
    })


def identity_models() -> list[tuple[str, SurvivalModel, float]]:
    ages = np.arange(90, 101)
    lx = np.array([1000, 850, 700, 560, 430, 310, 210, 130, 70, 25, 0], dtype=float)
    return [
        ("constant_fom", ConstantForce(0.04), 30.0),
        ("de_moivre", DeMoivre(100.0), 90.0),
        ("gompertz", Gompertz(5e-5, 1.1), 60.0),
        ("life_table", LifeTable(ages, lx), 90.0),
    ]


def suite_identity(deltas=(0.0, 0.02, 0.05, 0.08, 0.12)) -> SuiteResult:
    worst = 0.0
    cases = []
    for name, model, x in identity_models():
        for delta in deltas:
            A = cv.A_bar(model, x, delta)
            a = cv.a_bar(model, x, delta)
            err = abs(A + delta * a - 1.0)
            worst = max(worst, err)
            cases.append({"model": name, "delta": delta, "residual": err})
    return SuiteResult("identity", worst <= 1e-8, {"pairs": len(cases), "max_residual": worst, "cases": cases})


def valuation_fixtures(grid_step: float = cv.DEFAULT_GRID_STEP) -> list[tuple[str, cv.ValuationRequest]]:
    out = []
    for name, model, x in identity_models():
        delta = 0.06 if name == "constant_fom" else 0.05
        out.append((f"{name}/whole_life", cv.ValuationRequest(cv.WholeLife(1.0), delta, model, x, grid_step)))
        out.append((f"{name}/annuity", cv.ValuationRequest(cv.ContinuousAnnuity(1.0), delta, model, x, grid_step)))
    return out


def suite_ode_agreement(tolerance: float = cv.AGREEMENT_TOL, grid_step: float = cv.DEFAULT_GRID_STEP) -> SuiteResult:
    cases = []
    for name, req in valuation_fixtures(grid_step):
        quad = cv.value_quadrature(req)
        ode = cv.value_ode(req, None)
        dev = float(np.max(np.abs(quad.prices - ode.prices)))
        cases.append({"fixture": name, "max_deviation": dev, "p0_quadrature": float(quad.prices[0]),
                      "p0_ode": float(ode.prices[0])})
    worst = max(c["max_deviation"] for c in cases)
    failing = [c["fixture"] for c in cases if c["max_deviation"] > tolerance]
    return SuiteResult("ode_agreement", not failing, {
        "tolerance": tolerance, "grid_step": grid_step, "max_deviation": worst, "failing": failing, "cases": cases,
    })


def suite_recursion(seed: int = DEFAULT_SEED, n_triples: int = 50, grid_step: float = 1.0 / 64) -> SuiteResult:
    rng = np.random.default_rng(seed + 6)
    worst = 0.0
    for _, req in valuation_fixtures(grid_step):
        result = cv.value_quadrature(req)
        H = result.horizon
        for _ in range(n_triples):
            t0, t1, t2 = np.sort(rng.uniform(0.0, H, 3))
            worst = max(worst, cv.check_recursion(result, float(t0), float(t1), float(t2)))
    return SuiteResult("recursion", worst <= cv.RECURSION_TOL, {"triples_per_fixture": n_triples,
                                                                "max_residual": worst})


SUITES = ("farkas", "sdf_pricing", "tower", "reduced_lottery", "martingale", "identity", "ode_agreement", "recursion")


def run_all(seed: int = DEFAULT_SEED, ode_tolerance: float = cv.AGREEMENT_TOL, inject_dividend: bool = False,
            only: tuple[str, ...] | None = None) -> dict:
    runners = {
        "farkas": lambda: suite_farkas(seed),
        "sdf_pricing": lambda: suite_sdf_pricing(seed),
        "tower": lambda: suite_tower(seed),
        "reduced_lottery": lambda: suite_reduced_lottery(seed),
        "martingale": lambda: suite_martingale(seed, inject_dividend),
        "identity": suite_identity,
        "ode_agreement": lambda: suite_ode_agreement(ode_tolerance),
        "recursion": lambda: suite_recursion(seed),
    }
    results = []
    for name in only or SUITES:
        log.info("running suite %s", name)
        results.append(runners[name]())
    return {"seed": seed, "passed": all(r.passed for r in results), "suites": [asdict(r) for r in results]}
