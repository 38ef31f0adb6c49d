"""Arbitrage-free pricing of one-step markets, uncertainty trees and life-contingent claims."""

from .contingent_valuation import (
    A_bar,
    ContinuousAnnuity,
    RiskFree,
    ValuationRequest,
    ValuationResult,
    WholeLife,
    a_bar,
    check_recursion,
    price_survival_tree,
    solve_net_premium_rate,
    survival_tree,
    value_annuity_ode,
    value_annuity_quadrature,
    value_ode,
    value_quadrature,
    value_risk_free,
    value_whole_life_ode,
    value_whole_life_quadrature,
)
from .errors import PricingError
from .market_core import (
    ArbitrageCertificate,
    PayoffMatrix,
    SdfVector,
    check_completeness,
    detect_arbitrage,
    extract_risk_neutral,
    price_one_step,
    read_payoff_csv,
    solve_sdf,
)
from .mortality import (
    ConstantForce,
    DeMoivre,
    Gompertz,
    LifeTable,
    SurvivalModel,
    death_density,
    force_of_mortality,
    load_life_table,
    one_year_mortality,
    survival_probability,
)
from .tree_engine import (
    TreeNode,
    UncertaintyTree,
    check_martingale,
    compute_pricing_kernel,
    conditional_expectation,
    load_tree,
    price_backward_induction,
    price_reduced_lottery,
)

__version__ = "0.1.0"
