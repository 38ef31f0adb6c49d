import io

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from contingent_pricer.errors import (
    ArbitrageExists,
    DegenerateDichotomy,
    DimensionMismatch,
    MarketFormatError,
    NonFiniteInput,
    NotNormalizable,
)
from contingent_pricer.market_core import (
    ArbitrageCertificate,
    PayoffMatrix,
    SdfVector,
    check_completeness,
    detect_arbitrage,
    extract_risk_neutral,
    numerical_rank,
    price_one_step,
    read_payoff_csv,
    solve_sdf,
)
from contingent_pricer.sampling import strict_sdf_exists


def market(A, b):
    return PayoffMatrix(np.array(A, dtype=float), np.array(b, dtype=float))


# --- detect_arbitrage -------------------------------------------------------

def test_free_lottery_ticket():
    cert = detect_arbitrage(market([[1, 2]], [0]))
    assert isinstance(cert, ArbitrageCertificate)
    np.testing.assert_allclose(cert.weights, [1.0])
    assert cert.cost == 0.0
    np.testing.assert_allclose(cert.state_payoffs, [1.0, 2.0])


def test_two_by_two_sdf():
    sdf = detect_arbitrage(market([[2, 0.5], [1, 1]], [1, 1]))
    assert isinstance(sdf, SdfVector)
    np.testing.assert_allclose(sdf.values, [1 / 3, 2 / 3], atol=1e-12)
    assert sdf.unique is True


def test_overpriced_stock_gives_certificate():
    A = np.array([[2, 0.5], [1, 1]])
    b = np.array([2.2, 1])
    cert = detect_arbitrage(market(A, b))
    assert isinstance(cert, ArbitrageCertificate)
    assert cert.is_valid()
    # independent substitution
    assert cert.weights @ b <= 1e-12
    assert np.all(A.T @ cert.weights >= -1e-12)
    assert np.max(np.abs(cert.weights)) == pytest.approx(1.0)


def test_hand_certificate_is_valid():
    theta = np.array([-1.0, 2.2])
    A = np.array([[2, 0.5], [1, 1]])
    cert = ArbitrageCertificate(theta, float(theta @ [2.2, 1]), A.T @ theta)
    assert cert.is_valid()
    np.testing.assert_allclose(cert.state_payoffs, [0.2, 1.7])


def test_sdf_with_zero_state_price_is_arbitrage():
    # m = (1, 0) prices the asset but the second state pays for free
    cert = detect_arbitrage(market([[1, 1], [0, 1]], [1, 0]))
    assert isinstance(cert, ArbitrageCertificate)
    assert cert.is_valid()


def test_nonfinite_rejected():
    with pytest.raises(NonFiniteInput):
        market([[np.nan, 1]], [1])
    with pytest.raises(NonFiniteInput):
        market([[1, 1]], [np.inf])


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        market([[1, 1], [1, 2]], [1])


def test_tolerance_must_be_positive():
    with pytest.raises(ValueError):
        detect_arbitrage(market([[1.0]], [1.0]), tolerance=0.0)


# --- solve_sdf / completeness ----------------------------------------------

def test_single_state_risk_free():
    sdf = solve_sdf(market([[1.05]], [1]))
    assert sdf.values[0] == pytest.approx(1 / 1.05, abs=1e-15)


def test_incomplete_market_non_unique():
    sdf = solve_sdf(market([[1, 1]], [1]))
    assert sdf.unique is False
    assert sdf.values.sum() == pytest.approx(1.0)
    assert np.all(sdf.values >= 0)


def test_solve_sdf_raises_on_arbitrage():
    with pytest.raises(ArbitrageExists):
        solve_sdf(market([[2, 0.5], [1, 1]], [2.2, 1]))


@pytest.mark.parametrize("A, expected", [
    ([[2, 0.5], [1, 1]], True),
    ([[1, 1]], False),
    ([[2, 0.5], [4, 1]], False),  # second row is twice the first
    ([[2, 0.5], [4, 1], [6, 1.5]], False),
    ([[2, 0.5], [4, 1], [1, 1]], True),
    ([[1, 2, 3], [2, 4, 6]], False),
])
def test_completeness(A, expected):
    assert check_completeness(np.array(A, dtype=float)) is expected


def test_rank_of_singular_matrix():
    assert numerical_rank(np.array([[1.0, 2.0], [2.0, 4.0 + 1e-14]])) == 1
    assert numerical_rank(np.zeros((3, 2))) == 0


# --- risk-neutral factorization --------------------------------------------

@pytest.mark.parametrize("m, r, pi, disc", [
    ([1 / 3, 2 / 3], 0.0, [1 / 3, 2 / 3], 1.0),
    ([0.25 / 1.05, 0.75 / 1.05], 0.05, [0.25, 0.75], 1 / 1.05),
])
def test_extract_risk_neutral(m, r, pi, disc):
    got_pi, got_disc = extract_risk_neutral(m, r)
    np.testing.assert_allclose(got_pi, pi, atol=1e-12)
    assert got_disc == pytest.approx(disc, abs=1e-15)


def test_not_normalizable():
    with pytest.raises(NotNormalizable):
        extract_risk_neutral([0.5, 0.6], 0.0)


def test_risk_free_market_factorizes():
    mk = PayoffMatrix.with_risk_free(0.05, [[1.3, 0.9]], [1.0], asset_ids=["stock"])
    sdf = detect_arbitrage(mk)
    pi, v = sdf.factorization
    np.testing.assert_allclose(pi, [0.375, 0.625], atol=1e-12)
    np.testing.assert_allclose(v, 1 / 1.05)


# --- price_one_step --------------------------------------------------------

def test_price_one_step_examples():
    assert price_one_step([2, 0.5], [0, 0], [1 / 3, 2 / 3]) == pytest.approx(1.0)
    assert price_one_step([0, 0], [0, 0], [1 / 3, 2 / 3]) == 0.0
    m = np.array([1 / 3, 2 / 3]) / 1.05
    assert price_one_step([1.05, 1.05], [0, 0], m) == pytest.approx(1.0, abs=1e-15)


def test_price_one_step_shape():
    with pytest.raises(DimensionMismatch):
        price_one_step([1, 2, 3], [0, 0], [0.5, 0.5])


# --- CSV -------------------------------------------------------------------

def test_read_csv_moves_risk_free_first():
    text = "asset,s1,s2,cost\nstock,1.3,0.9,1\nRF,1.05,1.05,1\n"
    mk = read_payoff_csv(io.StringIO(text))
    assert mk.has_risk_free
    assert mk.risk_free_rate == pytest.approx(0.05)
    assert mk.asset_ids[0] == "RF"
    np.testing.assert_allclose(mk.entries[0], [1.05, 1.05])


@pytest.mark.parametrize("text, line", [
    ("", 1),
    ("asset,s1,s2,cost\n", 2),
    ("asset,s1,s2,price\nx,1,2,3\n", 1),
    ("asset,s1,s2,cost\nx,1,2,3\ny,1,oops,3\n", 3),
    ("asset,s1,s2,cost\nx,1,2\n", 2),
])
def test_malformed_csv_reports_line(text, line):
    with pytest.raises(MarketFormatError) as info:
        read_payoff_csv(io.StringIO(text))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


# --- properties ------------------------------------------------------------

# dyadic values keep the generated markets exact: lots of zeros, ties and
# degenerate rows, but no verdicts that hinge on the feasibility tolerance
entry = st.integers(-32, 32).map(lambda k: k / 16)
cost_entry = st.integers(-16, 32).map(lambda k: k / 16)


@st.composite
def markets(draw, max_states=5):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(1, max_states))
    A = draw(arrays(float, (m, n), elements=entry))
    b = draw(arrays(float, (m,), elements=cost_entry))
    return PayoffMatrix(A, b)


@st.composite
def rough_markets(draw):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(1, 5))
    A = draw(arrays(float, (m, n), elements=st.floats(-2, 2, allow_nan=False)))
    b = draw(arrays(float, (m,), elements=st.floats(-1, 2, allow_nan=False)))
    return PayoffMatrix(A, b)


@settings(max_examples=300, deadline=None)
@given(rough_markets())
def test_arbitrary_floats_never_give_a_bad_witness(mk):
    try:
        out = detect_arbitrage(mk)
    except DegenerateDichotomy:
        return
    if isinstance(out, SdfVector):
        scale = 1.0 + np.max(np.abs(mk.costs))
        assert np.max(np.abs(mk.entries @ out.values - mk.costs)) <= 1e-9 * scale
        assert out.values.min() > 0
    else:
        assert out.is_valid(1e-9 * mk.scale())


@settings(max_examples=300, deadline=None)
@given(markets())
def test_exactly_one_branch_with_clean_witness(mk):
    out = detect_arbitrage(mk)
    assert isinstance(out, (SdfVector, ArbitrageCertificate))
    if isinstance(out, SdfVector):
        assert np.max(np.abs(mk.entries @ out.values - mk.costs)) <= 1e-7
        assert out.values.min() > 0
    else:
        theta = out.weights
        assert max(0.0, theta @ mk.costs, -(theta @ mk.entries).min()) <= 1e-7
        assert out.is_valid(1e-9 * mk.scale())


@settings(max_examples=150, deadline=None)
@given(markets(max_states=3))
def test_verdict_matches_enumeration(mk):
    claims_sdf = isinstance(detect_arbitrage(mk), SdfVector)
    assert claims_sdf == strict_sdf_exists(mk.entries, mk.costs)


@st.composite
def priced_markets(draw):
    """Markets priced by a known positive SDF, so they are arbitrage-free by construction."""
    n = draw(st.integers(1, 4))
    m = draw(st.integers(n, 5))
    A = draw(arrays(float, (m, n), elements=entry))
    sdf = draw(arrays(float, (n,), elements=st.integers(1, 16).map(lambda k: k / 16)))
    return PayoffMatrix(A, A @ sdf), sdf


@settings(max_examples=200, deadline=None)
@given(priced_markets(), st.floats(0.01, 100), st.data())
def test_row_scaling_leaves_sdf_unchanged(case, lam, data):
    mk, sdf = case
    assume(check_completeness(mk))
    j = data.draw(st.integers(0, mk.n_assets - 1))
    A = mk.entries.copy()
    b = mk.costs.copy()
    A[j] *= lam
    b[j] *= lam
    scaled = solve_sdf(PayoffMatrix(A, b))
    np.testing.assert_allclose(scaled.values, solve_sdf(mk).values, atol=1e-10)
    np.testing.assert_allclose(scaled.values, sdf, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(priced_markets())
def test_priced_markets_are_arbitrage_free(case):
    mk, _ = case
    assert isinstance(detect_arbitrage(mk), SdfVector)


@settings(max_examples=200, deadline=None)
@given(markets())
def test_sdf_reprices_every_asset(mk):
    out = detect_arbitrage(mk)
    assume(isinstance(out, SdfVector))
    zeros = np.zeros(mk.n_states)
    for row, cost in zip(mk.entries, mk.costs):
        assert abs(price_one_step(row, zeros, out) - cost) <= 1e-8 * max(1.0, abs(cost))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 1), min_size=1, max_size=5), st.floats(-0.5, 0.5))
def test_risk_neutral_normalization(weights, r):
    pi = np.array(weights) / sum(weights)
    got, _ = extract_risk_neutral(pi / (1 + r), r)
    assert abs(got.sum() - 1.0) <= 1e-12
