import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from contingent_pricer.errors import DeadCohort
from contingent_pricer.mortality import (
    ConstantForce,
    DeMoivre,
    Gompertz,
    LifeTable,
    death_density,
    force_of_mortality,
    load_life_table,
    model_from_config,
    one_year_mortality,
    survival_probability,
)

LX = np.array([1000, 850, 700, 560, 430, 310, 210, 130, 70, 25, 0], dtype=float)
TABLE = LifeTable(np.arange(90, 101), LX)

MODELS = {
    "constant": (ConstantForce(0.04), 30.0),
    "de_moivre": (DeMoivre(100.0), 30.0),
    "gompertz": (Gompertz(5e-5, 1.1), 60.0),
    "life_table": (TABLE, 90.0),
}


# --- closed forms -----------------------------------------------------------

def test_constant_survival():
    assert survival_probability(ConstantForce(0.04), 30, 10) == pytest.approx(math.exp(-0.4), abs=1e-15)


def test_de_moivre_survival():
    assert survival_probability(DeMoivre(100), 30, 10) == pytest.approx(60 / 70, abs=1e-15)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_zero_duration(name):
    model, x = MODELS[name]
    assert survival_probability(model, x, 0.0) == 1.0


def test_past_limiting_age_is_zero():
    assert survival_probability(DeMoivre(100), 90, 10) == 0.0
    assert survival_probability(DeMoivre(100), 90, 25) == 0.0
    assert survival_probability(TABLE, 95, 7) == 0.0


def test_forces():
    assert force_of_mortality(DeMoivre(100), 30) == pytest.approx(1 / 70, abs=1e-15)
    assert force_of_mortality(ConstantForce(0.04), 77.3) == 0.04
    table = LifeTable([30, 31, 32], [100, 99, 0])
    assert force_of_mortality(table, 30) == pytest.approx(-math.log(0.99), abs=1e-15)
    assert force_of_mortality(table, 30.7) == pytest.approx(0.0100503359, abs=1e-10)
    assert force_of_mortality(Gompertz(5e-5, 1.1), 60) == pytest.approx(5e-5 * 1.1**60, rel=1e-14)


def test_densities():
    assert death_density(DeMoivre(100), 30, 10) == pytest.approx(1 / 70, abs=1e-15)
    assert death_density(ConstantForce(0.04), 0, 0) == pytest.approx(0.04, abs=1e-15)


def test_one_year_mortality():
    assert one_year_mortality(DeMoivre(100), 30) == pytest.approx(1 / 70, abs=1e-15)
    assert one_year_mortality(ConstantForce(0.04), 50) == pytest.approx(1 - math.exp(-0.04), abs=1e-15)
    assert one_year_mortality(DeMoivre(100), 99) == 1.0


def test_dead_cohort():
    with pytest.raises(DeadCohort):
        survival_probability(DeMoivre(100), 100, 1)
    with pytest.raises(DeadCohort):
        force_of_mortality(DeMoivre(100), 120)
    with pytest.raises(DeadCohort):
        death_density(TABLE, 100, 0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        ConstantForce(-0.1)
    with pytest.raises(ValueError):
        Gompertz(1e-4, 0.9)
    with pytest.raises(ValueError):
        DeMoivre(math.inf)
    with pytest.raises(ValueError):
        LifeTable([1, 2, 3], [10, 11, 0])
    with pytest.raises(ValueError):
        LifeTable([1, 2, 4], [10, 9, 0])
    with pytest.raises(ValueError):
        LifeTable([1, 2, 3], [10, 9, 1])


@pytest.mark.parametrize("name", sorted(MODELS))
def test_finite_difference_density(name):
    model, x = MODELS[name]
    t, h = 3.5, 1e-4
    fd = -(survival_probability(model, x, t + h) - survival_probability(model, x, t - h)) / (2 * h)
    assert abs(fd - death_density(model, x, t)) <= 1e-6


def test_gompertz_matches_hazard_integral():
    model = Gompertz(5e-5, 1.1)
    H, _ = integrate.quad(lambda s: float(model.hazard(60 + s)), 0, 15, epsabs=1e-14)
    assert survival_probability(model, 60, 15) == pytest.approx(math.exp(-H), rel=1e-12)


# --- life tables ------------------------------------------------------------

def test_integer_ages_reproduce_ratios_exactly():
    for i, x in enumerate(range(90, 100)):
        for j in range(i, 10):
            assert survival_probability(TABLE, x, j - i) == LX[j] / LX[i]


def test_last_year_uniform_deaths():
    assert survival_probability(TABLE, 99, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert death_density(TABLE, 99, 0.25) == pytest.approx(1.0, abs=1e-15)


def test_load_life_table(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("age,lx\n" + "".join(f"{a},{l}\n" for a, l in zip(range(90, 101), LX)))
    table = load_life_table(path)
    assert table.limiting_age == 100
    np.testing.assert_array_equal(table.survivors, LX)
    bad = tmp_path / "bad.csv"
    bad.write_text("age,lx\n90,10\n91,x\n")
    with pytest.raises(ValueError, match="line 3"):
        load_life_table(bad)


def test_model_from_config(tmp_path):
    assert model_from_config({"kind": "constant_fom", "mu": 0.02}) == ConstantForce(0.02)
    assert model_from_config({"kind": "de_moivre", "omega": 110}) == DeMoivre(110.0)
    assert model_from_config({"kind": "gompertz", "B": 1e-4, "c": 1.08}) == Gompertz(1e-4, 1.08)
    table = model_from_config({"kind": "life_table", "ages": [0, 1, 2], "lx": [10, 5, 0]})
    assert table.limiting_age == 2
    with pytest.raises(ValueError, match="unknown mortality kind"):
        model_from_config({"kind": "makeham"})


# --- properties -------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(MODELS)), st.floats(0, 1), st.floats(0, 8), st.floats(0, 8))
def test_multiplicativity(name, dx, s, t):
    model, x0 = MODELS[name]
    x = x0 + dx
    whole = survival_probability(model, x, s + t)
    if x + s >= model.limiting_age:
        assert whole == 0.0
        return
    split = survival_probability(model, x, s) * survival_probability(model, x + s, t)
    assert abs(whole - split) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(sorted(MODELS)), st.floats(0, 0.99), st.floats(0, 5))
def test_survival_monotone_and_bounded(name, dx, t):
    model, x0 = MODELS[name]
    a = survival_probability(model, x0 + dx, t)
    b = survival_probability(model, x0 + dx, t + 0.5)
    assert 0.0 <= b <= a <= 1.0


@pytest.mark.parametrize("name", ["de_moivre", "life_table"])
def test_density_integrates_to_one_finite(name):
    model, x = MODELS[name]
    edges = np.arange(x, model.limiting_age + 1) - x
    total = sum(integrate.quad(lambda t: death_density(model, x, t), a, b, epsabs=1e-13)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    assert abs(total - 1.0) <= 1e-8


@pytest.mark.parametrize("name", ["constant", "gompertz"])
def test_density_integrates_to_one_truncated(name):
    model, x = MODELS[name]
    horizon = model.truncation_duration(x)
    assert model.tpx(x, horizon) <= 1e-12 * 1.0001
    total, _ = integrate.quad(lambda t: death_density(model, x, t), 0, horizon, limit=500, epsabs=1e-13)
    assert abs(total - 1.0) <= 1e-6


@pytest.mark.parametrize("name", sorted(MODELS))
def test_mu_delta_error_is_quadratic(name):
    model, x = MODELS[name]
    x = x + 0.3
    errs = []
    for delta in (1e-2, 1e-3, 1e-4):
        errs.append(abs(delta * force_of_mortality(model, x) - (1 - survival_probability(model, x, delta))))
    for big, small in zip(errs[:-1], errs[1:]):
        # each 10x shrink of delta cuts the error about 100x
        assert small <= big / 50 or small <= 1e-15
