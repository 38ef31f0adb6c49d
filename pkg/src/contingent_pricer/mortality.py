"""Survival models: force of mortality, t_p_x, death densities, life tables.

Models are vectorized over age and duration. Four kinds are shipped:
constant force, de Moivre (uniform deaths up to a limiting age), Gompertz
``mu_x = B c^x``, and life tables with a constant hazard inside each year.
"""

from __future__ import annotations

import csv
import math
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import DeadCohort, NonFiniteInput

TRUNCATION_SURVIVAL = 1e-12


class SurvivalModel(ABC):
    """Lifetime distribution from birth.

    Subclasses provide the (possibly unnormalized) survival curve ``S_0``, its
    negative derivative ``death_rate`` and the hazard ``mu``. Everything
    else is derived here, with overrides where a closed form is better
    conditioned.
    """

    kind: str = ""
    limiting_age: float = math.inf

    @abstractmethod
    def survival(self, age):
        """``S_0(age)``; zero at and beyond the limiting age."""

    @abstractmethod
    def hazard(self, age):
        """Force of mortality at ``age`` (inf at or beyond the limiting age)."""

    def death_rate(self, age):
        """``-dS_0/dx``, finite even where the hazard blows up."""
        age = np.asarray(age, dtype=float)
        alive = age < self.limiting_age
        safe = np.where(alive, age, 0.0)
        return np.where(alive, self.hazard(safe) * self.survival(safe), 0.0)

    def tpx(self, x, t):
        x = np.asarray(x, dtype=float)
        return self.survival(x + t) / self.survival(x)

    def density(self, x, t):
        """``f_x(t) = mu_{x+t} * t_p_x``; at the limiting age the left limit is used."""
        x = np.asarray(x, dtype=float)
        if math.isinf(self.limiting_age):
            return self.hazard(x + t) * self.tpx(x, t)
        return self.death_rate(x + t) / self.survival(x)

    @property
    def breakpoints(self) -> np.ndarray:
        """Ages where the hazard is discontinuous."""
        return np.empty(0)

    def truncation_duration(self, x: float, threshold: float = TRUNCATION_SURVIVAL) -> float:
        """Duration beyond which t_p_x is below ``threshold`` (or hits zero)."""
        if math.isfinite(self.limiting_age):
            return self.limiting_age - x
        lo, hi = 0.0, 1.0
        while self.tpx(x, hi) >= threshold:
            lo, hi = hi, 2.0 * hi
            if hi > 1e6:
                raise ValueError("survival does not decay below the truncation threshold")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.tpx(x, mid) >= threshold:
                lo = mid
            else:
                hi = mid
        return hi


@dataclass(frozen=True)
class ConstantForce(SurvivalModel):
    mu: float
    kind = "constant_fom"

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"constant force must be finite and nonnegative, got {self.mu}")

    def survival(self, age):
        return np.exp(-self.mu * np.asarray(age, dtype=float))

    def hazard(self, age):
        return np.full_like(np.asarray(age, dtype=float), self.mu)

    def tpx(self, x, t):
        return np.exp(-self.mu * np.asarray(t, dtype=float)) + 0.0 * np.asarray(x, dtype=float)

    def truncation_duration(self, x, threshold=TRUNCATION_SURVIVAL):
        if self.mu == 0:
            raise ValueError("zero force of mortality never truncates")
        return -math.log(threshold) / self.mu


@dataclass(frozen=True)
class DeMoivre(SurvivalModel):
    omega: float
    kind = "de_moivre"

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"limiting age must be positive and finite, got {self.omega}")

    @property
    def limiting_age(self) -> float:
        return self.omega

    def survival(self, age):
        return np.clip(1.0 - np.asarray(age, dtype=float) / self.omega, 0.0, 1.0)

    def hazard(self, age):
        age = np.asarray(age, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(age < self.omega, 1.0 / np.maximum(self.omega - age, 0.0), np.inf)

    def death_rate(self, age):
        age = np.asarray(age, dtype=float)
        return np.where((age >= 0) & (age <= self.omega), 1.0 / self.omega, 0.0)

    def tpx(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.clip((self.omega - x - t) / (self.omega - x), 0.0, 1.0)

    def density(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t <= self.omega - x), 1.0 / (self.omega - x), 0.0)


@dataclass(frozen=True)
class Gompertz(SurvivalModel):
    B: float
    c: float
    kind = "gompertz"

    def __post_init__(self):
        if not (self.B > 0 and self.c >= 1 and math.isfinite(self.B) and math.isfinite(self.c)):
            raise ValueError(f"Gompertz needs B > 0 and c >= 1, got B={self.B}, c={self.c}")

    def _cumulative(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.c == 1.0:
            return self.B * t
        log_c = math.log(self.c)
        return self.B * np.exp(x * log_c) * np.expm1(t * log_c) / log_c

    def survival(self, age):
        return np.exp(-self._cumulative(0.0, age))

    def hazard(self, age):
        return self.B * np.power(self.c, np.asarray(age, dtype=float))

    def tpx(self, x, t):
        return np.exp(-self._cumulative(x, t))

    def truncation_duration(self, x, threshold=TRUNCATION_SURVIVAL):
        target = -math.log(threshold)
        if self.c == 1.0:
            return target / self.B
        log_c = math.log(self.c)
        return math.log1p(target * log_c / (self.B * self.c**x)) / log_c


@dataclass(frozen=True)
class LifeTable(SurvivalModel):
    """Survivors ``l_x`` at consecutive integer ages; the final entry is 0.

    Inside year ``[k, k+1)`` the hazard is ``-ln(l_{k+1} / l_k)``. In the last
    year, where ``l_{k+1} = 0`` and that hazard would be infinite, deaths are
    spread uniformly instead.
    """

    ages: np.ndarray
    survivors: np.ndarray
    kind = "life_table"
    _log_ratio: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ages = np.array(self.ages, dtype=float)
        lx = np.array(self.survivors, dtype=float)
        if ages.ndim != 1 or ages.shape != lx.shape or ages.size < 2:
            raise ValueError("life table needs matching age and survivor columns with at least two rows")
        if not (np.all(np.isfinite(ages)) and np.all(np.isfinite(lx))):
            raise NonFiniteInput("life table contains non-finite values")
        if np.any(ages != np.round(ages)) or np.any(np.diff(ages) != 1):
            raise ValueError("ages must be consecutive integers")
        if lx[-1] != 0 or np.any(lx[:-1] <= 0) or np.any(np.diff(lx) > 0):
            raise ValueError("survivors must be positive, nonincreasing, and end with 0")
        ages.setflags(write=False)
        lx.setflags(write=False)
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "survivors", lx)
        ratio = lx[1:-1] / lx[:-2]
        object.__setattr__(self, "_log_ratio", np.log(ratio))

    @property
    def first_age(self) -> float:
        return float(self.ages[0])

    @property
    def limiting_age(self) -> float:
        return float(self.ages[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        return self.ages.copy()

    def _locate(self, age):
        age = np.asarray(age, dtype=float)
        if np.any(age < self.first_age):
            raise ValueError(f"age below the first table age {self.first_age}")
        k = np.clip(np.floor(age - self.first_age).astype(int), 0, self.ages.size - 2)
        return age, k, age - self.ages[k]

    def _raw_survivors(self, age):
        """Unnormalized ``l`` at ``age``; exact table entries at integer ages."""
        age, k, frac = self._locate(age)
        lk = self.survivors[k]
        last = k == self.ages.size - 2
        log_ratio = np.concatenate([self._log_ratio, [0.0]])[k]
        inside = np.where(last, lk * np.clip(1.0 - frac, 0.0, 1.0), lk * np.exp(log_ratio * frac))
        # exact values at table ages keep l_{x+t} / l_x reproducible
        at_grid = (frac == 0) & (age <= self.limiting_age)
        idx = np.clip(np.round(age - self.first_age).astype(int), 0, self.ages.size - 1)
        out = np.where(at_grid, self.survivors[idx], inside)
        return np.where(age >= self.limiting_age, 0.0, out)

    def survival(self, age):
        return self._raw_survivors(age) / self.survivors[0]

    def tpx(self, x, t):
        return self._raw_survivors(np.asarray(x, dtype=float) + t) / self._raw_survivors(x)

    def hazard(self, age):
        age, k, frac = self._locate(age)
        last = k == self.ages.size - 2
        mu = -np.concatenate([self._log_ratio, [0.0]])[k]
        with np.errstate(divide="ignore"):
            final = 1.0 / np.maximum(1.0 - frac, 0.0)
        return np.where(age >= self.limiting_age, np.inf, np.where(last, final, mu))

    def death_rate(self, age):
        age, k, frac = self._locate(age)
        last = k == self.ages.size - 2
        lk = self.survivors[k] / self.survivors[0]
        mu = -np.concatenate([self._log_ratio, [0.0]])[k]
        regular = mu * lk * np.exp(-mu * frac)
        return np.where(age > self.limiting_age, 0.0, np.where(last, lk, regular))


def _alive(model: SurvivalModel, x: float) -> None:
    if not x >= 0:
        raise ValueError(f"age must be nonnegative, got {x}")
    if x >= model.limiting_age or float(model.survival(x)) <= 0.0:
        raise DeadCohort(f"no survivors at age {x} under {model.kind} model")


def survival_probability(model: SurvivalModel, x: float, t: float) -> float:
    """``t_p_x``, the probability that a life aged ``x`` survives ``t`` more years."""
    _alive(model, x)
    if t < 0:
        raise ValueError("duration must be nonnegative")
    if t == 0:
        return 1.0
    if x + t >= model.limiting_age:
        return 0.0
    return float(model.tpx(x, t))


def force_of_mortality(model: SurvivalModel, x: float) -> float:
    _alive(model, x)
    return float(model.hazard(x))


def death_density(model: SurvivalModel, x: float, t: float) -> float:
    _alive(model, x)
    if t < 0:
        raise ValueError("duration must be nonnegative")
    return float(model.density(x, t))


def one_year_mortality(model: SurvivalModel, x: float) -> float:
    return 1.0 - survival_probability(model, x, 1.0)


def load_life_table(path: str | os.PathLike) -> LifeTable:
    """Read an ``age,lx`` CSV whose last row has ``lx = 0``."""
    ages, lx = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["age", "lx"]:
            raise ValueError(f"{path}: header must be 'age,lx'")
        for line, row in enumerate(reader, start=2):
            if not row or not any(c.strip() for c in row):
                continue
            try:
                ages.append(float(row[0]))
                lx.append(float(row[1]))
            except (IndexError, ValueError):
                raise ValueError(f"{path}: line {line}: malformed row {row!r}") from None
    return LifeTable(np.array(ages), np.array(lx))


def model_from_config(cfg: dict, base_dir: str | os.PathLike | None = None) -> SurvivalModel:
    """Build a model from ``{"kind": ..., <parameters>}``."""
    kind = cfg.get("kind")
    if kind == "constant_fom":
        return ConstantForce(float(cfg["mu"]))
    if kind == "de_moivre":
        return DeMoivre(float(cfg["omega"]))
    if kind == "gompertz":
        return Gompertz(float(cfg["B"]), float(cfg["c"]))
    if kind == "life_table":
        if "path" in cfg:
            path = cfg["path"]
            if base_dir is not None and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            return load_life_table(path)
        return LifeTable(np.array(cfg["ages"]), np.array(cfg["lx"]))
    raise ValueError(f"unknown mortality kind {kind!r}")
