"""JSON configs for the valuation and premium commands."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .contingent_valuation import DEFAULT_GRID_STEP, ContinuousAnnuity, RiskFree, ValuationRequest, WholeLife
from .curves import as_curve
from .mortality import SurvivalModel, model_from_config


def load_json(path: str | os.PathLike) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top-level JSON value must be an object")
    return data


def _contract(cfg: dict):
    kind = cfg.get("kind")
    if kind == "whole_life":
        return WholeLife(as_curve(cfg.get("benefit", 1.0)))
    if kind == "continuous_annuity":
        return ContinuousAnnuity(as_curve(cfg.get("payment_rate", 1.0)))
    if kind == "risk_free":
        return RiskFree(as_curve(cfg.get("payment_rate", 0.0)), float(cfg.get("terminal_value", 0.0)),
                        float(cfg["horizon"]))
    raise ValueError(f"unknown contract kind {kind!r}")


def request_from_config(cfg: dict, base_dir: str | os.PathLike | None = None,
                        grid_step: float | None = None) -> ValuationRequest:
    """Build a ValuationRequest; ``grid_step`` overrides the config value."""
    contract = _contract(cfg["contract"])
    survival = None
    if not isinstance(contract, RiskFree):
        survival = model_from_config(cfg["mortality"], base_dir)
    step = grid_step if grid_step is not None else float(cfg.get("grid_step", DEFAULT_GRID_STEP))
    return ValuationRequest(contract, as_curve(cfg.get("foi", 0.0)), survival, float(cfg.get("issue_age", 0.0)), step)


@dataclass(frozen=True)
class PremiumConfig:
    model: SurvivalModel
    issue_age: float
    delta: float
    benefit: object = 1.0


def premium_from_config(cfg: dict, base_dir: str | os.PathLike | None = None) -> PremiumConfig:
    foi = cfg.get("foi", 0.0)
    if isinstance(foi, dict):
        foi = foi["value"] if foi.get("kind", "constant") == "constant" else None
    if foi is None:
        raise ValueError("premium solving needs a constant force of interest")
    return PremiumConfig(model_from_config(cfg["mortality"], base_dir), float(cfg.get("issue_age", 0.0)),
                         float(foi), as_curve(cfg.get("benefit", 1.0)))


def config_dir(path: str | os.PathLike) -> Path:
    return Path(path).resolve().parent
