"""Command-line front end: ``contingent-pricer <command> --input PATH ...``.

Exit codes: 0 success, 1 bad input (or failed verification), 2 arbitrage
found by check-market, 3 valuation methods disagree.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import contingent_valuation as cv
from . import verify as verify_mod
from .config import config_dir, load_json, premium_from_config, request_from_config
from .errors import PricingError
from .market_core import ArbitrageCertificate, check_completeness, detect_arbitrage, read_payoff_csv
from .tree_engine import check_martingale, compute_pricing_kernel, load_tree, price_backward_induction

log = logging.getLogger("contingent_pricer")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ARBITRAGE = 2
EXIT_DISAGREE = 3


class InputError(Exception):
    pass


def write_atomic(path: str | None, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename; stdout if no path."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _floats(arr) -> list[float]:
    return [float(v) for v in np.asarray(arr, dtype=float)]


def _require_input(args) -> str:
    if not args.input:
        raise InputError("--input is required for this command")
    if not os.path.isfile(args.input):
        raise InputError(f"input file not found: {args.input}")
    return args.input


def _check_tolerance(value: float | None) -> None:
    if value is not None and not (value > 0 and math.isfinite(value)):
        raise InputError(f"tolerance must be a positive finite number, got {value}")


# --- commands ---------------------------------------------------------------

def cmd_check_market(args) -> int:
    market = read_payoff_csv(_require_input(args))
    tolerance = args.tolerance if args.tolerance is not None else 1e-9
    verdict = detect_arbitrage(market, tolerance)
    A, b = market.entries, market.costs
    report = {"assets": list(market.asset_ids) if market.asset_ids else None,
              "complete": check_completeness(market)}
    if isinstance(verdict, ArbitrageCertificate):
        report.update(
            verdict="arbitrage",
            witness={"weights": _floats(verdict.weights), "cost": float(verdict.cost),
                     "state_payoffs": _floats(verdict.state_payoffs)},
            residuals={"cost": float(verdict.cost), "min_state_payoff": float(verdict.state_payoffs.min())},
        )
        status = EXIT_ARBITRAGE
    else:
        report.update(
            verdict="sdf",
            witness={"sdf": _floats(verdict.values), "unique": verdict.unique},
            residuals={"pricing": _floats(A @ verdict.values - b), "min_sdf": float(verdict.values.min())},
        )
        if verdict.factorization is not None:
            pi, v = verdict.factorization
            report["risk_neutral"] = {"probabilities": _floats(pi), "discount": float(v[0])}
        status = EXIT_OK
    if args.format == "csv":
        key = "weights" if report["verdict"] == "arbitrage" else "sdf"
        values = report["witness"][key]
        labels = report["assets"] if key == "weights" and report["assets"] else \
            [f"s{k + 1}" for k in range(len(values))]
        text = dump_csv(["verdict", "label", key], [[report["verdict"], lab, repr(v)] for lab, v in zip(labels, values)])
    else:
        text = dump_json(report)
    write_atomic(args.output, text)
    log.info("check-market verdict: %s", report["verdict"])
    return status


def cmd_price_tree(args) -> int:
    tree = load_tree(_require_input(args))
    prices = price_backward_induction(tree)
    kernel = compute_pricing_kernel(tree)
    report = check_martingale(tree, prices)
    if args.format == "csv":
        rows = [[str(nid), tree.nodes[nid].time, repr(float(kernel[nid])), repr(float(prices[nid]))]
                for nid in tree.order]
        text = dump_csv(["id", "time", "kernel", "price"], rows)
    else:
        text = dump_json({
            "root_price": float(prices[tree.root]),
            "nodes": [{"id": nid, "time": tree.nodes[nid].time, "kernel": float(kernel[nid]),
                       "price": float(prices[nid])} for nid in tree.order],
            "martingale": {"verdict": report.verdict, "max_residual": report.max_residual,
                           "threshold": report.threshold},
        })
    write_atomic(args.output, text)
    return EXIT_OK


def cmd_value(args) -> int:
    path = _require_input(args)
    cfg = load_json(path)
    request = request_from_config(cfg, config_dir(path), args.grid_step)
    tolerance = args.tolerance if args.tolerance is not None else float(cfg.get("tolerance", cv.AGREEMENT_TOL))
    quad = cv.value_quadrature(request)
    ode = cv.value_ode(request)
    deviation = float(np.max(np.abs(quad.prices - ode.prices)))
    agree = deviation <= tolerance
    summary = {
        "contract": cfg["contract"].get("kind"),
        "grid_step": request.grid_step,
        "horizon": quad.horizon,
        "steps": int(quad.times.size - 1),
        "p0_quadrature": float(quad.prices[0]),
        "p0_ode": float(ode.prices[0]),
        "max_deviation": deviation,
        "tolerance": tolerance,
        "methods_agree": agree,
    }
    if args.format == "json":
        summary["path"] = {"t": _floats(quad.times), "price": _floats(quad.prices)}
        write_atomic(args.output, dump_json(summary))
    else:
        rows = [[repr(float(t)), repr(float(p))] for t, p in zip(quad.times, quad.prices)]
        write_atomic(args.output, dump_csv(["t", "price"], rows))
        if args.output is None:
            sys.stderr.write(dump_json(summary))
        else:
            write_atomic(args.output + ".summary.json", dump_json(summary))
    if not agree:
        log.error("methods disagree: max deviation %.3e > %.1e", deviation, tolerance)
        return EXIT_DISAGREE
    return EXIT_OK


def cmd_premium(args) -> int:
    path = _require_input(args)
    pc = premium_from_config(load_json(path), config_dir(path))
    rate = cv.solve_net_premium_rate(pc.model, pc.issue_age, pc.delta, pc.benefit)
    out = {
        "premium_rate": rate,
        "A_bar": cv.A_bar(pc.model, pc.issue_age, pc.delta),
        "a_bar": cv.a_bar(pc.model, pc.issue_age, pc.delta),
        "issue_age": pc.issue_age,
        "delta": pc.delta,
    }
    if args.format == "csv":
        text = dump_csv(list(out), [[repr(float(v)) for v in out.values()]])
    else:
        text = dump_json(out)
    write_atomic(args.output, text)
    return EXIT_OK


def cmd_verify(args) -> int:
    ode_tol = args.tolerance if args.tolerance is not None else cv.AGREEMENT_TOL
    results = verify_mod.run_all(args.seed, ode_tolerance=ode_tol, inject_dividend=args.inject_dividend)
    for suite in results["suites"]:
        status = "PASS" if suite["passed"] else "FAIL"
        print(f"{status} {suite['name']}", file=sys.stderr)
        if not suite["passed"]:
            detail = {k: v for k, v in suite["detail"].items() if k != "cases"}
            print(f"     {json.dumps(detail, sort_keys=True)}", file=sys.stderr)
    write_atomic(args.output, dump_json(results))
    return EXIT_OK if results["passed"] else EXIT_INPUT


COMMANDS = {
    "check-market": cmd_check_market,
    "price-tree": cmd_price_tree,
    "value": cmd_value,
    "premium": cmd_premium,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contingent-pricer",
                                     description="Arbitrage checks, tree pricing and life-contingent valuation.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--input", help="payoff CSV, tree JSON, or valuation/premium config JSON")
    parser.add_argument("--output", help="output file (default: stdout)")
    parser.add_argument("--tolerance", type=float, help="override the command's tolerance")
    parser.add_argument("--grid-step", type=float, help="valuation grid step (years)")
    parser.add_argument("--seed", type=int, default=verify_mod.DEFAULT_SEED, help="seed for verify suites")
    parser.add_argument("--format", choices=("csv", "json"), help="output format")
    parser.add_argument("--inject-dividend", action="store_true",
                        help="verify: pay a dividend in the martingale fixture (negative control)")
    return parser


DEFAULT_FORMAT = {"check-market": "json", "price-tree": "json", "value": "csv", "premium": "json", "verify": "json"}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CONTINGENT_PRICER_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    args.format = args.format or DEFAULT_FORMAT[args.command]
    try:
        _check_tolerance(args.tolerance)
        if args.grid_step is not None and not (args.grid_step > 0 and math.isfinite(args.grid_step)):
            raise InputError(f"grid step must be positive, got {args.grid_step}")
        return COMMANDS[args.command](args)
    except PricingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except (InputError, ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
