"""Grid-step convergence of the RK4 route and of the die/survive tree.

Prints two CSV tables to stdout: ODE-vs-quadrature deviation per fixture and
grid step, then tree pricing error per step for a de Moivre whole-life policy.
"""

import argparse
import csv
import sys

import numpy as np

from contingent_pricer import contingent_valuation as cv
from contingent_pricer.mortality import DeMoivre
from contingent_pricer.verify import valuation_fixtures


def ode_table(steps):
    rows = []
    for h in steps:
        for name, req in valuation_fixtures(h):
            dev = np.max(np.abs(cv.value_quadrature(req).prices - cv.value_ode(req).prices))
            rows.append((name, h, float(dev)))
    return rows


def tree_table(steps, issue_age=98.0, omega=100.0, delta=0.05):
    model = DeMoivre(omega)
    target = cv.value_quadrature(cv.ValuationRequest(cv.WholeLife(1.0), delta, model, issue_age)).prices[0]
    return [(dt, cv.price_survival_tree(model, issue_age, delta, 1.0, dt), float(target)) for dt in steps]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-halvings", type=int, default=6)
    parser.add_argument("--tree-halvings", type=int, default=4)
    args = parser.parse_args(argv)

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["fixture", "grid_step", "max_deviation"])
    for name, h, dev in ode_table([2.0 ** -k for k in range(1, args.max_halvings + 1)]):
        out.writerow([name, repr(h), f"{dev:.6e}"])

    print()
    out.writerow(["dt", "tree_price", "continuous_price", "error", "ratio"])
    prev = None
    for dt, price, target in tree_table([2.0 ** -k for k in range(4, 4 + args.tree_halvings)]):
        err = abs(price - target)
        out.writerow([repr(dt), repr(price), repr(target), f"{err:.6e}", "" if prev is None else f"{prev / err:.4f}"])
        prev = err


if __name__ == "__main__":
    main()
