"""Adjoint gradient against central differences on the twin grid.

    python3 scripts/gradient_check.py --directions 10 --cost ssoo
"""

import argparse

import numpy as np

from hydrocal.adjoint import gradient_test
from hydrocal.calibrate.cost import CostConfig
from hydrocal.calibrate.problem import from_unit
from hydrocal.experiments import twin_problem
from hydrocal.model import ParameterField

COSTS = {
    "nse": CostConfig(),
    "kge": CostConfig(dominant="kge"),
    "ssoo": CostConfig(delta_d=0.5, delta_f=0.5, flood={"Epf": 1.0}),
    "ssoo-lse": CostConfig(delta_d=0.5, delta_f=0.5, flood={"Epf": 1.0}, peak_surrogate="lse"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cost", choices=sorted(COSTS), default="ssoo")
    ap.add_argument("--directions", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    prob, _ = twin_problem()
    theta = ParameterField(from_unit(np.random.default_rng(args.seed).uniform(0.1, 0.9, (6, 3, 3))))
    rep = gradient_test(prob.plan, theta, None, prob.forcing, COSTS[args.cost], prob.obs, prob.gauge,
                        directions=args.directions, seed=args.seed)
    for d, err in sorted(rep.best_errors().items()):
        print(f"direction {d}: best relative error {err:.2e}")
    print(f"max {rep.max_best_error:.2e} -> {'PASS' if rep.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
