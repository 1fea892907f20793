"""Stability comparison of the four Helmholtz preconditioners on the 1D
thermal-bubble column.

A 10 K Gaussian bubble overlays a hydrostatically balanced 30 km column
(100 cells, dt = 600 s). Each formulation is advanced in the two solver
modes: Newton iterated to a 1e-14 increment tolerance with exact mass
inverses, and exactly four Newton iterations with lumped approximate
inverses. The flux-form/entropy preconditioner and the energy-conserving
material form survive the full 800 steps in both modes; the original flux
form diverges once the internal waves sharpen.

Run:  python3 demos/column_bubble_preconditioners.py [--steps N]
"""

import argparse

import numpy as np

from eulerslice.cases import case_spec
from eulerslice.state import (FLUX_NEW, FLUX_ORIG, MATERIAL_CP,
                              MATERIAL_LORENZ)
from eulerslice.stepper import RunConfig, run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=800)
    args = ap.parse_args()

    spec = case_spec("column1d_bubble", n_steps=args.steps)
    print(f"1D bubble: {spec.nz} cells, dt = {spec.dt} s, "
          f"{args.steps} steps\n")
    header = f"{'formulation':18s} {'mode':12s} {'outcome':>22s} " \
             f"{'max |dH/H0|':>12s} {'avg Newton':>11s}"
    print(header)
    print("-" * len(header))
    for mode in ("converged", "fixed_iters"):
        for form in (FLUX_NEW, FLUX_ORIG, MATERIAL_CP, MATERIAL_LORENZ):
            cfg = RunConfig(formulation=form, mode=mode, dt=spec.dt,
                            n_steps=args.steps)
            r = run(spec, cfg)
            if r.completed:
                outcome = f"completed {args.steps}"
            else:
                outcome = f"blew up at step {r.blowup_step}"
            if r.diagnostics:
                dh = max(abs(d.energy_rel_err) for d in r.diagnostics)
                nn = np.mean([d.newton_iters for d in r.diagnostics])
            else:
                dh, nn = float("nan"), float("nan")
            print(f"{form:18s} {mode:12s} {outcome:>22s} {dh:12.2e} {nn:11.1f}")
    print("\nEnergy is conserved to rounding by the flux-form/entropy "
          "formulation in converged mode; the original flux form's "
          "preconditioner stops converging as the waves develop.")


if __name__ == "__main__":
    main()
