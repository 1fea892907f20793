"""Per-step Helmholtz condition numbers on the 1D column.

The elliptic pressure operator of each formulation is assembled at every
time level of the bubble run and its singular-value condition number
recorded (dense SVD; the 1D operators are 100x100). The flux-form/entropy
and energy-conserving material operators track each other closely; the
Charney-Phillips operator sits lower but fluctuates more.

    python3 demos/helmholtz_conditioning.py --steps 100
"""

import argparse

import numpy as np

from eulerslice.cases import case_spec
from eulerslice.state import FLUX_NEW, MATERIAL_CP, MATERIAL_LORENZ
from eulerslice.stepper import RunConfig, run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=100)
    args = ap.parse_args()

    spec = case_spec("column1d_bubble", n_steps=args.steps)
    series = {}
    for form in (FLUX_NEW, MATERIAL_LORENZ, MATERIAL_CP):
        cfg = RunConfig(formulation=form, mode="converged", dt=spec.dt,
                        n_steps=args.steps, capture_cond=True)
        r = run(spec, cfg)
        series[form] = [d.cond_number for d in r.diagnostics]
        c = np.array(series[form])
        print(f"{form:18s}: cond number min {c.min():.3e} "
              f"median {np.median(c):.3e} max {c.max():.3e} "
              f"({'completed' if r.completed else 'blew up'})")
    print("\nstep  " + "  ".join(f"{f:>18s}" for f in series))
    for i in range(0, args.steps, max(1, args.steps // 20)):
        row = "  ".join(f"{series[f][i]:18.6e}" if i < len(series[f])
                        else f"{'-':>18s}" for f in series)
        print(f"{i + 1:4d}  {row}")


if __name__ == "__main__":
    main()
