"""Command line driver.

    eulerslice run     --config <file> --out <dir> [--seed <n>]
    eulerslice verify  [--seed <n>]
    eulerslice condnum --config <file> --out <dir>

EULERSLICE_THREADS caps the linear-algebra thread pools used during assembly
and solves (exported to the BLAS runtime before numpy is loaded).
"""

import argparse
import os
import sys


def _cap_threads():
    n = os.environ.get("EULERSLICE_THREADS")
    if not n:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, n)


_cap_threads()


def _write_bundle(writer, spec, cfg, extras, result, ctx):
    from .config import resolved_config_text
    from .mesh import W0, W2, W3, WTHETA
    from .state import MATERIAL_CP

    writer.write_config(resolved_config_text(spec, cfg, extras))
    for d in result.diagnostics:
        writer.append_diag(d)
    thermo_kind = WTHETA if cfg.formulation == MATERIAL_CP else W3
    kinds = {"u": W2, "rho": W3, "thermo": thermo_kind, "pi": W3,
             "theta_p": W3 if cfg.formulation != MATERIAL_CP else WTHETA,
             "theta_p_w0": W0}
    for step in sorted(result.snapshots):
        for name, coeffs in sorted(result.snapshots[step].items()):
            writer.write_snapshot(step, name, kinds[name], coeffs)


def cmd_run(args):
    from .config import parse_config
    from .discretization import Discretization
    from .io import RunWriter
    from .stepper import run

    spec, cfg, extras = parse_config(args.config)
    if cfg.output_every == 0:
        cfg.output_every = max(1, cfg.n_steps // 5)
    mesh = spec.build_mesh()
    ctx = Discretization(mesh, cfg.formulation)
    result = run(spec, cfg, mesh=mesh, ctx=ctx)
    with RunWriter(args.out) as w:
        _write_bundle(w, spec, cfg, extras, result, ctx)
    if not result.completed:
        print(f"run blew up at step {result.blowup_step}: "
              f"{result.blowup_reason}", file=sys.stderr)
        return 3
    print(f"completed {cfg.n_steps} steps in {result.wall_seconds:.1f} s; "
          f"bundle in {args.out}")
    return 0


def cmd_condnum(args):
    from .config import parse_config
    from .io import RunWriter
    from .stepper import run

    spec, cfg, extras = parse_config(args.config)
    if spec.dim != 1:
        print("condnum requires a 1D case", file=sys.stderr)
        return 2
    cfg.capture_cond = True
    result = run(spec, cfg)
    with RunWriter(args.out) as w:
        from .config import resolved_config_text
        w.write_config(resolved_config_text(spec, cfg, extras))
        with open(os.path.join(args.out, "condition_numbers.csv"), "w") as f:
            f.write("step,time,cond_number\n")
            for d in result.diagnostics:
                f.write(f"{d.step},{d.time:.17g},{d.cond_number:.17g}\n")
        for d in result.diagnostics:
            w.append_diag(d)
    if not result.completed:
        print(f"run blew up at step {result.blowup_step}", file=sys.stderr)
        return 3
    print(f"wrote per-step condition numbers for {cfg.n_steps} steps "
          f"to {args.out}")
    return 0


def cmd_verify(args):
    """Invariant suite on tiny meshes; one pass/fail line per check."""
    import numpy as np

    from . import assembly
    from .discretization import Discretization
    from .jacobian import assemble_jacobian_blocks, build_helmholtz
    from .mesh import W0, W3, Space, build_mesh, eval_basis
    from .residuals import compute_residual
    from .cases import case_spec, make_initial_state
    from .state import FLUX_NEW

    rng = np.random.default_rng(args.seed)
    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    m2 = build_mesh(2, 4, 3, 4000.0, 3000.0, periodic_x=True)
    m1 = build_mesh(1, 1, 6, 1.0, 1800.0)

    # partition of unity
    ok = True
    for kind in (W0, W3):
        s = Space(m2, kind)
        for _ in range(5):
            vals, _g = eval_basis(s, int(rng.integers(m2.n_cells)),
                                  rng.uniform(0, 1, 2))
            ok &= abs(vals.sum() - 1.0) < 1e-14
    check("partition of unity (W0, W3)", ok)

    # mass symmetry / lumping identity
    w = rng.uniform(0.5, 1.5, m2.n_cells)
    M = assembly.w2_mass(m2, w)
    ok = abs(M - M.T).max() < 1e-12
    check("weighted W2 mass symmetric", ok)
    Mi = assembly.lump_inverse(M)
    ones = np.ones(M.shape[0])
    check("lumped inverse exact on constants",
          np.abs(Mi @ (M @ ones) - ones).max() < 1e-12)

    # energy-exchange identity on random draws
    from .assembly import FacetSet, assemble_facet_form
    fs = FacetSet(m2)
    ok = True
    for _ in range(20):
        theta = rng.uniform(250.0, 350.0, m2.n_cells)
        pi = rng.uniform(700.0, 1000.0, m2.n_cells)
        F = rng.standard_normal(m2.n_w2)
        c = 0.5 * np.sign(rng.standard_normal(fs.n))
        E = assemble_facet_form(m2, "exner_gradient", coeff=theta, c=c,
                                facets=fs)
        T = assemble_facet_form(m2, "theta_flux", coeff=theta, c=c, facets=fs)
        val = F @ (E @ pi) + pi @ (T @ F)
        ok &= abs(val) < 1e-12 * max(1.0, abs(F @ (E @ pi)))
    check("Exner-gradient / Theta-flux adjoint cancellation", ok)

    # Helmholtz matrix-free vs assembled
    spec = case_spec("column1d_bubble", nz=6, z_extent=1800.0)
    ctx = Discretization(m1, FLUX_NEW)
    s0 = make_initial_state(spec, m1, FLUX_NEW, ctx=ctx)
    blocks = assemble_jacobian_blocks(ctx, s0, 60.0)
    helm = build_helmholtz(ctx, blocks)
    A = helm.assembled()
    A = A.toarray() if hasattr(A, "toarray") else A
    ok = True
    for _ in range(10):
        v = rng.standard_normal(m1.n_cells)
        ok &= np.abs(helm.apply(v) - A @ v).max() <= 1e-12 * np.abs(A @ v).max()
    check("Helmholtz matrix-free action matches assembled form", ok)

    # steady state of the unperturbed column
    spec0 = case_spec("column1d_bubble", bubble_amp=0.0, nz=6,
                      z_extent=1800.0)
    sb = make_initial_state(spec0, m1, FLUX_NEW, ctx=ctx)
    res, _ = compute_residual(ctx, sb, sb.copy(), 60.0)
    scale = ctx.const.g * ctx.V * 60.0
    check("balanced column is a discrete steady state",
          np.abs(res.r_u).max() < 1e-10 * scale)

    print(f"{'OK' if failures == 0 else 'FAILED'}: "
          f"{failures} failing check(s)")
    return 0 if failures == 0 else 1


def main(argv=None):
    p = argparse.ArgumentParser(prog="eulerslice")
    sub = p.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", help="run a configured case")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--seed", type=int, default=0)
    pv = sub.add_parser("verify", help="invariant suite on a tiny mesh")
    pv.add_argument("--seed", type=int, default=0)
    pc = sub.add_parser("condnum",
                        help="per-step Helmholtz condition numbers (1D)")
    pc.add_argument("--config", required=True)
    pc.add_argument("--out", required=True)
    pc.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "verify":
        return cmd_verify(args)
    return cmd_condnum(args)


if __name__ == "__main__":
    sys.exit(main())
