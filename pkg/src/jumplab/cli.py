"""Command-line entry point: ``jumplab <subcommand> --scenario FILE``.

Exit status is 0 when every configured tolerance passes, 1 when a check
fails (or a warning is raised under ``--strict``), and 2 on scenario parse
or validation errors.  Reports and tables are written from the main thread
only; report files carry no timings so that reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .errors import JumpLabError, ScenarioError
from .report import VerificationReport

EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2

PHI = {
    "one": lambda x: np.ones(x.shape[:-1]),
    "x": lambda x: x[..., 0],
    "x2": lambda x: x[..., 0] ** 2,
    "cos": lambda x: np.cos(x[..., 0]),
}


def _initial_density(scen, grid):
    from .fields.initial import gaussian_density, mollified_delta

    mean = scen.x0(grid.n)
    if scen.run["initial"] == "delta":
        return mollified_delta(grid, mean)
    return gaussian_density(grid, mean, scen.run["var"])


def _stride(steps, snapshots=10):
    return max(1, math.ceil(steps / snapshots))


def cmd_simulate(scen, threads):
    from .sde_core import evolve_jacobian, sample_noise, simulate_path

    model = scen.build_model()
    grid = scen.time_grid()
    x0 = scen.x0(model.n)
    tol = scen.tolerances["jacobian"]
    rep = VerificationReport("simulate", config={"model": model.describe(), "dt": grid.base_dt,
                                                 "x0": x0.tolist()})
    arts = []
    rel, jmin = 0.0, np.inf
    for seed in scen.seed_list():
        nz = sample_noise(model, grid, seed)
        tr = simulate_path(model, x0, nz)
        a, b = evolve_jacobian(model, tr, nz)
        rel = max(rel, float(np.max(np.abs(a.values - b.values) / np.abs(b.values))))
        jmin = min(jmin, float(a.values.min()))
        rep.metrics[f"jumps[seed={seed}]"] = nz.n_jumps
        arts.append((f"trajectory_seed{seed}.csv",
                     lambda p, tr=tr, a=a: tr.to_csv(p, jacobian=a)))
    rep.metrics["jacobian_relative_gap"] = rel
    rep.metrics["min_J"] = jmin
    rep.check("jacobian_relative_gap", rel, tol)
    rep.check("min_J", jmin, 0.0, ">")
    return rep, arts


def cmd_verify_integral(scen, threads):
    from .calculus import registry_candidate, verify_first_integral

    model = scen.build_model()
    refine = int(scen.run["refinements"])
    tol = scen.tolerances
    rep = verify_first_integral(registry_candidate(model), model, scen.seed_list(),
                                scen.time_grid(), scen.x0(model.n), refinements=refine,
                                threads=threads,
                                tol=None if refine else tol["drift"],
                                min_order=tol["order"] if refine else None)
    return rep, [("drift.csv", lambda p: rep.write_table("drift", p))]


def cmd_verify_iw(scen, threads):
    from .calculus import (FieldDifferential, evolve_field, ito_wentzell_residual,
                           ito_wentzell_study)
    from .fields import GridField
    from .sde_core import TimeGrid, sample_noise, simulate_path

    model = scen.build_model()
    grid = scen.spatial_grid()
    x0 = scen.x0(model.n)
    if scen.run["field"] == "unit-noise":
        f0 = GridField.from_function(grid, lambda x: 0.5 * x[..., 0] ** 2)
        base = scen.time_grid(default_dt=1e-2)
        rep = ito_wentzell_study(model, FieldDifferential.constant(0.0, 1.0, model.m), f0, x0,
                                 scen.seed_list(), base, levels=int(scen.run["levels"]),
                                 threads=threads, min_order=scen.tolerances["order"])
        return rep, [("convergence.csv", lambda p: rep.write_table("convergence", p))]
    zero = FieldDifferential.constant(0.0, 0.0, model.m)
    f0 = GridField.from_function(grid, lambda x: x[..., 0])
    tg = scen.time_grid(default_dt=5e-3)
    rep = VerificationReport("ito_wentzell", config={"field": "identity",
                                                     "grid": grid.describe(),
                                                     "dt": tg.base_dt})
    rows = []
    worst = 0.0
    for seed in scen.seed_list():
        nz = sample_noise(model, tg, seed)
        tr = simulate_path(model, x0, nz)
        r = ito_wentzell_residual(zero, evolve_field(f0, zero, nz), model, tr, nz)
        worst = max(worst, r.metrics["max_residual_cont"], r.metrics["max_residual_jump"])
        rows.extend(r.tables["residuals"][1])
        for w in r.warnings:
            rep.warn(f"seed {seed}: {w}")
    rep.metrics["max_step_residual"] = worst
    rep.check("max_step_residual", worst, scen.tolerances["residual"])
    rep.add_table("residuals", ["seed", "t", "residual_cont", "residual_jump"], rows)
    return rep, [("residuals.csv", lambda p: rep.write_table("residuals", p))]


def cmd_kernel(scen, threads):
    from .kernel import check_global_invariants, kernel_noise, solve_kernel_spde

    model = scen.build_model()
    grid = scen.spatial_grid()
    rho0 = _initial_density(scen, grid)
    T, t0 = scen.grid["T"], scen.grid["t0"]
    rep = VerificationReport("kernel")
    arts = []
    for seed in scen.seed_list():
        nz = kernel_noise(model, grid, T, seed, t0=t0)
        K = solve_kernel_spde(model, grid, rho0, nz, store=_stride(nz.grid.steps))
        gap = float(np.max(np.abs(K.mass() - 1.0)))
        sub = check_global_invariants(K, model, samples=int(scen.run["mc_samples"]), seed=seed)
        sub.metrics["mass_gap"] = gap
        sub.check("mass_gap", gap, scen.tolerances["mass"])
        rep.merge(sub, f"seed{seed}")
        rep.config[f"seed{seed}"] = K.scheme
        arts.append((f"kernel_seed{seed}.csv", lambda p, K=K: K.to_csv(p)))
    return rep, arts


def cmd_forward(scen, threads):
    from .kolmogorov import solve_forward

    model = scen.build_model()
    grid = scen.spatial_grid()
    F = solve_forward(model, grid, _initial_density(scen, grid), scen.grid["T"],
                      t0=scen.grid["t0"], dt=scen.dt, jump_measure=scen.run["jump_measure"],
                      store="all")
    rep = VerificationReport("forward", config=F.scheme)
    gap = float(np.max(np.abs(F.field.mass() - 1.0)))
    rep.metrics["mass_gap"] = gap
    rep.metrics["boundary_loss"] = float(F.boundary_loss[-1])
    rep.check("mass_gap", gap, scen.tolerances["mass"])
    every = _stride(F.field.times.size - 1)
    return rep, [("density.csv", lambda p: F.to_csv(p, every))]


def cmd_backward(scen, threads):
    from .kolmogorov import solve_backward

    model = scen.build_model()
    grid = scen.spatial_grid()
    phi = scen.run["phi"]
    s0 = scen.run["s_start"]
    s0 = scen.grid["t0"] if s0 is None else float(s0)
    B = solve_backward(model, grid, PHI[phi], scen.grid["T"], s0, dt=scen.dt, store="ends")
    rep = VerificationReport("backward", config={**B.scheme, "phi": phi})
    if phi == "one":
        err = float(np.max(np.abs(B.values - 1.0)))
        rep.metrics["constant_error"] = err
        rep.check("constant_error", err, scen.tolerances["constant"])
    x = grid.x.reshape(-1, grid.n)
    rep.add_table("start", [f"y_{i + 1}" for i in range(grid.n)] + ["v"],
                  [list(map(float, xi)) + [float(v)] for xi, v in zip(x, B.start.ravel())])
    return rep, [("backward.csv", lambda p: rep.write_table("start", p))]


def cmd_duality(scen, threads):
    from .kolmogorov import duality

    model = scen.build_model()
    grid = scen.spatial_grid()
    rep = duality(model, grid, _initial_density(scen, grid), PHI[scen.run["phi"]],
                  scen.grid["T"], t0=scen.grid["t0"], points=int(scen.run["points_s"]),
                  tol=scen.tolerances["deviation"])
    return rep, [("pairing.csv", lambda p: rep.write_table("pairing", p))]


def cmd_compare_mc(scen, threads):
    from .kolmogorov import forward_vs_mc

    model = scen.build_model()
    grid = scen.spatial_grid()
    if scen.grid["t0"] != 0:
        raise ScenarioError("compare-mc starts at t0 = 0", field="grid.t0")
    rep, _, hist = forward_vs_mc(model, grid, _initial_density(scen, grid), scen.grid["T"],
                                 samples=int(scen.run["samples"]), bins=int(scen.run["bins"]),
                                 seed=int(scen.seeds["base"]), threads=threads,
                                 tol=scen.tolerances["l1"])
    arts = [("histogram.csv", hist.to_csv)]
    if "bins" in rep.tables and rep.tables["bins"][1]:
        arts.append(("bins.csv", lambda p: rep.write_table("bins", p)))
    return rep, arts


COMMANDS = {
    "simulate": (cmd_simulate, "paths and Jacobians"),
    "verify-integral": (cmd_verify_integral, "first-integral drift"),
    "verify-iw": (cmd_verify_iw, "Ito-Wentzell chain-rule residuals"),
    "kernel": (cmd_kernel, "kernel equation and invariant checks"),
    "forward": (cmd_forward, "forward density equation"),
    "backward": (cmd_backward, "backward equation"),
    "duality": (cmd_duality, "backward-forward pairing"),
    "compare-mc": (cmd_compare_mc, "forward solver against Monte Carlo"),
}


def _write(outdir, rep, arts, scen):
    os.makedirs(outdir, exist_ok=True)
    if scen is not None:
        # the output directory does not affect results; leave it out so
        # reruns into different directories compare byte for byte
        cfg = scen.resolved()
        cfg.pop("output")
        rep.config["scenario"] = cfg
    with open(os.path.join(outdir, "report.txt"), "w") as fh:
        fh.write(rep.to_text())
    for name, writer in arts:
        writer(os.path.join(outdir, name))


def _finish(rep, strict, err):
    for c in rep.failing():
        print(f"check failed: {c.line()}", file=err)
    if strict and rep.warnings:
        for w in rep.warnings:
            print(f"warning treated as error: {w}", file=err)
        return EXIT_FAIL
    return EXIT_OK if rep.passed else EXIT_FAIL


def run_all(outdir, threads, strict, out, err, criteria=None):
    from .suite import CRITERIA, run_criterion

    os.makedirs(outdir, exist_ok=True)
    status = EXIT_OK
    numbers = criteria or [c.number for c in CRITERIA]
    for n in numbers:
        res = run_criterion(n, threads=threads)
        print(res.line(), file=out, flush=True)
        with open(os.path.join(outdir, f"criterion_{n:02d}.txt"), "w") as fh:
            fh.write(res.report.to_text())
        if not res.passed or (strict and res.report.warnings):
            status = EXIT_FAIL
            for c in res.report.failing():
                print(f"check failed: criterion {n}: {c.line()}", file=err)
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="jumplab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_required=True):
        sp.add_argument("--scenario", required=scenario_required, help="INI scenario file")
        sp.add_argument("--seed", type=int, help="override [seeds] base")
        sp.add_argument("--out", help="override [output] dir")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for ensembles")
        sp.add_argument("--strict", action="store_true", help="treat warnings as failures")

    for name, (_, helptext) in COMMANDS.items():
        common(sub.add_parser(name, help=helptext))
    sp = sub.add_parser("all", help="full acceptance run")
    common(sp, scenario_required=False)
    sp.add_argument("--criteria", type=int, nargs="+", help="run only these criteria")
    common(sub.add_parser("run", help="run the pipeline named in [run] pipeline"))
    return p


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be positive", file=err)
        return EXIT_PARSE
    scen = None
    try:
        if args.scenario:
            from .scenario import load_scenario

            scen = load_scenario(args.scenario)
            if args.seed is not None:
                scen.seeds["base"] = args.seed
            if args.out:
                scen.output["dir"] = args.out
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=err)
        return EXIT_PARSE

    command = args.command
    if command == "run":
        command = scen.run["pipeline"]
        if command is None:
            print(f"error: {args.scenario}: [field 'run.pipeline'] required by 'run'", file=err)
            return EXIT_PARSE
    outroot = args.out or (scen.output["dir"] if scen else "out")
    if command == "all":
        return run_all(os.path.join(outroot, "all"), args.threads, args.strict, out, err,
                       getattr(args, "criteria", None))
    handler = COMMANDS[command][0]
    try:
        rep, arts = handler(scen, args.threads)
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=err)
        return EXIT_PARSE
    except JumpLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_FAIL
    outdir = os.path.join(outroot, command)
    _write(outdir, rep, arts, scen)
    for c in rep.checks:
        print(c.line(), file=out)
    print(f"wrote {outdir}", file=out)
    return _finish(rep, args.strict, err)


if __name__ == "__main__":
    sys.exit(main())
