"""Command line entry point: ``magnonmem <subcommand> [--config FILE] [--out FILE] ...``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .dynamics import integrate
from .errors import NumericalError, ValidationError
from .experiments import monte_carlo_imperfection, run_memory, run_sweep, uniform_vs_random_compare
from .io import RunConfig, load_config, resolve_output, write_result
from .memory import efficiency_closed_form
from .model import MHZ, FieldMap, feasibility_check
from .spectrum import bias_sweep_map, critical_kappa, find_dips, reflection_trace

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64

SUBCOMMANDS = ("spectrum", "sweep-field", "dynamics", "memory", "sweep", "montecarlo", "design",
               "feasibility", "compare")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    for key in ("samples", "spread", "axis"):
        if getattr(args, key, None) is not None:
            changes[key] = getattr(args, key)
    if getattr(args, "values", None):
        changes["values"] = tuple(float(v) for v in args.values.split(","))
    return cfg.with_values(**changes) if changes else cfg


def _spectrum(cfg: RunConfig, args, out):
    v = cfg.values
    half = 0.5 * v["span_MHz"] * MHZ
    grid = cfg.spec.omega_a + np.linspace(-half, half, v["points"])
    trace = reflection_trace(cfg.spec.config(), grid)
    dips = find_dips(trace.magnitude)
    write_result(trace, out, cfg)
    print(f"{len(dips)} dips; min |r| = {trace.magnitude.min():.4f}")


def _sweep_field(cfg: RunConfig, args, out):
    v = cfg.values
    gamma = cfg.gamma
    H0 = v["H0_Oe"] if v["H0_Oe"] is not None else cfg.spec.omega_a / gamma
    dH = v["deltaH_Oe"] if v["deltaH_Oe"] is not None else cfg.spec.delta_omega / gamma
    axis = v["field_axis"]
    xs = np.linspace(v["field_from"], v["field_to"], v["field_points"])
    if axis == "H0":
        xs = H0 + xs  # offsets around the bias field
    half = 0.5 * v["span_MHz"] * MHZ
    grid = cfg.spec.omega_a + np.linspace(-half, half, v["points"])
    smap = bias_sweep_map(cfg.spec.config(), FieldMap(gamma, H0, dH), axis, xs, grid, workers=cfg.workers)
    write_result(smap, out, cfg)
    print(f"{xs.size} x {grid.size} map over {axis}")


def _t_end(cfg: RunConfig) -> float:
    if cfg.values["t_end_ns"] is not None:
        return cfg.values["t_end_ns"] * 1e-9
    drive = cfg.plan.drive(cfg.spec.carrier)
    return drive.pulses[-1].center + 2.45 * cfg.spec.storage_time


def _dynamics(cfg: RunConfig, args, out):
    drive = cfg.plan.drive(cfg.spec.carrier)
    trace = integrate(cfg.spec.config(), drive, _t_end(cfg), dt=cfg.dt, tol=cfg.tol)
    write_result(trace, out, cfg)
    print(f"{trace.t.size} samples to {trace.t[-1] * 1e9:.1f} ns")


def _memory(cfg: RunConfig, args, out):
    run = run_memory(cfg.spec, cfg.plan, dt=cfg.dt, tol=cfg.tol)
    r = run.report
    extra = {"zeta": repr(r.zeta), "T_measured_ns": repr(r.peak_time * 1e9),
             "zone3_over_zone2": repr(r.second_to_first)}
    write_result(run.trace, out, cfg, extra=extra)
    print(f"zeta = {r.zeta:.4f}  retrieval peak at {r.peak_time * 1e9:.1f} ns  "
          f"zone III / II = {r.second_to_first:.4f}")


def _sweep(cfg: RunConfig, args, out):
    axis = cfg.values["axis"]
    vals = np.asarray(cfg.values["values"], dtype=float)
    if axis != "N":
        vals = vals * MHZ
    res = run_sweep(cfg.spec, axis, vals, cfg.plan, dt=cfg.dt, tol=cfg.tol, workers=cfg.workers)
    write_result(res, out, cfg)
    for p in res.points:
        shown = p.value if axis == "N" else p.value / MHZ
        if p.ok:
            print(f"{axis}={shown:g}: zeta={p.zeta:.4f} T={p.T_measured * 1e9:.1f} ns")
        else:
            print(f"{axis}={shown:g}: FAILED {p.error}")


def _montecarlo(cfg: RunConfig, args, out):
    v = cfg.values
    stats = monte_carlo_imperfection(cfg.spec, v["spread"], v["samples"], cfg.seed, cfg.plan,
                                     dt=cfg.dt, tol=cfg.tol, workers=cfg.workers)
    write_result(stats, out, cfg)
    print(f"mean zeta = {stats.mean:.4f}  std = {stats.std:.4f}  ({stats.n_samples} samples)")


def _design(cfg: RunConfig, args, out):
    config = cfg.spec.config()
    total, lossless = critical_kappa(config, cfg.spec.delta_omega)
    print(f"critical kappa_a1 = {total / MHZ:.4f} MHz (lossless part {lossless / MHZ:.4f} MHz)")
    try:
        cf = efficiency_closed_form(cfg.spec.g0, cfg.spec.delta_omega, cfg.spec.kappa_m,
                                    cfg.spec.kappa_a0, cfg.plan.duration)
        print(f"closed-form zeta = {cf.zeta:.4f}  F = {cf.finesse:.3f}  C = {cf.cooperativity:.3f}  "
              f"G = {cf.figure_of_merit:.3f}")
    except ValidationError as exc:
        print(f"closed-form zeta unavailable: {exc}")
    report = feasibility_check(config, cfg.spec.delta_omega)
    for line in report.lines():
        print(line)
    write_result(report, out, cfg, extra={"critical_kappa_a1_MHz": repr(total / MHZ)})


def _feasibility(cfg: RunConfig, args, out):
    report = feasibility_check(cfg.spec.config(), cfg.spec.delta_omega)
    for line in report.lines():
        print(line)
    print("feasible" if report.passed else "not feasible")
    write_result(report, out, cfg)


def _compare(cfg: RunConfig, args, out):
    cmp = uniform_vs_random_compare(cfg.spec, cfg.seed, cfg.plan, dt=cfg.dt, tol=cfg.tol)
    write_result(cmp, out, cfg)
    print(f"zone II energy uniform / random = {cmp.zone2_ratio:.3f}; off-window energy "
          f"{cmp.uniform.off_window_energy:.4f} vs {cmp.random.off_window_energy:.4f}")


HANDLERS = {
    "spectrum": _spectrum,
    "sweep-field": _sweep_field,
    "dynamics": _dynamics,
    "memory": _memory,
    "sweep": _sweep,
    "montecarlo": _montecarlo,
    "design": _design,
    "feasibility": _feasibility,
    "compare": _compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value config file (MHz, ns, Oe)")
    common.add_argument("--out", help="output CSV (relative paths go under $MAGNONMEM_OUTPUT_DIR)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    parser = _Parser(prog="magnonmem", description="Magnon gradient memory simulations.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    helps = {
        "spectrum": "reflection spectrum |r|, phase and group delay",
        "sweep-field": "reflection map over bias field or gradient",
        "dynamics": "time trace for the configured drive",
        "memory": "store and retrieve one pulse; report efficiency",
        "sweep": "efficiency and storage time along one parameter",
        "montecarlo": "efficiency statistics under random sphere imperfections",
        "design": "critical coupling, closed-form efficiency and feasibility",
        "feasibility": "design inequality report",
        "compare": "evenly spaced against randomly spaced magnon frequencies",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "montecarlo":
            p.add_argument("--samples", type=int)
            p.add_argument("--spread", type=float)
        if name == "sweep":
            p.add_argument("--axis", choices=("delta_omega", "g", "kappa_m", "N", "detuning"))
            p.add_argument("--values", help="comma separated, MHz (integers for N)")
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        if not argv:
            raise UsageError("a subcommand is required")
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _config(args)
        out = resolve_output(args.out, f"{args.command}.csv")
        HANDLERS[args.command](cfg, args, out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
