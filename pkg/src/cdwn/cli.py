"""Command-line entry point: ``cdwn <command> ...``.

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 a checked property was violated.
"""
from __future__ import annotations

import argparse
import math
import sys

from . import analysis, config, simulator
from .caching import comimo_threshold
from .topology import (PlacementParams, generate_perturbed_grid, generate_regular,
                       placement_params_regular, read_topology, validate_placement, write_topology)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_PROPERTY = 0, 1, 2, 3


class _Formatter(argparse.RawDescriptionHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    pass


def _emit(text: str, path: str = ""):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _overrides(pairs) -> dict:
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise config.ConfigError(f"--set expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _run_config(args) -> config.RunConfig:
    ov = _overrides(args.set)
    if args.config:
        return config.load_config(args.config, ov)
    return config.loads_config("", overrides=ov)


# ------------------------------------------------------------------ topology

def cmd_topology(args) -> int:
    if args.regular:
        topo = generate_regular(args.n_side, args.r_0, args.d_0, args.n_backhaul)
        params = placement_params_regular(args.n_side, args.r_0, args.d_0, args.n_backhaul)
    else:
        params = PlacementParams(args.n_side ** 2, args.n_users, args.r_min, args.r_max,
                                 args.d_min, args.k_max, args.n_backhaul, args.r_0)
        topo = generate_perturbed_grid(params, args.jitter, args.seed)
    rep = validate_placement(topo, params)
    write_topology(topo, args.out)
    lines = ["min_bs_distance_m,min_bs_user_distance_m,max_point_to_bs_m,max_users_per_cell,"
             "users_per_bs,violations",
             f"{rep.min_bs_pairwise_distance:.6g},{rep.min_bs_user_distance:.6g},"
             f"{rep.max_point_to_bs_distance:.6g},{rep.max_users_per_cell},"
             f"{rep.users_per_bs_ratio:.6g},{len(rep.violations)}"]
    _emit("\n".join(lines) + "\n", args.report)
    return EXIT_OK if rep.ok else EXIT_PROPERTY


# ------------------------------------------------------------------ analyze

def cmd_analyze(args) -> int:
    run = _run_config(args)
    sim = run.sim
    topo = generate_regular(sim.n_side, sim.cell_pitch_m, sim.user_offset_m, 1)
    params = simulator.channel_params(sim, topo)
    d0, r0 = sim.user_offset_m, sim.cell_pitch_m
    taus = config.parse_values(args.taus) if args.taus else [sim.tau]
    budgets = config.parse_values(args.budgets) if args.budgets is not None else [sim.budget]
    rows = [analysis.ANALYSIS_CSV_HEADER]
    thr = ["tau,L,threshold"]
    for tau in taus:
        thr.append(f"{tau:g},{sim.n_files},{comimo_threshold(tau, sim.n_files):.12g}")
        for b in budgets:
            r = analysis.analysis_row(b, tau, sim.n_files, params, d0, r0)
            rows.append(",".join(f"{r[k]:.12g}" for k in analysis.ANALYSIS_CSV_HEADER.split(",")))
    _emit("\n".join(rows) + "\n", args.out or run.output_csv)
    if args.thresholds:
        _emit("\n".join(thr) + "\n", args.thresholds)
    return EXIT_OK


# ------------------------------------------------------------------ simulate / sweep

def _check_bounds(points) -> bool:
    ok = True
    for p in points:
        r = p.result
        if r is not None and math.isfinite(r.aggregate) and r.aggregate > r.bound_bps * (1 + 1e-9):
            ok = False
    return ok


def cmd_simulate(args) -> int:
    run = _run_config(args)
    res = simulator.simulate(run.sim)
    pt = simulator.SweepPoint("none", 0.0, run.sim.scheme, res)
    _emit(simulator.sweep_csv([pt]), args.out or run.output_csv)
    if args.per_user:
        txt = "user,bs,throughput_bps\n" + "".join(
            f"{k},{b},{v:.10g}\n" for k, (b, v) in
            enumerate(zip(simulator.build_topology(run.sim).association, res.per_user_throughput)))
        _emit(txt, args.per_user)
    return EXIT_OK if _check_bounds([pt]) else EXIT_PROPERTY


def cmd_sweep(args) -> int:
    run = _run_config(args)
    axis = args.axis or run.sweep_axis
    if not axis:
        raise config.ConfigError("no sweep axis given (--axis or sweep_axis)")
    values = config.parse_values(args.values) if args.values is not None else run.sweep_values
    schemes = tuple(s for s in (args.schemes or "").split(",") if s) or run.schemes or (run.sim.scheme,)
    pts = simulator.sweep(run.sim, axis, values, schemes)
    _emit(simulator.sweep_csv(pts), args.out or run.output_csv)
    return EXIT_OK if _check_bounds(pts) else EXIT_PROPERTY


def cmd_scaling(args) -> int:
    run = _run_config(args)
    sim = run.sim
    over = {"tau": args.tau} if args.tau is not None else {}
    if args.files_per_bs is not None:
        over["files_per_bs"] = args.files_per_bs
    sim = simulator.replace(sim, topology="regular", **over)
    sizes = [int(v) for v in config.parse_values(args.sizes)]
    pts = simulator.sweep(sim, "N", sizes, (sim.scheme,))
    ok = [p for p in pts if p.result is not None and p.result.rate > 0]
    lines = ["quantity,slope,ci_low,ci_high,r2,points"]
    if len(ok) >= 3:
        N = [p.value for p in ok]
        agg = simulator.fit_scaling_exponent([(n, p.result.aggregate) for n, p in zip(N, ok)])
        per = simulator.fit_scaling_exponent([(n, p.result.rate) for n, p in zip(N, ok)])
        fits = [("aggregate_vs_N", agg), ("per_user_vs_N", per)]
        if sim.files_per_bs > 0:
            lt = [max(1, round(sim.files_per_bs * n)) / sim.budget for n in N]
            fits.append(("per_user_vs_Ltilde",
                         simulator.fit_scaling_exponent([(x, p.result.rate) for x, p in zip(lt, ok)])))
        for name, f in fits:
            lo, hi = f.interval(0.95, len(ok))
            lines.append(f"{name},{f.slope:.6g},{lo:.6g},{hi:.6g},{f.r2:.6g},{len(ok)}")
    _emit("\n".join(lines) + "\n" + simulator.sweep_csv(pts), args.out or run.output_csv)
    return EXIT_OK if len(ok) >= 3 else EXIT_RUNTIME


# ------------------------------------------------------------------ validate

def cmd_validate(args) -> int:
    if args.config:
        config.load_config(args.config)
    if args.topology:
        topo = read_topology(args.topology)
        params = PlacementParams(topo.n_bs, topo.n_users, args.r_min, args.r_max, args.d_min,
                                 args.k_max, len(topo.backhaul_set), topo.cell_pitch)
        rep = validate_placement(topo, params)
        out = ["rule,count"] + [f"{rule},{len(items)}" for rule, items in rep.violations]
        _emit("\n".join(out) + "\n", args.out)
        if not rep.ok:
            return EXIT_PROPERTY
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _add_config_args(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one key")
    p.add_argument("--out", default="", help="output CSV path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    keys = config.keys_help()
    ap = argparse.ArgumentParser(prog="cdwn", description=__doc__, formatter_class=_Formatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topology", help="generate and validate a topology", formatter_class=_Formatter)
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--regular", action="store_true", help="square lattice, four users per BS")
    kind.add_argument("--perturbed", action="store_true", help="jittered lattice (default)")
    p.add_argument("--n-side", type=int, default=15, help="BSs per side")
    p.add_argument("--r-0", type=float, default=100.0, help="lattice pitch, m")
    p.add_argument("--d-0", type=float, default=25.0, help="BS-user distance (regular), m")
    p.add_argument("--n-users", type=int, default=900, help="users (perturbed)")
    p.add_argument("--r-min", type=float, default=50.0, help="minimum BS-BS distance, m")
    p.add_argument("--r-max", type=float, default=75.0 * math.sqrt(2), help="maximum cell radius, m")
    p.add_argument("--d-min", type=float, default=10.0, help="minimum BS-user distance, m")
    p.add_argument("--k-max", type=int, default=8, help="maximum users per cell")
    p.add_argument("--jitter", type=float, default=50.0, help="BS jitter square side, m")
    p.add_argument("--n-backhaul", type=int, default=10, help="wired BSs N_0")
    p.add_argument("--seed", type=int, default=1, help="placement seed")
    p.add_argument("--out", default="topology.txt", help="topology file")
    p.add_argument("--report", default="", help="placement report CSV (default stdout)")
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("analyze", help="closed-form throughput table", epilog=keys,
                       formatter_class=_Formatter)
    _add_config_args(p)
    p.add_argument("--budgets", help="normalised cache sizes B_C/F (list or start:stop:step)")
    p.add_argument("--taus", help="Zipf skewness values (list or range)")
    p.add_argument("--thresholds", default="", help="also write the cooperation thresholds CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="one fluid-model run", epilog=keys, formatter_class=_Formatter)
    _add_config_args(p)
    p.add_argument("--per-user", default="", help="write per-user throughputs to this CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate along one axis", epilog=keys, formatter_class=_Formatter)
    _add_config_args(p)
    p.add_argument("--axis", choices=simulator.SWEEP_AXES)
    p.add_argument("--values", help="axis values (B_C in bits, SNR in dB)")
    p.add_argument("--schemes", help="comma list of schemes, e.g. A,B")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scaling", help="fit scaling exponents over regular grids", epilog=keys,
                       formatter_class=_Formatter)
    _add_config_args(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--sizes", default="64,144,256,400", help="network sizes N (perfect squares)")
    p.add_argument("--files-per-bs", type=float, help="grow L as files_per_bs * N")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("validate", help="check a topology file or a configuration",
                       formatter_class=_Formatter)
    p.add_argument("--topology", help="topology file")
    p.add_argument("--config", help="configuration file")
    p.add_argument("--r-min", type=float, default=50.0, help="minimum BS-BS distance, m")
    p.add_argument("--r-max", type=float, default=75.0 * math.sqrt(2), help="maximum cell radius, m")
    p.add_argument("--d-min", type=float, default=10.0, help="minimum BS-user distance, m")
    p.add_argument("--k-max", type=int, default=8, help="maximum users per cell")
    p.add_argument("--out", default="", help="violations CSV (default stdout)")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (config.ConfigError, ValueError) as exc:
        print(f"cdwn: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError, OSError) as exc:
        print(f"cdwn: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
