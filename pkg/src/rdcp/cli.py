"""Command line: ``rdcp <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from rdcp import acceptance
from rdcp.degree_dist import DistributionError, parse_dist
from rdcp.experiments import (
    census_rows,
    fan_out,
    largest_fractions,
    limit_census,
    mean_se,
    replica_rng,
    run_replica,
    vertex_census,
)
from rdcp.canonical import tv_distance
from rdcp.host_graph import HostGraphError, parse_host
from rdcp.limit_sampler import MtbpSampler
from rdcp.ode import critical_time, solve_lambda
from rdcp.output import csv_text, write_csv
from rdcp.simulate import SimulationError, UntilFinal, UntilSteps, UntilTime
from rdcp.spectral import build_grid, eigenfunction_crosscheck, principal_eigenvalue

SUMMARY_COLUMNS = [
    "t",
    "edges_per_n",
    "edges_per_n_se",
    "unsat_frac",
    "unsat_frac_se",
    "largest_frac",
    "largest_frac_se",
    "susceptibility",
    "susceptibility_se",
    "runs",
]


class UsageError(ValueError):
    pass


def parse_stop(text: str):
    """``final``, ``time:T`` or ``steps:K``."""
    text = text.strip()
    if text == "final":
        return UntilFinal()
    kind, _, val = text.partition(":")
    try:
        if kind == "time":
            return UntilTime(float(val))
        if kind == "steps":
            return UntilSteps(int(val))
    except ValueError:
        pass
    raise UsageError(f"bad --until value {text!r}: expected final, time:T or steps:K")


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _emit(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        p = Path(out)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")


def _meta(args, **extra) -> dict:
    skip = {"func", "out", "threads", "trajectory", "timings", "json"}
    m = {"command": args.command}
    for k, v in sorted(vars(args).items()):
        if k not in skip and k != "command":
            m[k] = ";".join(map(str, v)) if isinstance(v, list) else v
    m.update(extra)
    return m


# -- simulate -------------------------------------------------------------


def cmd_simulate(args) -> int:
    dist = parse_dist(args.dist)
    stop = parse_stop(args.until)
    snaps = _floats(args.snapshots) if args.snapshots else None

    def one(i):
        rng = replica_rng(args.seed, 0, i)
        host = parse_host(args.host, rng)
        return host.n_vertices, run_replica(host, dist, stop, rng, snaps)

    results = fan_out(one, range(args.runs), args.threads)
    n = results[0][0]
    # one row per snapshot time, then the state at the stop point
    per_run = []
    for _, st in results:
        rows = list(st.snapshots or [])
        cs = st.component_stats()
        rows.append(
            {
                "t": st.clock,
                "edges": st.steps,
                "unsat_frac": st.unsaturated_fraction(),
                "largest": cs.largest,
                "susceptibility": cs.susceptibility,
            }
        )
        per_run.append(rows)
    out_rows = []
    for j in range(len(per_run[0])):
        col = [r[j] for r in per_run]
        row = {"t": float(np.mean([r["t"] for r in col])), "runs": len(col)}
        for key, name, scale in (
            ("edges", "edges_per_n", n),
            ("unsat_frac", "unsat_frac", 1),
            ("largest", "largest_frac", n),
            ("susceptibility", "susceptibility", 1),
        ):
            m, se = mean_se([r[key] / scale for r in col])
            row[name], row[name + "_se"] = m, se
        out_rows.append(row)
    final = [st.final for _, st in results]
    _emit(csv_text(SUMMARY_COLUMNS, out_rows, _meta(args, n_vertices=n, final_runs=sum(final))), args.out)
    if args.trajectory:
        st = results[0][1]
        write_csv(
            args.trajectory,
            ["time", "step", "u", "v"],
            [(t, i + 1, u, v) for i, (u, v, t) in enumerate(st.edges_added)],
            _meta(args, run=0),
        )
    return 0


# -- limit census -----------------------------------------------------------


def cmd_limit_census(args) -> int:
    dist = parse_dist(args.dist)
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    sampler = MtbpSampler(solve_lambda(dist, args.abs_tol))
    c = limit_census(sampler, args.t_hat, args.R, args.samples, replica_rng(args.seed, 1, 0), args.sampler)
    _emit(csv_text(["code_hex", "frequency"], census_rows(c), _meta(args)), args.out)
    return 0


# -- compare -----------------------------------------------------------------


def cmd_compare(args) -> int:
    dist = parse_dist(args.dist)
    Rs = _ints(args.R)
    if any(R < 0 or R > 4 for R in Rs):
        raise UsageError("R must lie in 0..4")
    if args.samples < 1000:
        warnings.warn(f"only {args.samples} limit samples; TV estimates will be noisy", stacklevel=1)
    if (args.t_hat is None) == (args.steps_per_n is None):
        raise UsageError("give exactly one of --t-hat and --steps-per-n")
    sol = solve_lambda(dist, args.abs_tol)
    rng = replica_rng(args.seed, 2, 0)
    host = parse_host(args.host, rng)
    if args.t_hat is not None:
        t_hat = args.t_hat
        stop = UntilTime(t_hat)
    else:
        k = int(math.floor(args.steps_per_n * host.n_vertices))
        t_hat = sol.big_F_inverse(2 * args.steps_per_n)
        stop = UntilSteps(k)
    state = run_replica(host, dist, stop, rng)
    sampler = MtbpSampler(sol)
    rows = []
    censuses = {}
    for R in Rs:
        sim_c = vertex_census(state, R)
        lim_c = limit_census(sampler, t_hat, R, args.samples, replica_rng(args.seed, 2, 1 + R))
        tv = tv_distance(sim_c, lim_c)
        rows.append((R, args.samples, tv))
        censuses[R] = (sim_c, lim_c)
    _emit(csv_text(["R", "N", "tv"], rows, _meta(args, t_hat_limit=t_hat, n_vertices=host.n_vertices)), args.out)
    if args.census_dir:
        d = Path(args.census_dir)
        for R, (a, b) in censuses.items():
            write_csv(d / f"simulation_R{R}.csv", ["code_hex", "frequency"], census_rows(a), _meta(args, R=R))
            write_csv(d / f"limit_R{R}.csv", ["code_hex", "frequency"], census_rows(b), _meta(args, R=R))
    return 0


# -- critical time -----------------------------------------------------------

CRITICAL_COLUMNS = ["dist", "t_hat_c", "t_c", "theta", "delta", "I", "J", "asymptotic_ref", "ratio", "mu", "flags"]


def cmd_critical(args) -> int:
    rows = []
    bracket_rows = []
    for spec in args.dist:
        dist = parse_dist(spec)
        sol = solve_lambda(dist, args.abs_tol)
        rep = critical_time(dist, args.abs_tol, sol=sol)
        row = rep.row()
        row["mu"] = math.nan
        if args.G and math.isfinite(rep.t_hat_c):
            grid = build_grid(sol, rep.t_hat_c, args.G)
            row["mu"] = principal_eigenvalue(grid)[0]
        rows.append(row)
        if args.bracket and math.isfinite(rep.t_hat_c):
            from rdcp.host_graph import complete

            ns = _ints(args.bracket_n)
            for j, factor in enumerate((0.9, 1.1)):
                for k, n in enumerate(ns):
                    x = largest_fractions(lambda n=n: complete(n), dist, factor * rep.t_hat_c, range(args.bracket_seeds), args.seed, 100 + 10 * j + k, args.threads)
                    m, se = mean_se(x)
                    bracket_rows.append((dist.spec_string(), factor, n, args.bracket_seeds, m, se))
    _emit(csv_text(CRITICAL_COLUMNS, rows, _meta(args)), args.out)
    if bracket_rows:
        cols = ["dist", "t_over_t_hat_c", "n", "seeds", "largest_frac", "largest_frac_se"]
        text = csv_text(cols, bracket_rows, _meta(args, section="bracket"))
        if args.out and args.out != "-":
            _emit(text, str(Path(args.out).with_suffix("")) + "_bracket.csv")
        else:
            sys.stdout.write(text)
    return 0


# -- spectral ------------------------------------------------------------------


def cmd_spectral(args) -> int:
    dist = parse_dist(args.dist)
    sol = solve_lambda(dist, args.abs_tol)
    if args.t_hat == "critical":
        t_hats = [critical_time(dist, args.abs_tol, sol=sol).t_hat_c]
    elif args.t_hat == "ladder":
        t_hats = [0.2 * (i + 1) for i in range(10)]
    else:
        t_hats = [math.inf if x.strip() == "inf" else float(x) for x in args.t_hat.split(",")]
    rows = []
    for t in t_hats:
        grid = build_grid(sol, t, args.G)
        mu, _ = principal_eigenvalue(grid, args.tol)
        cc = eigenfunction_crosscheck(grid, sol)
        rows.append((t, mu, grid.iters, max(cc.residual, cc.boundary_residual)))
    _emit(csv_text(["t_hat", "mu", "iters", "residual"], rows, _meta(args)), args.out)
    return 0


# -- selftest --------------------------------------------------------------------


def cmd_selftest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    only = set(_ints(args.only)) if args.only else None
    rows, artifacts, timings = acceptance.run_all(args.seed, args.threads, only)
    meta = {"command": "selftest", "seed": args.seed}
    write_csv(out / "acceptance.csv", acceptance.ROW_COLUMNS, [r.as_list() for r in rows], meta)
    for name, data in sorted(artifacts.items()):
        if isinstance(data, dict):
            write_csv(out / name, ["code_hex", "frequency"], census_rows(data), meta)
        elif data and isinstance(data[0], dict):
            cols = list(data[0].keys())
            write_csv(out / name, cols, data, meta)
        else:
            write_csv(out / name, ["t_hat", "mu"], data, meta)
    ok = True
    for k in sorted({int(r.experiment[1]) for r in rows}):
        passed = acceptance.criterion_passed(rows, k)
        ok &= passed
        print(f"criterion {k}: {'PASS' if passed else 'FAIL'} ({timings[k]:.1f} s)")
    if args.timings:
        Path(args.timings).write_text(json.dumps({str(k): v for k, v in timings.items()}), encoding="utf-8")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdcp", description="Random degree-constrained process toolkit.")
    p.add_argument("--threads", type=int, default=None, help="worker threads (env RDCP_THREADS overrides)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate on a finite host")
    s.add_argument("--host", required=True)
    s.add_argument("--dist", required=True)
    s.add_argument("--until", default="final")
    s.add_argument("--runs", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--snapshots", default=None, help="comma-separated times")
    s.add_argument("--trajectory", default=None, help="CSV path for run 0's edge trajectory")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("limit-census", help="census of limit balls")
    s.add_argument("--dist", required=True)
    s.add_argument("--t-hat", type=float, required=True)
    s.add_argument("--R", type=int, default=1)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--sampler", choices=["mtbp", "pwit"], default="mtbp")
    s.add_argument("--abs-tol", type=float, default=1e-11)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_limit_census)

    s = sub.add_parser("compare", help="finite simulation vs limit census")
    s.add_argument("--host", required=True)
    s.add_argument("--dist", required=True)
    s.add_argument("--t-hat", type=float, default=None)
    s.add_argument("--steps-per-n", type=float, default=None)
    s.add_argument("--R", default="1")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--abs-tol", type=float, default=1e-11)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--census-dir", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("critical-time", aliases=["critical"], help="critical times and asymptotics")
    s.add_argument("--dist", action="append", required=True)
    s.add_argument("--abs-tol", type=float, default=1e-11)
    s.add_argument("--G", type=int, default=0, help="grid size for the mu column (0 skips it)")
    s.add_argument("--bracket", action="store_true")
    s.add_argument("--bracket-n", default="5000,20000")
    s.add_argument("--bracket-seeds", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("spectral", help="principal eigenvalue of the branching operator")
    s.add_argument("--dist", required=True)
    s.add_argument("--t-hat", default="critical", help="comma list, 'critical' or 'ladder'")
    s.add_argument("--G", type=int, default=2000)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--abs-tol", type=float, default=1e-11)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_spectral)

    s = sub.add_parser("selftest", help="run the acceptance suite")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", default="selftest-out")
    s.add_argument("--only", default=None, help="comma-separated criterion numbers")
    s.add_argument("--timings", default=None, help="JSON file for wall-clock timings")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "critical":
        args.command = "critical-time"
    try:
        return args.func(args)
    except (UsageError, DistributionError, HostGraphError, SimulationError) as e:
        print(f"rdcp {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
