"""Command-line front end: ``retrial-jsq <command> [options]``.

Commands: solve, oracle, simulate, compare, decay, table1, sweep.  Output is a
single UTF-8 JSON document or CSV; floats carry 10 significant digits.
Boxes are given as ``MxN`` and cover ``0 <= m < M``, ``0 <= n < N``.

Exit status: 0 success, 2 bad flags or parameters, 3 instability,
4 convergence failure, 5 comparison failure, 1 any other solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import compensation, kernel, oracle, simulator
from .errors import InstabilityError, InvalidParameterError, RetrialError, TruncationError
from .model import new_params

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_UNSTABLE = 3
EXIT_CONVERGENCE = 4
EXIT_COMPARISON = 5

COMMANDS = ("solve", "oracle", "simulate", "compare", "decay", "table1", "sweep")

# Printed reference values for mu = 10, alpha = 3: q_{0,n} for n = 0..3 and
# the number of terms reported alongside each cell.
REFERENCE_TABLE = {
    2.0: ((0.5639, 0.0063, 0.1235, 0.2496), (159, 159, 8, 4)),
    3.0: ((0.5437, 0.0125, 0.0986, 0.1992), (79, 79, 10, 5)),
    4.0: ((0.5056, 0.0193, 0.0895, 0.1658), (51, 51, 11, 6)),
}
TABLE_TOL = 1e-3
AGREEMENT_TOL = 1e-6


@dataclass
class RunSpec:
    command: str
    options: dict = field(default_factory=dict)
    format: str = "json"
    output: str | None = None


class ComparisonFailure(RetrialError):
    pass


def fmt(x):
    """Round to 10 significant digits; non-finite values become ``None``."""
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.10g}")


def _csv_cell(x):
    if isinstance(x, float):
        return "" if not math.isfinite(x) else f"{x:.10g}"
    if x is None:
        return ""
    return str(x)


def _parse_box(text):
    try:
        m, n = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"box must look like MxN, got {text!r}") from None
    if m < 1 or n < 1:
        raise argparse.ArgumentTypeError("box dimensions must be positive")
    return m, n


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _probability_rows(grid):
    rows = []
    M, N, _ = grid.shape
    for m in range(M):
        for n in range(N):
            for k in range(2):
                rows.append({"m": m, "n": n, "k": k, "probability": fmt(grid[m, n, k])})
    return rows


def _params(opts):
    return new_params(opts["lambda"], opts["mu"], opts["alpha"])


def _require_stable(params):
    if not params.rho < 1.0:
        raise InstabilityError(params.rho)


def cmd_solve(opts):
    params = _params(opts)
    _require_stable(params)
    series = compensation.build_series(params, opts["tol"], opts["max_terms"])
    M, N = opts["box"]
    grid = compensation.grid(series, M - 1, N - 1)
    meas = compensation.measures(series, params)
    roots = kernel.asymptotic_roots(params)
    report = {
        "command": "solve",
        "params": {"lambda": params.lam, "mu": params.mu, "alpha": params.alpha},
        "rho": fmt(params.rho),
        "term_count": series.term_count,
        "tail_bound": fmt(series.tolerance_achieved),
        "norm_const": fmt(series.norm_const),
        "w_minus": fmt(roots.w_minus),
        "w_plus": fmt(roots.w_plus),
        "measures": {
            "P_busy": fmt(meas.P_busy),
            "mean_min": fmt(meas.mean_min),
            "mean_diff": fmt(meas.mean_diff),
            "mean_total_orbit": fmt(meas.mean_total_orbit),
        },
        "q0_row": [fmt(v) for v in meas.q0_row],
        "probabilities": _probability_rows(grid),
    }
    return report, report["probabilities"], ["m", "n", "k", "probability"]


def cmd_oracle(opts):
    params = _params(opts)
    _require_stable(params)
    N = opts["N"] or oracle.default_box_size(params)
    sol = oracle.solve(params, N)
    M, Nb = opts["box"]
    if M - 1 + Nb - 1 > N:
        raise InvalidParameterError(f"box {M}x{Nb} does not fit the truncation N={N}")
    grid = oracle.transformed_grid(sol, M - 1, Nb - 1)
    report = {
        "command": "oracle",
        "params": {"lambda": params.lam, "mu": params.mu, "alpha": params.alpha},
        "rho": fmt(params.rho),
        "N": N,
        "residual": fmt(sol.residual),
        "mass_deficit_bound": fmt(sol.mass_deficit_bound),
        "P_busy": fmt(sol.probs[:, :, 1].sum()),
        "empty_orbit1_idle_mass": fmt(sol.probs[0, :, 0].sum()),
        "probabilities": _probability_rows(grid),
    }
    return report, report["probabilities"], ["m", "n", "k", "probability"]


def cmd_simulate(opts):
    params = _params(opts)
    M, N = opts["box"]
    config = simulator.SimConfig(params, opts["horizon"], opts["warmup"], opts["replications"], opts["seed"])
    est = simulator.simulate(config, (M - 1, N - 1), opts["confidence"], opts["workers"])
    rows = []
    for m in range(M):
        for n in range(N):
            for k in range(2):
                rows.append({"m": m, "n": n, "k": k, "probability": fmt(est.q[m, n, k]), "halfwidth": fmt(est.q_halfwidth[m, n, k])})
    report = {
        "command": "simulate",
        "params": {"lambda": params.lam, "mu": params.mu, "alpha": params.alpha},
        "rho": fmt(params.rho),
        "stable": est.stable,
        "confidence": est.confidence,
        "replications": est.replications,
        "seed": opts["seed"],
        "P_busy": fmt(est.P_busy),
        "P_busy_halfwidth": fmt(est.P_busy_halfwidth),
        "mean_total_orbit": fmt(est.mean_total_orbit),
        "mean_total_orbit_halfwidth": fmt(est.mean_total_orbit_halfwidth),
        "join_rate": fmt(est.join_rate),
        "success_rate": fmt(est.success_rate),
        "final_orbit_total": fmt(est.final_orbit_total),
        "probabilities": rows,
    }
    csv_rows = [{key: r[key] for key in ("m", "n", "k", "probability")} for r in rows]
    return report, csv_rows, ["m", "n", "k", "probability"]


def cmd_compare(opts):
    params = _params(opts)
    _require_stable(params)
    M, N = opts["box"]
    series = compensation.build_series(params, opts["tol"], opts["max_terms"])
    Ntr = opts["N"] or oracle.default_box_size(params)
    sol = oracle.solve(params, Ntr)
    comp = compensation.grid(series, M - 1, N - 1)
    orc = oracle.transformed_grid(sol, M - 1, N - 1)
    diff = np.abs(comp - orc)
    report = {
        "command": "compare",
        "params": {"lambda": params.lam, "mu": params.mu, "alpha": params.alpha},
        "rho": fmt(params.rho),
        "N": Ntr,
        "states_compared": int(comp.size),
        "max_abs_diff": fmt(diff.max()),
        "threshold": opts["threshold"],
        "agree": bool(diff.max() <= opts["threshold"]),
    }
    rows = []
    for m in range(M):
        for n in range(N):
            for k in range(2):
                rows.append({"m": m, "n": n, "k": k, "compensation": fmt(comp[m, n, k]), "oracle": fmt(orc[m, n, k])})
    if opts["simulate"]:
        config = simulator.SimConfig(params, opts["horizon"], opts["warmup"], opts["replications"], opts["seed"])
        est = simulator.simulate(config, (M - 1, N - 1), 0.99, opts["workers"])
        covered = 0
        for row in rows:
            lo, hi = est.interval(row["m"], row["n"], row["k"])
            row["simulation"] = fmt(est.q[row["m"], row["n"], row["k"]])
            row["covered"] = bool(lo <= comp[row["m"], row["n"], row["k"]] <= hi)
            covered += row["covered"]
        report["simulation"] = {
            "confidence": 0.99,
            "covered": covered,
            "states": len(rows),
            "P_busy": fmt(est.P_busy),
            "P_busy_interval": [fmt(v) for v in est.busy_interval()],
        }
    report["states"] = rows
    if not report["agree"]:
        raise ComparisonFailure(
            f"compensation and oracle disagree by {diff.max():.3e} > {opts['threshold']:.1e}", report
        )
    header = ["m", "n", "k", "compensation", "oracle"] + (["simulation", "covered"] if opts["simulate"] else [])
    return report, rows, header


def cmd_decay(opts):
    params = _params(opts)
    _require_stable(params)
    N = opts["N"]
    sol = oracle.solve(params, N)
    f = oracle.to_transformed(sol)
    target = params.rho**2
    rows = []
    for n in (0, 1):
        for k in (0, 1):
            est = oracle.estimate_decay(f, n, k, opts["m_lo"], opts["m_hi"])
            rows.append({"n": n, "k": k, "estimate": fmt(est), "abs_error": fmt(abs(est - target))})
    app = oracle.verify_appendix(params)
    report = {
        "command": "decay",
        "params": {"lambda": params.lam, "mu": params.mu, "alpha": params.alpha},
        "rho": fmt(params.rho),
        "rho_squared": fmt(target),
        "N": N,
        "m_range": [opts["m_lo"], opts["m_hi"]],
        "estimates": rows,
        "appendix": {
            "v": [fmt(x) for x in app.v],
            "residual_block0": fmt(app.residual_block0),
            "residual_interior": fmt(app.residual_interior),
            "residual_interior_as_printed": fmt(app.residual_interior_as_printed),
            "drift": fmt(app.drift),
        },
    }
    return report, rows, ["n", "k", "estimate", "abs_error"]


def table1_rows(tol=compensation.DEFAULT_TOL, oracle_N=80):
    rows = []
    for lam, (ref, ref_terms) in REFERENCE_TABLE.items():
        params = new_params(lam, 10.0, 3.0)
        series = compensation.build_series(params, tol)
        q0 = compensation.measures(series, params).q0_row
        row = {"lambda": lam, "terms": series.term_count}
        for n in range(4):
            row[f"q0{n}"] = q0[n]
            row[f"ref_q0{n}"] = ref[n]
            row[f"ref_terms_q0{n}"] = ref_terms[n]
            row[f"flag_q0{n}"] = abs(q0[n] - ref[n]) > TABLE_TOL
        if oracle_N:
            sol = oracle.solve(params, oracle_N)
            orc = [float(oracle.transformed_vector(sol, 0, n).sum()) for n in range(4)]
            row["oracle_max_abs_diff"] = max(abs(a - b) for a, b in zip(q0, orc))
            for n in range(4):
                row[f"oracle_q0{n}"] = orc[n]
        rows.append(row)
    return rows


def cmd_table1(opts):
    rows = table1_rows(opts["tol"], opts["N"])
    out = []
    for row in rows:
        out.append({k: (fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    flagged = sum(row[f"flag_q0{n}"] for row in rows for n in range(4))
    report = {
        "command": "table1",
        "mu": 10.0,
        "alpha": 3.0,
        "tolerance": TABLE_TOL,
        "flagged_cells": flagged,
        "rows": out,
    }
    header = list(out[0].keys())
    return report, out, header


def stability_boundary(mu, alpha):
    """Arrival rate at which rho = 1 for the given service and retrial rates."""
    return -alpha + math.sqrt(alpha * alpha + 2.0 * alpha * mu)


def default_lambda_grid(mu, alphas, points=40, start=0.5):
    top = max(stability_boundary(mu, a) for a in alphas)
    return list(np.linspace(start, top, points, endpoint=False))


def _sweep_point(lam, mu, alpha, tol):
    params = new_params(lam, mu, alpha)
    if not params.rho < 1.0:
        return None
    try:
        series = compensation.build_series(params, tol)
    except TruncationError:
        return None
    return compensation.evaluate(series, params, 0, 0, 0)


def sweep(lambdas, mu, alphas, tol=compensation.DEFAULT_TOL, workers=4):
    jobs = [(lam, mu, a, tol) for a in alphas for lam in lambdas]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        values = list(pool.map(lambda job: _sweep_point(*job), jobs))
    curves = {}
    it = iter(values)
    for a in alphas:
        curves[a] = [next(it) for _ in lambdas]
    return curves


def sweep_checks(lambdas, alphas, curves):
    decreasing = {}
    for a in alphas:
        vals = [v for v in curves[a] if v is not None]
        decreasing[a] = all(x > y for x, y in zip(vals, vals[1:]))
    increasing = True
    ordered = sorted(alphas)
    for idx in range(len(lambdas)):
        vals = [curves[a][idx] for a in ordered if curves[a][idx] is not None]
        if any(not x < y for x, y in zip(vals, vals[1:])):
            increasing = False
    return decreasing, increasing


def cmd_sweep(opts):
    mu = opts["mu"]
    alphas = opts["alpha_list"]
    lambdas = opts["lambda_grid"] or default_lambda_grid(mu, alphas, opts["points"])
    curves = sweep(lambdas, mu, alphas, opts["tol"], opts["workers"] or 4)
    decreasing, increasing = sweep_checks(lambdas, alphas, curves)
    rows = []
    for a in alphas:
        for lam, v in zip(lambdas, curves[a]):
            rows.append({"lambda": fmt(lam), "alpha": fmt(a), "q000": fmt(v) if v is not None else None})
    report = {
        "command": "sweep",
        "mu": mu,
        "alphas": alphas,
        "decreasing_in_lambda": {str(a): decreasing[a] for a in alphas},
        "increasing_in_alpha": increasing,
        "points": rows,
    }
    return report, rows, ["lambda", "alpha", "q000"]


HANDLERS = {
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "decay": cmd_decay,
    "table1": cmd_table1,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="retrial-jsq", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with a 'command' key and option values")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rates=True):
        if rates:
            p.add_argument("--lambda", dest="lambda", type=float, required=True)
            p.add_argument("--mu", type=float, required=True)
            p.add_argument("--alpha", type=float, required=True)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", default=None)

    def series_opts(p):
        p.add_argument("--tol", type=float, default=compensation.DEFAULT_TOL)
        p.add_argument("--max-terms", type=int, default=compensation.DEFAULT_MAX_TERMS)

    def sim_opts(p):
        p.add_argument("--horizon", type=float, default=1e5)
        p.add_argument("--warmup", type=float, default=1e3)
        p.add_argument("--replications", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("solve", help="compensation-method solution")
    common(p)
    series_opts(p)
    p.add_argument("--box", type=_parse_box, default=(4, 4))

    p = sub.add_parser("oracle", help="truncated-chain solution")
    common(p)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--box", type=_parse_box, default=(4, 4))

    p = sub.add_parser("simulate", help="discrete-event simulation")
    common(p)
    sim_opts(p)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--box", type=_parse_box, default=(5, 5))

    p = sub.add_parser("compare", help="compensation vs oracle (and simulation)")
    common(p)
    series_opts(p)
    sim_opts(p)
    p.add_argument("--N", type=int, default=80)
    p.add_argument("--box", type=_parse_box, default=(10, 10))
    p.add_argument("--threshold", type=float, default=AGREEMENT_TOL)
    p.add_argument("--simulate", action="store_true")

    p = sub.add_parser("decay", help="tail decay estimates and spectral check")
    common(p)
    p.add_argument("--N", type=int, default=80)
    p.add_argument("--m-lo", type=int, default=10)
    p.add_argument("--m-hi", type=int, default=25)

    p = sub.add_parser("table1", help="q_{0,n} for lambda in {2,3,4}, mu=10, alpha=3")
    common(p, rates=False)
    p.add_argument("--tol", type=float, default=compensation.DEFAULT_TOL)
    p.add_argument("--N", type=int, default=80, help="oracle box size (0 disables the oracle column)")

    p = sub.add_parser("sweep", help="q(0,0,0) against lambda for several alpha")
    common(p, rates=False)
    p.add_argument("--mu", type=float, default=10.0)
    p.add_argument("--alpha-list", type=_parse_floats, default=[5.0, 8.0, 10.0])
    p.add_argument("--lambda-grid", type=_parse_floats, default=None)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--tol", type=float, default=compensation.DEFAULT_TOL)
    p.add_argument("--workers", type=int, default=4)
    return parser


def _config_argv(path):
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict) or cfg.get("command") not in COMMANDS:
        raise InvalidParameterError(f"config must be an object with 'command' in {COMMANDS}")
    cfg = dict(cfg)
    argv = [cfg.pop("command")]
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if key in ("N", "lambda"):
            flag = "--" + key
        if value is True:
            argv.append(flag)
        elif value is False or value is None:
            continue
        elif isinstance(value, list):
            if key == "box":
                argv += [flag, "x".join(str(v) for v in value)]
            else:
                argv += [flag, ",".join(str(v) for v in value)]
        else:
            argv += [flag, str(value)]
    return argv


def parse_run_spec(argv) -> RunSpec:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        argv = _config_argv(known.config) + rest
    args = build_parser().parse_args(argv)
    opts = vars(args)
    opts.pop("config", None)
    command = opts.pop("command")
    fmt_choice = opts.pop("format")
    output = opts.pop("output")
    return RunSpec(command, opts, fmt_choice, output)


def render(report, rows, header, fmt_choice):
    if fmt_choice == "json":
        return json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(row.get(col)) for col in header])
    return buf.getvalue()


def _emit(text, output):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        spec = parse_run_spec(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (InvalidParameterError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report, rows, header = HANDLERS[spec.command](spec.options)
    except InstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except TruncationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ComparisonFailure as exc:
        message, report = exc.args
        _emit(render(report, report["states"], ["m", "n", "k", "compensation", "oracle"], spec.format), spec.output)
        print(f"error: {message}", file=sys.stderr)
        return EXIT_COMPARISON
    except (InvalidParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RetrialError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _emit(render(report, rows, header, spec.format), spec.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
