"""Command-line surface.

Subcommands: fit, graph, mc, varq, bootstrap, oracle.  Tabular output is
CSV, structured output JSON; every float is serialized with repr-level
precision so files round-trip bit-exactly.  Exit codes: 2 for usage and
validation problems, 3 for IO and schema problems, 4 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

import numpy as np

from . import __version__
from .exceptions import EstimationError, SchemaError, ValidationError
from .bootstrap import bootstrap_mqr
from .gaussian import BvnParams, bvn_cdf, oracle_graph
from .montecarlo import (
    format_mc_text,
    mc_table,
    parse_experiment_config,
    write_mc_cells_csv,
    write_mc_csv,
)
from .qr import QuantileLevel, SolverOptions
from .sequential import (
    DataMatrix,
    FactorizationPath,
    MqrFit,
    QuantileGraph,
    fit_mqr,
    quantile_graph,
)
from .varq import (
    ScenarioSpec,
    curve_fit_display,
    log_diff_columns,
    read_series_csv,
    varq_scenario_graphs,
)

EXIT_VALIDATION = 2
EXIT_SCHEMA = 3
EXIT_ESTIMATION = 4


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _order(text: str) -> tuple[int, ...]:
    order = tuple(int(tok) - 1 for tok in text.split(","))
    if sorted(order) != list(range(len(order))):
        raise argparse.ArgumentTypeError(f"bad order {text!r}; use e.g. 1,2 or 2,1")
    return order


def _order_tag(order) -> str:
    return "to".join(str(i + 1) for i in order)


def read_data_csv(path, y_cols, x_cols) -> DataMatrix:
    """Load a fit/graph dataset: named outcome and regressor columns.

    An intercept column is prepended to the regressors.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for name in list(y_cols) + list(x_cols):
            if name not in header:
                raise SchemaError(f"{path}: no column named {name!r}")
        idx = {name: header.index(name) for name in header}
        rows = []
        for rowno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}:{rowno}: expected {len(header)} fields")
            try:
                rows.append([float(c) for c in row])
            except ValueError as err:
                raise SchemaError(f"{path}:{rowno}: {err}") from None
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        raise SchemaError(f"{path}: no data rows")
    Y = arr[:, [idx[c] for c in y_cols]]
    X = np.column_stack([np.ones(arr.shape[0])] + [arr[:, idx[c]] for c in x_cols])
    return DataMatrix(
        Y=Y, X=X, y_names=tuple(y_cols), x_names=("const",) + tuple(x_cols)
    )


def _fit_to_dict(fit: MqrFit) -> dict:
    return {
        "target": fit.path.target,
        "order": [i + 1 for i in fit.path.permutation],
        "levels": list(fit.path.levels),
        "B": fit.B.tolist(),
        "smoothed": fit.smoothed,
        "bandwidth": fit.bandwidth,
        "stages": [
            {
                "stage": s.stage,
                "outcome": s.outcome + 1,
                "level": s.level,
                "width": s.width,
                "cell_counts": list(s.cell_counts),
                "dropped_columns": list(s.dropped_columns),
                "iterations": s.iterations,
                "objective": s.objective,
                "beta_ext": s.beta_ext.tolist(),
            }
            for s in fit.stages
        ],
    }


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _write_graph_csv(graph: QuantileGraph, path, extra: dict | None = None) -> None:
    """One row per graph point: stage levels, q values, plus fixed columns
    (scenario id, ordering) when given."""
    m = len(graph.permutation)
    extra = extra or {}
    with open(path, "w", encoding="utf-8") as fh:
        head = [f"tau{j + 1}" for j in range(m)] + [f"q{v + 1}" for v in range(m)]
        head += list(extra)
        fh.write(",".join(head) + "\n")
        tail = "".join(f",{v}" for v in extra.values())
        for pt in graph.points:
            cells = [repr(float(t)) for t in pt.stage_levels]
            cells += [repr(float(q)) for q in pt.q]
            fh.write(",".join(cells) + tail + "\n")


def _path_from_args(args, m: int) -> FactorizationPath:
    if args.levels is not None:
        levels = args.levels
    elif args.tau1 is not None:
        if m != 2:
            raise ValidationError("--tau1 shorthand needs exactly two outcomes")
        levels = [args.tau1, args.tau / args.tau1]
    else:
        raise ValidationError("give either --tau1 or --levels")
    return FactorizationPath(args.order, tuple(levels), args.tau)


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, max_iter=args.max_iter)


def _validate_levels_early(args) -> None:
    """Reject bad levels before any file is touched."""
    QuantileLevel(args.tau)
    if getattr(args, "tau1", None) is not None:
        QuantileLevel(args.tau1)
    for level in getattr(args, "levels", None) or ():
        QuantileLevel(level)
    step = getattr(args, "step", None)
    if step is not None and not 0.0 < step < 1.0:
        raise ValidationError(f"step must lie in (0, 1), got {step!r}")


def cmd_fit(args) -> int:
    _validate_levels_early(args)
    data = read_data_csv(args.input, args.y_cols, args.x_cols)
    path = _path_from_args(args, data.m)
    fit = fit_mqr(
        data, path, smoothed=args.smoothed, bandwidth=args.bandwidth,
        opts=_solver_opts(args),
    )
    out = _fit_to_dict(fit)
    out["y_names"] = list(data.y_names)
    out["x_names"] = list(data.x_names)
    _write_json(out, args.output)
    return 0


def cmd_graph(args) -> int:
    _validate_levels_early(args)
    data = read_data_csv(args.input, args.y_cols, args.x_cols)
    x_eval = (
        np.asarray([1.0] + args.x_eval, dtype=float)
        if args.x_eval is not None
        else data.X.mean(axis=0)
    )
    if x_eval.shape != (data.k,):
        raise ValidationError(
            f"--x-eval needs {data.k - 1} values (intercept is implicit)"
        )
    for order in args.order:
        graph = quantile_graph(
            data, order, args.tau, args.step, x_eval,
            smoothed=args.smoothed, bandwidth=args.bandwidth,
            opts=_solver_opts(args),
        )
        tag = _order_tag(order)
        _write_graph_csv(graph, f"{args.output_prefix}_{tag}.csv")
        curve = curve_fit_display(graph)
        _write_json(
            {
                "order": [i + 1 for i in order],
                "target": graph.target,
                "intercept": curve.intercept,
                "slope": curve.slope,
                "inverse_slope": curve.inverse_slope,
                "residual_norm": curve.residual_norm,
                "n_excluded": curve.n_excluded,
                "n_points": len(graph.points),
                "n_failures": len(graph.failures),
            },
            f"{args.output_prefix}_{tag}_curve.json",
        )
    return 0


def cmd_mc(args) -> int:
    config = parse_experiment_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    results = mc_table(config, threads=args.threads)
    csv_path = args.csv or config.csv_path
    text_path = args.text or config.text_path
    if csv_path:
        write_mc_csv(results, csv_path)
        stem, dot, ext = str(csv_path).rpartition(".")
        write_mc_cells_csv(results, f"{stem}_cells.{ext}" if dot else f"{csv_path}_cells")
    text = format_mc_text(results)
    if text_path:
        with open(text_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_varq(args) -> int:
    frame = read_series_csv(args.input)
    if args.logdiff:
        frame = log_diff_columns(frame, args.logdiff)
    scenario = ScenarioSpec(
        shocked=args.shock_var,
        shocks=tuple(args.shocks),
        base=dict(args.base or []),
    )
    manifest = {
        "input": args.input,
        "outcomes": list(args.outcomes),
        "exog": list(args.exog or []),
        "lags": args.lags,
        "shock_var": args.shock_var,
        "shocks": list(args.shocks),
        "sign_flip": args.sign_flip,
        "step": args.step,
        "graphs": [],
    }
    orders = [tuple(o) for o in args.order]
    for tau in args.tau:
        graphs = varq_scenario_graphs(
            frame,
            args.outcomes,
            tau,
            scenario,
            lags=args.lags,
            exog=args.exog or (),
            exog_lags=args.exog_lags,
            orders=orders,
            step=args.step,
            sign_flip=args.sign_flip,
            opts=_solver_opts(args),
        )
        i = 0
        for order in orders:
            for shock in scenario.shocks:
                graph = graphs[i]
                i += 1
                name = f"{args.output_prefix}_tau{tau:g}_{_order_tag(order)}_shock{shock:g}"
                _write_graph_csv(
                    graph,
                    name + ".csv",
                    extra={
                        "scenario": f"{args.shock_var}={shock:g}",
                        "ordering": _order_tag(order),
                    },
                )
                entry = {
                    "tau": tau,
                    "order": [j + 1 for j in order],
                    "shock": shock,
                    "label": graph.label,
                    "csv": name + ".csv",
                    "n_points": len(graph.points),
                    "n_failures": len(graph.failures),
                }
                try:
                    curve = curve_fit_display(graph)
                    entry["curve"] = {
                        "intercept": curve.intercept,
                        "slope": curve.slope,
                        "inverse_slope": curve.inverse_slope,
                        "residual_norm": curve.residual_norm,
                    }
                except (ValidationError, EstimationError) as err:
                    entry["curve_error"] = str(err)
                manifest["graphs"].append(entry)
    _write_json(manifest, args.output_prefix + "_manifest.json")
    return 0


def cmd_bootstrap(args) -> int:
    _validate_levels_early(args)
    data = read_data_csv(args.input, args.y_cols, args.x_cols)
    path = _path_from_args(args, data.m)
    result = bootstrap_mqr(
        data,
        path,
        args.resamples,
        level=args.level,
        seed=args.seed,
        smoothed=args.smoothed,
        bandwidth=args.bandwidth,
        threads=args.threads,
        opts=_solver_opts(args),
    )
    _write_json(
        {
            "target": path.target,
            "order": [i + 1 for i in path.permutation],
            "levels": list(path.levels),
            "resamples": result.n_resamples,
            "failed": result.failed,
            "level": result.level,
            "seed": result.seed,
            "se": result.se.tolist(),
            "lower": result.lower.tolist(),
            "upper": result.upper.tolist(),
        },
        args.output,
    )
    return 0


def cmd_oracle(args) -> int:
    params = BvnParams(mu1=args.mu1, mu2=args.mu2, s1=args.s1, s2=args.s2, rho=args.rho)
    points = oracle_graph(params, args.tau, args.step)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("q1,q2,joint_prob\n")
        for q1, q2 in points:
            p = bvn_cdf(
                (q1 - params.mu1) / params.s1, (q2 - params.mu2) / params.s2, params.rho
            )
            fh.write(f"{float(q1)!r},{float(q2)!r},{float(p)!r}\n")
    return 0


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-10, help="duality-gap tolerance")
    p.add_argument("--max-iter", type=int, default=200)


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="input CSV")
    p.add_argument(
        "--y-cols", type=lambda s: s.split(","), required=True,
        metavar="A,B", help="outcome column names",
    )
    p.add_argument(
        "--x-cols", type=lambda s: s.split(","), required=True,
        metavar="C,D", help="regressor column names (intercept is added)",
    )


def _add_path_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, required=True, help="target joint level")
    p.add_argument("--tau1", type=float, help="leading stage level (two outcomes)")
    p.add_argument(
        "--levels", type=_float_list, metavar="L1,L2",
        help="explicit stage levels, product must equal --tau",
    )
    p.add_argument(
        "--order", type=_order, default=(0, 1), metavar="1,2",
        help="estimation order, 1-based outcome positions",
    )
    p.add_argument("--smoothed", action="store_true", help="smooth the indicators")
    p.add_argument("--bandwidth", type=float, help="smoothing bandwidth")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mqreg",
        description="Multivariate quantile regression by sequential conditioning",
    )
    parser.add_argument("--version", action="version", version=f"mqreg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one factorization path, write JSON")
    _add_data_flags(p)
    _add_path_flags(p)
    _add_solver_flags(p)
    p.add_argument("--output", required=True, help="output JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("graph", help="trace quantile curves over the level grid")
    _add_data_flags(p)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument(
        "--order", type=_order, action="append", metavar="1,2",
        help="order (repeatable); default both orders",
    )
    p.add_argument(
        "--x-eval", type=_float_list, metavar="V1,V2",
        help="regressor values for evaluation (defaults to column means)",
    )
    p.add_argument("--smoothed", action="store_true")
    p.add_argument("--bandwidth", type=float)
    _add_solver_flags(p)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_graph, order_default=True)

    p = sub.add_parser("mc", help="run an experiment grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv", help="override config csv output path")
    p.add_argument("--text", help="override config text output path")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("varq", help="time-series scenario quantile curves")
    p.add_argument("--input", required=True, help="series CSV (ISO dates first)")
    p.add_argument(
        "--outcomes", type=lambda s: tuple(s.split(",")), required=True,
        metavar="Y,P",
    )
    p.add_argument("--exog", type=lambda s: tuple(s.split(",")), metavar="E")
    p.add_argument("--exog-lags", action="store_true",
                   help="lag the exogenous columns alongside the outcomes")
    p.add_argument("--logdiff", type=lambda s: tuple(s.split(",")), metavar="Y,P,E",
                   help="columns to log-difference before modelling")
    p.add_argument("--lags", type=int, default=1)
    p.add_argument("--tau", type=_float_list, default=[0.25], metavar="T1,T2")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--shock-var", required=True)
    p.add_argument("--shocks", type=_float_list, required=True, metavar="S1,S2")
    p.add_argument(
        "--base", type=lambda s: tuple(s.split("=")), action="append",
        metavar="NAME=VALUE", help="fix a regressor (repeatable)",
    )
    p.add_argument(
        "--order", type=_order, action="append", metavar="1,2",
        help="order (repeatable); default both orders",
    )
    p.add_argument("--sign-flip", help="negate this outcome (mirror view)")
    _add_solver_flags(p)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_varq, order_default=True)

    p = sub.add_parser("bootstrap", help="pairs-bootstrap standard errors")
    _add_data_flags(p)
    _add_path_flags(p)
    _add_solver_flags(p)
    p.add_argument("--resamples", type=int, default=200)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("oracle", help="dump the analytic bivariate-normal curve")
    p.add_argument("--mu1", type=float, default=0.0)
    p.add_argument("--mu2", type=float, default=0.0)
    p.add_argument("--s1", type=float, default=1.0)
    p.add_argument("--s2", type=float, default=1.0)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "order_default", False) and not args.order:
        args.order = [(0, 1), (1, 0)]
    if getattr(args, "base", None):
        parsed = []
        for pair in args.base:
            if len(pair) != 2:
                parser.error(f"--base expects NAME=VALUE, got {'='.join(pair)!r}")
            try:
                parsed.append((pair[0], float(pair[1])))
            except ValueError:
                parser.error(f"--base value for {pair[0]!r} is not numeric")
        args.base = parsed
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"mqreg: validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SchemaError, OSError) as err:
        print(f"mqreg: input error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except EstimationError as err:
        print(f"mqreg: estimation error: {err}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
