"""Monte Carlo laboratory for the bivariate location / location-scale DGP.

Samples the two-equation Gaussian design, derives the implied analytic
conditional joint law, scores estimated quantile curves by the average
true joint probability p-hat, and runs bias/variance/MSE experiment
grids with reproducible per-replication RNG streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    EmptyGraphError,
    EstimationError,
    SchemaError,
    ValidationError,
)
from ._parallel import run_ordered
from .gaussian import BvnParams, bvn_cdf
from .qr import QuantileLevel, SolverOptions
from .sequential import (
    DataMatrix,
    FactorizationPath,
    MqrFit,
    QuantileGraph,
    fit_mqr,
    predict,
)
from ._grid import grid_levels

__all__ = [
    "DgpSpec",
    "McCellResult",
    "McConfig",
    "dgp_sample",
    "conditional_joint_params",
    "coverage_probability",
    "mc_cell",
    "mc_table",
    "parse_experiment_config",
    "write_mc_csv",
    "format_mc_text",
]


@dataclass(frozen=True)
class DgpSpec:
    """Two-equation Gaussian design: location shifts plus optional
    |x|-proportional scale shifts (alpha1, alpha2 >= 0)."""

    beta10: float = 1.0
    beta11: float = 1.0
    beta20: float = 1.0
    beta21: float = 1.0
    gamma21: float = 1.0
    alpha1: float = 0.0
    alpha2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.alpha1 < 0.0 or self.alpha2 < 0.0:
            raise ValidationError("scale coefficients alpha must be >= 0")


def dgp_sample(spec: DgpSpec, n: int, rng: np.random.Generator | None = None) -> DataMatrix:
    """Draw one sample from the two-equation design.

    The draw order (x, then the two shocks) is fixed, so identical
    generators give bit-identical samples.
    """
    if n < 10:
        raise ValidationError(f"need n >= 10, got {n}")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    x = rng.standard_normal(n)
    e1 = rng.standard_normal(n)
    e2 = rng.standard_normal(n)
    y1 = spec.beta10 + spec.beta11 * x + (1.0 + spec.alpha1 * np.abs(x)) * e1
    y2 = (
        spec.beta20
        + spec.beta21 * x
        + spec.gamma21 * y1
        + (1.0 + spec.alpha2 * np.abs(x)) * e2
    )
    return DataMatrix(
        Y=np.column_stack([y1, y2]),
        X=np.column_stack([np.ones(n), x]),
        y_names=("y1", "y2"),
        x_names=("const", "x"),
    )


def conditional_joint_params(spec: DgpSpec, x: float) -> BvnParams:
    """Joint law of (Y1, Y2) given X = x, by linear-Gaussian propagation."""
    x = float(x)
    mu1 = spec.beta10 + spec.beta11 * x
    s1 = 1.0 + spec.alpha1 * abs(x)
    mu2 = spec.beta20 + spec.beta21 * x + spec.gamma21 * mu1
    s2 = math.sqrt((spec.gamma21 * s1) ** 2 + (1.0 + spec.alpha2 * abs(x)) ** 2)
    rho = spec.gamma21 * s1 / s2
    return BvnParams(mu1=mu1, mu2=mu2, s1=s1, s2=s2, rho=rho)


def _graph_points(graph) -> np.ndarray:
    if isinstance(graph, QuantileGraph):
        pts = graph.q_matrix()
    else:
        pts = np.asarray(list(graph), dtype=float)
    if pts.size == 0:
        raise EmptyGraphError("graph has no points")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"expected bivariate graph points, got shape {pts.shape}")
    return pts


def coverage_probability(graph, params: BvnParams) -> float:
    """Average true joint probability over the graph points.

    For each point (q1, q2) the exact P(Y1 <= q1, Y2 <= q2) under
    `params` is evaluated; the mean over points is the coverage score
    compared against the target level.
    """
    pts = _graph_points(graph)
    total = 0.0
    for q1, q2 in pts:
        total += bvn_cdf(
            (q1 - params.mu1) / params.s1, (q2 - params.mu2) / params.s2, params.rho
        )
    return total / len(pts)


@dataclass(frozen=True)
class McCellResult:
    """bias/variance/MSE of p-hat for one (n, tau, order) experiment cell.

    A cell that failed outright (attrition above 1%) carries NaN summaries
    and the failure message in `error`.
    """

    n: int
    tau: float
    alpha1: float
    alpha2: float
    order: tuple[int, ...]
    reps: int
    step: float
    x: float
    bias: float
    variance: float
    mse: float
    phat: np.ndarray
    failed: int
    coverage_violations: int
    degenerate_fits: int
    error: str | None = None


def _stage_coverage(data: DataMatrix, fit: MqrFit):
    """Count stage-coverage violations for the bivariate chain.

    Stage 1 coverage must sit within k/n of its level; stage 2 coverage,
    on the conditioned cell, within 2k/n_cell.  Fits whose interpolated
    residual count exceeds the design width are flagged degenerate and
    exempt (flat optimal faces make the indicator counts ambiguous).
    """
    k = data.k
    n = data.n
    perm = fit.path.permutation
    violations = 0
    degenerate = 0

    s1 = fit.stages[0]
    y1 = data.Y[:, perm[0]]
    pred1 = data.X @ s1.beta_ext[:k]
    r1 = y1 - pred1
    atol = 1e-6 * (1.0 + float(np.mean(np.abs(r1))))
    deg1 = int(np.sum(np.abs(r1) <= atol)) > k
    cov1 = float(np.mean(r1 <= 0.0))
    if deg1:
        degenerate += 1
    elif abs(cov1 - s1.level) > k / n + 1e-12:
        violations += 1

    if len(fit.stages) > 1:
        s2 = fit.stages[1]
        cell = r1 <= 0.0
        n_cell = int(cell.sum())
        if n_cell > 0:
            y2 = data.Y[cell, perm[1]]
            r2 = y2 - data.X[cell] @ s2.beta_ext[:k]
            atol = 1e-6 * (1.0 + float(np.mean(np.abs(r2))))
            deg2 = int(np.sum(np.abs(r2) <= atol)) > k
            cov2 = float(np.mean(r2 <= 0.0))
            if deg2:
                degenerate += 1
            elif abs(cov2 - s2.level) > 2.0 * k / n_cell + 1e-12:
                violations += 1
    return violations, degenerate


def _mc_one_rep(args):
    (spec, n, tau, order, step, x, check_coverage, opts, seq) = args
    rng = np.random.default_rng(seq)
    data = dgp_sample(spec, n, rng)
    params = conditional_joint_params(spec, x)
    x_eval = np.array([1.0, x])
    violations = 0
    degenerate = 0
    qs = []
    try:
        for t1 in grid_levels(tau, step):
            path = FactorizationPath(order, (t1, tau / t1), tau)
            try:
                fit = fit_mqr(data, path, opts=opts)
            except EstimationError:
                continue
            qs.append(predict(fit, x_eval))
            if check_coverage:
                v, d = _stage_coverage(data, fit)
                violations += v
                degenerate += d
        if not qs:
            return math.nan, 0, violations, degenerate, "no graph point succeeded"
        phat = coverage_probability(qs, params)
        return phat, len(qs), violations, degenerate, None
    except Exception as err:  # failed replication, recorded and counted
        return math.nan, 0, violations, degenerate, str(err)


def mc_cell(
    spec: DgpSpec,
    n: int,
    tau,
    order,
    step: float,
    reps: int,
    seed,
    x: float = 1.0,
    check_coverage: bool = True,
    threads: int = 1,
    opts: SolverOptions | None = None,
) -> McCellResult:
    """Run one Monte Carlo cell.

    Each replication draws a fresh sample from its own counter-derived
    RNG stream, traces the quantile curve at x_eval = (1, x) over the
    grid, and records p-hat.  bias is mean(p-hat) - tau, variance the
    population variance of the draws, and mse their mean squared
    deviation from tau.  Replications that fail outright are dropped and
    counted; more than 1% attrition fails the cell.
    """
    tau = QuantileLevel(tau)
    order = tuple(int(i) for i in order)
    if reps < 2:
        raise ValidationError(f"need reps >= 2, got {reps}")
    opts = opts or SolverOptions()
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = base.spawn(reps)
    items = [
        (spec, n, float(tau), order, step, x, check_coverage, opts, s)
        for s in streams
    ]
    rows = run_ordered(_mc_one_rep, items, threads=threads, chunksize=16)

    phat = np.array([r[0] for r in rows])
    ok = np.isfinite(phat)
    failed = int(np.sum(~ok))
    if failed > 0.01 * reps:
        raise EstimationError(
            f"{failed}/{reps} replications failed (> 1% attrition); "
            f"first error: {next(r[4] for r in rows if r[4])}"
        )
    draws = phat[ok]
    bias = float(np.mean(draws) - tau)
    variance = float(np.var(draws))
    mse = float(np.mean((draws - float(tau)) ** 2))
    return McCellResult(
        n=n,
        tau=float(tau),
        alpha1=spec.alpha1,
        alpha2=spec.alpha2,
        order=order,
        reps=reps,
        step=step,
        x=x,
        bias=bias,
        variance=variance,
        mse=mse,
        phat=phat,
        failed=failed,
        coverage_violations=int(sum(r[2] for r in rows)),
        degenerate_fits=int(sum(r[3] for r in rows)),
    )


@dataclass(frozen=True)
class McConfig:
    """Experiment grid: DGP, sample sizes, levels, orders, outputs."""

    spec: DgpSpec = field(default_factory=DgpSpec)
    n_values: tuple[int, ...] = (100, 200, 500, 1000)
    taus: tuple[float, ...] = (0.25, 0.50, 0.75)
    orders: tuple[tuple[int, ...], ...] = ((0, 1), (1, 0))
    reps: int = 1000
    step: float = 0.01
    seed: int = 0
    x: float = 1.0
    csv_path: str | None = None
    text_path: str | None = None


def mc_table(
    config: McConfig, threads: int = 1, check_coverage: bool = True
) -> list[McCellResult]:
    """Run the full experiment grid, one cell per (tau, n, order).

    Cells get independent spawned seed branches in grid order, so the
    table is reproducible from the master seed alone and any single cell
    can be reproduced in isolation.
    """
    base = np.random.SeedSequence(config.seed)
    cells = [
        (tau, n, order)
        for tau in config.taus
        for n in config.n_values
        for order in config.orders
    ]
    seeds = base.spawn(len(cells))
    results = []
    for (tau, n, order), cell_seed in zip(cells, seeds):
        try:
            results.append(
                mc_cell(
                    config.spec,
                    n,
                    tau,
                    order,
                    config.step,
                    config.reps,
                    cell_seed,
                    x=config.x,
                    check_coverage=check_coverage,
                    threads=threads,
                )
            )
        except EstimationError as err:
            # partial results: failed cells are kept as explicit markers
            results.append(
                McCellResult(
                    n=n, tau=float(tau), alpha1=config.spec.alpha1,
                    alpha2=config.spec.alpha2, order=tuple(order),
                    reps=config.reps, step=config.step, x=config.x,
                    bias=math.nan, variance=math.nan, mse=math.nan,
                    phat=np.empty(0), failed=config.reps,
                    coverage_violations=0, degenerate_fits=0, error=str(err),
                )
            )
    return results


_CFG_SPEC_KEYS = {
    "beta10", "beta11", "beta20", "beta21", "gamma21", "alpha1", "alpha2",
}


def parse_experiment_config(path) -> McConfig:
    """Parse a key = value experiment file.

    Lists are comma separated; orders use tokens like 1>2.  Unknown keys
    are rejected so typos fail loudly.
    """
    spec_kwargs = {}
    kwargs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            value = value.strip()
            try:
                if key in _CFG_SPEC_KEYS:
                    spec_kwargs[key] = float(value)
                elif key in ("step", "x"):
                    kwargs[key] = float(value)
                elif key == "n":
                    kwargs["n_values"] = tuple(int(v) for v in value.split(","))
                elif key == "tau":
                    kwargs["taus"] = tuple(float(v) for v in value.split(","))
                elif key == "orders":
                    kwargs["orders"] = tuple(
                        _parse_order(tok) for tok in value.split(",")
                    )
                elif key == "reps":
                    kwargs["reps"] = int(value)
                elif key == "seed":
                    kwargs["seed"] = int(value)
                elif key == "csv":
                    kwargs["csv_path"] = value
                elif key == "text":
                    kwargs["text_path"] = value
                else:
                    raise SchemaError(f"{path}:{lineno}: unknown key {key!r}")
            except ValueError as err:
                raise SchemaError(f"{path}:{lineno}: {err}") from err
    return McConfig(spec=DgpSpec(**spec_kwargs), **kwargs)


def _parse_order(token: str) -> tuple[int, ...]:
    parts = [p.strip() for p in token.split(">")]
    order = tuple(int(p) - 1 for p in parts)
    if sorted(order) != list(range(len(order))):
        raise ValueError(f"bad order token {token!r}")
    return order


def _order_tag(order) -> str:
    return ">".join(str(i + 1) for i in order)


def write_mc_csv(results: list[McCellResult], path) -> None:
    """Wide CSV, one row per (n, tau) with both orders' columns."""
    keyed = {(r.tau, r.n, r.order): r for r in results}
    taus = sorted({r.tau for r in results})
    ns = sorted({r.n for r in results})
    orders = sorted({r.order for r in results})
    with open(path, "w", encoding="utf-8") as fh:
        head = ["n", "tau"]
        for o in orders:
            tag = _order_tag(o)
            head += [f"bias_{tag}", f"var_{tag}", f"mse_{tag}"]
        fh.write(",".join(head) + "\n")
        for tau in taus:
            for n in ns:
                row = [str(n), repr(float(tau))]
                for o in orders:
                    r = keyed.get((tau, n, o))
                    if r is None or r.error is not None:
                        row += ["", "", ""]
                    else:
                        row += [
                            repr(float(r.bias)),
                            repr(float(r.variance)),
                            repr(float(r.mse)),
                        ]
                fh.write(",".join(row) + "\n")


def write_mc_cells_csv(results: list[McCellResult], path) -> None:
    """Machine-readable long CSV, one row per cell, with failure markers."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "n,tau,order,alpha1,alpha2,reps,failed,bias,var,mse,"
            "coverage_violations,degenerate_fits,error\n"
        )
        for r in results:
            vals = (
                "" if r.error is not None else repr(float(r.bias)),
                "" if r.error is not None else repr(float(r.variance)),
                "" if r.error is not None else repr(float(r.mse)),
            )
            err = (r.error or "").replace(",", ";")
            fh.write(
                f"{r.n},{float(r.tau)!r},{_order_tag(r.order)},{float(r.alpha1)!r},"
                f"{float(r.alpha2)!r},{r.reps},{r.failed},{vals[0]},{vals[1]},"
                f"{vals[2]},{r.coverage_violations},{r.degenerate_fits},{err}\n"
            )


def format_mc_text(results: list[McCellResult]) -> str:
    """Fixed-width rendering, rows grouped by level then sample size."""
    keyed = {(r.tau, r.n, r.order): r for r in results}
    taus = sorted({r.tau for r in results})
    ns = sorted({r.n for r in results})
    orders = sorted({r.order for r in results})
    lines = []
    head = f"{'n':>6} {'tau':>6}"
    for o in orders:
        tag = _order_tag(o)
        head += f" {'bias ' + tag:>12} {'var ' + tag:>12} {'mse ' + tag:>12}"
    lines.append(head)
    failures = []
    for tau in taus:
        for n in ns:
            line = f"{n:>6} {tau:>6.2f}"
            for o in orders:
                r = keyed.get((tau, n, o))
                if r is None or r.error is not None:
                    line += f" {'--':>12} {'--':>12} {'--':>12}"
                    if r is not None:
                        failures.append(
                            f"cell (n={n}, tau={tau}, {_order_tag(o)}) failed: {r.error}"
                        )
                else:
                    line += f" {r.bias:>12.4f} {r.variance:>12.4f} {r.mse:>12.4f}"
            lines.append(line)
    lines.extend(failures)
    return "\n".join(lines) + "\n"
