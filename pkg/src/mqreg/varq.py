"""Vector-autoregressive quantile driver for time-series applications.

Transforms raw series, builds one-step lag designs with optional
contemporaneous exogenous regressors, fits bivariate quantile curves
under shock scenarios, and fits the hyperbolic display curve used to
summarize a quantile graph.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    NonpositiveValueError,
    RankDeficientError,
    SchemaError,
    TooShortError,
    ValidationError,
)
from .qr import QuantileLevel, SolverOptions
from .sequential import DataMatrix, QuantileGraph, quantile_graph

__all__ = [
    "SeriesFrame",
    "ScenarioSpec",
    "DisplayCurve",
    "read_series_csv",
    "log_diff",
    "log_diff_columns",
    "lag_design",
    "varq_scenario_graphs",
    "curve_fit_display",
]


@dataclass(frozen=True)
class SeriesFrame:
    """Aligned named series over strictly increasing timestamps."""

    timestamps: tuple[datetime.date, ...]
    columns: dict[str, np.ndarray]
    frequency: str = ""

    def __post_init__(self):
        n = len(self.timestamps)
        if n == 0 or not self.columns:
            raise ValidationError("series frame must have rows and columns")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not b > a:
                raise ValidationError(f"timestamps not strictly increasing at {b}")
        cols = {}
        for name, values in self.columns.items():
            v = np.array(values, dtype=float, order="C")
            if v.shape != (n,):
                raise ValidationError(
                    f"column {name!r} has length {v.shape}, expected {n}"
                )
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"column {name!r} contains missing values")
            v.flags.writeable = False
            cols[name] = v
        object.__setattr__(self, "columns", cols)

    def __len__(self) -> int:
        return len(self.timestamps)

    def with_column(self, name: str, values) -> "SeriesFrame":
        cols = dict(self.columns)
        cols[name] = np.asarray(values, dtype=float)
        return SeriesFrame(self.timestamps, cols, self.frequency)


@dataclass(frozen=True)
class ScenarioSpec:
    """Shock scenario: base regressor values, the shocked regressor, sizes.

    Regressors not named in `base` sit at their estimation-sample means;
    the shocked regressor is set to each shock value in turn.
    """

    shocked: str
    shocks: tuple[float, ...]
    base: dict[str, float] | None = None


def read_series_csv(path, frequency: str = "") -> SeriesFrame:
    """Load a series CSV: header row, ISO-8601 dates in the first column."""
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if len(header) < 2:
            raise SchemaError(f"{path}: need a timestamp column plus data columns")
        names = [h.strip() for h in header[1:]]
        stamps = []
        data: list[list[float]] = [[] for _ in names]
        for rowno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}:{rowno}: expected {len(header)} fields")
            try:
                stamps.append(datetime.date.fromisoformat(row[0].strip()))
            except ValueError:
                raise SchemaError(
                    f"{path}:{rowno}: bad ISO-8601 timestamp {row[0]!r}"
                ) from None
            for j, cell in enumerate(row[1:]):
                try:
                    data[j].append(float(cell))
                except ValueError:
                    raise SchemaError(
                        f"{path}:{rowno}: column {names[j]!r} has non-numeric "
                        f"value {cell!r}"
                    ) from None
    try:
        return SeriesFrame(
            timestamps=tuple(stamps),
            columns={n: np.array(v) for n, v in zip(names, data)},
            frequency=frequency,
        )
    except ValidationError as err:
        raise SchemaError(f"{path}: {err}") from err


def log_diff(values) -> np.ndarray:
    """First difference of the logarithm; entry t is ln(x[t+1]) - ln(x[t])."""
    v = np.asarray(values, dtype=float)
    bad = np.flatnonzero(v <= 0.0)
    if bad.size:
        raise NonpositiveValueError(
            f"log transform needs positive values; first offender at index {bad[0]}"
        )
    lv = np.log(v)
    return lv[1:] - lv[:-1]


def log_diff_columns(frame: SeriesFrame, columns) -> SeriesFrame:
    """Log-diff the named columns; other columns lose their first row."""
    columns = tuple(columns)
    for name in columns:
        if name not in frame.columns:
            raise SchemaError(f"no column named {name!r}")
    cols = {
        name: (log_diff(v) if name in columns else np.asarray(v)[1:])
        for name, v in frame.columns.items()
    }
    return SeriesFrame(frame.timestamps[1:], cols, frame.frequency)


def lag_design(
    frame: SeriesFrame, outcomes, p: int, exog=(), exog_lags: bool = False
) -> DataMatrix:
    """Outcome matrix at time t plus [1, lagged values, contemporaneous exog].

    The lag block is lag-major: all lagged columns at t-1, then t-2, and
    so on.  With exog_lags the exogenous columns are lagged alongside the
    outcomes, which is how a contemporaneously observed driver enters a
    one-lag system with its own dynamics.
    """
    outcomes = tuple(outcomes)
    exog = tuple(exog)
    if p < 1:
        raise ValidationError(f"need at least one lag, got p={p}")
    for name in outcomes + exog:
        if name not in frame.columns:
            raise SchemaError(f"no column named {name!r}")
    m = len(outcomes)
    lagged_names = outcomes + exog if exog_lags else outcomes
    k = 1 + p * len(lagged_names) + len(exog)
    n = len(frame) - p
    if n <= k * 2 ** (m - 1):
        raise TooShortError(
            f"{len(frame)} rows leave {n} usable with p={p}; "
            f"need more than {k * 2 ** (m - 1)}"
        )
    cols = [np.ones(n)]
    names = ["const"]
    for lag in range(1, p + 1):
        for name in lagged_names:
            cols.append(frame.columns[name][p - lag : p - lag + n])
            names.append(f"{name}.l{lag}")
    for name in exog:
        cols.append(frame.columns[name][p:])
        names.append(name)
    Y = np.column_stack([frame.columns[name][p:] for name in outcomes])
    return DataMatrix(
        Y=Y,
        X=np.column_stack(cols),
        y_names=outcomes,
        x_names=tuple(names),
    )


def _scenario_x_eval(design: DataMatrix, scenario: ScenarioSpec, shock: float):
    names = design.x_names
    x = design.X.mean(axis=0)
    x[0] = 1.0
    if scenario.base:
        for name, value in scenario.base.items():
            if name not in names:
                raise ValidationError(f"base value for unknown regressor {name!r}")
            x[names.index(name)] = float(value)
    if scenario.shocked not in names:
        raise ValidationError(
            f"shocked regressor {scenario.shocked!r} not in design {names}"
        )
    x[names.index(scenario.shocked)] = float(shock)
    return x


def varq_scenario_graphs(
    frame: SeriesFrame,
    outcomes,
    target,
    scenario: ScenarioSpec,
    lags: int = 1,
    exog=(),
    exog_lags: bool = False,
    orders=((0, 1), (1, 0)),
    step: float = 0.01,
    sign_flip: str | None = None,
    smoothed: bool = False,
    bandwidth: float | None = None,
    opts: SolverOptions | None = None,
) -> list[QuantileGraph]:
    """Quantile curves under exchange-style shock scenarios.

    Fits the bivariate chain for every requested ordering and shock
    size, evaluating at the scenario regressor vector (lagged controls
    at their historical averages, the shocked regressor at the shock
    value).  sign_flip negates the named outcome series before anything
    is built, which turns that outcome's curve into its mirror-image
    view.  Graphs come back order-major, shocks inner, labelled.
    """
    target = QuantileLevel(target)
    outcomes = tuple(outcomes)
    if sign_flip is not None:
        if sign_flip not in outcomes:
            raise ValidationError(f"sign_flip column {sign_flip!r} is not an outcome")
        frame = frame.with_column(sign_flip, -frame.columns[sign_flip])
    design = lag_design(frame, outcomes, lags, exog=exog, exog_lags=exog_lags)
    graphs = []
    for order in orders:
        order = tuple(int(i) for i in order)
        tag = ">".join(outcomes[i] for i in order)
        for shock in scenario.shocks:
            x_eval = _scenario_x_eval(design, scenario, shock)
            graphs.append(
                quantile_graph(
                    design,
                    order,
                    target,
                    step,
                    x_eval,
                    smoothed=smoothed,
                    bandwidth=bandwidth,
                    opts=opts,
                    label=f"{tag}|{scenario.shocked}={shock:g}",
                )
            )
    return graphs


@dataclass(frozen=True)
class DisplayCurve:
    """Least-squares fit of q2 on (1, q1, 1/q1) over graph points."""

    intercept: float
    slope: float
    inverse_slope: float
    fitted: np.ndarray
    residual_norm: float
    n_excluded: int

    def __call__(self, q1) -> np.ndarray:
        q1 = np.asarray(q1, dtype=float)
        return self.intercept + self.slope * q1 + self.inverse_slope / q1


def curve_fit_display(graph: QuantileGraph) -> DisplayCurve:
    """Summarize a bivariate graph by the hyperbolic display regression.

    Points with |q1| below 1e-8 are excluded (and counted) since the
    inverse regressor blows up there.  Display only; no claim the curve
    interpolates the graph.
    """
    pts = graph.q_matrix()
    if pts.shape[1] != 2:
        raise ValidationError("display curve needs a bivariate graph")
    q1, q2 = pts[:, 0], pts[:, 1]
    keep = np.abs(q1) >= 1e-8
    n_excluded = int(np.sum(~keep))
    q1, q2 = q1[keep], q2[keep]
    if q1.size < 4:
        raise ValidationError(
            f"need at least 4 usable graph points, have {q1.size}"
        )
    A = np.column_stack([np.ones_like(q1), q1, 1.0 / q1])
    coef, _res, rank, _sv = np.linalg.lstsq(A, q2, rcond=None)
    if rank < 3:
        raise RankDeficientError("display regressors (1, q1, 1/q1) are collinear")
    fitted = A @ coef
    return DisplayCurve(
        intercept=float(coef[0]),
        slope=float(coef[1]),
        inverse_slope=float(coef[2]),
        fitted=fitted,
        residual_norm=float(np.linalg.norm(q2 - fitted)),
        n_excluded=n_excluded,
    )
