"""Sequential estimation of joint-probability quantile curves.

A target level tau for m outcomes is factorized into per-stage levels
whose product is tau.  Stage 1 is a plain quantile regression of the
leading outcome on X; each later stage regresses its outcome on X
interacted with every on/off combination of the earlier stages'
conditioning indicators, and the coefficients of the all-conditions cell
are the ones retained.  Chaining the stages over a grid of leading
levels traces the quantile curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    EstimationError,
    InfeasibleLevelError,
    ProductMismatchError,
    StageFailureError,
    SubsampleTooSmallError,
    UnsupportedDimensionError,
    ValidationError,
)
from ._grid import grid_levels
from .qr import QuantileLevel, SolverOptions, column_rank, fit_qr, smoothed_indicator

__all__ = [
    "DataMatrix",
    "FactorizationPath",
    "InteractedDesign",
    "StageFit",
    "MqrFit",
    "GraphPoint",
    "QuantileGraph",
    "conditional_level",
    "grid_paths",
    "explicit_path",
    "generated_regressors",
    "fit_mqr",
    "fit_mqr_subsample",
    "predict",
    "quantile_graph",
    "quantile_graph_from_paths",
]

_PRODUCT_TOL = 1e-12


@dataclass(frozen=True)
class DataMatrix:
    """An n-row sample of m outcomes and k regressors (intercept first).

    Y : (n, m) outcomes; X : (n, k) regressors whose first column is 1.
    """

    Y: np.ndarray
    X: np.ndarray
    y_names: tuple[str, ...] | None = None
    x_names: tuple[str, ...] | None = None

    def __post_init__(self):
        # own immutable snapshots; never freeze a caller's array in place
        Y = np.array(self.Y, dtype=float, order="C")
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)
        X = np.array(self.X, dtype=float, order="C")
        if X.ndim != 2 or Y.ndim != 2 or Y.shape[0] != X.shape[0]:
            raise DimensionMismatchError(
                f"incompatible shapes: Y {self.Y.shape}, X {self.X.shape}"
            )
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise ValidationError("data must be finite")
        if not np.all(X[:, 0] == 1.0):
            raise ValidationError("first X column must be identically 1 (intercept)")
        n, m = Y.shape
        k = X.shape[1]
        if n <= k * 2 ** (m - 1):
            raise ValidationError(
                f"need n > k * 2^(m-1) rows for the widest stage design "
                f"(n={n}, k={k}, m={m})"
            )
        Y.flags.writeable = False
        X.flags.writeable = False
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[1]

    @property
    def k(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FactorizationPath:
    """A permutation of the outcomes plus stage levels multiplying to target.

    permutation uses 0-based outcome indices in estimation order.
    """

    permutation: tuple[int, ...]
    levels: tuple[float, ...]
    target: float

    def __post_init__(self):
        perm = tuple(int(i) for i in self.permutation)
        levels = tuple(float(QuantileLevel(t)) for t in self.levels)
        target = float(QuantileLevel(self.target))
        m = len(perm)
        if sorted(perm) != list(range(m)) or m != len(levels):
            raise ValidationError(
                f"permutation {perm} and levels {levels} must cover the same stages"
            )
        prod = 1.0
        for j, t in enumerate(levels):
            prod *= t
            if j < m - 1 and prod <= target - _PRODUCT_TOL:
                raise InfeasibleLevelError(
                    f"running product {prod} at stage {j + 1} already below target {target}"
                )
        if abs(prod - target) > _PRODUCT_TOL:
            raise ProductMismatchError(
                f"stage levels multiply to {prod}, not the target {target}"
            )
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "target", target)

    @property
    def m(self) -> int:
        return len(self.permutation)


@dataclass(frozen=True)
class InteractedDesign:
    """Stage design X (x) w, grouped by indicator cell.

    cells holds the indicator bit tuple of each k-column block, the
    all-conditions cell first, the rest in binary-counting order.
    cell_counts are hard-indicator occupancies (they sum to n even when
    the design itself is smoothed).
    """

    Z: np.ndarray
    cells: tuple[tuple[int, ...], ...]
    cell_counts: tuple[int, ...]


@dataclass(frozen=True)
class StageFit:
    """One stage of the chain: extended coefficients and diagnostics."""

    stage: int
    outcome: int
    level: float
    beta_ext: np.ndarray
    width: int
    cell_counts: tuple[int, ...]
    dropped_columns: tuple[int, ...]
    iterations: int
    objective: float


@dataclass(frozen=True)
class MqrFit:
    """Chained stage fits plus the extracted k x m coefficient block.

    Column j of B belongs to outcome j (original numbering): it holds the
    first k extended coefficients of the stage that fit outcome j.
    """

    path: FactorizationPath
    stages: tuple[StageFit, ...]
    B: np.ndarray
    smoothed: bool
    bandwidth: float | None


@dataclass(frozen=True)
class GraphPoint:
    stage_levels: tuple[float, ...]
    q: np.ndarray


@dataclass(frozen=True)
class QuantileGraph:
    """Quantile-curve points for a fixed target level and evaluation point.

    Grid paths whose stage fits failed are kept in `failures` rather than
    silently dropped.
    """

    target: float
    permutation: tuple[int, ...]
    x_eval: np.ndarray
    points: tuple[GraphPoint, ...]
    failures: tuple[tuple[tuple[float, ...], str], ...] = ()
    label: str = ""

    def __post_init__(self):
        for pt in self.points:
            prod = 1.0
            for t in pt.stage_levels:
                prod *= t
            if abs(prod - self.target) > _PRODUCT_TOL:
                raise ProductMismatchError(
                    f"graph point levels {pt.stage_levels} do not multiply to "
                    f"{self.target}"
                )

    def q_matrix(self) -> np.ndarray:
        """Stacked (len(points), m) array of quantile points."""
        if not self.points:
            return np.empty((0, len(self.permutation)))
        return np.vstack([pt.q for pt in self.points])


def conditional_level(target, leading) -> QuantileLevel:
    """Remaining conditional level target/leading, in (target, 1)."""
    target = QuantileLevel(target)
    leading = QuantileLevel(leading)
    if leading <= target:
        raise InfeasibleLevelError(
            f"leading level {float(leading)} must exceed the target {float(target)}"
        )
    return QuantileLevel(target / leading)


def grid_paths(target, step, m=2, permutation=(0, 1)) -> list[FactorizationPath]:
    """All bivariate factorizations of target on a fixed-step leading grid."""
    if m != 2:
        raise UnsupportedDimensionError(
            "grid enumeration is bivariate only; build explicit paths for m > 2"
        )
    target = QuantileLevel(target)
    return [
        FactorizationPath(permutation, (t1, float(target) / t1), target)
        for t1 in grid_levels(target, step)
    ]


def explicit_path(target, permutation, levels) -> FactorizationPath:
    """Validate and build a user-chosen factorization path."""
    return FactorizationPath(tuple(permutation), tuple(levels), target)


def _stage_cells(n_prior: int) -> list[tuple[int, ...]]:
    # all-ones cell first, then the rest counting up in binary
    all_on = (1,) * n_prior
    cells = [all_on]
    for code in range(2**n_prior):
        bits = tuple((code >> (n_prior - 1 - h)) & 1 for h in range(n_prior))
        if bits != all_on:
            cells.append(bits)
    return cells


def generated_regressors(
    X, prior_predictions, Y_prior, bandwidth: float | None = None
) -> InteractedDesign:
    """Interacted stage design from earlier stages' fitted predictions.

    For each row, the conditioning weight of indicator h is
    1[y_h <= q_h] (or its smoothed version when a bandwidth is given),
    and each cell's weight is the product over choices of d_h vs 1-d_h.
    The returned design is X scaled by the cell weights, cell by cell,
    width k * 2^(j-1).
    """
    X = np.asarray(X, dtype=float)
    preds = [np.asarray(p, dtype=float) for p in prior_predictions]
    Y_prior = np.asarray(Y_prior, dtype=float)
    if Y_prior.ndim == 1:
        Y_prior = Y_prior.reshape(-1, 1)
    J = len(preds)
    n, k = X.shape
    if J == 0 or Y_prior.shape != (n, J) or any(p.shape != (n,) for p in preds):
        raise DimensionMismatchError(
            "need one prior prediction vector and outcome column per earlier stage"
        )
    d = np.empty((n, J))
    hard = np.empty((n, J), dtype=bool)
    for h in range(J):
        hard[:, h] = Y_prior[:, h] <= preds[h]
        if bandwidth is None:
            d[:, h] = hard[:, h].astype(float)
        else:
            d[:, h] = smoothed_indicator(preds[h] - Y_prior[:, h], bandwidth)
    cells = _stage_cells(J)
    blocks = []
    counts = []
    for bits in cells:
        weight = np.ones(n)
        occupancy = np.ones(n, dtype=bool)
        for h, bit in enumerate(bits):
            weight = weight * (d[:, h] if bit else 1.0 - d[:, h])
            occupancy &= hard[:, h] if bit else ~hard[:, h]
        blocks.append(X * weight[:, None])
        counts.append(int(occupancy.sum()))
    return InteractedDesign(
        Z=np.hstack(blocks), cells=tuple(cells), cell_counts=tuple(counts)
    )


def _fit_stage(y, design: InteractedDesign, tau, k, stage, outcome, opts):
    """Fit one stage, dropping rank-deficient columns outside the first block.

    Sparse or empty indicator cells make whole column blocks (nearly)
    zero; those columns are dropped from the solve and written back as
    zero coefficients so the block layout, and hence the extraction of
    the first k coefficients, stays intact.
    """
    Z = design.Z
    width = Z.shape[1]
    rank, kept = column_rank(Z, opts.rank_tol)
    dropped = tuple(sorted(set(range(width)) - set(int(i) for i in kept)))
    if any(j < k for j in dropped):
        raise StageFailureError(
            stage,
            EstimationError(
                f"conditioned-cell block is rank deficient (columns {dropped})"
            ),
        )
    try:
        fit = fit_qr(y, Z[:, kept] if dropped else Z, tau, opts)
    except EstimationError as err:
        raise StageFailureError(stage, err) from err
    beta_ext = np.zeros(width)
    beta_ext[np.asarray(kept, dtype=int)] = fit.beta
    return (
        StageFit(
            stage=stage,
            outcome=outcome,
            level=float(tau),
            beta_ext=beta_ext,
            width=width,
            cell_counts=design.cell_counts,
            dropped_columns=dropped,
            iterations=fit.iterations,
            objective=fit.objective,
        ),
        Z @ beta_ext,
    )


def fit_mqr(
    data: DataMatrix,
    path: FactorizationPath,
    smoothed: bool = False,
    bandwidth: float | None = None,
    opts: SolverOptions | None = None,
) -> MqrFit:
    """Chained sequential fit along a factorization path.

    Stage 1 regresses the leading outcome on X at the leading level; each
    later stage fits its outcome on the interacted design generated from
    all earlier stages' fitted predictions.  Column j of the returned B
    holds outcome j's coefficients from the all-conditions cell.

    Parameters
    ----------
    data : DataMatrix
    path : FactorizationPath
        Estimation order and per-stage levels.
    smoothed : bool
        Replace the hard conditioning indicators by the integrated
        biweight step.  Estimation defaults to hard indicators.
    bandwidth : float, optional
        Smoothing bandwidth; defaults to n**(-1/3) when `smoothed`.
    opts : SolverOptions, optional
    """
    opts = opts or SolverOptions()
    if path.m != data.m:
        raise DimensionMismatchError(
            f"path has {path.m} stages but data has {data.m} outcomes"
        )
    if smoothed and bandwidth is None:
        bandwidth = float(data.n) ** (-1.0 / 3.0)
    bw = bandwidth if smoothed else None

    k = data.k
    stages: list[StageFit] = []
    preds: list[np.ndarray] = []
    prior_y: list[np.ndarray] = []
    B = np.zeros((k, data.m))
    for j, outcome in enumerate(path.permutation, start=1):
        y = data.Y[:, outcome]
        if j == 1:
            design = InteractedDesign(Z=data.X, cells=((),), cell_counts=(data.n,))
        else:
            design = generated_regressors(
                data.X, preds, np.column_stack(prior_y), bw
            )
        stage, pred = _fit_stage(
            y, design, path.levels[j - 1], k, j, outcome, opts
        )
        stages.append(stage)
        preds.append(pred)
        prior_y.append(y)
        B[:, outcome] = stage.beta_ext[:k]
    return MqrFit(
        path=path,
        stages=tuple(stages),
        B=B,
        smoothed=bool(smoothed),
        bandwidth=bw,
    )


def fit_mqr_subsample(
    data: DataMatrix, path: FactorizationPath, opts: SolverOptions | None = None
) -> MqrFit:
    """Sequential fit by explicit subsample refits (hard indicators only).

    Stage j keeps only the rows satisfying every earlier condition and
    runs a plain quantile regression on X there.  Algebraically this
    matches the conditioned-cell block of the interacted fit, because
    the interacted objective separates across row-disjoint cells.
    """
    opts = opts or SolverOptions()
    if path.m != data.m:
        raise DimensionMismatchError(
            f"path has {path.m} stages but data has {data.m} outcomes"
        )
    k = data.k
    mask = np.ones(data.n, dtype=bool)
    stages: list[StageFit] = []
    B = np.zeros((k, data.m))
    for j, outcome in enumerate(path.permutation, start=1):
        n_sub = int(mask.sum())
        if n_sub <= k:
            raise SubsampleTooSmallError(
                f"stage {j}: conditioned subsample has {n_sub} rows for {k} columns"
            )
        try:
            fit = fit_qr(
                data.Y[mask, outcome], data.X[mask], path.levels[j - 1], opts
            )
        except EstimationError as err:
            raise StageFailureError(j, err) from err
        B[:, outcome] = fit.beta
        stages.append(
            StageFit(
                stage=j,
                outcome=outcome,
                level=float(path.levels[j - 1]),
                beta_ext=fit.beta,
                width=k,
                cell_counts=(n_sub,),
                dropped_columns=(),
                iterations=fit.iterations,
                objective=fit.objective,
            )
        )
        mask &= data.Y[:, outcome] <= data.X @ fit.beta
    return MqrFit(path=path, stages=tuple(stages), B=B, smoothed=False, bandwidth=None)


def predict(fit: MqrFit, x) -> np.ndarray:
    """Quantile point B'x for a regressor vector x of length k."""
    x = np.asarray(x, dtype=float)
    if x.shape != (fit.B.shape[0],):
        raise DimensionMismatchError(
            f"x has shape {x.shape}, expected ({fit.B.shape[0]},)"
        )
    return fit.B.T @ x


def quantile_graph_from_paths(
    data: DataMatrix,
    paths,
    x_eval,
    smoothed: bool = False,
    bandwidth: float | None = None,
    opts: SolverOptions | None = None,
    label: str = "",
) -> QuantileGraph:
    """Trace the quantile curve over explicit factorization paths."""
    paths = list(paths)
    if not paths:
        raise ValidationError("need at least one factorization path")
    target = paths[0].target
    permutation = paths[0].permutation
    x_eval = np.asarray(x_eval, dtype=float)
    points: list[GraphPoint] = []
    failures: list[tuple[tuple[float, ...], str]] = []
    for path in paths:
        if path.target != target or path.permutation != permutation:
            raise ValidationError("all paths must share target and permutation")
        try:
            fit = fit_mqr(data, path, smoothed=smoothed, bandwidth=bandwidth, opts=opts)
        except EstimationError as err:
            failures.append((path.levels, str(err)))
            continue
        points.append(GraphPoint(stage_levels=path.levels, q=predict(fit, x_eval)))
    return QuantileGraph(
        target=target,
        permutation=permutation,
        x_eval=x_eval,
        points=tuple(points),
        failures=tuple(failures),
        label=label,
    )


def quantile_graph(
    data: DataMatrix,
    permutation,
    target,
    step,
    x_eval,
    smoothed: bool = False,
    bandwidth: float | None = None,
    opts: SolverOptions | None = None,
    label: str = "",
) -> QuantileGraph:
    """Bivariate quantile curve over the fixed-step leading-level grid.

    One chained fit per grid level, points returned in increasing
    leading-level order.  Failed grid paths are recorded as gaps.
    """
    paths = grid_paths(target, step, m=2, permutation=tuple(permutation))
    return quantile_graph_from_paths(
        data, paths, x_eval, smoothed=smoothed, bandwidth=bandwidth, opts=opts,
        label=label,
    )
