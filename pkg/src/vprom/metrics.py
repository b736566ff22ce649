"""Error measures, per-strategy summaries and plot-data emission."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ERROR_CLIP_PERCENT = 20.0  # scatter color channel saturates here
TRANSIENT_SKIP_FRACTION = 0.01  # default: drop the first 1% of steps


@dataclass
class ErrorRecord:
    """Per-sample ROM accuracy and timing record."""

    sample_index: int
    strategy: str
    err_u: float
    err_udot: float
    err_uddot: float
    wall_time_fom: float
    wall_time_rom: float
    parameters: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def speed_up(self) -> float:
        return self.wall_time_fom / self.wall_time_rom if self.wall_time_rom > 0 else float("nan")


def default_time_set(n_steps: int, skip_fraction: float = TRANSIENT_SKIP_FRACTION) -> np.ndarray:
    skip = int(np.ceil(skip_fraction * n_steps))
    return np.arange(skip, n_steps)


def err_q(
    reference: np.ndarray,
    approx: np.ndarray,
    dof_set=None,
    time_set=None,
) -> float:
    """Relative Frobenius error over the selected DOFs and steps, in percent:
    100 * ||(q - q~)|_sets||_F / ||q|_sets||_F."""
    reference = np.asarray(reference, dtype=float)
    approx = np.asarray(approx, dtype=float)
    if reference.shape != approx.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {approx.shape}")
    if time_set is None:
        time_set = default_time_set(reference.shape[0])
    time_set = np.asarray(time_set)
    if dof_set is None:
        dof_set = np.arange(reference.shape[1])
    dof_set = np.asarray(dof_set)
    if time_set.size == 0 or dof_set.size == 0:
        raise ValueError("DOF and time sets must be non-empty")
    ref = reference[np.ix_(time_set, dof_set)]
    app = approx[np.ix_(time_set, dof_set)]
    den = float(np.linalg.norm(ref))
    if den == 0.0:
        raise ValueError("reference response has zero norm over the selected sets")
    return 100.0 * float(np.linalg.norm(ref - app)) / den


@dataclass
class StrategySummary:
    strategy: str
    n_records: int
    median_err_u: float
    max_err_u: float
    q1_err_u: float
    q3_err_u: float
    outliers_err_u: list
    median_err_uddot: float
    max_err_uddot: float
    mean_speed_up: float
    mean_wall_fom: float
    mean_wall_rom: float


def _boxplot_stats(values: np.ndarray):
    q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = values[(values < lo) | (values > hi)]
    return float(med), float(q1), float(q3), [float(v) for v in outliers]


def summarize(records: list[ErrorRecord]) -> dict[str, StrategySummary]:
    """Per-strategy medians, maxima, quartiles and 1.5*IQR outliers."""
    if not records:
        raise ValueError("no records to summarize")
    by_strategy: dict[str, list[ErrorRecord]] = {}
    for rec in records:
        by_strategy.setdefault(rec.strategy, []).append(rec)
    out = {}
    for strategy in sorted(by_strategy):
        recs = by_strategy[strategy]
        eu = np.array([r.err_u for r in recs])
        ea = np.array([r.err_uddot for r in recs])
        med, q1, q3, outl = _boxplot_stats(eu)
        speed = np.array([r.speed_up for r in recs])
        out[strategy] = StrategySummary(
            strategy=strategy,
            n_records=len(recs),
            median_err_u=med,
            max_err_u=float(eu.max()),
            q1_err_u=q1,
            q3_err_u=q3,
            outliers_err_u=outl,
            median_err_uddot=float(np.median(ea)),
            max_err_uddot=float(ea.max()),
            mean_speed_up=float(np.mean(speed)),
            mean_wall_fom=float(np.mean([r.wall_time_fom for r in recs])),
            mean_wall_rom=float(np.mean([r.wall_time_rom for r in recs])),
        )
    return out


def emit_error_map(
    records: list[ErrorRecord],
    axis_pair=None,
    clip: float = ERROR_CLIP_PERCENT,
) -> list[dict]:
    """Scatter dataset over two parameter axes with the displacement error as
    a color channel clipped at ``clip`` percent (raw values retained)."""
    rows = []
    for rec in records:
        names = list(rec.parameters)
        if axis_pair:
            ax, ay = axis_pair
            if ax not in rec.parameters or ay not in rec.parameters:
                raise ValueError(f"unknown axis names {axis_pair}; have {names}")
        else:
            if len(names) < 2:
                raise ValueError("records carry fewer than two parameters")
            ax, ay = names[0], names[1]
        rows.append(
            {
                "sample_index": rec.sample_index,
                "strategy": rec.strategy,
                "x_name": ax,
                "y_name": ay,
                "x": rec.parameters[ax],
                "y": rec.parameters[ay],
                "err_u_raw": rec.err_u,
                "err_u_color": min(rec.err_u, clip),
            }
        )
    return rows
