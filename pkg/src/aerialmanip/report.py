"""Metric tables computed from a :class:`~aerialmanip.simulator.RunLog`."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import EmptySeries
from .estimator import mapd
from .simulator import RunLog, error_metrics

AXES = ("x", "y", "z")
OUTPUTS = ("x", "y", "z", "psi")


class MapdReport(NamedTuple):
    estimate: NDArray[np.float64]
    model: NDArray[np.float64] | None
    samples: int


class ABRow(NamedTuple):
    off_window: tuple[float, float]
    on_window: tuple[float, float]
    off_mean: NDArray[np.float64]
    on_mean: NDArray[np.float64]
    off_var: NDArray[np.float64]
    on_var: NDArray[np.float64]

    @property
    def ratio(self) -> NDArray[np.float64]:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.on_mean / self.off_mean


def mapd_report(log: RunLog, warmup: float = 2.0) -> MapdReport:
    """Torque-disturbance MAPD after the first ``warmup`` seconds.

    ``model`` compares the coupling model evaluated on true states, i.e. the
    error left when derivative estimation is perfect.

    Raises:
        EmptySeries: if no sample lies after the warmup.
    """
    m = log.t >= warmup
    if not np.any(m):
        raise EmptySeries(f"no samples after the {warmup:g} s warmup")
    est = mapd(log.dist_est[m, 3:], log.dist_true[m, 3:])
    model = None
    if np.all(np.isfinite(log.dist_model[m])):
        model = mapd(log.dist_model[m, 3:], log.dist_true[m, 3:])
    return MapdReport(est, model, int(m.sum()))


def ab_report(log: RunLog, windows: Sequence[tuple[tuple[float, float], tuple[float, float]]]) -> list[ABRow]:
    rows = []
    for off, on in windows:
        a, va = error_metrics(log, off)
        b, vb = error_metrics(log, on)
        rows.append(ABRow(tuple(off), tuple(on), a, b, va, vb))
    return rows


def format_mapd(rep: MapdReport) -> str:
    lines = ["MAPD of torque disturbance estimate (%)", f"{'axis':<6}{'estimate':>12}{'model only':>12}"]
    for i, ax in enumerate(AXES):
        model = f"{rep.model[i]:12.2f}" if rep.model is not None else f"{'n/a':>12}"
        lines.append(f"{ax:<6}{rep.estimate[i]:12.2f}{model}")
    lines.append(f"samples: {rep.samples}")
    return "\n".join(lines)


def format_ab(rows: Sequence[ABRow]) -> str:
    lines = ["Mean / variance of absolute error, compensation off vs on (m, rad)"]
    for k, r in enumerate(rows, 1):
        lines.append(f"period {k}: off {r.off_window[0]:g}-{r.off_window[1]:g} s, on {r.on_window[0]:g}-{r.on_window[1]:g} s")
        lines.append(f"  {'out':<5}{'mean off':>12}{'mean on':>12}{'ratio':>8}{'var off':>12}{'var on':>12}")
        for i, name in enumerate(OUTPUTS):
            lines.append(
                f"  {name:<5}{r.off_mean[i]:12.4e}{r.on_mean[i]:12.4e}{r.ratio[i]:8.3f}{r.off_var[i]:12.4e}{r.on_var[i]:12.4e}"
            )
    return "\n".join(lines)


def format_error_table(log: RunLog, window: tuple[float, float]) -> str:
    mean, var = error_metrics(log, window)
    lines = [f"Absolute error over {window[0]:g}-{window[1]:g} s", f"  {'out':<5}{'mean':>12}{'variance':>12}"]
    for i, name in enumerate(OUTPUTS):
        lines.append(f"  {name:<5}{mean[i]:12.4e}{var[i]:12.4e}")
    return "\n".join(lines)
