"""Run metrics and status-grid emission."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .config import ProblemConfig
from .model import CostBreakdown, HorizonPlan, indicator, true_cost


@dataclass
class RunMetrics:
    admission_ratio: float        # in [0, 1]
    switching_frequency: float    # status switches per slice boundary
    cost: CostBreakdown
    wall_time_s: float = 0.0
    admm_iterations: int = 0
    sum_iterations: int = 0


def compute_metrics(plan: HorizonPlan, config: ProblemConfig, *, wall_time_s=0.0,
                    admm_iterations=0, sum_iterations=0):
    """Admission ratio, switching frequency, and the exact cost of a plan."""
    ind = indicator(plan.v)
    T, M = ind.shape
    ratio = 1.0 - float(ind.sum()) / (M * T)
    freq = float(np.abs(np.diff(ind, axis=0)).sum()) / (T - 1) if T > 1 else 0.0
    return RunMetrics(admission_ratio=ratio, switching_frequency=freq,
                      cost=true_cost(plan, config), wall_time_s=wall_time_s,
                      admm_iterations=admm_iterations, sum_iterations=sum_iterations)


def status_grid(plan: HorizonPlan):
    """T x M binary grid, 1 = admissible (exactly: zero slack)."""
    return 1 - indicator(plan.v)


def emit_status_grid(plan: HorizonPlan, path=None):
    """Render the grid as CSV text (one row per slice); optionally write it."""
    grid = status_grid(plan)
    buf = io.StringIO()
    buf.write("# status grid v1: rows = time slices, columns = users, 1 = admissible\n")
    for row in grid:
        buf.write(",".join(str(int(x)) for x in row) + "\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def switch_count(plan: HorizonPlan):
    """Total number of status switches inside the horizon."""
    ind = indicator(plan.v)
    return int(np.abs(np.diff(ind, axis=0)).sum())
