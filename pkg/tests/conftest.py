"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from synthcontrol import Panel, Period, StudySpec, period_range


def make_panel(units, start: str, values, missing=None) -> Panel:
    """Panel from a (n_units, n_periods) array starting at `start`."""
    values = np.asarray(values, dtype=np.float64)
    if missing is None:
        missing = np.isnan(values)
    first = Period.parse(start)
    periods = period_range(first, first.shift(values.shape[1] - 1))
    return Panel(tuple(units), periods, values, np.asarray(missing, dtype=bool))


def price_panel(rng, n_units, n_periods, start="2020-01", base_range=(2e5, 2e6),
                step_sd=5e3):
    """Random-walk price levels, one realistic unit per row."""
    base = rng.uniform(*base_range, size=n_units)
    steps = rng.normal(0.0, step_sd, size=(n_units, n_periods))
    values = base[:, None] + np.cumsum(steps, axis=1)
    labels = [f"city_{i:02d}" for i in range(n_units)]
    return make_panel(labels, start, values)


def combo_panel(rng, weights, n_extra=0, n_pre=24, n_post=6, delta=0.0,
                noise_sd=0.0, start="2020-01"):
    """Panel whose treated unit is an exact convex combination of the
    first donors over the pre window, shifted by -delta after it."""
    weights = np.asarray(weights, dtype=np.float64)
    n_used = weights.size
    n_periods = n_pre + n_post
    donors = rng.uniform(5e4, 2e6, size=(n_used + n_extra, n_periods))
    treated = donors[:n_used].T @ weights
    treated[n_pre:] -= delta
    if noise_sd:
        treated = treated + rng.normal(0.0, noise_sd, size=n_periods)
    values = np.vstack([treated, donors])
    labels = ["treated"] + [f"donor_{i}" for i in range(n_used + n_extra)]
    panel = make_panel(labels, start, values)
    first = Period.parse(start)
    spec = StudySpec(
        treated="treated",
        intervention=first.shift(n_pre - 1),
        pre_start=first,
        post_end=first.shift(n_periods - 1),
    )
    return panel, spec


def simplex_grid(n: int, step: float = 1e-3) -> np.ndarray:
    """All points of the n-simplex on a regular grid with the given step."""
    ticks = int(round(1.0 / step))
    if n == 1:
        return np.array([[1.0]])
    if n == 2:
        first = np.arange(ticks + 1) / ticks
        return np.column_stack([first, 1.0 - first])
    if n == 3:
        rows = []
        for i in range(ticks + 1):
            j = np.arange(ticks - i + 1)
            block = np.empty((j.size, 3))
            block[:, 0] = i / ticks
            block[:, 1] = j / ticks
            block[:, 2] = 1.0 - block[:, 0] - block[:, 1]
            rows.append(block)
        return np.vstack(rows)
    raise ValueError(f"grid oracle supports up to 3 donors, got {n}")


def grid_search_objective(X, y, omega, step: float = 1e-3) -> float:
    """Exhaustive-search oracle: minimum weighted SSE over the simplex grid.

    Independent of the solver: evaluates the loss directly at every grid
    point.
    """
    W = simplex_grid(X.shape[1], step)
    residuals = X @ W.T - y[:, None]
    objectives = omega @ (residuals * residuals)
    return float(objectives.min())


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)
