"""Simulated annealing for expensive 1-D black-box maximization.

The variant implemented here departs from classical annealing in two ways
that suit objectives costing one transient simulation per evaluation: the
temperature is multiplied by the cooling coefficient immediately on every
acceptance (no per-temperature equilibration), and the run stops after
``n_term`` consecutive rejections instead of at a termination temperature.

Proposals are uniform perturbations of the current point with half-width
``L/5``; once the rejection streak reaches ``ceil(n_term/2)`` the width is
halved on each further iteration until the next acceptance resets it.  An
exhaustive grid search over the same domain is provided as the baseline the
annealer is meant to beat.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SAParams",
    "TracePoint",
    "OptimizationTrace",
    "GridSearchResult",
    "metropolis_accept",
    "sa_maximize",
    "exhaustive_maximize",
    "write_trace_csv",
]


@dataclass(frozen=True)
class SAParams:
    """Annealer configuration.

    ``t0`` carries the objective's units: the acceptance probability
    ``exp(-(E_old - E_new) / T)`` is only dimensionless if temperature and
    objective share units, so sensible values of ``t0`` depend on the
    magnitude of the objective being maximized.
    """

    t0: float
    cooling: float
    n_term: int
    accuracy: float  # grid resolution of the search domain, m
    initial_point: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be > 0")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must be in (0, 1)")
        if self.n_term < 1:
            raise ValueError("n_term must be >= 1")
        if not self.accuracy > 0:
            raise ValueError("accuracy must be > 0")


@dataclass(frozen=True)
class TracePoint:
    position: float
    value: float
    accepted: bool
    temperature: float


@dataclass
class OptimizationTrace:
    """Complete evaluation history of one annealing run."""

    points: list[TracePoint] = field(default_factory=list)

    @property
    def evaluations(self) -> int:
        return len(self.points)

    @property
    def final(self) -> TracePoint:
        """Last accepted point: the solution the annealer reports."""
        for p in reversed(self.points):
            if p.accepted:
                return p
        raise ValueError("empty trace")

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])


@dataclass(frozen=True)
class GridSearchResult:
    position: float
    value: float
    evaluations: int


def metropolis_accept(e_new: float, e_old: float, t: float, rng: np.random.Generator) -> bool:
    """Acceptance rule in maximization orientation.

    A higher candidate is always accepted; a lower one with probability
    ``exp(-(e_old - e_new) / t)``.  Equal values accept with probability 1.
    """
    if not t > 0:
        raise ValueError("temperature must be > 0")
    if e_new > e_old:
        return True
    return rng.random() < math.exp(-(e_old - e_new) / t)


def _snap(x: float, accuracy: float, n_grid: int) -> float:
    k = int(round(x / accuracy))
    return min(max(k, 1), n_grid) * accuracy


def sa_maximize(objective, length: float, params: SAParams,
                max_evaluations: int = 200_000) -> OptimizationTrace:
    """Maximize ``objective`` over the grid ``{accuracy, 2*accuracy, ... <= length}``.

    The lower domain boundary 0 is excluded (candidates snapping there are
    moved to the first grid point).  ``max_evaluations`` is a safety stop for
    pathological objectives such as exact plateaus, on which tie-acceptances
    keep resetting the rejection counter; realistic energy landscapes
    terminate through the rejection streak long before it triggers.
    """
    if not length > params.accuracy:
        raise ValueError("domain length must exceed the accuracy step")
    rng = np.random.default_rng(params.seed)
    n_grid = int(math.floor(length / params.accuracy + 1e-9))
    if params.initial_point is not None:
        cur = _snap(params.initial_point, params.accuracy, n_grid)
    else:
        cur = _snap(rng.uniform(0.0, length), params.accuracy, n_grid)

    trace = OptimizationTrace()
    e_cur = objective(cur)
    t = params.t0
    trace.points.append(TracePoint(cur, e_cur, True, t))

    w0 = length / 5.0
    w = w0
    half_at = math.ceil(params.n_term / 2)
    streak = 0
    while streak < params.n_term and len(trace.points) < max_evaluations:
        if streak >= half_at:
            w *= 0.5
        cand = cur + rng.uniform(-w, w)
        while not 0.0 <= cand <= length:
            cand = cur + rng.uniform(-w, w)
        cand = _snap(cand, params.accuracy, n_grid)
        e_cand = objective(cand)
        accepted = metropolis_accept(e_cand, e_cur, t, rng)
        trace.points.append(TracePoint(cand, e_cand, accepted, t))
        if accepted:
            cur, e_cur = cand, e_cand
            t *= params.cooling
            streak = 0
            w = w0
        else:
            streak += 1
    return trace


def exhaustive_maximize(objective, length: float, step: float) -> GridSearchResult:
    """Evaluate every grid point ``step, 2*step, ..., <= length``.

    Ties break toward the smaller position.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    count = int(math.floor(length / step + 1e-9))
    best_pos = None
    best_val = -math.inf
    for k in range(1, count + 1):
        pos = k * step
        val = objective(pos)
        if val > best_val:
            best_pos, best_val = pos, val
    return GridSearchResult(best_pos, best_val, count)


def write_trace_csv(trace: OptimizationTrace, path) -> None:
    """Dump a trace as ``iteration,position_m,energy,accepted,temperature``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "position_m", "energy", "accepted", "temperature"])
        for i, p in enumerate(trace.points):
            writer.writerow([i, f"{p.position:.9g}", f"{p.value:.9g}",
                             int(p.accepted), f"{p.temperature:.9g}"])
