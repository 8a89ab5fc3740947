"""Single-unit profit-maximising dispatch with startup costs and minimum load.

When the unit is on, the output choice decouples per hour: full capacity if
the price covers variable cost, otherwise minimum load. What remains is the
on/off sequence, solved exactly as a two-state longest path with startup cost
charged on off->on edges. Optimal output is therefore always 0, min load or
capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError

HORIZON_HOURS = 744
OVERLAP_HOURS = 24


def variable_cost(fuel_cost, carbon_cost, efficiency):
    """EUR/MWh electric from fuel and carbon cost per MWh thermal."""
    if np.any(np.asarray(efficiency) <= 0):
        raise DomainError("efficiency must be positive")
    return (np.asarray(fuel_cost) + np.asarray(carbon_cost)) / efficiency


def startup_cost(capacity, depreciation, cold_start_fuel, cold_start_factor, fuel_plus_carbon):
    """Cost in EUR of one cold start of the whole unit."""
    args = (capacity, depreciation, cold_start_fuel, cold_start_factor, fuel_plus_carbon)
    if any(np.any(np.asarray(a) < 0) for a in args):
        raise DomainError("startup cost inputs must be non-negative")
    return capacity * (depreciation + cold_start_fuel * cold_start_factor * np.asarray(fuel_plus_carbon))


@dataclass(frozen=True)
class DispatchProblem:
    prices: np.ndarray
    variable_cost: np.ndarray
    startup_cost: np.ndarray
    capacity: float
    min_load: float
    initial_on: bool = False

    def __post_init__(self):
        for name in ("prices", "variable_cost", "startup_cost"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))
        n = len(self.prices)
        if n < 1:
            raise DomainError("empty planning horizon")
        if len(self.variable_cost) != n or len(self.startup_cost) != n:
            raise DomainError("prices, variable_cost and startup_cost must share one length")
        if not 0 < self.min_load < self.capacity:
            raise DomainError("need 0 < min_load < capacity")


@dataclass(frozen=True)
class DispatchSolution:
    generation: np.ndarray
    state: np.ndarray
    startup: np.ndarray
    objective: float


def generation_from_state(state, prices, cvar, capacity, min_load):
    """Optimal MW given the on/off sequence; ties (price == cost) run at capacity."""
    on = np.asarray(state).astype(bool)
    level = np.where(np.asarray(prices) >= np.asarray(cvar), capacity, min_load)
    return np.where(on, level, 0.0)


def startups_from_state(state, initial_on=False):
    d = np.asarray(state).astype(np.int8)
    prev = np.concatenate(([1 if initial_on else 0], d[:-1]))
    return (d - prev == 1).astype(np.uint8)


def schedule_profit(generation, startup, prices, cvar, cstart) -> float:
    g = np.asarray(generation, dtype=float)
    return float(np.sum((np.asarray(prices) - np.asarray(cvar)) * g) - np.sum(np.asarray(cstart) * startup))


def _solution(state, problem, initial_on=None) -> DispatchSolution:
    init = problem.initial_on if initial_on is None else initial_on
    state = np.asarray(state, dtype=np.uint8)
    gen = generation_from_state(state, problem.prices, problem.variable_cost,
                                problem.capacity, problem.min_load)
    start = startups_from_state(state, init)
    obj = schedule_profit(gen, start, problem.prices, problem.variable_cost, problem.startup_cost)
    return DispatchSolution(gen, state, start, obj)


def solve_horizon(problem: DispatchProblem) -> DispatchSolution:
    """Exact optimum of one planning horizon.

    The startup indicator at the first hour is measured against
    ``problem.initial_on`` (the state just before the horizon).
    """
    state, _ = kernels.solve_dp(problem.prices, problem.variable_cost, problem.startup_cost,
                                float(problem.capacity), float(problem.min_load),
                                bool(problem.initial_on))
    return _solution(state, problem)


def horizon_bounds(n, horizon=HORIZON_HOURS, overlap=OVERLAP_HOURS):
    """(start, end) of each planning horizon; consecutive ones share ``overlap`` hours."""
    if n < 1:
        raise DomainError("empty series")
    out = []
    start, end = 0, min(horizon, n)
    out.append((start, end))
    while end < n:
        start += horizon - overlap
        end = min(start + horizon, n)
        out.append((start, end))
    return out


def chain_horizons(problem: DispatchProblem, horizon=HORIZON_HOURS, overlap=OVERLAP_HOURS) -> DispatchSolution:
    """Solve the full sample as rolling horizons with a one-day overlap.

    Each horizon after the first keeps the previous solution at its first
    hour (the first hour of the previous horizon's last day) and re-solves
    the remaining hours from that state.
    """
    if len(problem.prices) < overlap:
        raise DomainError(f"sample shorter than {overlap} hours")
    if not 0 < overlap < horizon:
        raise DomainError("need 0 < overlap < horizon")
    state = kernels.chain_dispatch(problem.prices, problem.variable_cost, problem.startup_cost,
                                   float(problem.capacity), float(problem.min_load),
                                   bool(problem.initial_on), int(horizon), int(overlap))
    return _solution(state, problem)

