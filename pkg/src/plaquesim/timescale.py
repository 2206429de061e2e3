"""Long/short time-scale coupling algorithms.

Implements the two temporal couplings of the slow plaque-growth ODE to the
fast FSI dynamics: heuristic averaging (one stationary solve per long-scale
step) and the two-scale scheme (a heartbeat-periodic transient solve per
long-scale step, detected by the averaged-growth stopping criterion), plus
the micro/macro initialization strategies for the periodic loop.

The solver is passed in as a "problem" object providing solve_stationary,
step_transient, wall_shear_functional and channel_width; anything with that
surface works (the FEM problem, or stubs in tests).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .constitutive import SECONDS_PER_DAY, growth_rate
from .errors import ConfigurationError, PeriodicityError

if TYPE_CHECKING:
    from .fem_fsi import FsiProblem, State

log = logging.getLogger(__name__)

MICRO = "micro"
MACRO = "macro"


@dataclass
class TwoScaleSettings:
    """Time-scale and periodicity-loop parameters.

    The long-scale step is in days, the short-scale step in seconds; the
    period must be an integer multiple of dtau. eps_p is the periodicity
    tolerance on consecutive cycle-averaged growth rates, expressed in
    1/day units (a relative mode exists but is off by default).
    """

    dt_days: float = 1.0
    dtau: float = 0.02
    period: float = 1.0
    eps_p: float = 1e-3
    eps_p_relative: bool = False
    max_cycles: int = 10
    init_strategy: str = MICRO
    total_days: float = 200.0
    stationary_every_step: bool = False

    def __post_init__(self):
        if self.dt_days < 1.0:
            raise ConfigurationError("dt_days must be >= 1")
        if self.dtau <= 0.0 or self.period <= 0.0:
            raise ConfigurationError("dtau and period must be positive")
        n_s = self.period / self.dtau
        if abs(n_s - round(n_s)) > 1e-9 * n_s:
            raise ConfigurationError("period must be an integer multiple of dtau")
        if self.eps_p <= 0.0:
            raise ConfigurationError("eps_p must be positive")
        if self.max_cycles < 2:
            raise ConfigurationError("max_cycles must be >= 2 (criterion needs two cycles)")
        if self.init_strategy not in (MICRO, MACRO):
            raise ConfigurationError(f"unknown init_strategy {self.init_strategy!r}")
        if self.total_days < self.dt_days:
            raise ConfigurationError("total_days must cover at least one long-scale step")
        n_l = self.total_days / self.dt_days
        if abs(n_l - round(n_l)) > 1e-9 * max(n_l, 1.0):
            raise ConfigurationError("total_days must be an integer multiple of dt_days")

    def n_short_steps(self) -> int:
        return int(round(self.period / self.dtau))

    def n_long_steps(self) -> int:
        return int(round(self.total_days / self.dt_days))


@dataclass
class ShortScaleResult:
    """One accepted (quasi-periodic) heartbeat cycle.

    wss_series holds the wall-shear functional after each of the N_s steps
    of the accepted cycle; gamma_bar is its growth average in 1/day;
    cycle_start / cycle_end are the first/last states of the accepted cycle
    (the latter feeds the micro initialization of the next day).
    """

    wss_series: np.ndarray
    gamma_bar: float
    cycles_used: int
    cycle_start: "State"
    cycle_end: "State"
    gamma_history: list[float] = field(default_factory=list)
    c_s: float = 0.0


@dataclass
class DayRecord:
    day: float
    c_s: float
    gamma_bar_per_day: float
    width_cm: float
    cycles_used: int


@dataclass
class LongScaleTrajectory:
    """Per-long-step records of either algorithm."""

    algorithm: str
    records: list[DayRecord] = field(default_factory=list)
    short_scale_samples: dict[int, ShortScaleResult] = field(default_factory=dict)
    label: str = ""

    @property
    def final_cs(self) -> float:
        return self.records[-1].c_s

    def days(self) -> np.ndarray:
        return np.array([r.day for r in self.records])

    def cs_values(self) -> np.ndarray:
        return np.array([r.c_s for r in self.records])

    def widths(self) -> np.ndarray:
        return np.array([r.width_cm for r in self.records])


def average_growth(wss_series, c_s: float, params) -> float:
    """Arithmetic cycle mean of gamma(sigma_ws, c_s), reported in 1/day."""
    series = np.asarray(wss_series, dtype=float)
    if series.size == 0:
        raise ConfigurationError("average_growth needs a nonempty series")
    return float(np.mean(growth_rate(series, c_s, params))) * SECONDS_PER_DAY


def initial_state(strategy: str, prev_short: Optional[ShortScaleResult],
                  prev_long: Optional["State"]) -> "State":
    """Starting values for the heartbeat loop.

    micro: end state of the previous day's accepted cycle (bit-exact copy);
    macro: previous stationary long-scale state with the velocity zeroed so
    the state matches the zero inflow at the period start. Missing history
    falls back to the other strategy with a logged notice.
    """
    if strategy not in (MICRO, MACRO):
        raise ConfigurationError(f"unknown init_strategy {strategy!r}")
    if strategy == MICRO and prev_short is None:
        if prev_long is None:
            raise ConfigurationError("no history available for short-scale initialization")
        log.info("micro initialization without history; falling back to macro")
        strategy = MACRO
    if strategy == MACRO and prev_long is None:
        log.info("macro initialization without stationary state; falling back to micro")
        strategy = MICRO
        if prev_short is None:
            raise ConfigurationError("no history available for short-scale initialization")

    if strategy == MICRO:
        state = prev_short.cycle_end.copy()
    else:
        state = prev_long.copy()
        state.v[:] = 0.0
    state.time = 0.0
    return state


def run_short_scale_until_periodic(problem, init: "State", c_s: float,
                                   settings: TwoScaleSettings) -> ShortScaleResult:
    """Cycle heartbeats until the averaged growth rate stops changing.

    Runs cycles of N_s implicit steps with the pulsating inflow; after each
    cycle k >= 2 stops once |gamma_bar^k - gamma_bar^{k-1}| < eps_p (1/day).
    The growth state c_s (hence the growth shape) is frozen for the whole
    loop. Raises PeriodicityError with the gamma_bar history if max_cycles
    is exhausted.
    """
    n_s = settings.n_short_steps()
    gamma_history: list[float] = []
    state = init
    for cycle in range(1, settings.max_cycles + 1):
        cycle_start = state.copy()
        wss = np.empty(n_s)
        for m in range(1, n_s + 1):
            state = problem.step_transient(state, m * settings.dtau, settings.dtau, c_s)
            wss[m - 1] = problem.wall_shear_functional(state)
        gamma_bar = average_growth(wss, c_s, problem.params)
        gamma_history.append(gamma_bar)
        log.debug("cycle %d: gamma_bar = %.6e /day", cycle, gamma_bar)
        if cycle >= 2:
            diff = abs(gamma_history[-1] - gamma_history[-2])
            tol = settings.eps_p * abs(gamma_bar) if settings.eps_p_relative else settings.eps_p
            if diff < tol:
                return ShortScaleResult(
                    wss_series=wss, gamma_bar=gamma_bar, cycles_used=cycle,
                    cycle_start=cycle_start, cycle_end=state.copy(),
                    gamma_history=gamma_history, c_s=c_s,
                )
    raise PeriodicityError(
        f"no periodic state within {settings.max_cycles} cycles "
        f"(eps_p = {settings.eps_p})", gamma_history)


def run_heuristic_averaging(problem, settings: TwoScaleSettings) -> LongScaleTrajectory:
    """Algorithm: stationary solve per long step, forward-Euler c_s update.

    Each step solves the stationary FSI problem at the current c_s with the
    time-averaged inflow, evaluates the wall-shear functional, and advances
    c_s^n = c_s^{n-1} + dt gamma(sigma_ws, c_s^{n-1}).
    """
    traj = LongScaleTrajectory(algorithm="averaging",
                               label=f"averaging dt={settings.dt_days:g}d")
    c_s = 0.0
    stationary = None
    for n in range(1, settings.n_long_steps() + 1):
        day = n * settings.dt_days
        try:
            stationary = problem.solve_stationary(c_s, init=stationary)
        except Exception:
            log.error("stationary solve failed at day %g (c_s = %.6g)", day, c_s)
            raise
        sigma = problem.wall_shear_functional(stationary)
        gamma_day = float(growth_rate(sigma, c_s, problem.params)) * SECONDS_PER_DAY
        c_s = c_s + settings.dt_days * gamma_day
        width = problem.channel_width(stationary)
        traj.records.append(DayRecord(day, c_s, gamma_day, width, 0))
        log.info("averaging day %g: c_s = %.6f, wss = %.4f, width = %.4f",
                 day, c_s, sigma, width)
    return traj


def run_two_scale(problem, settings: TwoScaleSettings,
                  keep_short_scale: Optional[set[int]] = None,
                  field_dump_dir=None) -> LongScaleTrajectory:
    """Two-scale algorithm: periodic heartbeat solve per long step.

    Per step: (1) stationary solve, skipped under the micro strategy once
    short-scale history exists (configurable via stationary_every_step);
    (2) heartbeat cycling to periodicity; (3) forward-Euler c_s update with
    the cycle-averaged growth rate. ``keep_short_scale`` selects long-step
    day numbers whose accepted cycle is retained in the returned trajectory
    (for CSV/plot emission); ``field_dump_dir`` writes the end-of-day nodal
    fields there (one CSV per long step).
    """
    traj = LongScaleTrajectory(
        algorithm="two-scale",
        label=f"two-scale dt={settings.dt_days:g}d {settings.init_strategy}")
    keep_short_scale = keep_short_scale or set()
    c_s = 0.0
    stationary = None
    prev_short: Optional[ShortScaleResult] = None
    for n in range(1, settings.n_long_steps() + 1):
        day = n * settings.dt_days
        need_stationary = (
            settings.init_strategy == MACRO
            or settings.stationary_every_step
            or prev_short is None
        )
        if need_stationary:
            stationary = problem.solve_stationary(c_s, init=stationary)
        use_micro = settings.init_strategy == MICRO and prev_short is not None
        init = initial_state(MICRO if use_micro else MACRO,
                             prev_short if use_micro else None, stationary)
        short = run_short_scale_until_periodic(problem, init, c_s, settings)
        c_s = c_s + settings.dt_days * short.gamma_bar
        width = problem.channel_width(short.cycle_end)
        traj.records.append(DayRecord(day, c_s, short.gamma_bar, width, short.cycles_used))
        if int(round(day)) in keep_short_scale:
            traj.short_scale_samples[int(round(day))] = short
        if field_dump_dir is not None:
            problem.dump_fields(short.cycle_end,
                                f"{field_dump_dir}/fields_day{int(round(day))}.csv")
        prev_short = short
        log.info("two-scale day %g: c_s = %.6f, gamma_bar = %.6e /day, "
                 "width = %.4f, cycles = %d",
                 day, c_s, short.gamma_bar, width, short.cycles_used)
    return traj
