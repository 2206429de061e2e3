"""Independent low-dimensional reference computations.

Closed-form Poiseuille wall shear, composite-Simpson period averaging, and
a 0D quasi-static stenosis surrogate that runs both temporal-coupling
algorithms without any finite elements. These are validation oracles for
the full solver and fast regression vehicles for the averaging logic; they
deliberately ignore fluid inertia and wall elasticity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constitutive import MaterialParams, growth_rate, growth_scalar
from .errors import ConfigurationError
from .timescale import DayRecord, LongScaleTrajectory, TwoScaleSettings, average_growth


def poiseuille_wss(params: MaterialParams, half_width: float,
                   flux_half: Optional[float] = None, v_max: Optional[float] = None,
                   length: float = 10.0) -> float:
    """Scaled wall-shear functional of exact parabolic channel flow.

    For the parabolic profile v(y) = v_max (1 - (y/h)^2) through half-width
    h, the wall shear-rate magnitude is 2 v_max / h, so the interface
    integral scaled by 1/sigma_0 is

        |sigma_ws| = sigma_0^-1 L rho_f nu_f 2 v_max / h.

    Exactly one of ``flux_half`` (half-channel flux, cm^2/s) or ``v_max``
    (centerline speed, cm/s) selects the amplitude; for the parabola
    flux_half = 2 v_max h / 3.
    """
    if half_width <= 0.0:
        raise ConfigurationError("half_width must be positive")
    if (flux_half is None) == (v_max is None):
        raise ConfigurationError("give exactly one of flux_half or v_max")
    if v_max is None:
        v_max = 3.0 * flux_half / (2.0 * half_width)
    shear = params.rho_f * params.nu_f * 2.0 * v_max / half_width
    return length * shear / params.sigma_0


def quadrature_average(f: Callable[[np.ndarray], np.ndarray], n_points: int,
                       period: float = 1.0) -> float:
    """Composite-Simpson average of f over one period.

    ``n_points`` is the (even, >= 2) number of subintervals; error is
    O(n^-4) for smooth integrands. f must accept a numpy array of sample
    times.
    """
    n = int(n_points)
    if n < 2:
        raise ConfigurationError("quadrature_average needs n_points >= 2")
    if n % 2:
        n += 1
    t = np.linspace(0.0, period, n + 1)
    y = np.asarray(f(t), dtype=float)
    h = period / n
    integral = (h / 3.0) * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())
    return float(integral / period)


@dataclass
class SurrogateConfig:
    """0D stenosis surrogate: prescribed lumen width, quasi-static flow.

    ``width_fn`` optionally prescribes the full lumen width per day; when
    None the width is coupled to the growth state through the throat value
    of the growth shape, h_n = h_0 / g(0, -1, c_s^n).
    ``flux_amplitude`` is the full-channel peak flux of the pulsating
    inflow (40 cm^2/s for the default profile).
    """

    params: MaterialParams = field(default_factory=MaterialParams)
    width_fn: Optional[Callable[[float], float]] = None
    flux_amplitude: float = 40.0
    half_width0: float = 1.0
    length: float = 10.0

    def __post_init__(self):
        if self.flux_amplitude <= 0.0:
            raise ConfigurationError("flux_amplitude must be positive")

    def half_width(self, day: float, c_s: float) -> float:
        if self.width_fn is not None:
            w = float(self.width_fn(day))
            if w <= 0.0:
                raise ConfigurationError("width_fn must return positive widths")
            return 0.5 * w
        return self.half_width0 / growth_scalar(0.0, -1.0, c_s)


def surrogate_two_scale(config: SurrogateConfig,
                        settings: TwoScaleSettings) -> tuple[LongScaleTrajectory, LongScaleTrajectory]:
    """Run heuristic averaging and the two-scale algorithm on the 0D model.

    The FSI solve is replaced by ``poiseuille_wss`` at the current half
    width with flux ``flux_amplitude * sin^2(pi t)`` (time-averaged flux for
    the heuristic branch). Returns the paired (averaging, two_scale)
    trajectories; the quasi-static short scale is periodic from the first
    cycle, so cycles_used is always 2 (the criterion needs two samples).
    """
    params = config.params
    n_steps = settings.n_long_steps()
    n_s = settings.n_short_steps()
    t_m = (np.arange(1, n_s + 1)) * settings.dtau / settings.period

    def wss_at(half_width: float, flux_full: np.ndarray | float) -> np.ndarray | float:
        return poiseuille_wss(params, half_width, flux_half=flux_full / 2.0,
                              length=config.length)

    avg_records = []
    c_avg = 0.0
    for n in range(1, n_steps + 1):
        day = n * settings.dt_days
        h = config.half_width(day - settings.dt_days, c_avg)
        sigma_bar = wss_at(h, 0.5 * config.flux_amplitude)
        gamma_day = float(growth_rate(sigma_bar, c_avg, params)) * 86400.0
        c_avg += settings.dt_days * gamma_day
        avg_records.append(DayRecord(day, c_avg, gamma_day, 2.0 * h, 0))

    ts_records = []
    c_ts = 0.0
    for n in range(1, n_steps + 1):
        day = n * settings.dt_days
        h = config.half_width(day - settings.dt_days, c_ts)
        flux = config.flux_amplitude * np.sin(np.pi * t_m) ** 2
        series = np.array([wss_at(h, q) for q in flux])
        gamma_day = average_growth(series, c_ts, params)
        c_ts += settings.dt_days * gamma_day
        ts_records.append(DayRecord(day, c_ts, gamma_day, 2.0 * h, 2))

    return (
        LongScaleTrajectory(algorithm="surrogate-averaging", records=avg_records),
        LongScaleTrajectory(algorithm="surrogate-two-scale", records=ts_records),
    )
