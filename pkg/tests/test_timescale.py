"""Tests of the temporal-coupling machinery against stub solvers.

The FEM problem is replaced by small deterministic stubs so that the
periodicity loop, the initialization strategies, the growth averaging and
the long-scale bookkeeping are exercised in milliseconds; the coupling to
the real solver is covered by the acceptance suite.
"""

import numpy as np
import pytest

from plaquesim.constitutive import MaterialParams, closed_form_cs, growth_rate
from plaquesim.errors import ConfigurationError, PeriodicityError
from plaquesim.fem_fsi.problem import State
from plaquesim.timescale import (
    MACRO,
    MICRO,
    ShortScaleResult,
    TwoScaleSettings,
    average_growth,
    initial_state,
    run_heuristic_averaging,
    run_short_scale_until_periodic,
    run_two_scale,
)

PARAMS = MaterialParams()


def tiny_state(vval=0.0, time=0.0):
    return State(np.full((4, 2), vval), np.zeros((4, 2)), np.zeros(3), time)


class StubProblem:
    """Deterministic stand-in: per-cycle wall shear converges geometrically
    toward a limit series; geometry is frozen."""

    def __init__(self, wss_limit=0.8, wss_start=1.6, decay=0.02, width=2.0):
        self.params = PARAMS
        self.wss_limit = wss_limit
        self.wss_start = wss_start
        self.decay = decay
        self.width = width
        self.steps_taken = 0
        self.stationary_solves = 0

    def step_transient(self, prev, t_new, dtau, c_s):
        self.steps_taken += 1
        state = prev.copy()
        state.time = t_new
        # velocity channel 0 carries the "cycle progress" marker
        state.v[0, 0] = self.wss_limit + (state.v[0, 1] - self.wss_limit)
        state.v[0, 0] *= np.sin(np.pi * t_new) ** 2
        state.v[0, 1] = self.wss_limit + (state.v[0, 1] - self.wss_limit) * (
            self.decay ** dtau)
        return state

    def wall_shear_functional(self, state):
        return state.v[0, 0]

    def channel_width(self, state):
        return self.width

    def solve_stationary(self, c_s, init=None):
        self.stationary_solves += 1
        st = tiny_state()
        st.v[0, 1] = self.wss_start  # envelope decays over subsequent cycles
        st.v[:, 0] = 7.0             # nonzero velocity, must be zeroed by macro init
        return st


class TestSettingsValidation:
    def test_defaults(self):
        s = TwoScaleSettings()
        assert s.n_short_steps() == 50
        assert s.n_long_steps() == 200

    @pytest.mark.parametrize("kwargs", [
        dict(dt_days=0.5),
        dict(dtau=-0.01),
        dict(dtau=0.03),              # period not an integer multiple
        dict(eps_p=0.0),
        dict(max_cycles=1),
        dict(init_strategy="bogus"),
        dict(total_days=0.0),
        dict(total_days=25.0, dt_days=10.0),
    ])
    def test_invalid_settings_rejected(self, kwargs):
        with pytest.raises(ConfigurationError):
            TwoScaleSettings(**kwargs)


class TestAverageGrowth:
    def test_zero_series_gives_alpha(self):
        assert average_growth(np.zeros(50), 0.0, PARAMS) == pytest.approx(0.0432)

    def test_constant_series(self):
        assert average_growth(np.full(50, 0.4), 0.0, PARAMS) == pytest.approx(
            0.0432 / 1.16)

    def test_pulsating_series_matches_quadrature_oracle(self):
        t = np.arange(1, 51) * 0.02
        series = 0.8 * np.sin(np.pi * t) ** 2
        got = average_growth(series, 0.0, PARAMS)
        assert got == pytest.approx(0.834 * 0.0432, abs=0.005 * 0.0432)

    def test_units_discipline_exact_factor(self):
        series = np.array([0.3, 0.5, 0.7])
        per_second = float(np.mean(growth_rate(series, 0.2, PARAMS)))
        assert average_growth(series, 0.2, PARAMS) == per_second * 86400.0

    def test_empty_series_rejected(self):
        with pytest.raises(ConfigurationError):
            average_growth(np.array([]), 0.0, PARAMS)


class TestInitialState:
    def test_macro_zeroes_velocity_keeps_displacement(self):
        prev_long = tiny_state(vval=3.0)
        prev_long.u[:] = 0.25
        out = initial_state(MACRO, None, prev_long)
        assert np.all(out.v == 0.0)
        assert np.all(out.u == 0.25)
        assert out.time == 0.0

    def test_micro_copies_cycle_end_bit_exactly(self):
        end = tiny_state(vval=1.234567890123456)
        end.time = 1.0
        short = ShortScaleResult(np.zeros(50), 0.01, 2, tiny_state(), end)
        out = initial_state(MICRO, short, None)
        assert np.array_equal(out.v, end.v)
        assert out.time == 0.0
        out.v[0, 0] = -99.0  # copy semantics: no aliasing
        assert end.v[0, 0] != -99.0

    def test_micro_without_history_falls_back_to_macro(self, caplog):
        prev_long = tiny_state(vval=2.0)
        with caplog.at_level("INFO", logger="plaquesim.timescale"):
            out = initial_state(MICRO, None, prev_long)
        assert np.all(out.v == 0.0)
        assert any("falling back" in m for m in caplog.messages)

    def test_no_history_at_all_is_an_error(self):
        with pytest.raises(ConfigurationError):
            initial_state(MICRO, None, None)


class TestShortScaleLoop:
    def test_identical_cycles_stop_at_two_with_zero_difference(self):
        stub = StubProblem(wss_start=0.8, decay=1e-30)  # limit reached at once
        init = stub.solve_stationary(0.0)
        init.v[0, 1] = stub.wss_limit  # exactly periodic from the start
        res = run_short_scale_until_periodic(stub, init, 0.0, TwoScaleSettings())
        assert res.cycles_used == 2
        assert res.gamma_history[1] == res.gamma_history[0]

    def test_decaying_transient_needs_more_cycles(self):
        stub = StubProblem(wss_start=2.4, decay=0.05)
        init = stub.solve_stationary(0.0)
        init.v[:, 0] = 0.0
        res = run_short_scale_until_periodic(stub, init, 0.0, TwoScaleSettings())
        assert res.cycles_used >= 2
        assert abs(res.gamma_history[-1] - res.gamma_history[-2]) < 1e-3
        assert res.wss_series.shape == (50,)

    def test_max_cycles_exhaustion_raises_with_history(self):
        stub = StubProblem(wss_start=50.0, decay=0.9)  # very slow decay
        init = stub.solve_stationary(0.0)
        with pytest.raises(PeriodicityError) as err:
            run_short_scale_until_periodic(stub, init, 0.0,
                                           TwoScaleSettings(max_cycles=3,
                                                            eps_p=1e-12))
        assert len(err.value.gamma_history) == 3

    def test_micro_macro_strategies_agree_at_convergence(self):
        # frozen geometry: both initializations must land on the same
        # averaged growth rate within eps_p
        settings = TwoScaleSettings(eps_p=1e-6)
        stub = StubProblem(wss_start=1.2, decay=0.01)
        macro_init = initial_state(MACRO, None, stub.solve_stationary(0.0))
        macro_res = run_short_scale_until_periodic(stub, macro_init, 0.0, settings)
        micro_init = initial_state(MICRO, macro_res, None)
        micro_res = run_short_scale_until_periodic(stub, micro_init, 0.0, settings)
        assert abs(micro_res.gamma_bar - macro_res.gamma_bar) < settings.eps_p

    def test_relative_tolerance_mode(self):
        stub = StubProblem(wss_start=1.2, decay=0.01)
        init = stub.solve_stationary(0.0)
        settings = TwoScaleSettings(eps_p=0.05, eps_p_relative=True)
        res = run_short_scale_until_periodic(stub, init, 0.0, settings)
        diff = abs(res.gamma_history[-1] - res.gamma_history[-2])
        assert diff < 0.05 * abs(res.gamma_bar)


class TestHeuristicAveraging:
    def test_zero_shear_matches_closed_form_ode(self):
        # WSS forced to zero: forward Euler against the exact solution
        class ZeroWss(StubProblem):
            def wall_shear_functional(self, state):
                return 0.0

        traj = run_heuristic_averaging(ZeroWss(), TwoScaleSettings(total_days=200.0))
        exact = closed_form_cs(200.0, PARAMS)
        assert abs(traj.final_cs - exact) / exact < 0.01
        assert traj.algorithm == "averaging"
        assert [r.cycles_used for r in traj.records] == [0] * 200

    def test_tiny_alpha_freezes_concentration(self):
        params = MaterialParams(alpha=1e-30)

        class Tiny(StubProblem):
            def __init__(self):
                super().__init__()
                self.params = params

        traj = run_heuristic_averaging(Tiny(), TwoScaleSettings(total_days=5.0))
        assert traj.final_cs < 1e-20
        assert np.allclose(traj.widths(), 2.0)

    def test_monotone_increase(self):
        traj = run_heuristic_averaging(StubProblem(), TwoScaleSettings(total_days=20.0))
        assert np.all(np.diff(traj.cs_values()) > 0)


class TestTwoScale:
    def test_micro_skips_stationary_after_first_day(self):
        stub = StubProblem(wss_start=1.2, decay=0.01)
        run_two_scale(stub, TwoScaleSettings(total_days=5.0, init_strategy=MICRO))
        assert stub.stationary_solves == 1

    def test_macro_solves_stationary_every_day(self):
        stub = StubProblem(wss_start=1.2, decay=0.01)
        run_two_scale(stub, TwoScaleSettings(total_days=5.0, init_strategy=MACRO))
        assert stub.stationary_solves == 5

    def test_stationary_every_step_override(self):
        stub = StubProblem(wss_start=1.2, decay=0.01)
        run_two_scale(stub, TwoScaleSettings(total_days=5.0, init_strategy=MICRO,
                                             stationary_every_step=True))
        assert stub.stationary_solves == 5

    def test_records_and_sample_retention(self):
        stub = StubProblem(wss_start=1.2, decay=0.01)
        traj = run_two_scale(stub, TwoScaleSettings(total_days=5.0),
                             keep_short_scale={1, 5})
        assert len(traj.records) == 5
        assert sorted(traj.short_scale_samples) == [1, 5]
        assert np.all(np.diff(traj.cs_values()) > 0)
        assert all(r.cycles_used >= 2 for r in traj.records)

    def test_coarse_long_step_scaling(self):
        stub1 = StubProblem(wss_start=0.8, decay=1e-30)
        stub10 = StubProblem(wss_start=0.8, decay=1e-30)
        t1 = run_two_scale(stub1, TwoScaleSettings(total_days=50.0, dt_days=1.0))
        t10 = run_two_scale(stub10, TwoScaleSettings(total_days=50.0, dt_days=10.0))
        # frozen geometry: identical gamma law, so the only difference is the
        # forward-Euler coarseness (measured ~6% over 50 days)
        assert t10.final_cs == pytest.approx(t1.final_cs, rel=0.10)
        assert len(t10.records) == 5

    def test_determinism(self):
        t1 = run_two_scale(StubProblem(), TwoScaleSettings(total_days=5.0))
        t2 = run_two_scale(StubProblem(), TwoScaleSettings(total_days=5.0))
        assert t1.cs_values().tolist() == t2.cs_values().tolist()
        assert t1.records[-1] == t2.records[-1]
