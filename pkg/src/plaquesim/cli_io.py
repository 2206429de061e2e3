"""Configuration parsing, the command-line driver, CSV and plot emission.

Config files use a sectioned ``key = value`` grammar (see README); every
key has a default equal to the reference experiment's values, unknown keys
are rejected with their line number. All outputs are deterministic: floats
are written with repr (shortest round-trip), so repeated sequential runs
produce byte-identical CSV files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .constitutive import SECONDS_PER_DAY, MaterialParams, growth_rate
from .errors import ConfigurationError, NonconvergenceError, PeriodicityError
from .fem_fsi import FsiProblem, SolverSettings
from .mesh_geometry import ChannelGeometry, build_channel_mesh
from .reduced_oracle import SurrogateConfig, surrogate_two_scale
from .timescale import (
    LongScaleTrajectory,
    ShortScaleResult,
    TwoScaleSettings,
    run_heuristic_averaging,
    run_two_scale,
)

log = logging.getLogger(__name__)

ALGORITHMS = ("averaging", "two-scale", "both", "surrogate")

LONG_SCALE_HEADER = "day,c_s,gamma_bar_per_day,width_cm,cycles_used,algorithm"
SHORT_SCALE_HEADER = "t_s,wss,gamma_per_day"


@dataclass
class MeshConfig:
    nx: int = 20
    ny_fluid: int = 4
    ny_solid: int = 4
    degree: int = 2

    def __post_init__(self):
        if min(self.nx, self.ny_fluid, self.ny_solid) < 1:
            raise ConfigurationError("mesh subdivisions must be >= 1")
        if self.degree < 1:
            raise ConfigurationError("degree must be >= 1")


@dataclass
class RunOptions:
    algorithm: str = "both"
    output_dir: str = "out"
    dump_fields: bool = False
    emit_plots: bool = False
    short_scale_days: str = "first,last"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"algorithm must be one of {', '.join(ALGORITHMS)}")
        _parse_day_list(self.short_scale_days, 1)  # validate grammar


@dataclass
class RunConfig:
    """Complete, fully-defaulted run description."""

    params: MaterialParams = field(default_factory=MaterialParams)
    geometry: ChannelGeometry = field(default_factory=ChannelGeometry)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    timescale: TwoScaleSettings = field(default_factory=TwoScaleSettings)
    run: RunOptions = field(default_factory=RunOptions)


# (section, key) -> (config attribute path, type)
_SCHEMA = {
    "fluid": {"rho_f": float, "nu_f": float},
    "solid": {"rho_s": float, "mu_s": float, "lambda_s": float},
    "growth": {"sigma_0": float, "alpha_per_day": float},
    "geometry": {"length": float, "fluid_half_height": float, "wall_thickness": float},
    "mesh": {"nx": int, "ny_fluid": int, "ny_solid": int, "degree": int},
    "solver": {
        "newton_tol": float, "newton_max_iter": int, "theta": float,
        "lps_delta0": float, "pseudo_time_continuation": bool,
        "line_search": bool, "stall_tol": float, "ale_kappa_x": float,
        "transient_jacobian_reuse": bool, "backflow_beta": float,
        "conv_delta0": float, "backflow_eps": float,
    },
    "timescale": {
        "dt_days": float, "dtau": float, "period": float, "eps_p": float,
        "eps_p_relative": bool, "max_cycles": int, "init_strategy": str,
        "total_days": float, "stationary_every_step": bool,
    },
    "run": {
        "algorithm": str, "output_dir": str, "dump_fields": bool,
        "emit_plots": bool, "short_scale_days": str,
    },
}


def _parse_scalar(raw: str, typ, key: str, line: int):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigurationError(f"invalid value for {key!r} (line {line}): {exc}")


def _parse_day_list(text: str, n_days: int) -> list:
    """'first,last' / explicit day numbers -> sorted unique day list."""
    days = set()
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if token == "first":
            days.add(1)
        elif token == "last":
            days.add(max(1, int(n_days)))
        else:
            try:
                days.add(int(token))
            except ValueError:
                raise ConfigurationError(
                    f"invalid short_scale_days entry {token!r}")
    return sorted(days)


def parse_config(text: str) -> RunConfig:
    """Parse the sectioned key = value grammar into a RunConfig.

    Unknown sections or keys, unparsable values and violated invariants
    raise ConfigurationError naming the key and line.
    """
    values: dict = {}
    lines_of: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigurationError(f"unknown section {section!r} (line {lineno})")
            continue
        if "=" not in line:
            raise ConfigurationError(f"expected 'key = value' (line {lineno})")
        if section is None:
            raise ConfigurationError(f"key outside of any section (line {lineno})")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA[section]:
            raise ConfigurationError(f"unknown key {key!r} (line {lineno})")
        values[(section, key)] = _parse_scalar(raw_value, _SCHEMA[section][key],
                                               key, lineno)
        lines_of[(section, key)] = lineno

    def build(section: str, ctor, rename=None):
        kwargs = {}
        for key in _SCHEMA[section]:
            if (section, key) in values:
                kwargs[(rename or {}).get(key, key)] = values[(section, key)]
        try:
            return ctor(**kwargs)
        except ConfigurationError as exc:
            keys = ", ".join(f"{k} (line {lines_of[(section, k)]})"
                             for (s, k) in values if s == section) or section
            raise ConfigurationError(f"{exc} [from {keys}]")

    material_kwargs = {}
    for sec in ("fluid", "solid", "growth"):
        for key in _SCHEMA[sec]:
            if (sec, key) in values:
                material_kwargs[key] = values[(sec, key)]
    alpha_per_day = material_kwargs.pop("alpha_per_day", None)
    try:
        if alpha_per_day is not None:
            params = MaterialParams.with_alpha_per_day(alpha_per_day, **material_kwargs)
        else:
            params = MaterialParams(**material_kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{exc} [growth/fluid/solid sections]")

    return RunConfig(
        params=params,
        geometry=build("geometry", ChannelGeometry),
        mesh=build("mesh", MeshConfig),
        solver=build("solver", SolverSettings),
        timescale=build("timescale", TwoScaleSettings),
        run=build("run", RunOptions),
    )


def serialize_config(config: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    p = config.params
    parts = {
        "fluid": {"rho_f": p.rho_f, "nu_f": p.nu_f},
        "solid": {"rho_s": p.rho_s, "mu_s": p.mu_s, "lambda_s": p.lambda_s},
        "growth": {"sigma_0": p.sigma_0, "alpha_per_day": p.alpha_per_day},
        "geometry": {k: getattr(config.geometry, k) for k in _SCHEMA["geometry"]},
        "mesh": {k: getattr(config.mesh, k) for k in _SCHEMA["mesh"]},
        "solver": {k: getattr(config.solver, k) for k in _SCHEMA["solver"]},
        "timescale": {k: getattr(config.timescale, k) for k in _SCHEMA["timescale"]},
        "run": {k: getattr(config.run, k) for k in _SCHEMA["run"]},
    }
    out = []
    for section, kv in parts.items():
        out.append(f"[{section}]")
        for key, value in kv.items():
            out.append(f"{key} = {value!r}" if isinstance(value, float)
                       else f"{key} = {value}")
        out.append("")
    return "\n".join(out)


# ----------------------------------------------------------------------
# CSV emission
# ----------------------------------------------------------------------
def _fmt(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        raise NonconvergenceError("refusing to write non-finite value to CSV")
    return repr(x)


def write_long_scale_csv(traj: LongScaleTrajectory, path) -> None:
    rows = [LONG_SCALE_HEADER]
    for r in traj.records:
        rows.append(",".join([
            _fmt(r.day), _fmt(r.c_s), _fmt(r.gamma_bar_per_day),
            _fmt(r.width_cm), str(int(r.cycles_used)), traj.algorithm,
        ]))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_short_scale_csv(short: ShortScaleResult, dtau: float, c_s: float,
                          params: MaterialParams, path) -> None:
    rows = [SHORT_SCALE_HEADER]
    for m, wss in enumerate(short.wss_series, start=1):
        gamma = float(growth_rate(wss, c_s, params)) * SECONDS_PER_DAY
        rows.append(",".join([_fmt(m * dtau), _fmt(wss), _fmt(gamma)]))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


# ----------------------------------------------------------------------
# plots
# ----------------------------------------------------------------------
def emit_plots(trajectories: list, short_samples: dict, out_dir) -> list:
    """Write the four overview panels as self-contained SVG files.

    trajectories: LongScaleTrajectory list (>= 1); short_samples: mapping
    day -> ShortScaleResult (may be empty: the short-scale panels then carry
    an explicit no-data annotation). Returns the written paths.
    """
    if not trajectories:
        raise ConfigurationError("emit_plots needs at least one trajectory")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def save(fig, name):
        path = out_dir / name
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.4))
    for traj in trajectories:
        ax.plot(traj.days(), [r.gamma_bar_per_day for r in traj.records],
                label=traj.label or traj.algorithm)
    ax.set_xlabel("day")
    ax.set_ylabel("averaged growth rate (1/day)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    save(fig, "growth_rate.svg")

    fig, ax = plt.subplots(figsize=(5, 3.4))
    for traj in trajectories:
        ax.plot(traj.days(), traj.widths(), label=traj.label or traj.algorithm)
    ax.set_xlabel("day")
    ax.set_ylabel("channel width (cm)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    save(fig, "channel_width.svg")

    fig, ax = plt.subplots(figsize=(5, 3.4))
    any_cycles = False
    for traj in trajectories:
        cycles = [r.cycles_used for r in traj.records]
        if any(c > 0 for c in cycles):
            ax.step(traj.days(), cycles, where="mid",
                    label=traj.label or traj.algorithm)
            any_cycles = True
    if any_cycles:
        ax.legend(fontsize=7)
        ax.set_ylabel("heartbeats to periodicity")
    else:
        ax.annotate("no short-scale data", (0.5, 0.5),
                    xycoords="axes fraction", ha="center")
    ax.set_xlabel("day")
    fig.tight_layout()
    save(fig, "short_scale_cycles.svg")

    fig, ax = plt.subplots(figsize=(5, 3.4))
    if short_samples:
        for day, short in sorted(short_samples.items()):
            t = (np.arange(1, short.wss_series.size + 1)
                 / short.wss_series.size)
            ax.plot(t, short.wss_series, label=f"day {day}")
        ax.set_ylabel("wall shear functional")
        ax.legend(fontsize=7)
    else:
        ax.annotate("no short-scale data", (0.5, 0.5),
                    xycoords="axes fraction", ha="center")
    ax.set_xlabel("time within heartbeat (s)")
    fig.tight_layout()
    save(fig, "short_scale_wss.svg")
    return written


# ----------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------
def _build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plaquesim",
        description="Channel-stenosis FSI growth simulation: heuristic "
                    "averaging vs two-scale temporal coupling.")
    ap.add_argument("--config", type=Path, help="config file (sectioned key = value)")
    ap.add_argument("--algorithm", choices=ALGORITHMS)
    ap.add_argument("--init-strategy", choices=("micro", "macro"), dest="init_strategy")
    ap.add_argument("--days", type=float, help="total_days override")
    ap.add_argument("--dt-days", type=float, dest="dt_days")
    ap.add_argument("--eps-p", type=float, dest="eps_p")
    ap.add_argument("--out", type=Path, help="output directory "
                    "(default: config value or $PLAQUESIM_OUT)")
    ap.add_argument("--dump-fields", action="store_true", dest="dump_fields")
    ap.add_argument("--emit-plots", action="store_true", dest="emit_plots")
    return ap


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    ts_over = {}
    if args.days is not None:
        ts_over["total_days"] = args.days
    if args.dt_days is not None:
        ts_over["dt_days"] = args.dt_days
    if args.eps_p is not None:
        ts_over["eps_p"] = args.eps_p
    if args.init_strategy is not None:
        ts_over["init_strategy"] = args.init_strategy
    if ts_over:
        config = replace(config, timescale=replace(config.timescale, **ts_over))
    run_over = {}
    if args.algorithm is not None:
        run_over["algorithm"] = args.algorithm
    out_dir = args.out or os.environ.get("PLAQUESIM_OUT")
    if out_dir:
        run_over["output_dir"] = str(out_dir)
    if args.dump_fields:
        run_over["dump_fields"] = True
    if args.emit_plots:
        run_over["emit_plots"] = True
    if run_over:
        config = replace(config, run=replace(config.run, **run_over))
    return config


def _run_drivers(config: RunConfig, out_dir: Path) -> None:
    ts = config.timescale
    trajectories = []
    short_samples: dict = {}

    if config.run.algorithm == "surrogate":
        avg, two = surrogate_two_scale(SurrogateConfig(params=config.params),
                                       ts)
        for traj in (avg, two):
            write_long_scale_csv(traj, out_dir / f"long_scale_{traj.algorithm}.csv")
            trajectories.append(traj)
    else:
        mesh = build_channel_mesh(config.geometry, config.mesh.nx,
                                  config.mesh.ny_fluid, config.mesh.ny_solid)
        problem = FsiProblem(mesh, config.params, config.solver,
                             degree=config.mesh.degree)
        dump_dir = out_dir if config.run.dump_fields else None
        if config.run.algorithm in ("averaging", "both"):
            traj = run_heuristic_averaging(problem, ts)
            write_long_scale_csv(traj, out_dir / "long_scale_averaging.csv")
            trajectories.append(traj)
        if config.run.algorithm in ("two-scale", "both"):
            keep = set(_parse_day_list(config.run.short_scale_days,
                                       ts.n_long_steps() * ts.dt_days))
            traj = run_two_scale(problem, ts, keep_short_scale=keep,
                                 field_dump_dir=dump_dir)
            write_long_scale_csv(traj, out_dir / "long_scale_two-scale.csv")
            for day, short in traj.short_scale_samples.items():
                write_short_scale_csv(short, ts.dtau, short.c_s, config.params,
                                      out_dir / f"short_scale_day{day}.csv")
            trajectories.append(traj)
            short_samples = traj.short_scale_samples

    if config.run.emit_plots:
        emit_plots(trajectories, short_samples, out_dir)


def run_cli(argv=None) -> int:
    """Entry point: returns 0 on success, 1 on configuration errors, 2 on
    solver nonconvergence; errors are also written to the run log."""
    args = _build_arg_parser().parse_args(argv)
    handler = None
    root = logging.getLogger("plaquesim")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        config = _apply_overrides(parse_config(text), args)

        out_dir = Path(config.run.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(out_dir / "run.log", mode="w", encoding="utf-8")
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        root.addHandler(handler)
        root.setLevel(logging.INFO)

        (out_dir / "effective_config.cfg").write_text(serialize_config(config),
                                                      encoding="utf-8")
        log.info("alpha = %r /day = %r /s", config.params.alpha_per_day,
                 config.params.alpha)
        _run_drivers(config, out_dir)
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        log.error("configuration error: %s", exc)
        return 1
    except (NonconvergenceError, PeriodicityError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        log.error("solver failure: %s", exc)
        return 2
    finally:
        if handler is not None:
            root.removeHandler(handler)
            handler.close()


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
