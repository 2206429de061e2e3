"""plaquesim: 2D monolithic FSI simulation of stenotic channel growth with
heuristic-averaging and two-scale temporal couplings."""

__version__ = "0.1.0"

from .constitutive import GrowthState, MaterialParams
from .mesh_geometry import ChannelGeometry, Mesh, build_channel_mesh, channel_width
from .fem_fsi import FsiProblem, SolverSettings, State
from .timescale import (
    LongScaleTrajectory,
    ShortScaleResult,
    TwoScaleSettings,
    run_heuristic_averaging,
    run_two_scale,
)

__all__ = [
    "ChannelGeometry",
    "FsiProblem",
    "GrowthState",
    "LongScaleTrajectory",
    "MaterialParams",
    "Mesh",
    "ShortScaleResult",
    "SolverSettings",
    "State",
    "TwoScaleSettings",
    "build_channel_mesh",
    "channel_width",
    "run_heuristic_averaging",
    "run_two_scale",
]
