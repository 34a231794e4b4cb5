"""Movable-tile hybrid beamforming for wideband near-field downlink."""
from .analog import AnalogPrecoder, Assignment, assign_users, average_gain, conjugate_steering, gain_profile
from .baselines import Scenario, fpa_pipeline, hsc_hbf_pipeline, ttd_analog, ttd_delays, ttd_gain_profile, ttd_pipeline
from .channel import C0, ChannelSet, UserGeometry, Waveband, channel_set, path_length, steering_vector
from .config import ScenarioConfig, load_config, shipped_config
from .digital import sinr, spectral_efficiency, wmmse, wmmse_batch
from .exceptions import (
    ConfigurationError,
    InfeasibleBoxError,
    LayoutError,
    SingularityError,
    SquintlabError,
    SubproblemError,
)
from .geometry import ArrayLayout, IntraTileLayout, element_positions, nominal_layout, tile_pitch, validate_layout
from .layout_optimizer import SCAConfig, optimize_layout, optimize_panel
from .subproblem import HalfPlane, SurrogateModel, solve_tile_subproblem

__version__ = "0.1.0"

__all__ = [
    "AnalogPrecoder", "ArrayLayout", "Assignment", "C0", "ChannelSet", "ConfigurationError", "HalfPlane",
    "InfeasibleBoxError", "IntraTileLayout", "LayoutError", "SCAConfig", "Scenario", "ScenarioConfig",
    "SingularityError", "SquintlabError", "SubproblemError", "SurrogateModel", "UserGeometry", "Waveband",
    "assign_users", "average_gain", "channel_set", "conjugate_steering", "element_positions", "fpa_pipeline",
    "gain_profile", "hsc_hbf_pipeline", "load_config", "nominal_layout", "optimize_layout", "optimize_panel",
    "path_length", "shipped_config", "sinr", "solve_tile_subproblem", "spectral_efficiency", "steering_vector",
    "tile_pitch", "ttd_analog", "ttd_delays", "ttd_gain_profile", "ttd_pipeline", "validate_layout", "wmmse",
    "wmmse_batch",
]
