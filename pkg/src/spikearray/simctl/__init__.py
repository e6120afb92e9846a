"""Configuration, presets, orchestration and output for the emulator engines."""

from .config import FORMAT_VERSION, NetworkConfig, load_config
from .energy import PROFILES, EnergyTable, energy_estimate, resolve_profile
from .output import emit_raster, emit_stats
from .presets import build_wta_preset, run_wta
from .runner import RunArtifacts, SimulationError, bench, run_simulation, sweep

__all__ = [
    "FORMAT_VERSION", "NetworkConfig", "load_config", "PROFILES", "EnergyTable", "energy_estimate",
    "resolve_profile", "emit_raster", "emit_stats", "build_wta_preset", "run_wta", "RunArtifacts",
    "SimulationError", "bench", "run_simulation", "sweep",
]
