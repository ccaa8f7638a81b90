"""Python bindings for the hvsim simulation library."""

from pathlib import Path

from ._core import (
    ConfigError,
    NumericalError,
    __version__,
    chsh,
    correlation,
    fit_power_law,
    lapse_desync,
    lorentz_clock_reading,
    poincare_first_order,
    proper_time_flat,
    run_config,
    run_relaxation,
    run_signal,
    signal_statistic,
    transition_sets,
)
from ._core import list_experiments as _list_experiments

CONFIG_DIR = Path(__file__).parent / "configs"


def list_experiments(config_dir=None):
    """Bundled configs as (name, path, description), sorted by name."""
    return _list_experiments(Path(config_dir) if config_dir else CONFIG_DIR)


def planar(deg):
    """Unit setting in the x-z plane at `deg` degrees from +z."""
    import math

    r = math.radians(deg)
    return (math.sin(r), 0.0, math.cos(r))
