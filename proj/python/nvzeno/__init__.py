"""NV-center relaxation under a 13C nuclear bath: cluster-correlation expansion and Zeno analysis."""

from ._core import (
    Bath,
    BathConfig,
    BudgetExceeded,
    ConfigError,
    NumericalError,
    __version__,
    anticrossing_field,
    broadening,
    cce_survival,
    config_hash,
    effective_rate,
    exact_survival,
    omega_a,
    overlap_rate,
    repeated_measurement_survival,
    run_simulation,
    sample_bath,
    spectral_weights,
    uniform_grid,
)

__all__ = [
    "Bath",
    "BathConfig",
    "BudgetExceeded",
    "ConfigError",
    "NumericalError",
    "__version__",
    "anticrossing_field",
    "broadening",
    "cce_survival",
    "config_hash",
    "effective_rate",
    "exact_survival",
    "omega_a",
    "overlap_rate",
    "repeated_measurement_survival",
    "run_simulation",
    "sample_bath",
    "spectral_weights",
    "uniform_grid",
]
