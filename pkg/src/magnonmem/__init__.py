"""Simulation of microwave storage in a cavity coupled to a frequency-graded magnon comb."""

__version__ = "0.1.0"

from .errors import GridTooCoarseError, IntegrationError, NumericalError, PoleError, ValidationError  # noqa: E402
from .model import (  # noqa: E402
    MHZ,
    CavityMode,
    MagnonMode,
    SystemConfig,
    build_gradient_system,
    collective_basis,
    experiment_config,
    feasibility_check,
)
from .spectrum import critical_kappa, reflection, reflection_trace  # noqa: E402
from .dynamics import DriveSpec, Pulse, TimeTrace, exact_oracle, integrate, kernel_integrate  # noqa: E402
from .memory import efficiency_closed_form, measure_efficiency  # noqa: E402

__all__ = [
    "__version__",
    "ValidationError",
    "NumericalError",
    "PoleError",
    "GridTooCoarseError",
    "IntegrationError",
    "MHZ",
    "CavityMode",
    "MagnonMode",
    "SystemConfig",
    "build_gradient_system",
    "collective_basis",
    "experiment_config",
    "feasibility_check",
    "critical_kappa",
    "reflection",
    "reflection_trace",
    "DriveSpec",
    "Pulse",
    "TimeTrace",
    "integrate",
    "exact_oracle",
    "kernel_integrate",
    "efficiency_closed_form",
    "measure_efficiency",
]
