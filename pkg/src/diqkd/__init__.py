"""Device-independent QKD with a local Bell test: simulator and finite-key calculator."""

from .security import (
    EpsilonBudget,
    InfeasibleError,
    ProtocolParams,
    SecurityReport,
    asymptotic_fraction,
    key_length,
    min_transmission,
    sweep_eta,
)

__version__ = "0.1.0"

__all__ = [
    "EpsilonBudget",
    "InfeasibleError",
    "ProtocolParams",
    "SecurityReport",
    "asymptotic_fraction",
    "key_length",
    "min_transmission",
    "sweep_eta",
]
