"""Frequency-domain simulator of a coupled-cavity interferometer with an
optomechanical phase-insensitive amplifier."""

from .params import ExperimentParams, ValidatedParams, amplitude_coeffs, validate
from .model import (DerivedQuantities, Model, build_model, consistency_report,
                    derive, pump_off)

__version__ = "0.1.0"

__all__ = [
    "ExperimentParams", "ValidatedParams", "amplitude_coeffs", "validate",
    "DerivedQuantities", "Model", "build_model", "consistency_report",
    "derive", "pump_off", "__version__",
]
