"""Simulation and estimation toolkit for two-colour Hong-Ou-Mandel depth microscopy.

Modules:

* ``model``: interference probabilities and delay/thickness conversions
* ``detectors``: multiplexed detection, coincidence classification, Klyshko calibration
* ``acquisition``: Monte Carlo coincidence data with optional phase noise
* ``inference``: Fisher information, Cramer-Rao bounds, MLE delay, precision statistics
* ``scene``: synthetic samples, raster scans and precision experiments
* ``cli``: the ``homscope`` command
"""

from .errors import (
    AmbiguityError,
    CalibrationError,
    HomscopeError,
    InsufficientDataError,
    NonIdentifiableError,
    ParameterError,
    PlanningError,
)
from .model import InterferenceParams, OpticalSample, OutcomeProbabilities

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError",
    "CalibrationError",
    "HomscopeError",
    "InsufficientDataError",
    "InterferenceParams",
    "NonIdentifiableError",
    "OpticalSample",
    "OutcomeProbabilities",
    "ParameterError",
    "PlanningError",
    "__version__",
]
