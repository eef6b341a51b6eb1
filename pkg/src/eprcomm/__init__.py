"""Gaussian-state simulation of message transfer over EPR-correlated beams."""

from .errors import (
    AboveThreshold,
    ConfigError,
    EprCommError,
    Infeasible,
    InvalidArgument,
    SnrUndefined,
    UnphysicalState,
)
from .gaussian import GaussianState, SampleBatch, derive_seed
from .nopa import NopaParams, SnrReport, SpectraSet, db, spectra, transfer_coefficients, undb
from .protocol import MessageConfig, PhotocurrentRecord, SpectralEstimate
from .adversary import DisturbanceReport, EveStrategy
from .keyexchange import SessionReport, run_session

__version__ = "0.1.0"

__all__ = [
    "AboveThreshold",
    "ConfigError",
    "DisturbanceReport",
    "EprCommError",
    "EveStrategy",
    "GaussianState",
    "Infeasible",
    "InvalidArgument",
    "MessageConfig",
    "NopaParams",
    "PhotocurrentRecord",
    "SampleBatch",
    "SessionReport",
    "SnrReport",
    "SnrUndefined",
    "SpectraSet",
    "SpectralEstimate",
    "UnphysicalState",
    "db",
    "derive_seed",
    "run_session",
    "spectra",
    "transfer_coefficients",
    "undb",
]
