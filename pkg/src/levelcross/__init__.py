"""Exact level-crossing interval distributions and persistence for stationary Gaussian processes."""
from .covmodel import CovarianceModel, catalog_codes, get_model, normalize
from .crossings import (
    Density1D,
    JointDensity2D,
    PersistenceCurve,
    interval_pdf,
    joint_interval_pdf,
    persistence_exponent,
    persistence_QT,
)
from .mvnexp import IntegralResult, MvnOptions, MvnProblem, mvn_expectation

__version__ = "0.1.0"

__all__ = [
    "CovarianceModel",
    "Density1D",
    "IntegralResult",
    "JointDensity2D",
    "MvnOptions",
    "MvnProblem",
    "PersistenceCurve",
    "catalog_codes",
    "get_model",
    "interval_pdf",
    "joint_interval_pdf",
    "mvn_expectation",
    "normalize",
    "persistence_QT",
    "persistence_exponent",
]
