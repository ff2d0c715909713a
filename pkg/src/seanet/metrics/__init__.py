from ._kernels import backend
from .folder import MetricReport, aggregate, evaluate_folder, evaluate_pair
from .measures import (
    EMeasure,
    FMeasure,
    e_measure,
    f_measure,
    mae,
    normalize_prediction,
    s_measure,
)

__all__ = [
    "EMeasure",
    "FMeasure",
    "MetricReport",
    "aggregate",
    "backend",
    "e_measure",
    "evaluate_folder",
    "evaluate_pair",
    "f_measure",
    "mae",
    "normalize_prediction",
    "s_measure",
]
