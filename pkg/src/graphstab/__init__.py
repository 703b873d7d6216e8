"""Stability analysis of graph filters and graph neural networks under graph perturbations."""

from .exceptions import ConvergenceError, ParseError, TrainingError, ValidationError
from .filters import FilterBank, FilterTaps, apply_bank, apply_filter, filter_matrix
from .graph import GraphShiftOperator, Permutation, build_knn_graph, pearson_correlation
from .linalg import operator_norm, sym_eig

__all__ = [
    "ConvergenceError",
    "FilterBank",
    "FilterTaps",
    "GraphShiftOperator",
    "ParseError",
    "Permutation",
    "TrainingError",
    "ValidationError",
    "apply_bank",
    "apply_filter",
    "build_knn_graph",
    "filter_matrix",
    "operator_norm",
    "pearson_correlation",
    "sym_eig",
]

__version__ = "0.1.0"
