"""Max-k-Cut through a probability-simplex relaxation.

The relaxed problem is optimised either by entropic mirror descent or by a
small message-passing network trained on the instance (optionally warm
started from a pre-trained model); a discrete cut is then decoded by
independent categorical sampling of each node's column.
"""
from .graph import (
    IntegerAssignment,
    WeightedGraph,
    cut_value,
    generate_random_regular,
    parse_dimacs_color,
    parse_edge_list,
    parse_gset,
    perturb_weights,
    serialize_gset,
)
from .relax import AssignmentMatrix, cut_from_objective, gradient_f, objective_f
from .sampling import SampleConfig, expected_objective, sample_best_of, sample_once

__all__ = [
    "AssignmentMatrix",
    "IntegerAssignment",
    "SampleConfig",
    "WeightedGraph",
    "cut_from_objective",
    "cut_value",
    "expected_objective",
    "generate_random_regular",
    "gradient_f",
    "objective_f",
    "parse_dimacs_color",
    "parse_edge_list",
    "parse_gset",
    "perturb_weights",
    "sample_best_of",
    "sample_once",
    "serialize_gset",
]
