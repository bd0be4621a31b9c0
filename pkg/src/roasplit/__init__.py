"""Outer approximations of finite-time regions of attraction.

Certificate programs for controlled polynomial systems are split over an
axis-aligned partition of the state box and a time grid, compiled to
standard-form semidefinite programs, solved, and turned into piecewise
polynomial membership certificates and volume estimates.
"""

__version__ = "0.1.0"

from .analysis import (
    RoaCertificate,
    VolumeEstimate,
    brockett_min_time,
    member_v,
    member_w,
    oracle_member,
    simulate,
    volume,
)
from .compiler import (
    CompileError,
    DecisionLayout,
    SdpProblem,
    compile_problem,
    compile_unsplit,
    extract_solution,
    problem_size,
)
from .estimator import RoaEstimator
from .geom import Cell, Facet, SemialgebraicSet, TimeGrid, halving_split_sequence, neighbor_facets, split_box
from .poly import Monomial, MomentVector, Polynomial, box_moments, monomial_basis, parse_polynomial
from .problem import ControlSystem, RoaProblem, builtin_problem, lie_derivative, load_problem_toml
from .solver import SolveOptions, SolveReport, solve

__all__ = [
    "RoaCertificate",
    "VolumeEstimate",
    "brockett_min_time",
    "member_v",
    "member_w",
    "oracle_member",
    "simulate",
    "volume",
    "CompileError",
    "DecisionLayout",
    "SdpProblem",
    "compile_problem",
    "compile_unsplit",
    "extract_solution",
    "problem_size",
    "RoaEstimator",
    "Cell",
    "Facet",
    "SemialgebraicSet",
    "TimeGrid",
    "halving_split_sequence",
    "neighbor_facets",
    "split_box",
    "Monomial",
    "MomentVector",
    "Polynomial",
    "box_moments",
    "monomial_basis",
    "parse_polynomial",
    "ControlSystem",
    "RoaProblem",
    "builtin_problem",
    "lie_derivative",
    "load_problem_toml",
    "SolveOptions",
    "SolveReport",
    "solve",
]
