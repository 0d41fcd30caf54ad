"""Distributed generalized Nash equilibrium seeking in aggregative games."""

from .errors import (CertificationError, ComparisonError, ConfigError, ConnectivityError,
                     DomainError, GNEError, MonotonicityWarning, NumericalError, OracleError)
from .game import (AggregativeGame, GameConstants, cournot_instance, estimate_constants,
                   extended_pseudo_gradient, pseudo_gradient, quadratic_game)
from .graph import CommGraph, LaplacianOps, build_graph, laplacian
from .kkt import ReferenceSolution, active_set_reference, kkt_residual, solve_reference_gne
from .params import AlgorithmParams, CertificateReport, assemble_phi, certify, verify_phi_psd
from .solver import NetworkState, RunTrace, fixed_point_state, initial_state, run, step

__all__ = [
    "AggregativeGame", "AlgorithmParams", "CertificateReport", "CertificationError", "CommGraph",
    "ComparisonError", "ConfigError", "ConnectivityError", "DomainError", "GNEError",
    "GameConstants", "LaplacianOps", "MonotonicityWarning", "NetworkState", "NumericalError",
    "OracleError", "ReferenceSolution", "RunTrace", "active_set_reference", "assemble_phi",
    "build_graph", "certify", "cournot_instance", "estimate_constants", "extended_pseudo_gradient",
    "fixed_point_state", "initial_state", "kkt_residual", "laplacian", "pseudo_gradient",
    "quadratic_game", "run", "solve_reference_gne", "step", "verify_phi_psd",
]
