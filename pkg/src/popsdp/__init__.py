"""Moment/SOS relaxations of polynomial optimization problems."""

from .certificates import (
    BoundReport,
    SosCertificate,
    Verdict,
    extract_minimizer,
    extract_sos_certificate,
    strong_duality_verdict,
    trace_bound_check,
)
from .polynomial import Polynomial
from .pop import Pop, add_ball_constraint, check_feasible, lift_point, scale_to_unit_ball
from .relaxation import BlockSdp, assemble, basis, localizing_structure, moment_matrices
from .sdp import SdpSolution, SolverOptions, Status, residuals, solve

__all__ = [
    "BlockSdp",
    "BoundReport",
    "Pop",
    "Polynomial",
    "SdpSolution",
    "SolverOptions",
    "SosCertificate",
    "Status",
    "Verdict",
    "add_ball_constraint",
    "assemble",
    "basis",
    "check_feasible",
    "extract_minimizer",
    "extract_sos_certificate",
    "lift_point",
    "localizing_structure",
    "moment_matrices",
    "residuals",
    "scale_to_unit_ball",
    "solve",
    "strong_duality_verdict",
    "trace_bound_check",
]
