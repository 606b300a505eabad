"""Dense interior-point SDP solver over Hermitian PSD cones."""

from .problem import Constraint, PresolveLog, SdpProblem, presolve
from .solver import SdpSolution, SolverOptions, Status, solve

__all__ = [
    "Constraint",
    "PresolveLog",
    "SdpProblem",
    "SdpSolution",
    "SolverOptions",
    "Status",
    "presolve",
    "solve",
]
