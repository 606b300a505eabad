"""Compatibility structures of quantum measurements: SDP witnesses and noise robustness."""

__version__ = "0.1.0"

from .linalg import HermitianOperator, NumericalFailure, hermitian_eig, is_psd, min_eigenvalue
from .quantum import (
    Assembly,
    Ensemble,
    Ket,
    Measurement,
    depolarize,
    mub_assembly,
    mub_bases,
    pauli_assembly,
)
from .structures import (
    CompatPattern,
    StructureError,
    StructureSpec,
    full_pattern,
    pairwise_patterns,
    parse_structure,
    pin,
)
from .witness import (
    RobustnessReport,
    SolverFailure,
    Verdict,
    busch_pair_oracle,
    full_compat_robustness,
    genuine_robustness,
    mub_bound,
    pairwise_robustness,
    structure_robustness,
)
from .qsd import QsdReport, witness_w2
from .simulation import CountRecord, NoiseModel, estimate_hyperplane, fidelity_report, simulate_counts

__all__ = [
    "Assembly", "CompatPattern", "CountRecord", "Ensemble", "HermitianOperator", "Ket", "Measurement",
    "NoiseModel", "NumericalFailure", "QsdReport", "RobustnessReport", "SolverFailure", "StructureError",
    "StructureSpec", "Verdict", "busch_pair_oracle", "depolarize", "estimate_hyperplane", "fidelity_report",
    "full_compat_robustness", "full_pattern", "genuine_robustness", "hermitian_eig", "is_psd",
    "min_eigenvalue", "mub_assembly", "mub_bases", "mub_bound", "pairwise_patterns", "pairwise_robustness",
    "parse_structure", "pauli_assembly", "pin", "simulate_counts", "structure_robustness", "witness_w2",
]
