"""Network topology and dynamics reconstruction from compressed mean-field measurements."""

from mfrecon.errors import (
    InvalidLevelSetError,
    MfreconError,
    ParameterError,
    RankDeficiencyError,
    UnsupportedSizeError,
)
from mfrecon.graph import (
    Graph,
    adjacency_from_level_sets,
    generate_er,
    level_set,
    max_out_degree,
)
from mfrecon.dynamics import (
    NetworkSystem,
    StateVector,
    Trajectory,
    pinch_initial,
    simulate_pinched_family,
    step,
)
from mfrecon.measurement import (
    MeasurementMatrix,
    gaussian_matrix,
    is_full_spark,
    measure,
    rip_constant_exact,
    spark,
)
from mfrecon.recovery import (
    RecoveryConfig,
    RecoveryResult,
    basis_pursuit,
    basis_pursuit_denoise,
    l0_oracle,
    threshold_support,
)
from mfrecon.metrics import contingency, cumulative_mcc, mcc
from mfrecon.topology import critical_measurement_search, evaluate_reconstruction, reconstruct_topology
from mfrecon.identification import fit_coefficients, sparse_regression

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "InvalidLevelSetError",
    "MeasurementMatrix",
    "MfreconError",
    "NetworkSystem",
    "ParameterError",
    "RankDeficiencyError",
    "RecoveryConfig",
    "RecoveryResult",
    "StateVector",
    "Trajectory",
    "UnsupportedSizeError",
    "adjacency_from_level_sets",
    "basis_pursuit",
    "basis_pursuit_denoise",
    "contingency",
    "critical_measurement_search",
    "cumulative_mcc",
    "evaluate_reconstruction",
    "fit_coefficients",
    "gaussian_matrix",
    "generate_er",
    "is_full_spark",
    "l0_oracle",
    "level_set",
    "max_out_degree",
    "mcc",
    "measure",
    "pinch_initial",
    "reconstruct_topology",
    "rip_constant_exact",
    "simulate_pinched_family",
    "spark",
    "sparse_regression",
    "step",
    "threshold_support",
]
