"""Lower bounds on the quantum Fisher information from measured data.

The package turns expectation values (state fidelities or collective
spin moments) into certified lower bounds on the quantum Fisher
information via the Legendre transform of its convex roof.  The core
engine (:mod:`qfibound.bound`) maximizes the concave dual objective in
the constraint multipliers; closed forms and cross-checks live in
:mod:`qfibound.analytic`; the experiment pipelines and record formats
in :mod:`qfibound.experiments`; the command-line front end in
:mod:`qfibound.cli`.
"""

from .analytic import (
    BoundaryPoint,
    JxReductionCase,
    JxReductionReport,
    ScalingPoint,
    archetype_bound,
    boundary_scan,
    check_jx_reduction,
    dicke_scaling_scan,
    dicke_threshold,
    ghz_bound,
    ghz_legendre_closed,
)
from .bound import (
    BoundProblem,
    BoundResult,
    Constraint,
    OptimizerSettings,
    exact_qfi,
    lower_bound_multi,
    lower_bound_single,
)
from .errors import CapacityError, InfeasibleError, ValidationFailure
from .experiments import (
    ExperimentRecord,
    RecordResult,
    ScalingRun,
    bound_from_fidelity,
    dicke_extrapolation,
    entanglement_depth,
    evaluate_record,
    load_records,
    parse_records,
    scale_squeezing,
    squeezing_convergence,
    symmetrize_moments,
)
from .linalg import BandedHermitian, DensityMatrix, HermitianOperator, StateVector
from .spin import (
    CollectiveSpinSet,
    Representation,
    build_collective,
    dicke_state,
    full_representation,
    ghz_state,
    polarized_y_state,
    projector,
    symmetric_representation,
)

__all__ = [
    "BandedHermitian",
    "BoundProblem",
    "BoundResult",
    "BoundaryPoint",
    "CapacityError",
    "CollectiveSpinSet",
    "Constraint",
    "DensityMatrix",
    "ExperimentRecord",
    "HermitianOperator",
    "InfeasibleError",
    "JxReductionCase",
    "JxReductionReport",
    "OptimizerSettings",
    "RecordResult",
    "Representation",
    "ScalingPoint",
    "ScalingRun",
    "StateVector",
    "ValidationFailure",
    "archetype_bound",
    "bound_from_fidelity",
    "boundary_scan",
    "build_collective",
    "check_jx_reduction",
    "dicke_extrapolation",
    "dicke_scaling_scan",
    "dicke_state",
    "dicke_threshold",
    "entanglement_depth",
    "evaluate_record",
    "exact_qfi",
    "full_representation",
    "ghz_bound",
    "ghz_legendre_closed",
    "ghz_state",
    "load_records",
    "lower_bound_multi",
    "lower_bound_single",
    "parse_records",
    "polarized_y_state",
    "projector",
    "scale_squeezing",
    "squeezing_convergence",
    "symmetric_representation",
    "symmetrize_moments",
]
