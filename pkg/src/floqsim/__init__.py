"""floqsim: matrix-free heating simulator for periodically driven spin chains."""

from .hamiltonian import (
    ModelParams,
    PauliTermSum,
    RangeKind,
    StateVector,
    apply,
    build_drive_part,
    build_local_operator,
    build_static_part,
    initial_state,
)
from .krylov import (
    KrylovConfig,
    KrylovConvergenceError,
    SampleSchedule,
    default_log_schedule,
    evolve_stroboscopic,
    evolve_under_deff,
    expm_apply,
    load_checkpoint,
    save_checkpoint,
)
from .magnus import (
    LinearMapExpr,
    OperatorWord,
    assemble_deff,
    bch_order_check,
    floquet_unitary_apply,
    magnus_words,
)
from .observables import (
    energy_density,
    entanglement_entropy,
    expectation,
    half_chain_entropy,
    make_observables,
    page_value,
)
from .timeseries import TimeSeries

__version__ = "0.1.0"

__all__ = [
    "ModelParams", "PauliTermSum", "RangeKind", "StateVector",
    "apply", "build_drive_part", "build_local_operator", "build_static_part",
    "initial_state",
    "KrylovConfig", "KrylovConvergenceError", "SampleSchedule",
    "default_log_schedule", "evolve_stroboscopic", "evolve_under_deff",
    "expm_apply", "load_checkpoint", "save_checkpoint",
    "LinearMapExpr", "OperatorWord", "assemble_deff", "bch_order_check",
    "floquet_unitary_apply", "magnus_words",
    "energy_density", "entanglement_entropy", "expectation",
    "half_chain_entropy", "make_observables", "page_value",
    "TimeSeries",
    "__version__",
]
