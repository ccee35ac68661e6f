"""gatefit: matrix-free Riemannian trust-region optimization of two-qubit
circuit gates against a target unitary time-evolution operator."""

from .circuit import (
    BrickwallMeta,
    Circuit,
    GateSlot,
    accumulate_shared,
    build_brickwall,
    circuit_apply,
    load_circuit,
    save_circuit,
    translation_classes,
)
from .kernels import (
    Gate,
    apply_gate,
    apply_gate_to_array,
    basis_state,
    hole_apply,
    hole_contract,
    hole_contract_array,
)
from .models import (
    HamiltonianSpec,
    TrotterPlan,
    build_spinful_fh,
    build_spinless_fh,
    build_trotter_circuit,
    dense_hamiltonian,
    hamiltonian_apply,
    make_oracle,
    trotter_gate,
)
from .objective import (
    HessianBlocks,
    ObjectiveReport,
    PassCache,
    frobenius_error_squared,
    full_gradient,
    full_hessian,
    hessian_vector_product,
    parallel_reduce,
    summand_gradient,
    target_value,
)
from .optimizer import (
    OptimizationTrace,
    TcgParams,
    TrustRegionParams,
    truncated_cg,
    trust_region_optimize,
)

__version__ = "0.1.0"
