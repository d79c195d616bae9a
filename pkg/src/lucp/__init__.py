"""Local unitary equivalence of multipartite states via coefficient tensors and CP decompositions."""

from .bloch import (
    BlochTensor,
    DensityMatrix,
    InvalidStateError,
    basis_generators,
    checked_density,
    extract_coefficient_tensor,
    reconstruct_density,
    subtensor,
    subtensor_keys,
    validate_density,
)
from .cp import (
    AlsConfig,
    CPDecomposition,
    FitResult,
    cp_als,
    cp_als_orthogonal,
    cp_canonicalize,
    cp_loss,
    cp_reconstruct,
    estimate_rank,
    kruskal_check,
)
from .lu import (
    Alignment,
    CheckConfig,
    Decision,
    InvariantReport,
    LocalUnitary,
    Verdict,
    adjoint_rotation,
    apply_local_unitary,
    block_extend,
    check_lu_equivalence,
    compute_invariants,
    factor_family,
    gram_criteria,
    random_density,
    random_local_unitary,
    screen_invariants,
    solve_orthogonal_alignment,
)
from .tensor import (
    fold,
    frobenius_norm,
    hadamard,
    k_rank,
    khatri_rao,
    kronecker,
    matricize,
    mode_product,
    multilinear_apply,
    outer_product,
)

__version__ = "0.1.0"
