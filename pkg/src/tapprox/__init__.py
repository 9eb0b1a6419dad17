"""Best subspace approximations of dense real 3-tensors.

Two complementary routes to a low-multilinear-rank picture of a tensor:

* :mod:`tapprox.bsta` -- alternating relaxation over subspace triples,
  converging to certified critical points of the projection objective;
* :mod:`tapprox.flrta` -- fiber sampling: interpolate the tensor from a
  few of its sections, no optimization involved.

Shared storage and multilinear primitives live in
:mod:`tapprox.tensor_core` and :mod:`tapprox.subspace`; the ``tapprox``
command wraps everything for files on disk.
"""
from .bsta import (
    BstaOptions,
    BstaResult,
    bsta_solve,
    hosvd_init,
    matrix_bsta,
    matrix_bsta_fixed_factor,
    projected_operator,
    random_triple,
    relaxation_sweep,
    verify_critical_point,
)
from .flrta import (
    IndexSelection,
    SelectionError,
    TuckerFactorization,
    fit_core_cross,
    fit_core_full,
    flrta_approx,
    pinv,
    sections,
    select_indices,
    slice_cross,
)
from .subspace import (
    Subspace,
    SubspaceTriple,
    coefficient_tensor,
    distance,
    project,
    subspace_from_columns,
)
from .tensor_core import (
    DenseTensor3,
    fold,
    hs_inner,
    hs_norm,
    mode_multiply,
    mode_rank,
    multilinear_rank,
    unfold,
)

__version__ = "0.1.0"

__all__ = [
    "BstaOptions",
    "BstaResult",
    "DenseTensor3",
    "IndexSelection",
    "SelectionError",
    "Subspace",
    "SubspaceTriple",
    "TuckerFactorization",
    "bsta_solve",
    "coefficient_tensor",
    "distance",
    "fit_core_cross",
    "fit_core_full",
    "flrta_approx",
    "fold",
    "hosvd_init",
    "hs_inner",
    "hs_norm",
    "matrix_bsta",
    "matrix_bsta_fixed_factor",
    "mode_multiply",
    "mode_rank",
    "multilinear_rank",
    "pinv",
    "project",
    "projected_operator",
    "random_triple",
    "relaxation_sweep",
    "sections",
    "select_indices",
    "slice_cross",
    "subspace_from_columns",
    "unfold",
    "verify_critical_point",
]
