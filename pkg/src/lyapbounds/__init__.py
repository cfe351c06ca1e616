"""Growth-rate estimation and structural bounds for matrix products.

The package splits into matrix/mask primitives (:mod:`~lyapbounds.linalg`),
sparsity-type graphs (:mod:`~lyapbounds.shapes`), sequence sampling and
exponent estimation (:mod:`~lyapbounds.families`,
:mod:`~lyapbounds.estimators`), closed-form bounds (:mod:`~lyapbounds.bounds`),
low-rank perturbation formulas (:mod:`~lyapbounds.perturbation`), and a
batch CLI (:mod:`~lyapbounds.cli`).
"""

from .bounds import (
    BlockStructure,
    BoundReport,
    SandwichReport,
    block_triangular_reduce,
    bound_sandwich_check,
    diagonal_block_families,
    shape_bound_lower,
    shape_bound_upper,
    triangular_bounds,
    triangular_exact,
)
from .estimators import (
    AlphaPair,
    ExponentEstimate,
    RegularityReport,
    alpha_bounds,
    diagonal_exact_exponents,
    regularity_diagnostic,
    smallest_exponent_via_inverse,
    spectrum,
    top_exponent,
)
from .families import (
    MatrixFamily,
    component_families,
    finite_iid,
    sample_sequence,
    schedule,
)
from .linalg import (
    ShapeMask,
    bool_product,
    compound_matrix,
    frobenius_inner,
    frobenius_norm,
    l1_operator_norm,
    mask_and,
    mask_or,
    qr_step,
    shape_of,
    singular_values,
    spectral_radius,
)
from .perturbation import (
    PerturbationSpec,
    block_embedding_exponents,
    invariant_subspace_identity_check,
    rank_m_duality,
    rank_m_scaled_bounds,
    rank_one_scaled_bounds,
    rank_one_spectrum,
)
from .shapes import (
    ShapeGraph,
    ShapeSet,
    StructuralReport,
    analyze_structure,
    build_shape_graph,
    decompose,
    entropy_refinement,
    enumerate_nonzero_monomials,
    validate_shape_set,
)

__version__ = "0.1.0"
