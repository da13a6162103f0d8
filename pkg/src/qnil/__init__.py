"""Joint local quasinilpotence of operator tuples and the invariant subspaces it yields."""

__version__ = "0.1.0"

__all__ = [
    "CoordVector", "basis_vector", "coord_functional", "dominating_coordinate", "in_cone", "vec_norm",
    "OperatorTuple", "WeightSpec", "compose", "identity", "make_backward_shift", "make_forward_shift",
    "matrix", "op_sum", "paper_pair", "scaled",
    "certify_joint", "jsr_estimate", "local_radius_sequence", "polynomial_radius",
    "uniform_joint_sequence", "word_radius_sequence",
    "OrbitGenParams", "common_invariant_subspace", "corollary_subspace", "kernel_intersection",
    "weighted_invariant_subspace",
]

from .coordspace import (  # noqa: E402
    CoordVector,
    basis_vector,
    coord_functional,
    dominating_coordinate,
    in_cone,
    vec_norm,
)
from .operators import (  # noqa: E402
    OperatorTuple,
    WeightSpec,
    compose,
    identity,
    make_backward_shift,
    make_forward_shift,
    matrix,
    op_sum,
    paper_pair,
    scaled,
)
from .quasinil import (  # noqa: E402
    certify_joint,
    jsr_estimate,
    local_radius_sequence,
    polynomial_radius,
    uniform_joint_sequence,
    word_radius_sequence,
)
from .subspace import (  # noqa: E402
    OrbitGenParams,
    common_invariant_subspace,
    corollary_subspace,
    kernel_intersection,
    weighted_invariant_subspace,
)
