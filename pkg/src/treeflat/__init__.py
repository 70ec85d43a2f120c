"""Flatten decision trees into representation matrices and evaluate inputs
through equivalent arithmetic traversal algorithms."""

from .fuzzy import (
    LeafDistribution,
    convert_general_to_binary,
    general_leaf_distribution,
    hard_routing_consistency,
    leaf_probabilities,
    leaf_probabilities_log,
)
from .matrices import (
    BitMatrix,
    UnrealizableMatrixError,
    build_depth_vector,
    build_fuzzy_matrix,
    build_general_path_matrix,
    build_left_matrix,
    build_mask_vector,
    build_right_matrix,
    build_signed_matrix,
    complement,
    decompose_general_matrix,
    matrix_rank,
    prune_leaf,
    recover_tree,
)
from .traversal import (
    ALGORITHMS,
    TraversalResult,
    TreeMatrices,
    compute_test_matrix,
    compute_test_vector,
    delta_traverse,
    dual_matrix_traverse,
    dual_traverse,
    ecoc_traverse,
    ensemble_score,
    linear_hash_test_vector,
    matrix_traverse,
    mips_leaf_search,
    quickscorer_traverse,
    scaled_argmax_invariance_check,
    sign_traverse,
    signed_test_vector,
    soft_attention,
)
from .trees import (
    BinaryDecisionTree,
    DimensionMismatchError,
    GeneralInternal,
    GeneralTree,
    Internal,
    Leaf,
    Predicate,
    TreeFormatError,
    ValidationReport,
    generate_random_general_tree,
    generate_random_tree,
    naive_traverse,
    parse_model,
    parse_tree,
    random_instances,
    serialize_ensemble,
    serialize_tree,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "BinaryDecisionTree",
    "BitMatrix",
    "DimensionMismatchError",
    "GeneralInternal",
    "GeneralTree",
    "Internal",
    "Leaf",
    "LeafDistribution",
    "Predicate",
    "TraversalResult",
    "TreeFormatError",
    "TreeMatrices",
    "UnrealizableMatrixError",
    "ValidationReport",
    "build_depth_vector",
    "build_fuzzy_matrix",
    "build_general_path_matrix",
    "build_left_matrix",
    "build_mask_vector",
    "build_right_matrix",
    "build_signed_matrix",
    "complement",
    "compute_test_matrix",
    "compute_test_vector",
    "convert_general_to_binary",
    "decompose_general_matrix",
    "delta_traverse",
    "dual_matrix_traverse",
    "dual_traverse",
    "ecoc_traverse",
    "ensemble_score",
    "general_leaf_distribution",
    "generate_random_general_tree",
    "generate_random_tree",
    "hard_routing_consistency",
    "leaf_probabilities",
    "leaf_probabilities_log",
    "linear_hash_test_vector",
    "matrix_rank",
    "matrix_traverse",
    "mips_leaf_search",
    "naive_traverse",
    "parse_model",
    "parse_tree",
    "prune_leaf",
    "quickscorer_traverse",
    "random_instances",
    "recover_tree",
    "scaled_argmax_invariance_check",
    "serialize_ensemble",
    "serialize_tree",
    "sign_traverse",
    "signed_test_vector",
    "soft_attention",
    "validate",
]
