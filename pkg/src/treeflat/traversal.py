"""Arithmetic tree traversals.

Seven algorithms select the exit leaf without walking the tree, all provably
agreeing with the recursive oracle:

* ``quickscorer_traverse``: AND the right-matrix columns of false nodes, take
  the leftmost surviving bit;
* ``dual_traverse``: AND left columns for true nodes and right columns for
  false nodes, stopping as soon as one bit survives;
* ``matrix_traverse``: v = right @ t + 1, leftmost maximum;
* ``dual_matrix_traverse``: v = right @ t + left @ (1 - t), unique maximum;
* ``sign_traverse``: v = inv(D) P s, unique maximum exactly 1 at the exit;
* ``ecoc_traverse``: scan leaves for the codeword whose normalized agreement
  with s is 1;
* ``delta_traverse``: v = P s - d, sum leaf values where v is exactly 0.

Test vectors mark false nodes with 1 (or +1 in signed form); ties at the
threshold count as false.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .fuzzy import LeafDistribution
from .matrices import (
    BitMatrix,
    build_depth_vector,
    build_left_matrix,
    build_right_matrix,
    build_signed_matrix,
)
from .trees import BinaryDecisionTree, DimensionMismatchError, naive_traverse

__all__ = [
    "ALGORITHMS",
    "TraversalResult",
    "TreeMatrices",
    "compute_test_matrix",
    "compute_test_vector",
    "delta_traverse",
    "dual_matrix_traverse",
    "dual_traverse",
    "ecoc_traverse",
    "ensemble_score",
    "linear_hash_test_vector",
    "matrix_traverse",
    "mips_leaf_search",
    "quickscorer_traverse",
    "scaled_argmax_invariance_check",
    "sign_traverse",
    "signed_test_vector",
    "soft_attention",
]


@dataclass
class TraversalResult:
    """Outcome of one traversal: 1-based exit leaf, its value, and whatever
    score vector the algorithm produced (None for the purely bitwise ones).
    ``nodes_processed`` is set by the early-exit traversal only."""

    leaf_index: int
    leaf_value: float
    score_vector: np.ndarray | None = None
    nodes_processed: int | None = None


@dataclass
class TreeMatrices:
    """Precomputed working set for one tree: every flattened representation
    the traversal algorithms consume.  Build once, score many."""

    tree: BinaryDecisionTree
    right: BitMatrix
    left: BitMatrix
    right_int: np.ndarray
    left_int: np.ndarray
    signed: np.ndarray
    depths: np.ndarray
    leaf_values: np.ndarray
    right_col_masks: list[int] = field(repr=False)
    left_col_masks: list[int] = field(repr=False)
    full_mask: int = field(repr=False, default=0)

    @classmethod
    def build(cls, tree: BinaryDecisionTree) -> "TreeMatrices":
        right = build_right_matrix(tree)
        left = build_left_matrix(tree)
        return cls(
            tree=tree,
            right=right,
            left=left,
            right_int=right.entries.astype(np.int64),
            left_int=left.entries.astype(np.int64),
            signed=build_signed_matrix(tree),
            depths=build_depth_vector(tree),
            leaf_values=tree.leaf_values,
            right_col_masks=right.packed_columns(),
            left_col_masks=left.packed_columns(),
            full_mask=(1 << tree.num_leaves) - 1,
        )

    @property
    def num_leaves(self) -> int:
        return len(self.leaf_values)

    @property
    def num_internal(self) -> int:
        return len(self.right_col_masks)

    @cached_property
    def normalized_leaf_vectors(self) -> np.ndarray:
        """Rows of inv(D) P: each leaf's signed path vector divided by its depth."""
        return self.signed / self.depths[:, None]

    def _result(self, row: int, score: np.ndarray | None = None, processed: int | None = None) -> TraversalResult:
        return TraversalResult(row + 1, float(self.leaf_values[row]), score, processed)


def compute_test_vector(tree: BinaryDecisionTree, x) -> np.ndarray:
    """Per-node test outcomes for input x: 1 marks a false node, 0 a true one."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.feature_dim,):
        raise DimensionMismatchError(
            f"feature vector has shape {x.shape}, expected ({tree.feature_dim},)"
        )
    return (tree.weight_matrix @ x <= tree.thresholds).astype(np.int64)


def compute_test_matrix(tree: BinaryDecisionTree, X) -> np.ndarray:
    """Batch form of ``compute_test_vector``: one row of outcomes per instance."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.feature_dim:
        raise DimensionMismatchError(
            f"instance matrix has shape {X.shape}, expected (*, {tree.feature_dim})"
        )
    return (X @ tree.weight_matrix.T <= tree.thresholds).astype(np.int64)


def signed_test_vector(t) -> np.ndarray:
    """Affine remap s = 2t - 1: +1 keeps marking false nodes, -1 true nodes."""
    t = np.asarray(t, dtype=np.int64)
    return 2 * t - 1


def linear_hash_test_vector(W, gamma, x) -> np.ndarray:
    """Signed test vector via the stacked hyperplane tests sign(W x - gamma).

    The raw hash sign marks true tests with +1, which is the opposite polarity
    of the signed test vector, so the result is negated: a tie (W x = gamma)
    therefore comes out +1, i.e. false, matching the strict-> convention.
    """
    W = np.asarray(W, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != x.shape[0] or gamma.shape != (W.shape[0],):
        raise DimensionMismatchError(
            f"incompatible shapes: W {W.shape}, gamma {gamma.shape}, x {x.shape}"
        )
    return np.where(W @ x - gamma > 0, -1, 1).astype(np.int64)


def quickscorer_traverse(mats: TreeMatrices, t) -> TraversalResult:
    """AND the packed right columns of all false nodes; the exit leaf is the
    lowest surviving bit.  Never empty: the last row is all ones."""
    t = np.asarray(t)
    v = mats.full_mask
    for j in np.flatnonzero(t):
        v &= mats.right_col_masks[j]
    # lowest set bit, as a 1-based leaf index
    return mats._result((v & -v).bit_length() - 1)


def dual_traverse(mats: TreeMatrices, t) -> TraversalResult:
    """Per-node AND with the left column for true nodes and the right column
    for false nodes, in breadth-first order, exiting once one bit survives."""
    t = np.asarray(t)
    v = mats.full_mask
    processed = 0
    for j in range(mats.num_internal):
        v &= mats.right_col_masks[j] if t[j] else mats.left_col_masks[j]
        processed += 1
        if v & (v - 1) == 0:
            break
    return mats._result(v.bit_length() - 1, processed=processed)


def matrix_traverse(mats: TreeMatrices, t) -> TraversalResult:
    """v = right @ t + 1; the exit leaf is the leftmost maximum of v.

    Weighting the rows by 1, 1/2, ..., 1/|L| does not reliably turn the
    leftmost maximum into a unique global one (a lower row with a smaller
    count can still win after scaling), so the leftmost maximum is taken
    directly; ``np.argmax`` already returns the first occurrence.
    """
    t = np.asarray(t, dtype=np.int64)
    v = mats.right_int @ t + 1
    return mats._result(int(np.argmax(v)), score=v)


def dual_matrix_traverse(mats: TreeMatrices, t) -> TraversalResult:
    """v = right @ t + left @ (1 - t); every node votes for the leaves it does
    not exclude, so the maximum equals the node count and is unique."""
    t = np.asarray(t, dtype=np.int64)
    v = mats.right_int @ t + mats.left_int @ (1 - t)
    return mats._result(int(np.argmax(v)), score=v)


def sign_traverse(mats: TreeMatrices, s) -> TraversalResult:
    """v = inv(D) P s; the unique entry equal to 1 marks the exit leaf.

    The comparison runs on integers (P s against the depth vector), so no
    floating-point tolerance is involved; the returned score vector is the
    float form of v.
    """
    s = np.asarray(s, dtype=np.int64)
    ps = mats.signed @ s
    hits = np.flatnonzero(ps == mats.depths)
    if hits.size != 1:
        raise ValueError(
            f"signed traversal found {hits.size} consensus leaves; corrupt matrices?"
        )
    return mats._result(int(hits[0]), score=ps / mats.depths)


def ecoc_traverse(mats: TreeMatrices, s) -> TraversalResult:
    """Scan leaves in order and return the first whose codeword agreement
    <P_i, s> / <P_i, P_i> equals 1; the score vector holds the agreements
    actually computed, in scan order."""
    s = np.asarray(s, dtype=np.int64)
    similarities: list[float] = []
    for i in range(mats.num_leaves):
        dot = int(mats.signed[i] @ s)
        depth = int(mats.depths[i])
        similarities.append(dot / depth)
        if dot == depth:
            return mats._result(i, score=np.asarray(similarities))
    raise ValueError("no leaf codeword matched the signed test vector; corrupt matrices?")


def delta_traverse(mats: TreeMatrices, s) -> float:
    """Sum of leaf values weighted by the zero indicator of v = P s - d.

    All quantities are integers, so the indicator compares against exact 0;
    exactly one entry is zero for a well-formed input.
    """
    s = np.asarray(s, dtype=np.int64)
    v = mats.signed @ s - mats.depths
    return float(mats.leaf_values[v == 0].sum())


def soft_attention(mats: TreeMatrices, s) -> LeafDistribution:
    """Softmax of inv(D) P s: a smooth distribution over leaves whose argmax
    is the hard exit leaf."""
    s = np.asarray(s, dtype=np.int64)
    scores = (mats.signed @ s) / mats.depths
    shifted = np.exp(scores - scores.max())
    return LeafDistribution(shifted / shifted.sum())


def scaled_argmax_invariance_check(mats: TreeMatrices, t, scale) -> bool:
    """Check that the exit leaf is invariant under the two encoding changes.

    Positive per-column rescaling of the right matrix must keep the leftmost
    argmax on the exit leaf, and replacing matrix zeros with -1 must keep the
    whole argmax set unchanged.
    """
    t = np.asarray(t, dtype=np.int64)
    scale = np.asarray(scale, dtype=np.float64)
    if scale.shape != (mats.num_internal,):
        raise ValueError(
            f"scale vector has shape {scale.shape}, expected ({mats.num_internal},)"
        )
    if scale.size and scale.min() <= 0:
        raise ValueError("scale entries must be positive")
    baseline = matrix_traverse(mats, t).leaf_index
    # Ties between candidate leaves are exact: each sums the same scale terms.
    # fsum is correctly rounded, so equal term multisets give equal floats,
    # which a BLAS matrix product does not guarantee across rows.
    false_nodes = np.flatnonzero(t)
    weighted = np.asarray(
        [
            math.fsum(scale[j] for j in false_nodes if mats.right_int[i, j])
            for i in range(mats.num_leaves)
        ]
    )
    if int(np.argmax(weighted)) + 1 != baseline:
        return False
    plain = mats.right_int @ t
    tilde = (2 * mats.right_int - 1) @ t
    plain_set = np.flatnonzero(plain == plain.max())
    tilde_set = np.flatnonzero(tilde == tilde.max())
    return np.array_equal(plain_set, tilde_set)


def mips_leaf_search(leaf_vectors: np.ndarray, query) -> int:
    """Exact maximum inner product search over leaf vectors.

    ``leaf_vectors`` are the normalized rows of inv(D) P (see
    ``TreeMatrices.normalized_leaf_vectors``); with a signed test vector as
    the query the argmax row is the exit leaf, returned 1-based.
    """
    query = np.asarray(query, dtype=np.float64)
    return int(np.argmax(leaf_vectors @ query)) + 1


# ---------------------------------------------------------------------------
# Name-keyed entry points over raw feature vectors, shared by the ensemble
# scorer and the command-line tools.
# ---------------------------------------------------------------------------


def _naive(mats: TreeMatrices, x) -> TraversalResult:
    leaf = naive_traverse(mats.tree, x)
    return TraversalResult(leaf, float(mats.leaf_values[leaf - 1]))


def _qs(mats: TreeMatrices, x) -> TraversalResult:
    return quickscorer_traverse(mats, compute_test_vector(mats.tree, x))


def _dual(mats: TreeMatrices, x) -> TraversalResult:
    return dual_traverse(mats, compute_test_vector(mats.tree, x))


def _matrix(mats: TreeMatrices, x) -> TraversalResult:
    return matrix_traverse(mats, compute_test_vector(mats.tree, x))


def _dual_matrix(mats: TreeMatrices, x) -> TraversalResult:
    return dual_matrix_traverse(mats, compute_test_vector(mats.tree, x))


def _sign(mats: TreeMatrices, x) -> TraversalResult:
    return sign_traverse(mats, signed_test_vector(compute_test_vector(mats.tree, x)))


def _ecoc(mats: TreeMatrices, x) -> TraversalResult:
    return ecoc_traverse(mats, signed_test_vector(compute_test_vector(mats.tree, x)))


def _delta(mats: TreeMatrices, x) -> TraversalResult:
    s = signed_test_vector(compute_test_vector(mats.tree, x))
    v = mats.signed @ s - mats.depths
    hits = np.flatnonzero(v == 0)
    if hits.size != 1:
        raise ValueError(
            f"delta traversal found {hits.size} zero entries; corrupt matrices?"
        )
    return mats._result(int(hits[0]))


ALGORITHMS: dict[str, Callable[[TreeMatrices, np.ndarray], TraversalResult]] = {
    "naive": _naive,
    "qs": _qs,
    "dual": _dual,
    "matrix": _matrix,
    "dualmatrix": _dual_matrix,
    "sign": _sign,
    "ecoc": _ecoc,
    "delta": _delta,
}


def ensemble_score(models: Sequence[TreeMatrices], x, algorithm: str) -> float:
    """Sum of per-tree exit leaf values under the named algorithm.

    The reduction order is the model order, so results are deterministic;
    an empty ensemble scores 0.
    """
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}"
        ) from None
    return float(sum(fn(mats, x).leaf_value for mats in models))
