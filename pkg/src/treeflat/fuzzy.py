"""Probabilistic leaf routing for fuzzy binary trees and general trees.

A fuzzy tree routes left with probability p and right with 1 - p at each
node; the probability of landing on a leaf is the product of that leaf's
matrix row.  General trees route over k weighted edges per node and reduce
to binary trees by chaining splits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrices import build_fuzzy_matrix, build_general_path_matrix
from .trees import (
    BinaryDecisionTree,
    GeneralInternal,
    GeneralTree,
    Internal,
    Leaf,
    Predicate,
    naive_traverse,
)

__all__ = [
    "LeafDistribution",
    "convert_general_to_binary",
    "general_leaf_distribution",
    "hard_routing_consistency",
    "leaf_probabilities",
    "leaf_probabilities_log",
]

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LeafDistribution:
    """Nonnegative mass per leaf; sums to 1 whenever every node's branch
    weights do."""

    probs: np.ndarray

    @property
    def is_normalized(self) -> bool:
        return abs(float(self.probs.sum()) - 1.0) <= NORMALIZATION_TOL

    @property
    def argmax_leaf(self) -> int:
        """1-based index of the most likely leaf."""
        return int(np.argmax(self.probs)) + 1


def _as_routing_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("routing matrix must be two-dimensional")
    if m.size and (m.min() < 0.0 or m.max() > 1.0):
        raise ValueError("routing matrix entries must lie in [0, 1]")
    return m


def leaf_probabilities(m) -> LeafDistribution:
    """Row products of a fuzzy or general path matrix."""
    return LeafDistribution(np.prod(_as_routing_matrix(m), axis=1))


def leaf_probabilities_log(m) -> LeafDistribution:
    """exp of row-wise log sums; agrees with the direct product whenever every
    entry is strictly positive, and rejects matrices where it is not."""
    m = _as_routing_matrix(m)
    bad = np.argwhere(m <= 0.0)
    if bad.size:
        i, j = bad[0]
        raise ValueError(
            f"nonpositive entry at leaf {i + 1}, node column {j}; "
            "the logarithmic form needs strictly positive entries"
        )
    return LeafDistribution(np.exp(np.log(m).sum(axis=1)))


def _placeholder_predicate(dim: int) -> Predicate:
    return Predicate.one_hot(0, 0.0, dim)


def convert_general_to_binary(
    tree: GeneralTree,
) -> tuple[BinaryDecisionTree, np.ndarray]:
    """Expand every k-ary node into a left-leaning chain of k - 1 binary
    splits carrying the conditional branch probabilities.

    The m-th chain split keeps child m on the left with probability
    w_m / (1 - w_1 - ... - w_{m-1}) and sends the remaining children right.
    When the remaining mass is 0 that ratio is 0/0; the chain then gets
    probability 1/2, which is immaterial because no mass reaches it.  Returns
    the binary shape (placeholder predicates) and its per-node probability
    vector in breadth-first order; the leaf distribution is preserved.
    """
    if not isinstance(tree.root, GeneralInternal):
        raise ValueError("general tree must have an internal root")
    dim = max(tree.feature_dim, 1)
    prob_of: dict[int, float] = {}

    def convert(node) -> Internal | Leaf:
        if isinstance(node, Leaf):
            return Leaf(node.value)
        children = node.children
        weights = np.asarray(node.weights, dtype=np.float64)

        def chain(i: int, remaining: float) -> Internal:
            left = convert(children[i])
            if i == len(children) - 2:
                right = convert(children[i + 1])
            else:
                right = chain(i + 1, remaining - float(weights[i]))
            p = float(weights[i]) / remaining if remaining > 0.0 else 0.5
            split = Internal(_placeholder_predicate(dim), left, right)
            prob_of[id(split)] = min(max(p, 0.0), 1.0)
            return split

        return chain(0, 1.0)

    binary = BinaryDecisionTree(convert(tree.root), dim)
    probs = np.asarray([prob_of[id(n)] for n in binary.internal_nodes])
    return binary, probs


def hard_routing_consistency(tree: BinaryDecisionTree, x) -> bool:
    """Degenerate fuzzy routing must reproduce the hard traversal.

    Builds branch probabilities from the test outcomes (1 where the node is
    true, 0 where false), takes the leaf distribution, and checks it is
    exactly the indicator of the oracle's exit leaf.
    """
    x = np.asarray(x, dtype=np.float64)
    p = (tree.weight_matrix @ x > tree.thresholds).astype(np.float64)
    dist = leaf_probabilities(build_fuzzy_matrix(tree, p))
    expected = np.zeros(tree.num_leaves)
    expected[naive_traverse(tree, x) - 1] = 1.0
    return bool(np.array_equal(dist.probs, expected))


def general_leaf_distribution(tree: GeneralTree) -> LeafDistribution:
    """Leaf routing distribution of a general tree via its path matrix."""
    return leaf_probabilities(build_general_path_matrix(tree))
