"""Command-line interface.

Subcommands: ``flatten`` dumps representation matrices, ``score`` evaluates
instances with a chosen algorithm, ``compare`` cross-checks every algorithm
against the recursive oracle, ``bench`` measures throughput, and ``gen``
writes random models plus matching instance files.

Exit codes: 0 success, 1 algorithms disagreed, 2 usage or parse error,
3 invalid model, 4 instance data does not fit the model.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from statistics import median
from typing import Sequence

import numpy as np

from .matrices import (
    build_fuzzy_matrix,
    build_general_path_matrix,
    build_left_matrix,
    build_right_matrix,
    build_signed_matrix,
)
from .traversal import (
    ALGORITHMS,
    TreeMatrices,
    compute_test_vector,
    signed_test_vector,
    soft_attention,
)
from .trees import (
    BinaryDecisionTree,
    DimensionMismatchError,
    GeneralTree,
    TreeFormatError,
    generate_random_general_tree,
    generate_random_tree,
    parse_model,
    parse_tree,
    serialize_ensemble,
    serialize_tree,
    validate,
)

EXIT_OK = 0
EXIT_DISAGREEMENT = 1
EXIT_USAGE = 2
EXIT_INVALID_MODEL = 3
EXIT_DATA_MISMATCH = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read {path}: {exc}") from exc


def _load_trees(path: str) -> list[BinaryDecisionTree | GeneralTree]:
    try:
        trees = parse_model(_read_text(path))
    except TreeFormatError as exc:
        raise CliError(EXIT_USAGE, f"{path}: {exc}") from exc
    for i, tree in enumerate(trees):
        report = validate(tree)
        if not report.ok:
            where = f"{path} tree {i}" if len(trees) > 1 else path
            details = "; ".join(report.problems)
            raise CliError(EXIT_INVALID_MODEL, f"{where} is invalid: {details}")
    if not trees:
        raise CliError(EXIT_INVALID_MODEL, f"{path}: ensemble contains no trees")
    return trees


def _load_binary_trees(path: str) -> list[BinaryDecisionTree]:
    trees = _load_trees(path)
    for tree in trees:
        if not isinstance(tree, BinaryDecisionTree):
            raise CliError(
                EXIT_INVALID_MODEL,
                f"{path}: scoring needs binary trees; found a general tree",
            )
    dims = {t.feature_dim for t in trees}
    if len(dims) > 1:
        raise CliError(
            EXIT_INVALID_MODEL, f"{path}: trees disagree on feature_dim {sorted(dims)}"
        )
    return trees


def _load_instances(path: str, feature_dim: int) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise CliError(
                EXIT_USAGE, f"{path}:{lineno}: not a CSV row of floats"
            ) from exc
        rows.append(row)
    if not rows:
        return np.zeros((0, feature_dim))
    widths = {len(r) for r in rows}
    if len(widths) > 1 or widths != {feature_dim}:
        raise CliError(
            EXIT_DATA_MISMATCH,
            f"{path}: rows have {sorted(widths)} columns, model expects {feature_dim}",
        )
    return np.asarray(rows, dtype=np.float64)


def _format_matrix(m: np.ndarray, integer: bool) -> str:
    rows, cols = m.shape
    lines = [f"{rows} {cols}"]
    for row in m:
        if integer:
            lines.append(" ".join(str(int(v)) for v in row))
        else:
            lines.append(" ".join(f"{float(v):.12g}" for v in row))
    return "\n".join(lines) + "\n"


def _parse_prob_vector(raw: str, expected: int) -> np.ndarray:
    try:
        values = [float(v) for v in raw.split(",")]
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "--p must be a comma-separated float list") from exc
    if len(values) != expected:
        raise CliError(
            EXIT_USAGE, f"--p has {len(values)} entries, model has {expected} nodes"
        )
    p = np.asarray(values)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise CliError(EXIT_USAGE, "--p entries must lie in [0, 1]")
    return p


def cmd_flatten(args) -> int:
    try:
        tree = parse_tree(_read_text(args.tree))
    except TreeFormatError as exc:
        raise CliError(EXIT_USAGE, f"{args.tree}: {exc}") from exc
    report = validate(tree)
    if not report.ok:
        raise CliError(
            EXIT_INVALID_MODEL, f"{args.tree} is invalid: " + "; ".join(report.problems)
        )
    kind = args.kind
    if kind == "path":
        if not isinstance(tree, GeneralTree):
            raise CliError(EXIT_USAGE, "kind 'path' needs a general tree file")
        sys.stdout.write(_format_matrix(build_general_path_matrix(tree), integer=False))
        return EXIT_OK
    if not isinstance(tree, BinaryDecisionTree):
        raise CliError(EXIT_USAGE, f"kind {kind!r} needs a binary tree file")
    if kind == "right":
        sys.stdout.write(_format_matrix(build_right_matrix(tree).entries, integer=True))
    elif kind == "left":
        sys.stdout.write(_format_matrix(build_left_matrix(tree).entries, integer=True))
    elif kind == "signed":
        sys.stdout.write(_format_matrix(build_signed_matrix(tree), integer=True))
    else:  # fuzzy
        if args.p is None:
            raise CliError(EXIT_USAGE, "kind 'fuzzy' needs --p with one entry per node")
        p = _parse_prob_vector(args.p, tree.num_internal)
        sys.stdout.write(_format_matrix(build_fuzzy_matrix(tree, p), integer=False))
    return EXIT_OK


def cmd_score(args) -> int:
    trees = _load_binary_trees(args.model)
    X = _load_instances(args.instances, trees[0].feature_dim)
    if args.soft and len(trees) > 1:
        raise CliError(EXIT_USAGE, "--soft works on a single tree, not an ensemble")
    models = [TreeMatrices.build(t) for t in trees]
    out = sys.stdout
    try:
        for x in X:
            if args.soft:
                s = signed_test_vector(compute_test_vector(trees[0], x))
                dist = soft_attention(models[0], s)
                out.write(",".join(f"{p:.12g}" for p in dist.probs) + "\n")
            elif len(models) == 1:
                result = ALGORITHMS[args.algo](models[0], x)
                out.write(f"{result.leaf_index} {result.leaf_value:.12g}\n")
            else:
                total = sum(ALGORITHMS[args.algo](m, x).leaf_value for m in models)
                out.write(f"{total:.12g}\n")
    except DimensionMismatchError as exc:
        raise CliError(EXIT_DATA_MISMATCH, str(exc)) from exc
    return EXIT_OK


@dataclass
class Disagreement:
    instance: int
    algorithm: str
    leaf: int
    expected: int
    tree: int


@dataclass
class BenchRow:
    name: str
    instances_per_second: float
    total_ns: int
    leaf_agreement: bool


def _first_disagreement(
    models: Sequence[TreeMatrices], X: np.ndarray
) -> Disagreement | None:
    names = [n for n in ALGORITHMS if n != "naive"]
    for i, x in enumerate(X):
        for k, mats in enumerate(models):
            expected = ALGORITHMS["naive"](mats, x).leaf_index
            for name in names:
                leaf = ALGORITHMS[name](mats, x).leaf_index
                if leaf != expected:
                    return Disagreement(i, name, leaf, expected, k)
    return None


def cmd_compare(args) -> int:
    trees = _load_binary_trees(args.model)
    X = _load_instances(args.instances, trees[0].feature_dim)
    models = [TreeMatrices.build(t) for t in trees]
    try:
        bad = _first_disagreement(models, X)
    except DimensionMismatchError as exc:
        raise CliError(EXIT_DATA_MISMATCH, str(exc)) from exc
    if bad is not None:
        print(
            f"disagreement: instance={bad.instance} algorithm={bad.algorithm} "
            f"leaf={bad.leaf} (oracle leaf={bad.expected}, tree={bad.tree})"
        )
        return EXIT_DISAGREEMENT
    print(f"all algorithms agree on {len(X)} instances x {len(models)} trees")
    return EXIT_OK


def cmd_bench(args) -> int:
    trees = _load_binary_trees(args.model)
    X = _load_instances(args.instances, trees[0].feature_dim)
    models = [TreeMatrices.build(t) for t in trees]
    try:
        bad = _first_disagreement(models, X)
    except DimensionMismatchError as exc:
        raise CliError(EXIT_DATA_MISMATCH, str(exc)) from exc
    if bad is not None:
        print(
            f"disagreement: instance={bad.instance} algorithm={bad.algorithm} "
            f"leaf={bad.leaf} (oracle leaf={bad.expected}, tree={bad.tree})"
        )
        return EXIT_DISAGREEMENT
    rows = []
    for name, fn in ALGORITHMS.items():
        timings = []
        for _ in range(args.repeat):
            start = time.perf_counter_ns()
            for x in X:
                for mats in models:
                    fn(mats, x)
            timings.append(time.perf_counter_ns() - start)
        total_ns = int(median(timings))
        per_second = len(X) / (total_ns / 1e9) if total_ns else float("inf")
        rows.append(BenchRow(name, per_second, total_ns, True))
    if args.csv:
        print("algorithm,instances_per_second,total_ns,leaf_agreement")
        for row in rows:
            print(
                f"{row.name},{row.instances_per_second:.6g},{row.total_ns},"
                f"{'true' if row.leaf_agreement else 'false'}"
            )
    else:
        print(f"{'algorithm':<12}{'instances/s':>14}{'total_ns':>14}  agreement")
        for row in rows:
            print(
                f"{row.name:<12}{row.instances_per_second:>14.6g}"
                f"{row.total_ns:>14}  {'ok' if row.leaf_agreement else 'FAIL'}"
            )
    return EXIT_OK


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    tree_seeds = [int(s) for s in rng.integers(0, 2**63 - 1, size=args.count)]
    if args.general:
        trees = [
            generate_random_general_tree(args.depth, args.fanout, s, args.dim)
            for s in tree_seeds
        ]
    else:
        trees = [generate_random_tree(args.depth, args.dim, s) for s in tree_seeds]
    text = serialize_tree(trees[0]) if len(trees) == 1 else serialize_ensemble(trees)
    X = rng.uniform(size=(args.instances, args.dim))
    try:
        Path(args.out_model).write_text(text, encoding="utf-8")
        with open(args.out_data, "w", encoding="utf-8") as fh:
            for row in X:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot write output: {exc}") from exc
    return EXIT_OK


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeflat",
        description="Flatten decision trees into matrices and score them "
        "with equivalent arithmetic traversals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flatten", help="dump a representation matrix")
    p.add_argument("tree", help="tree file (JSON)")
    p.add_argument("kind", choices=["right", "left", "signed", "fuzzy", "path"])
    p.add_argument("--p", help="comma-separated branch probabilities (fuzzy only)")
    p.set_defaults(handler=cmd_flatten)

    p = sub.add_parser("score", help="score instances, one output line each")
    p.add_argument("model", help="tree or ensemble file (JSON)")
    p.add_argument("instances", help="CSV of feature vectors, no header")
    p.add_argument("--algo", default="qs", choices=sorted(ALGORITHMS))
    p.add_argument(
        "--soft",
        action="store_true",
        help="print the smooth leaf distribution instead of the exit leaf",
    )
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("compare", help="check that every algorithm agrees")
    p.add_argument("model")
    p.add_argument("instances")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("bench", help="measure per-algorithm throughput")
    p.add_argument("model")
    p.add_argument("instances")
    p.add_argument("--repeat", type=_positive_int, default=3, help="median of N runs")
    p.add_argument("--csv", action="store_true", help="machine-readable output")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("gen", help="write a random model and instance CSV")
    p.add_argument("--depth", type=_positive_int, default=4)
    p.add_argument("--dim", type=_positive_int, default=4)
    p.add_argument("--count", type=_positive_int, default=1, help="trees in the model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--general", action="store_true", help="k-ary routing trees")
    p.add_argument("--fanout", type=_positive_int, default=3, help="max children (general)")
    p.add_argument("--instances", type=_positive_int, default=50)
    p.add_argument("--out-model", default="tree.json")
    p.add_argument("--out-data", default="instances.csv")
    p.set_defaults(handler=cmd_gen)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"treeflat: {exc}", file=sys.stderr)
        return exc.code


def run() -> None:
    raise SystemExit(main())
