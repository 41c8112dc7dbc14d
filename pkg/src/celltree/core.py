"""Shared data model and tree representation.

A dataset is an ordered list of labeled points. Tree builders never move or
copy the points; they pass around views (index subsets) of one immutable
dataset. Trees are served as immutable nodes plus a canonical JSON document
so that identical trees serialize to identical bytes.

Conventions used throughout the package:

* labels are 0/1, majority ties go to class 0
* routing sends x low iff x[dim] < threshold, equality routes high
* sort order on a coordinate is strict: ties break by original point index
* dimensions are 0-based in memory and 1-based in the serialized document
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence, Union

import numpy as np


class DatasetFormatError(ValueError):
    """Malformed dataset file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TreeSchemaError(ValueError):
    """Tree document failed schema validation."""


@dataclass(frozen=True)
class LabeledPoint:
    """One observation: a coordinate vector and a binary label."""

    x: tuple[float, ...]
    y: int

    def __post_init__(self):
        if len(self.x) == 0:
            raise ValueError("point must have at least one coordinate")
        if not all(math.isfinite(v) for v in self.x):
            raise ValueError("coordinates must be finite")
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y!r}")


class Dataset:
    """Immutable array-backed collection of labeled points.

    ``xs`` has shape (n, d) float64 and ``ys`` shape (n,) int8. Arrays are
    copied on construction and marked read-only, so views handed to builders
    can never be mutated behind their back.
    """

    __slots__ = ("xs", "ys")

    def __init__(self, xs: np.ndarray, ys: np.ndarray):
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        ys = np.ascontiguousarray(ys, dtype=np.int8)
        if xs.ndim != 2 or xs.shape[1] < 1:
            raise ValueError("xs must have shape (n, d) with d >= 1")
        if ys.shape != (xs.shape[0],):
            raise ValueError("ys must have shape (n,)")
        if xs.size and not np.isfinite(xs).all():
            raise ValueError("coordinates must be finite")
        if ys.size and not np.isin(ys, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        xs = xs.copy()
        ys = ys.copy()
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __setattr__(self, name, value):  # pragma: no cover - defensive
        raise AttributeError("Dataset is immutable")

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def d(self) -> int:
        return self.xs.shape[1]

    def __len__(self) -> int:
        return self.n

    def point(self, i: int) -> LabeledPoint:
        return LabeledPoint(tuple(float(v) for v in self.xs[i]), int(self.ys[i]))

    def __iter__(self) -> Iterator[LabeledPoint]:
        return (self.point(i) for i in range(self.n))

    @classmethod
    def from_points(cls, points: Sequence[LabeledPoint]) -> "Dataset":
        if not points:
            raise ValueError("use Dataset(xs, ys) with an explicit d for empty data")
        d = len(points[0].x)
        if any(len(p.x) != d for p in points):
            raise ValueError("points must share one dimension")
        xs = np.array([p.x for p in points], dtype=np.float64)
        ys = np.array([p.y for p in points], dtype=np.int8)
        return cls(xs, ys)

    @classmethod
    def empty(cls, d: int) -> "Dataset":
        return cls(np.empty((0, d), dtype=np.float64), np.empty(0, dtype=np.int8))

    def full_view(self) -> "DataView":
        return DataView(self, np.arange(self.n, dtype=np.int64))


class DataView:
    """A subset of a dataset, stored as ascending point indices.

    Ascending index order is an invariant: it makes the strict (value, index)
    sort reproducible after a view is detached into a standalone dataset,
    even in the presence of duplicate coordinates.
    """

    __slots__ = ("dataset", "indices")

    def __init__(self, dataset: Dataset, indices: np.ndarray):
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        if indices.ndim != 1:
            raise ValueError("indices must be one-dimensional")
        if indices.size:
            if indices[0] < 0 or indices[-1] >= dataset.n:
                raise ValueError("index out of range")
            if not (np.diff(indices) > 0).all():
                raise ValueError("indices must be strictly ascending")
        indices = indices.copy()
        indices.flags.writeable = False
        object.__setattr__(self, "dataset", dataset)
        object.__setattr__(self, "indices", indices)

    def __setattr__(self, name, value):  # pragma: no cover - defensive
        raise AttributeError("DataView is immutable")

    @property
    def n(self) -> int:
        return int(self.indices.size)

    def __len__(self) -> int:
        return self.n

    @property
    def xs(self) -> np.ndarray:
        return self.dataset.xs[self.indices]

    @property
    def ys(self) -> np.ndarray:
        return self.dataset.ys[self.indices]

    def coords(self, dim: int) -> np.ndarray:
        return self.dataset.xs[self.indices, dim]

    def label_counts(self) -> tuple[int, int]:
        """(count of label 0, count of label 1) among the view's points."""
        c1 = int(self.dataset.ys[self.indices].sum()) if self.n else 0
        return self.n - c1, c1

    def subset(self, indices: np.ndarray) -> "DataView":
        return DataView(self.dataset, indices)

    def detach(self) -> "DataView":
        """Copy the view's points into a fresh standalone dataset.

        The copy forgets everything about the original dataset, in particular
        its total size. Decisions that depend only on the cell's own data give
        identical answers on the detached view.
        """
        mini = Dataset(self.dataset.xs[self.indices], self.dataset.ys[self.indices])
        return mini.full_view()


# ---------------------------------------------------------------------------
# order statistics and prediction


def strict_rank(view: DataView, dim: int) -> np.ndarray:
    """Point indices of the view sorted by (coordinate, original index).

    The secondary key makes the order a strict total order even with
    duplicate coordinates. Relies on the view's ascending-index invariant:
    a stable sort on the coordinate alone realizes the tie-break.
    """
    if not 0 <= dim < view.dataset.d:
        raise ValueError(f"dimension {dim} out of range for d={view.dataset.d}")
    order = np.argsort(view.coords(dim), kind="stable")
    return view.indices[order]


def majority_label(count0: int, count1: int) -> int:
    """Majority vote over leaf counts; ties and empty leaves give 0."""
    if count0 < 0 or count1 < 0:
        raise ValueError("counts must be nonnegative")
    return 1 if count1 > count0 else 0


@dataclass(frozen=True)
class Leaf:
    count0: int
    count1: int

    @property
    def label(self) -> int:
        return majority_label(self.count0, self.count1)


@dataclass(frozen=True)
class Internal:
    """One split event.

    ``splits`` holds the level's cuts in cascade order: cut 0 is the first
    dimension's median cut, cuts 1..2 refine its two halves in the next
    dimension, and so on (heap layout). Binary-mode nodes have a single cut.
    ``eaten`` lists dataset indices of the pivots consumed by the cuts, one
    per cut; deserialized trees only know the count and use -1 placeholders.
    """

    splits: tuple[tuple[int, float], ...]
    eaten: tuple[int, ...]
    children: tuple["Node", ...]

    @property
    def levels(self) -> int:
        return len(self.children).bit_length() - 1


Node = Union[Leaf, Internal]


@dataclass(frozen=True)
class PartitionTree:
    """A built classifier: root node, input dimension, arity mode, config echo.

    ``mode`` is "binary" (one cut per level) or "full" (2^d children per
    level). ``config`` echoes the build parameters and training size; it is
    carried verbatim into the serialized document.
    """

    root: Node
    d: int
    mode: str
    config: dict

    def __post_init__(self):
        if self.mode not in ("binary", "full"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")


def _node_arity(tree: PartitionTree) -> int:
    return 2 if tree.mode == "binary" else 1 << tree.d


def route(tree: PartitionTree, x: Sequence[float]) -> tuple[Leaf, int]:
    """Route a query point to its leaf; returns (leaf, depth).

    Depth counts split events: one full level, binary or 2^d-ary, adds one.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.d,):
        raise ValueError(f"query must have shape ({tree.d},)")
    node = tree.root
    depth = 0
    while isinstance(node, Internal):
        prefix = 0
        for lvl in range(node.levels):
            dim, thr = node.splits[(1 << lvl) - 1 + prefix]
            side = 0 if x[dim] < thr else 1
            prefix = (prefix << 1) | side
        node = node.children[prefix]
        depth += 1
    return node, depth


def classify(tree: PartitionTree, x: Sequence[float]) -> int:
    leaf, _ = route(tree, x)
    return leaf.label


def _apply_tree(tree: PartitionTree, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized routing. Returns (labels, depths) for all rows of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.d:
        raise ValueError(f"queries must have shape (m, {tree.d})")
    m = X.shape[0]
    labels = np.zeros(m, dtype=np.int8)
    depths = np.zeros(m, dtype=np.int64)
    stack: list[tuple[Node, np.ndarray, int]] = [(tree.root, np.arange(m), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if idx.size == 0:
            continue
        if isinstance(node, Leaf):
            labels[idx] = node.label
            depths[idx] = depth
            continue
        # partition idx down the in-level cut cascade
        buckets = [(0, 0, idx)]
        for lvl in range(node.levels):
            nxt = []
            for _, prefix, ids in buckets:
                dim, thr = node.splits[(1 << lvl) - 1 + prefix]
                mask = X[ids, dim] < thr
                nxt.append((lvl + 1, prefix << 1, ids[mask]))
                nxt.append((lvl + 1, (prefix << 1) | 1, ids[~mask]))
            buckets = nxt
        for _, prefix, ids in buckets:
            stack.append((node.children[prefix], ids, depth + 1))
    return labels, depths


def predict_batch(tree: PartitionTree, X: np.ndarray) -> np.ndarray:
    return _apply_tree(tree, X)[0]


def route_depths(tree: PartitionTree, X: np.ndarray) -> np.ndarray:
    return _apply_tree(tree, X)[1]


# ---------------------------------------------------------------------------
# structural accounting


@dataclass(frozen=True)
class TreeStats:
    nodes: int
    internals: int
    leaves: int
    max_depth: int
    leaf_points: int
    eaten: int
    depth_hist: dict[int, int]


def tree_stats(tree: PartitionTree) -> TreeStats:
    nodes = internals = leaves = leaf_points = eaten = 0
    max_depth = 0
    hist: dict[int, int] = {}
    stack: list[tuple[Node, int]] = [(tree.root, 0)]
    while stack:
        node, depth = stack.pop()
        nodes += 1
        max_depth = max(max_depth, depth)
        if isinstance(node, Leaf):
            leaves += 1
            leaf_points += node.count0 + node.count1
            hist[depth] = hist.get(depth, 0) + 1
        else:
            internals += 1
            eaten += len(node.eaten)
            stack.extend((c, depth + 1) for c in node.children)
    return TreeStats(nodes, internals, leaves, max_depth, leaf_points, eaten, hist)


def validate_tree(tree: PartitionTree, n: int | None = None) -> TreeStats:
    """Check structural invariants; returns stats on success.

    Verifies per-node arity for the tree's mode, one eaten pivot per cut,
    nonnegative leaf counts, and, when the training size ``n`` is known
    (argument or ``config["n"]``), conservation: every training point is
    counted in exactly one leaf or eaten as a pivot.
    """
    arity = _node_arity(tree)
    stack: list[Node] = [tree.root]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            if node.count0 < 0 or node.count1 < 0:
                raise TreeSchemaError("negative leaf count")
            continue
        if len(node.children) != arity:
            raise TreeSchemaError(
                f"internal node has {len(node.children)} children, expected {arity}"
            )
        if len(node.splits) != arity - 1:
            raise TreeSchemaError(
                f"internal node has {len(node.splits)} cuts, expected {arity - 1}"
            )
        if len(node.eaten) != len(node.splits):
            raise TreeSchemaError("eaten pivot count must equal cut count")
        for dim, thr in node.splits:
            if not 0 <= dim < tree.d:
                raise TreeSchemaError(f"cut dimension {dim} out of range")
            if not math.isfinite(thr):
                raise TreeSchemaError("cut threshold must be finite")
        stack.extend(node.children)
    stats = tree_stats(tree)
    if n is None and isinstance(tree.config.get("n"), int):
        n = tree.config["n"]
    if n is not None and stats.leaf_points + stats.eaten != n:
        raise TreeSchemaError(
            f"conservation violated: {stats.leaf_points} leaf points + "
            f"{stats.eaten} eaten != n={n}"
        )
    return stats


# ---------------------------------------------------------------------------
# canonical serialization

_CONFIG_SCALARS = (str, int, float, bool, type(None))


def _node_doc(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"count0": node.count0, "count1": node.count1}
    return {
        "splits": [[dim + 1, float(thr)] for dim, thr in node.splits],
        "eaten": len(node.eaten),
        "children": [_node_doc(c) for c in node.children],
    }


def serialize_tree(tree: PartitionTree) -> str:
    """Canonical one-line JSON document for a tree.

    Keys are sorted, separators fixed, floats written in shortest round-trip
    form, so equal trees produce byte-identical output. Dimensions are
    1-based on the wire.
    """
    for key, value in tree.config.items():
        if not isinstance(key, str) or not isinstance(value, _CONFIG_SCALARS):
            raise TreeSchemaError("config must map strings to JSON scalars")
    doc = {
        "mode": tree.mode,
        "d": tree.d,
        "config": dict(tree.config),
        "root": _node_doc(tree.root),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def _parse_node(doc, d: int, arity: int) -> Node:
    if not isinstance(doc, dict):
        raise TreeSchemaError("node must be an object")
    keys = set(doc)
    if keys == {"count0", "count1"}:
        c0, c1 = doc["count0"], doc["count1"]
        if not (isinstance(c0, int) and isinstance(c1, int)) or c0 < 0 or c1 < 0:
            raise TreeSchemaError("leaf counts must be nonnegative integers")
        return Leaf(c0, c1)
    if keys != {"splits", "eaten", "children"}:
        raise TreeSchemaError(f"unexpected node keys {sorted(keys)}")
    splits_doc, eaten, children_doc = doc["splits"], doc["eaten"], doc["children"]
    if not isinstance(children_doc, list) or len(children_doc) != arity:
        raise TreeSchemaError(f"internal node must have {arity} children")
    if not isinstance(splits_doc, list) or len(splits_doc) != arity - 1:
        raise TreeSchemaError(f"internal node must have {arity - 1} cuts")
    if not isinstance(eaten, int) or eaten != len(splits_doc):
        raise TreeSchemaError("eaten pivot count must equal cut count")
    splits = []
    for entry in splits_doc:
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not isinstance(entry[0], int)
            or isinstance(entry[1], bool)
            or not isinstance(entry[1], (int, float))
        ):
            raise TreeSchemaError("cut must be [dim, threshold]")
        dim, thr = entry[0], float(entry[1])
        if not 1 <= dim <= d:
            raise TreeSchemaError(f"cut dimension {dim} out of range 1..{d}")
        if not math.isfinite(thr):
            raise TreeSchemaError("cut threshold must be finite")
        splits.append((dim - 1, thr))
    children = tuple(_parse_node(c, d, arity) for c in children_doc)
    # pivot identities are not on the wire; -1 marks an unknown index
    return Internal(tuple(splits), (-1,) * eaten, children)


def deserialize_tree(text: str) -> PartitionTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeSchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"mode", "d", "config", "root"}:
        raise TreeSchemaError("document must have keys mode, d, config, root")
    mode, d, config = doc["mode"], doc["d"], doc["config"]
    if mode not in ("binary", "full"):
        raise TreeSchemaError(f"unknown mode {mode!r}")
    if not isinstance(d, int) or d < 1:
        raise TreeSchemaError("d must be a positive integer")
    if not isinstance(config, dict) or not all(
        isinstance(k, str) and isinstance(v, _CONFIG_SCALARS) for k, v in config.items()
    ):
        raise TreeSchemaError("config must map strings to JSON scalars")
    arity = 2 if mode == "binary" else 1 << d
    root = _parse_node(doc["root"], d, arity)
    return PartitionTree(root=root, d=d, mode=mode, config=config)


# ---------------------------------------------------------------------------
# CSV I/O

def _parse_label(cell: str, line: int) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetFormatError(f"label {cell!r} is not numeric", line) from None
    if value not in (0.0, 1.0):
        raise DatasetFormatError(f"label must be 0 or 1, got {cell!r}", line)
    return int(value)


def load_csv(path) -> Dataset:
    """Load a dataset from CSV: d feature columns then one 0/1 label column.

    A header row is detected by failing to parse as numbers. An empty body
    under a header yields an empty dataset whose d comes from the header.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [(i + 1, row) for i, row in enumerate(reader) if row]
    if not rows:
        raise DatasetFormatError("empty file, cannot infer dimension")
    first_line, first = rows[0]
    ncols = len(first)
    if ncols < 2:
        raise DatasetFormatError("need at least one feature column and a label", first_line)

    def _numeric(row: list[str]) -> bool:
        try:
            [float(c) for c in row]
            return True
        except ValueError:
            return False

    body = rows[1:] if not _numeric(first) else rows
    d = ncols - 1
    if not body:
        return Dataset.empty(d)
    xs = np.empty((len(body), d), dtype=np.float64)
    ys = np.empty(len(body), dtype=np.int8)
    for out, (line, row) in enumerate(body):
        if len(row) != ncols:
            raise DatasetFormatError(
                f"expected {ncols} columns, got {len(row)}", line
            )
        for j, cell in enumerate(row[:-1]):
            try:
                xs[out, j] = float(cell)
            except ValueError:
                raise DatasetFormatError(
                    f"feature {cell!r} is not numeric", line
                ) from None
        ys[out] = _parse_label(row[-1], line)
    if not np.isfinite(xs).all():
        raise DatasetFormatError("features must be finite")
    return Dataset(xs, ys)


def save_csv(dataset: Dataset, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"x{j + 1}" for j in range(dataset.d)] + ["y"])
        for i in range(dataset.n):
            writer.writerow([repr(float(v)) for v in dataset.xs[i]] + [int(dataset.ys[i])])
