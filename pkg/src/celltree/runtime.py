"""Deterministic cell-by-cell tree execution.

Every cell of a growing tree is an independent unit of work: it receives a
view of the data and a derived seed, and nothing else. A decision function
maps (view, seed) to either a leaf or a split with child views. The runtime
schedules cells on a work queue, derives child seeds by avalanche mixing of
(parent seed, child index), and assembles the tree by structure rather than
by completion order, so the result is byte-for-byte identical for any worker
count.

The same property is what makes the classifiers here "cellular": no decision
may read global state such as the total training size. That cannot be made
unrepresentable in Python, so `audit_autonomy` re-executes traced cells on
detached copies of their views (fresh datasets that have forgotten the
original context) and flags any decision that changes.
"""
from __future__ import annotations

import hashlib
import random
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .core import DataView, Internal, Leaf, Node

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 scramble round: 64-bit finalizer with full avalanche."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_child_seed(parent_seed: int, child_index: int) -> int:
    """Derived seed for one child cell.

    Two scramble rounds over (parent, index) so that nearby parents and small
    indices land on unrelated streams. Built-in hash() is salted per process
    and must not be used here.
    """
    return splitmix64(splitmix64(parent_seed & _MASK64) ^ (child_index + _GOLDEN))


class CellRng:
    """Per-cell random stream: a splitmix64 sequence from the cell's seed."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Multiply-shift; bias is O(n / 2^64)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64


@dataclass(frozen=True)
class CellTask:
    """One pending cell: its data view, its seed, and diagnostic position."""

    view: DataView
    seed: int
    depth: int = 0
    cell_id: str = "r"
    parent_id: str = ""


@dataclass(frozen=True)
class LeafDecision:
    count0: int
    count1: int


@dataclass(frozen=True)
class SplitDecision:
    """A committed split: cuts in cascade order, eaten pivots, child views."""

    splits: tuple[tuple[int, float], ...]
    eaten: tuple[int, ...]
    children: tuple[DataView, ...]


CellDecision = Union[LeafDecision, SplitDecision]
DecisionFn = Callable[[DataView, int], CellDecision]


class CellBuildError(RuntimeError):
    """A decision function raised; carries the offending cell's view size."""

    def __init__(self, cell_id: str, view_size: int, cause: BaseException):
        super().__init__(f"cell {cell_id} (N={view_size}) failed: {cause!r}")
        self.cell_id = cell_id
        self.view_size = view_size


def decision_fingerprint(decision: CellDecision) -> str:
    """Canonical content fingerprint of a decision.

    Uses cut geometry and child sizes, never raw dataset indices, so the
    fingerprint is invariant under detaching the cell's view.
    """
    if isinstance(decision, LeafDecision):
        return f"leaf:{decision.count0}:{decision.count1}"
    dims = ",".join(str(dim) for dim, _ in decision.splits)
    thrs = ",".join(repr(thr) for _, thr in decision.splits)
    sizes = ",".join(str(c.n) for c in decision.children)
    return f"split:dims={dims}:thr={thrs}:sizes={sizes}"


def _input_hash(view: DataView, seed: int) -> str:
    h = hashlib.sha256()
    h.update(struct.pack("<Q", seed & _MASK64))
    h.update(np.ascontiguousarray(view.xs).tobytes())
    h.update(np.ascontiguousarray(view.ys).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class TraceRecord:
    cell_id: str
    parent_id: str
    n: int
    seed: int
    decision_fp: str
    input_hash: str
    view_indices: tuple[int, ...]

    def line(self) -> str:
        parent = self.parent_id or "-"
        seed_fp = f"{splitmix64(self.seed):016x}"
        return (
            f"{self.cell_id}\t{parent}\t{self.n}\t{self.decision_fp}\t"
            f"{seed_fp}\t{self.input_hash}"
        )


@dataclass
class BuildTrace:
    """Per-cell decision log, one line-oriented record per executed cell."""

    records: list[TraceRecord] = field(default_factory=list)

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line + "\n")


class _NodeSlot:
    __slots__ = ("decision", "children")

    def __init__(self):
        self.decision: CellDecision | None = None
        self.children: list["_NodeSlot"] = []


def _freeze(slot: _NodeSlot) -> Node:
    decision = slot.decision
    if isinstance(decision, LeafDecision):
        return Leaf(decision.count0, decision.count1)
    assert isinstance(decision, SplitDecision)
    return Internal(
        decision.splits,
        decision.eaten,
        tuple(_freeze(c) for c in slot.children),
    )


def run_cells(
    root: CellTask,
    decide: DecisionFn,
    workers: int = 1,
    trace: BuildTrace | None = None,
    shuffle_seed: int | None = None,
) -> Node:
    """Execute a cell tree to completion and assemble the node tree.

    Cells are processed frontier by frontier. Within a frontier every cell is
    independent, so the batch can be fanned out to a thread pool; results are
    re-associated with their tasks by position, which keeps assembly
    independent of completion order. ``shuffle_seed`` randomizes dispatch
    order inside each frontier (used by tests to demonstrate schedule
    independence); the assembled tree does not change.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    shuffler = random.Random(shuffle_seed) if shuffle_seed is not None else None

    def run_one(task: CellTask) -> CellDecision:
        try:
            return decide(task.view, task.seed)
        except Exception as exc:
            raise CellBuildError(task.cell_id, task.view.n, exc) from exc

    root_slot = _NodeSlot()
    frontier: list[tuple[CellTask, _NodeSlot]] = [(root, root_slot)]
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while frontier:
            tasks = [t for t, _ in frontier]
            order = list(range(len(tasks)))
            if shuffler is not None:
                shuffler.shuffle(order)
            if pool is None:
                results: list[CellDecision] = [None] * len(tasks)  # type: ignore[list-item]
                for i in order:
                    results[i] = run_one(tasks[i])
            else:
                shuffled = list(pool.map(run_one, (tasks[i] for i in order)))
                results = [None] * len(tasks)  # type: ignore[list-item]
                for pos, i in enumerate(order):
                    results[i] = shuffled[pos]
            nxt: list[tuple[CellTask, _NodeSlot]] = []
            for (task, slot), decision in zip(frontier, results):
                slot.decision = decision
                if trace is not None:
                    trace.records.append(
                        TraceRecord(
                            cell_id=task.cell_id,
                            parent_id=task.parent_id,
                            n=task.view.n,
                            seed=task.seed,
                            decision_fp=decision_fingerprint(decision),
                            input_hash=_input_hash(task.view, task.seed),
                            view_indices=tuple(int(i) for i in task.view.indices),
                        )
                    )
                if isinstance(decision, SplitDecision):
                    for j, child_view in enumerate(decision.children):
                        child_slot = _NodeSlot()
                        slot.children.append(child_slot)
                        nxt.append(
                            (
                                CellTask(
                                    view=child_view,
                                    seed=derive_child_seed(task.seed, j),
                                    depth=task.depth + 1,
                                    cell_id=f"{task.cell_id}.{j}",
                                    parent_id=task.cell_id,
                                ),
                                child_slot,
                            )
                        )
            frontier = nxt
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return _freeze(root_slot)


@dataclass(frozen=True)
class AutonomyReport:
    ok: bool
    checked: int
    failures: tuple[str, ...]


def audit_autonomy(
    trace: BuildTrace,
    dataset,
    decide: DecisionFn,
    sample: int = 10,
    seed: int = 0,
) -> AutonomyReport:
    """Verify that traced decisions depend only on (view contents, seed).

    Every record's input hash is recomputed from the stored view, then a
    sample of cells is re-executed in isolation: the cell's points are copied
    into a fresh dataset with no trace of the original context, and the
    decision must reproduce the recorded fingerprint. A decision that peeks
    at global state (for example the full training size) changes its answer
    on the detached copy and fails the audit.
    """
    failures: list[str] = []
    for record in trace.records:
        view = DataView(dataset, np.array(record.view_indices, dtype=np.int64))
        if _input_hash(view, record.seed) != record.input_hash:
            failures.append(f"{record.cell_id}: input hash mismatch")
    rng = random.Random(seed)
    records = list(trace.records)
    picked = records if len(records) <= sample else rng.sample(records, sample)
    for record in picked:
        view = DataView(dataset, np.array(record.view_indices, dtype=np.int64))
        detached = view.detach()
        try:
            replay = decide(detached, record.seed)
        except Exception as exc:  # re-execution must not crash either
            failures.append(f"{record.cell_id}: replay raised {exc!r}")
            continue
        if decision_fingerprint(replay) != record.decision_fp:
            failures.append(
                f"{record.cell_id}: decision changed on detached view "
                f"({record.decision_fp} -> {decision_fingerprint(replay)})"
            )
    return AutonomyReport(ok=not failures, checked=len(picked), failures=tuple(failures))
