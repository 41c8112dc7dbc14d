import numpy as np
import pytest

from celltree import Dataset, Internal, Leaf


def make_dataset(rng: np.random.Generator, n: int, d: int, dup_prob: float = 0.3) -> Dataset:
    """Random dataset; with probability dup_prob coordinates snap to a coarse
    grid so duplicate values (tie-breaking paths) get exercised."""
    xs = rng.random((n, d))
    if n and rng.random() < dup_prob:
        xs = np.round(xs * 4) / 4
    ys = (rng.random(n) < 0.5).astype(np.int8)
    return Dataset(xs, ys)


def tree_shape(node):
    """Nested plain tuples for structural comparison, same encoding as the
    naive reference: pivot identity reduced to a count."""
    if isinstance(node, Leaf):
        return ("leaf", node.count0, node.count1)
    assert isinstance(node, Internal)
    return (
        "node",
        tuple((dim, thr) for dim, thr in node.splits),
        len(node.eaten),
        tuple(tree_shape(c) for c in node.children),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
