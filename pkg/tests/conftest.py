import numpy as np
import pytest

from posetctrl import algebra
from posetctrl.poset import from_cover_relations
from posetctrl.synthesis import PosetSystem


@pytest.fixture
def vee():
    """Three elements, 1 below 2 and 3."""
    return from_cover_relations([1, 2, 3], [(1, 2), (1, 3)])


@pytest.fixture
def chain3():
    return from_cover_relations([1, 2, 3], [(1, 2), (2, 3)])


@pytest.fixture
def diamond():
    return from_cover_relations([1, 2, 3, 4], [(1, 2), (1, 3), (2, 4), (3, 4)])


def antichain(s):
    return from_cover_relations(list(range(1, s + 1)), [])


def chain(s):
    return from_cover_relations(list(range(1, s + 1)), [(k, k + 1) for k in range(1, s)])


def random_poset(rng, size, edge_prob=0.35):
    labels = list(range(1, size + 1))
    covers = [
        (i, j) for i in labels for j in labels if i < j and rng.random() < edge_prob
    ]
    return from_cover_relations(labels, covers)


def random_system(rng, p, margin=1.0):
    """Stabilizable poset-causal instance with standard state/input weights."""
    s = p.size
    mask = algebra.d_pattern_mask(p)
    a = rng.standard_normal((s, s)) * mask
    a[np.diag_indices(s)] = -margin - 2.0 * rng.random(s)
    b = rng.standard_normal((s, s)) * mask
    diag = b[np.diag_indices(s)]
    signs = np.where(diag >= 0, 1.0, -1.0)
    b[np.diag_indices(s)] = signs * (0.5 + np.abs(diag))
    c = np.vstack([np.diag(0.5 + rng.random(s)), np.zeros((s, s))])
    d = np.vstack([np.zeros((s, s)), np.diag(0.5 + rng.random(s))])
    return PosetSystem(p, a, b, c, d)


def random_local(rng, p, pattern=True):
    m = rng.standard_normal((p.size, p.size))
    return m * algebra.d_pattern_mask(p) if pattern else m
