"""Finite posets, order queries, product posets, and exact zeta/Mobius matrices.

Conventions used throughout the package:

* Elements are stored in a fixed linear-extension order (a deterministic
  topological sort of the cover graph).  Every matrix indexed by the poset
  uses this order, so matrices supported on the relation ``j <= i`` come out
  lower triangular.
* The zeta matrix has ``zeta[i, j] = 1`` exactly when ``j <= i``; the Mobius
  matrix is its inverse, computed in exact integer arithmetic.
* ``zeta_transform``/``mobius_transform`` act on functions written as row
  vectors: integration sums a function over upstream elements, differencing
  undoes it.
"""

import heapq
import warnings

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, ContractError, UnknownElementError

SOFT_SIZE_LIMIT = 64


@dataclass(frozen=True)
class OrderSets:
    """The five order neighborhoods of one element.

    ``down`` is everything at or below the element in the causal sense
    (elements it influences), ``up`` everything that influences it, ``off``
    the elements unrelated to it.  ``down | off | strict_up`` partitions the
    poset and ``down & up == {element}``.
    """

    down: frozenset
    strict_down: frozenset
    up: frozenset
    strict_up: frozenset
    off: frozenset


class Poset:
    """Immutable finite poset with a fixed linear extension.

    Attributes:
        elements: labels in linear-extension order; all matrix indexing in
            this package follows this order.
        covers: canonical cover relations (transitive reduction), as a tuple
            of ``(low, high)`` label pairs.
        linear_extension: for each matrix position, the index of that element
            in the label sequence originally supplied by the caller.

    Instances are meant to be built through :func:`from_cover_relations`,
    :func:`from_relations`, or :func:`product`.
    """

    __slots__ = ("elements", "covers", "linear_extension", "_leq", "_pos",
                 "_zeta", "_mobius")

    def __init__(self, elements, covers, linear_extension, leq):
        self.elements = tuple(elements)
        self.covers = tuple(covers)
        self.linear_extension = tuple(linear_extension)
        leq = np.asarray(leq, dtype=bool)
        leq.setflags(write=False)
        self._leq = leq
        self._pos = {e: k for k, e in enumerate(self.elements)}
        self._zeta = None
        self._mobius = None
        self._validate()

    def _validate(self):
        n = len(self.elements)
        if len(self._pos) != n:
            raise ConstructionError("duplicate element labels")
        if self._leq.shape != (n, n):
            raise ConstructionError("relation matrix has wrong shape")
        if not self._leq.diagonal().all():
            raise ConstructionError("relation is not reflexive")
        sym = self._leq & self._leq.T
        if (sym != np.eye(n, dtype=bool)).any():
            raise ConstructionError("relation is not antisymmetric")
        closed = self._leq @ self._leq
        if (closed & ~self._leq).any():
            raise ConstructionError("relation is not transitive")
        # linear extension consistency: i <= j implies position(i) <= position(j)
        rows, cols = np.nonzero(self._leq)
        if (rows > cols).any():
            raise ConstructionError("element order is not a linear extension")
        if n > SOFT_SIZE_LIMIT:
            warnings.warn(
                f"poset has {n} elements; dense vectorized operators grow as "
                f"s^2 x s^2 and sizes beyond {SOFT_SIZE_LIMIT} get expensive",
                RuntimeWarning,
                stacklevel=3,
            )

    # -- basic queries -----------------------------------------------------

    @property
    def size(self):
        return len(self.elements)

    @property
    def leq(self):
        """Boolean relation matrix: ``leq[i, j]`` iff element i <= element j."""
        return self._leq

    def index(self, label):
        try:
            return self._pos[label]
        except KeyError:
            raise UnknownElementError(label) from None

    def __contains__(self, label):
        return label in self._pos

    def __len__(self):
        return len(self.elements)

    def __eq__(self, other):
        if not isinstance(other, Poset):
            return NotImplemented
        return self.elements == other.elements and np.array_equal(self._leq, other._leq)

    def __hash__(self):
        return hash((self.elements, self._leq.tobytes()))

    def __repr__(self):
        return f"Poset(elements={self.elements!r}, covers={self.covers!r})"

    def leq_of(self, a, b):
        """True iff label ``a`` precedes (or equals) label ``b``."""
        return bool(self._leq[self.index(a), self.index(b)])

    def down_positions(self, pos):
        """Matrix positions of the down-set of the element at ``pos``, in order."""
        return np.nonzero(self._leq[pos])[0]

    def up_positions(self, pos):
        return np.nonzero(self._leq[:, pos])[0]

    def minimal_positions(self):
        return np.nonzero(self._leq.sum(axis=0) == 1)[0]


def _toposort(labels, edges):
    """Kahn topological sort; ties broken by smallest label.

    Falls back to input order as the tie-break key when labels of mixed
    types cannot be compared.  Raises on cycles, naming a witness.
    """
    labels = list(labels)
    try:
        sorted(labels)
        key = {lab: lab for lab in labels}
    except TypeError:
        key = {lab: k for k, lab in enumerate(labels)}

    succ = {lab: set() for lab in labels}
    indeg = {lab: 0 for lab in labels}
    for a, b in edges:
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1

    heap = [(key[lab], lab) for lab in labels if indeg[lab] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, lab = heapq.heappop(heap)
        order.append(lab)
        for nxt in succ[lab]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(heap, (key[nxt], nxt))
    if len(order) < len(labels):
        raise ConstructionError(
            "cover relations contain a cycle: " + _cycle_witness(labels, succ, indeg)
        )
    return order


def _cycle_witness(labels, succ, indeg):
    remaining = {lab for lab in labels if indeg[lab] > 0}
    start = next(iter(remaining))
    path, seen = [start], {start}
    node = start
    while True:
        node = next(n for n in succ[node] if n in remaining)
        if node in seen:
            cycle = path[path.index(node):] + [node]
            return " -> ".join(repr(x) for x in cycle)
        path.append(node)
        seen.add(node)


def _transitive_closure(rel):
    closed = rel.copy()
    while True:
        nxt = closed | (closed @ closed)
        if np.array_equal(nxt, closed):
            return closed
        closed = nxt


def _transitive_reduction(leq, elements):
    strict = leq & ~np.eye(len(elements), dtype=bool)
    # a covers pair survives iff it is not implied through an intermediate
    redundant = strict @ strict
    cover = strict & ~redundant
    return tuple(
        (elements[i], elements[j]) for i, j in zip(*np.nonzero(cover))
    )


def _check_pairs(labels, pairs, what):
    known = set(labels)
    if len(known) != len(list(labels)):
        raise ConstructionError("duplicate element labels")
    for a, b in pairs:
        if a not in known:
            raise UnknownElementError(a)
        if b not in known:
            raise UnknownElementError(b)
        if a == b and what == "cover":
            raise ConstructionError(f"self-cover {a!r} -> {a!r} is a cycle")


def from_cover_relations(labels, covers):
    """Build a poset from its Hasse-diagram covers ``(low, high)``.

    The relation is the reflexive-transitive closure of the covers.
    Redundant (transitively implied) edges are accepted and reduced away.
    """
    labels = list(labels)
    covers = [tuple(c) for c in covers]
    _check_pairs(labels, covers, "cover")
    order = _toposort(labels, covers)
    pos = {lab: k for k, lab in enumerate(order)}
    n = len(order)
    rel = np.eye(n, dtype=bool)
    for a, b in covers:
        rel[pos[a], pos[b]] = True
    leq = _transitive_closure(rel)
    original_index = {lab: k for k, lab in enumerate(labels)}
    return Poset(
        elements=order,
        covers=_transitive_reduction(leq, order),
        linear_extension=[original_index[lab] for lab in order],
        leq=leq,
    )


def from_relations(labels, relations):
    """Build a poset from arbitrary order pairs ``(a, b)`` meaning a <= b.

    The input is closed reflexively and transitively, checked for
    antisymmetry, and reduced to covers.
    """
    labels = list(labels)
    relations = [tuple(r) for r in relations]
    _check_pairs(labels, relations, "relation")
    pos = {lab: k for k, lab in enumerate(labels)}
    n = len(labels)
    rel = np.eye(n, dtype=bool)
    for a, b in relations:
        rel[pos[a], pos[b]] = True
    leq = _transitive_closure(rel)
    sym = leq & leq.T & ~np.eye(n, dtype=bool)
    if sym.any():
        i, j = np.argwhere(sym)[0]
        raise ConstructionError(
            f"relations contain a cycle: {labels[i]!r} -> {labels[j]!r} -> {labels[i]!r}"
        )
    covers = _transitive_reduction(leq, labels)
    return from_cover_relations(labels, covers)


def order_sets(p, i):
    """Down/up/off-stream neighborhoods of element ``i``."""
    k = p.index(i)
    down = {p.elements[j] for j in np.nonzero(p.leq[k])[0]}
    up = {p.elements[j] for j in np.nonzero(p.leq[:, k])[0]}
    off = set(p.elements) - down - up
    return OrderSets(
        down=frozenset(down),
        strict_down=frozenset(down - {i}),
        up=frozenset(up),
        strict_up=frozenset(up - {i}),
        off=frozenset(off),
    )


def intervals(p):
    """All ordered pairs ``(i, j)`` with i <= j, in vectorization order.

    The pairs are enumerated subsystem-major: the outer loop runs over the
    predicting element ``i``, the inner loop over predicted elements ``j``
    downstream of it.  Their count is the dimension of the closed-loop free
    variables.
    """
    els = p.elements
    return tuple(
        (els[i], els[j])
        for i in range(p.size)
        for j in range(p.size)
        if p.leq[i, j]
    )


def product(p, q):
    """Product poset: pairs ordered componentwise."""
    labels = [(a, b) for a in p.elements for b in q.elements]
    covers = []
    for a, b in p.covers:
        covers.extend(((a, x), (b, x)) for x in q.elements)
    for a, b in q.covers:
        covers.extend(((x, a), (x, b)) for x in p.elements)
    return from_cover_relations(labels, covers)


def zeta_matrix(p):
    """Integer matrix with a one at ``(i, j)`` exactly when j <= i."""
    if p._zeta is None:
        zeta = p.leq.T.astype(np.int64)
        zeta.setflags(write=False)
        p._zeta = zeta
    return p._zeta


def mobius_matrix(p):
    """Exact integer inverse of the zeta matrix.

    Computed by the poset difference recursion (row i is the unit row minus
    the rows of all strict predecessors), which stays in integer arithmetic;
    the inverse property is asserted exactly before caching.
    """
    if p._mobius is not None:
        return p._mobius
    n = p.size
    mu = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        row = np.zeros(n, dtype=np.int64)
        row[i] = 1
        for j in range(i):
            if p.leq[j, i]:
                row -= mu[j]
        mu[i] = row
    zeta = zeta_matrix(p)
    ident = np.eye(n, dtype=np.int64)
    if not (np.array_equal(zeta @ mu, ident) and np.array_equal(mu @ zeta, ident)):
        raise ContractError("Mobius recursion failed to invert zeta exactly")
    mu.setflags(write=False)
    p._mobius = mu
    return mu


def zeta_transform(p, f):
    """Integrate a row-vector function: result_i = sum of f_j over j <= i."""
    return np.asarray(f) @ zeta_matrix(p).T


def mobius_transform(p, f):
    """Difference a row-vector function; inverse of :func:`zeta_transform`."""
    return np.asarray(f) @ mobius_matrix(p).T
