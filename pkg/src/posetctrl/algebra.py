"""Incidence-algebra arithmetic on local variables.

A *local variable* is a plain ``s x s`` float array ``X`` whose column ``i``
holds subsystem i's prediction of a global vector; ``X[j, i]`` is the
prediction of coordinate j formed at subsystem i, and the diagonal carries
the true values.

Two index conventions coexist and agree on the same set of matrix entries:

* incidence pattern, entrywise: ``M[row, col]`` may be nonzero only when
  ``col <= row`` (lower triangular in linear-extension order);
* d-pattern, prediction-wise: the entry of subsystem ``i`` predicting state
  ``j`` is kept when ``i <= j``.  That entry sits at ``M[row=j, col=i]``,
  which is the same lower-triangular position.

``in_incidence_pattern`` and ``in_d_pattern`` name the two views; both are
backed by the single mask returned by :func:`d_pattern_mask`.
"""

import numpy as np

from .errors import ContractError, UnknownElementError
from .poset import mobius_matrix, zeta_matrix

PATTERN_TOL = 1e-12


def in_incidence_pattern(p, row, col):
    """May ``M[row, col]`` be nonzero for a member of the incidence algebra?"""
    return p.leq_of(col, row)


def in_d_pattern(p, subsystem, state):
    """Does subsystem's prediction of ``state`` belong to the free variables?"""
    return p.leq_of(subsystem, state)


def d_pattern_mask(p):
    """Boolean entry mask shared by the incidence pattern and the d-pattern."""
    return p.leq.T.copy()


def is_member(p, m, tol=PATTERN_TOL):
    """True iff ``m`` vanishes (to ``tol``) off the incidence pattern."""
    m = np.asarray(m)
    if m.shape != (p.size, p.size):
        raise ContractError(f"expected a {p.size}x{p.size} matrix, got {m.shape}")
    return bool(np.all(np.abs(m[~d_pattern_mask(p)]) <= tol))


def project_d(p, m):
    """Keep the downstream-prediction entries of a local variable, zero the rest."""
    m = np.asarray(m, dtype=float)
    return np.where(d_pattern_mask(p), m, 0.0)


def project_uo(p, m):
    """Complement of :func:`project_d`: the upstream/offstream entries."""
    m = np.asarray(m, dtype=float)
    return np.where(d_pattern_mask(p), 0.0, m)


def zeta_local(p, x):
    """Aggregate local predictions upstream: project_d(X zeta^T)."""
    return project_d(p, np.asarray(x) @ zeta_matrix(p).T)


def mu_local(p, x):
    """Differential improvements of the predictions: project_d(X mu^T).

    Column i of the result is supported on the down-set of i and measures
    what subsystem i knows beyond the aggregate of its strict upstream.
    Inverse of :func:`zeta_local` on d-pattern inputs.
    """
    return project_d(p, np.asarray(x) @ mobius_matrix(p).T)


def embed(p, labels, k):
    """Zero-pad a matrix indexed by a subset of elements to full size.

    ``labels`` lists the rows/columns of ``k`` (in matching order); entries
    outside that subset are zero.
    """
    idx = np.array([p.index(lab) for lab in labels], dtype=int)
    k = np.asarray(k, dtype=float)
    if k.shape != (len(idx), len(idx)):
        raise ContractError(f"gain shape {k.shape} does not match subset size {len(idx)}")
    out = np.zeros((p.size, p.size))
    if len(idx):
        out[np.ix_(idx, idx)] = k
    return out


def complete_from_downstream(p, x_d, tol=PATTERN_TOL):
    """Reconstruct the full local variable from its free (downstream) part.

    Upstream entries come out exact (subsystem i knows x_j for j < i) and
    offstream entries aggregate the differential improvements of shared
    ancestors.  Raises when ``x_d`` has support off the d-pattern.
    """
    x_d = np.asarray(x_d, dtype=float)
    if not is_member(p, x_d, tol=tol):
        raise ContractError("free-variable matrix has support off the d-pattern")
    return mu_local(p, x_d) @ zeta_matrix(p).T


class GainFamily:
    """One feedback gain per element, supported on its down-set.

    ``gains[i]`` is a ``|down(i)| x |down(i)|`` matrix indexed by the
    down-set of i in linear-extension order.  ``embedded(i)`` zero-pads it
    to full size.
    """

    def __init__(self, p, gains):
        self.poset = p
        clean = {}
        for label, g in gains.items():
            if label not in p:
                raise UnknownElementError(label)
            down = p.down_positions(p.index(label))
            g = np.asarray(g, dtype=float)
            if g.shape != (len(down), len(down)):
                raise ContractError(
                    f"gain for {label!r} has shape {g.shape}, expected "
                    f"({len(down)}, {len(down)})"
                )
            clean[label] = g
        missing = set(p.elements) - set(clean)
        if missing:
            raise ContractError(f"missing gains for elements {sorted(missing, key=repr)}")
        self._gains = clean

    def local(self, label):
        """The gain of ``label`` on its down-set coordinates."""
        return self._gains[label]

    def embedded(self, label):
        """The gain of ``label`` zero-padded to the full index set."""
        p = self.poset
        down = p.down_positions(p.index(label))
        return embed(p, [p.elements[k] for k in down], self._gains[label])

    def items(self):
        return self._gains.items()

    def __iter__(self):
        return iter(self.poset.elements)

    @classmethod
    def from_embedded(cls, p, embedded):
        """Build from full-size matrices, checking support on down x down."""
        gains = {}
        for label, g in embedded.items():
            down = p.down_positions(p.index(label))
            g = np.asarray(g, dtype=float)
            mask = np.zeros_like(g, dtype=bool)
            mask[np.ix_(down, down)] = True
            if np.abs(g[~mask]).max(initial=0.0) > PATTERN_TOL:
                raise ContractError(f"gain for {label!r} has support off its down-set")
            gains[label] = g[np.ix_(down, down)]
        return cls(p, gains)


def local_product(fams, x):
    """Columnwise application of the embedded gains: column i is F_hat(i) X^i.

    Maps incidence-pattern local variables to incidence-pattern local
    variables.
    """
    p = fams.poset
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x, dtype=float)
    for i, label in enumerate(p.elements):
        out[:, i] = fams.embedded(label) @ x[:, i]
    return out
