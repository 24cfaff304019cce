"""Poset-causal systems: gain synthesis, closed loops, controller realization.

The free variables of the closed loop are the downstream-pattern entries of
the local state matrix (one coordinate per ordered pair i <= j); the true
plant states sit on the diagonal coordinates.  The architecture computes the
input from the differential improvements of the predictions,

    U_d = zeta_local(F o mu_local(X)),

and the closed loop decouples, per predicting subsystem, into the restricted
matrices A(down i, down i) + B(down i, down i) F(i).
"""

from dataclasses import dataclass

import numpy as np

from . import algebra
from .algebra import GainFamily
from .errors import ContractError, SynthesisError
from .numlin import eigenvalues, is_hurwitz, solve_care
from .poset import intervals, zeta_matrix

SPECTRUM_TOL = 1e-8


@dataclass(frozen=True)
class PosetSystem:
    """State-space data (A, B, C, D) with A and B in the incidence algebra.

    Matrices are indexed in the poset's linear-extension order; the
    disturbance enters every state directly (unit disturbance matrix).
    C and D are column-partitioned by subsystem.
    """

    poset: object
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        s = self.poset.size
        # private copies: instances are shared across concurrent solves
        a = np.atleast_2d(np.array(self.a, dtype=float))
        b = np.atleast_2d(np.array(self.b, dtype=float))
        c = np.atleast_2d(np.array(self.c, dtype=float))
        d = np.atleast_2d(np.array(self.d, dtype=float))
        if a.shape != (s, s) or b.shape != (s, s):
            raise ContractError("A and B must be square of the poset size")
        if not algebra.is_member(self.poset, a):
            raise ContractError("A is not in the incidence algebra of the poset")
        if not algebra.is_member(self.poset, b):
            raise ContractError("B is not in the incidence algebra of the poset")
        if c.shape[1] != s or d.shape[1] != s or c.shape[0] != d.shape[0]:
            raise ContractError("C and D must have one column block per subsystem")
        for name, m in (("a", a), ("b", b), ("c", c), ("d", d)):
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def output_dim(self):
        return self.c.shape[0]

    def restricted(self, label):
        """Sub-system data on the down-set of ``label``.

        Returns ``(A_dd, B_dd, C_cols, D_cols, positions)`` where the
        positions list the down-set in linear-extension order (the element
        itself first).
        """
        idx = self.poset.down_positions(self.poset.index(label))
        return (
            self.a[np.ix_(idx, idx)],
            self.b[np.ix_(idx, idx)],
            self.c[:, idx],
            self.d[:, idx],
            idx,
        )


def optimal_gains(sys):
    """H2-optimal local gains from one Riccati solve per down-set restriction."""
    gains = {}
    for label in sys.poset.elements:
        a_dd, b_dd, c_cols, d_cols, _ = sys.restricted(label)
        try:
            _, k = solve_care(a_dd, b_dd, c_cols, d_cols)
        except (ContractError, SynthesisError) as exc:
            raise SynthesisError(f"restricted Riccati failed at element {label!r}: {exc}") from exc
        gains[label] = k
    return GainFamily(sys.poset, gains)


def control_law(fams, x):
    """Downstream input variable U_d = zeta_local(F o mu_local(X)).

    The diagonal of the result is the physical input vector; entry
    (state j, subsystem i) with i < j is subsystem i's prediction of u_j.
    """
    p = fams.poset
    return algebra.zeta_local(p, algebra.local_product(fams, algebra.mu_local(p, x)))


@dataclass(frozen=True)
class ClosedLoop:
    """Linear dynamics of the free variables, with taps for x, u and z.

    State coordinates follow :func:`posetctrl.poset.intervals`; coordinate
    ``(i, i)`` is the true state of subsystem i, all other coordinates are
    predictions held by the controller.  ``a`` drives the vectorized free
    variables, ``b_w`` injects the disturbance on the true states, and
    ``c_x``/``c_u``/``c_z`` read out state, input and performance output.
    """

    poset: object
    pairs: tuple
    a: np.ndarray
    b_w: np.ndarray
    c_x: np.ndarray
    c_u: np.ndarray
    c_z: np.ndarray

    @property
    def dim(self):
        return len(self.pairs)

    def vec_d(self, m):
        """Flatten a d-pattern matrix into the free-variable coordinates."""
        p = self.poset
        m = np.asarray(m)
        return np.array([m[p.index(j), p.index(i)] for i, j in self.pairs])

    def unvec_d(self, v):
        """Inverse of :func:`vec_d`: scatter coordinates into an s x s matrix."""
        p = self.poset
        out = np.zeros((p.size, p.size))
        for coord, (i, j) in zip(np.asarray(v), self.pairs):
            out[p.index(j), p.index(i)] = coord
        return out


def _free_variable_derivative(sys, fams, x_d):
    """One evaluation of the prediction dynamics for a given free-variable matrix."""
    p = sys.poset
    x = algebra.complete_from_downstream(p, x_d)
    u_d = control_law(fams, x)
    u = algebra.mu_local(p, u_d) @ zeta_matrix(p).T
    x_uo = x - x_d
    u_uo = u - u_d
    r = algebra.project_d(p, sys.a @ x_uo + sys.b @ u_uo)
    return sys.a @ x_d + sys.b @ u_d + r, u_d


def assemble_closed_loop(sys, fams):
    """Closed-loop realization on the free variables.

    The system matrix is generated by pushing unit free-variable matrices
    through the prediction dynamics (with the upstream/offstream components
    reconstructed from the free variables at every evaluation), which avoids
    hand-indexed assembly.
    """
    p = sys.poset
    pairs = intervals(p)
    n = len(pairs)
    shell = ClosedLoop(
        poset=p, pairs=pairs, a=np.zeros((n, n)), b_w=np.zeros((n, p.size)),
        c_x=np.zeros((p.size, n)), c_u=np.zeros((p.size, n)),
        c_z=np.zeros((sys.output_dim, n)),
    )
    a = np.zeros((n, n))
    c_u = np.zeros((p.size, n))
    for k in range(n):
        basis = np.zeros(n)
        basis[k] = 1.0
        x_d = shell.unvec_d(basis)
        xdot_d, u_d = _free_variable_derivative(sys, fams, x_d)
        a[:, k] = shell.vec_d(xdot_d)
        c_u[:, k] = np.diag(u_d)

    b_w = np.zeros((n, p.size))
    c_x = np.zeros((p.size, n))
    for k, (i, j) in enumerate(pairs):
        if i == j:
            b_w[k, p.index(i)] = 1.0
            c_x[p.index(i), k] = 1.0

    c_z = sys.c @ c_x + sys.d @ c_u
    return ClosedLoop(poset=p, pairs=pairs, a=a, b_w=b_w, c_x=c_x, c_u=c_u, c_z=c_z)


def modified_closed_loop(sys, fams):
    """Per-subsystem decoupled closed matrices A(down i) + B(down i) F(i)."""
    out = {}
    for label in sys.poset.elements:
        a_dd, b_dd, _, _, _ = sys.restricted(label)
        out[label] = a_dd + b_dd @ fams.local(label)
    return out


def _sorted_eigs(m):
    w = eigenvalues(m)
    return w[np.lexsort((w.imag, w.real))]


@dataclass(frozen=True)
class SeparationReport:
    """Comparison of the closed-loop spectrum with the restricted closures."""

    closed_eigs: np.ndarray
    restricted_eigs: np.ndarray
    max_pair_distance: float
    matched: bool
    stable: bool
    unstable_elements: tuple
    tolerance: float

    def to_dict(self):
        return {
            "closed_loop_eigenvalues": [[z.real, z.imag] for z in self.closed_eigs],
            "restricted_eigenvalues": [[z.real, z.imag] for z in self.restricted_eigs],
            "max_pair_distance": self.max_pair_distance,
            "spectra_match": self.matched,
            "stable": self.stable,
            "unstable_elements": list(self.unstable_elements),
            "tolerance": self.tolerance,
        }


def separation_report(sys, fams):
    """Check that the closed-loop spectrum is the union of restricted spectra.

    Eigenvalue multisets are compared after sorting by (real, imaginary)
    with pairwise distance below ``SPECTRUM_TOL * (1 + |A_closed|)``.
    """
    cl = assemble_closed_loop(sys, fams)
    closed = _sorted_eigs(cl.a)
    pieces = []
    unstable = []
    for label, m in modified_closed_loop(sys, fams).items():
        w = eigenvalues(m)
        pieces.append(w)
        if not np.all(w.real < 0):
            unstable.append(label)
    restricted = np.concatenate(pieces)
    restricted = restricted[np.lexsort((restricted.imag, restricted.real))]
    tol = SPECTRUM_TOL * (1.0 + np.linalg.norm(cl.a))
    dist = float(np.abs(closed - restricted).max()) if len(closed) else 0.0
    return SeparationReport(
        closed_eigs=closed,
        restricted_eigs=restricted,
        max_pair_distance=dist,
        matched=dist < tol,
        stable=not unstable and bool(np.all(closed.real < 0)),
        unstable_elements=tuple(unstable),
        tolerance=tol,
    )


@dataclass(frozen=True)
class ControllerRealization:
    """Dynamic state-feedback controller computing differential improvements.

    The controller state vector stacks, per subsystem j, the predictions'
    differential improvements at strictly-downstream coordinates; its labels
    are ``(j, state)`` pairs.  ``(a_k, b_k, c_k, d_k)`` realize the map from
    the measured plant state x to the input u.  ``d_k`` is a member of the
    incidence algebra, so the static part is poset-causal by construction,
    and the dynamic part only routes upstream information.
    """

    poset: object
    state_labels: tuple
    a_k: np.ndarray
    b_k: np.ndarray
    c_k: np.ndarray
    d_k: np.ndarray

    @property
    def dim(self):
        return len(self.state_labels)


def controller_realization(sys, fams):
    """Explicit controller with states q(j) = differential improvements at j.

    Per subsystem j, with A_cl(j) = A(down j) + B(down j) F(j) partitioned
    into the leading (j, j) entry and the strictly-downstream block,

        qdot(j) = A22(j) q(j) + A21(j) (x_j - sum_{k < j} q_j(k))
        u_j     = sum_{k <= j} F_row_j(k) [x_k - sum_{l < k} q_k(l); q(k)] .
    """
    p = sys.poset
    state_labels = []
    slices = {}
    for label in p.elements:
        down = p.down_positions(p.index(label))
        strict = down[1:]
        start = len(state_labels)
        state_labels.extend((label, p.elements[t]) for t in strict)
        slices[label] = (start, len(state_labels))
    nq = len(state_labels)
    s = p.size
    state_index = {lab: t for t, lab in enumerate(state_labels)}

    a_k = np.zeros((nq, nq))
    b_k = np.zeros((nq, s))
    c_k = np.zeros((s, nq))
    d_k = np.zeros((s, s))

    def minus_upstream_improvements(label):
        """Row selecting -sum over k < label of q_label(k) from the stacked q."""
        row = np.zeros(nq)
        pos = p.index(label)
        for k in np.nonzero(p.leq[:, pos])[0]:
            if k == pos:
                continue
            row[state_index[(p.elements[k], label)]] -= 1.0
        return row

    for label in p.elements:
        a_dd, b_dd, _, _, idx = sys.restricted(label)
        a_cl = a_dd + b_dd @ fams.local(label)
        lo, hi = slices[label]
        if hi == lo:
            continue
        a21 = a_cl[1:, :1]
        a22 = a_cl[1:, 1:]
        a_k[lo:hi, lo:hi] += a22
        # the driving signal x_j - sum_{k<j} q_j(k) is the improvement at j itself
        b_k[lo:hi, p.index(label)] += a21[:, 0]
        a_k[lo:hi, :] += a21 @ minus_upstream_improvements(label)[None, :]

    for j_pos, j_label in enumerate(p.elements):
        for k_pos in np.nonzero(p.leq[:, j_pos])[0]:
            k_label = p.elements[k_pos]
            down = p.down_positions(k_pos)
            row_local = int(np.nonzero(down == j_pos)[0][0])
            f_row = fams.local(k_label)[row_local]
            d_k[j_pos, k_pos] += f_row[0]
            c_k[j_pos, :] += f_row[0] * minus_upstream_improvements(k_label)
            lo, hi = slices[k_label]
            c_k[j_pos, lo:hi] += f_row[1:]

    return ControllerRealization(
        poset=p, state_labels=tuple(state_labels), a_k=a_k, b_k=b_k, c_k=c_k, d_k=d_k
    )


def interconnect(sys, ctrl):
    """Plant/controller interconnection as one state-space system.

    State is ``[x; q]``; returns ``(A_full, B_w, C_x, C_u, C_z)`` with the
    disturbance entering the plant states directly.
    """
    s = sys.poset.size
    nq = ctrl.dim
    a_full = np.block([
        [sys.a + sys.b @ ctrl.d_k, sys.b @ ctrl.c_k],
        [ctrl.b_k, ctrl.a_k],
    ])
    b_w = np.vstack([np.eye(s), np.zeros((nq, s))])
    c_x = np.hstack([np.eye(s), np.zeros((s, nq))])
    c_u = np.hstack([ctrl.d_k, ctrl.c_k])
    c_z = sys.c @ c_x + sys.d @ c_u
    return a_full, b_w, c_x, c_u, c_z


def transfer(a, b, c, sigma):
    """Transfer matrix C (sigma I - A)^{-1} B at one complex frequency."""
    n = a.shape[0]
    return c @ np.linalg.solve(sigma * np.eye(n) - a, b)


def reconstruction_consistency(sys, rng, trials=20):
    """Deviation between the two derivative expressions for the reconstructed
    (upstream/offstream) components, maximized over random free variables.

    Zero in exact arithmetic for any poset-causal system; callers compare the
    returned worst case against their tolerance.
    """
    p = sys.poset
    mask = algebra.d_pattern_mask(p)
    zt = zeta_matrix(p).T
    worst = 0.0
    for _ in range(trials):
        x_d = rng.standard_normal((p.size, p.size)) * mask
        u_d = rng.standard_normal((p.size, p.size)) * mask
        x = algebra.complete_from_downstream(p, x_d)
        u = algebra.complete_from_downstream(p, u_d)
        r = algebra.project_d(p, sys.a @ (x - x_d) + sys.b @ (u - u_d))
        lhs = algebra.project_uo(p, algebra.mu_local(p, sys.a @ x_d + sys.b @ u_d + r) @ zt)
        rhs = algebra.project_uo(p, sys.a @ x + sys.b @ u)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst
