"""Dense numerical kernels: stability tests, Lyapunov/Riccati solves, H2 norms.

Everything here is desk-scale (n <= 64): the Lyapunov equation is solved as
an n^2-dimensional linear system, the Riccati equation by Newton iteration
with each step one Lyapunov solve.  Residuals are checked after every solve.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericalError, SynthesisError

LYAPUNOV_TOL = 1e-10
RICCATI_TOL = 1e-8
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


@dataclass(frozen=True)
class StateSpace:
    """Continuous-time system x' = Ax + Bw, z = Cx + Dw."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        a, b, c, d = (np.atleast_2d(np.asarray(m, dtype=float)) for m in
                      (self.a, self.b, self.c, self.d))
        n = a.shape[0]
        if a.shape != (n, n):
            raise ContractError("A must be square")
        if b.shape[0] != n or c.shape[1] != n:
            raise ContractError("B/C dimensions incompatible with A")
        if d.shape != (c.shape[0], b.shape[1]):
            raise ContractError("D dimensions incompatible with B and C")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)


def eigenvalues(m):
    """Eigenvalues of a real square matrix (LAPACK Hessenberg + shifted QR)."""
    try:
        return np.linalg.eigvals(np.asarray(m, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc


def spectral_radius(m):
    return float(np.abs(eigenvalues(m)).max())


def is_hurwitz(m, margin=0.0):
    """True iff every eigenvalue real part is strictly below ``-margin``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ContractError("stability test needs a square matrix")
    return bool(np.all(eigenvalues(m).real < -margin))


def solve_lyapunov(a, q):
    """Solve A^T P + P A + Q = 0 for symmetric P.

    A must be Hurwitz and Q symmetric.  The equation is vectorized into an
    n^2 x n^2 linear system and solved densely; the result is symmetrized
    and its residual verified against ``LYAPUNOV_TOL``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = a.shape[0]
    if q.shape != (n, n):
        raise ContractError("Q must match the shape of A")
    if not np.allclose(q, q.T, atol=1e-12 * (1 + np.abs(q).max())):
        raise ContractError("Q must be symmetric")
    if not is_hurwitz(a):
        raise ContractError("Lyapunov solve requires a Hurwitz A")

    eye = np.eye(n)
    # vec(A^T P) + vec(P A) = (I (x) A^T + A^T (x) I) vec(P), column-major vec
    system = np.kron(eye, a.T) + np.kron(a.T, eye)
    try:
        vec_p = np.linalg.solve(system, -q.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular Lyapunov system: {exc}") from exc
    p = vec_p.reshape((n, n), order="F")
    p = 0.5 * (p + p.T)

    residual = a.T @ p + p @ a + q
    bound = LYAPUNOV_TOL * (np.linalg.norm(a) * np.linalg.norm(p) + np.linalg.norm(q))
    if np.linalg.norm(residual) > max(bound, LYAPUNOV_TOL):
        raise NumericalError("Lyapunov residual above tolerance")
    return p


def _riccati_residual(a, b, q, r, s, p):
    gain_term = (p @ b + s) @ np.linalg.solve(r, b.T @ p + s.T)
    return a.T @ p + p @ a - gain_term + q


def _hamiltonian_seed(a, b, q, r, s):
    """Stabilizing gain from the stable invariant subspace of the Hamiltonian."""
    n = a.shape[0]
    rinv_st = np.linalg.solve(r, s.T)
    rinv_bt = np.linalg.solve(r, b.T)
    a_bar = a - b @ rinv_st
    q_bar = q - s @ rinv_st
    ham = np.block([[a_bar, -b @ rinv_bt], [-q_bar, -a_bar.T]])
    w, v = np.linalg.eig(ham)
    stable = w.real < 0
    if stable.sum() != n:
        return None
    basis = v[:, stable]
    x1, x2 = basis[:n], basis[n:]
    try:
        p0 = np.real(x2 @ np.linalg.inv(x1))
    except np.linalg.LinAlgError:
        return None
    p0 = 0.5 * (p0 + p0.T)
    k0 = -np.linalg.solve(r, b.T @ p0 + s.T)
    if not is_hurwitz(a + b @ k0):
        return None
    return k0


def _damping_seed(a, b):
    """Fallback stabilizing gain via shifted controllability Gramian."""
    n = a.shape[0]
    beta = np.linalg.norm(a, ord=2) + 1.0
    # (A + beta I) W + W (A + beta I)^T = 2 B B^T, W > 0 for controllable (A, B)
    shifted = -(a + beta * np.eye(n)).T
    w = solve_lyapunov(shifted, 2.0 * b @ b.T)
    try:
        k0 = -np.linalg.solve(w, b).T
    except np.linalg.LinAlgError as exc:
        raise SynthesisError(
            "could not seed the Riccati iteration: shifted Gramian singular "
            "(restricted pair not controllable)"
        ) from exc
    if not is_hurwitz(a + b @ k0):
        raise SynthesisError("damping seed failed to stabilize")
    return k0


def solve_care(a, b, c, d):
    """Stabilizing solution of the output-weighted algebraic Riccati equation.

    Solves ``A^T P + P A - (P B + C^T D)(D^T D)^{-1}(B^T P + D^T C) + C^T C = 0``
    for the cost integral of |Cx + Du|^2 and returns ``(P, K)`` with
    ``K = -(D^T D)^{-1}(B^T P + D^T C)`` and ``A + B K`` Hurwitz.

    Newton iteration (one Lyapunov solve per step), seeded from the stable
    invariant subspace of the Hamiltonian when that yields a stabilizing
    gain, otherwise by a damping-based gain.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    d = np.atleast_2d(np.asarray(d, dtype=float))
    n, m = b.shape
    r = d.T @ d
    s = c.T @ d
    q = c.T @ c
    if np.linalg.matrix_rank(r) < m:
        raise ContractError("D^T D must be invertible (every input penalized)")

    if is_hurwitz(a):
        k = np.zeros((m, n))
    else:
        k = _hamiltonian_seed(a, b, q, r, s)
        if k is None:
            k = _damping_seed(a, b)

    scale = max(1.0, np.linalg.norm(q))
    p = None
    for _ in range(NEWTON_MAX_ITER):
        a_cl = a + b @ k
        z = c + d @ k
        try:
            p = solve_lyapunov(a_cl, z.T @ z)
        except (ContractError, NumericalError) as exc:
            raise SynthesisError(f"Newton step lost stability: {exc}") from exc
        k = -np.linalg.solve(r, b.T @ p + s.T)
        rel = np.linalg.norm(_riccati_residual(a, b, q, r, s, p)) / max(scale, np.linalg.norm(p))
        if rel < NEWTON_TOL:
            break

    rel = np.linalg.norm(_riccati_residual(a, b, q, r, s, p)) / max(scale, np.linalg.norm(p))
    if rel > RICCATI_TOL:
        raise SynthesisError(f"Riccati residual {rel:.3e} above tolerance {RICCATI_TOL:.0e}")
    if not is_hurwitz(a + b @ k):
        raise SynthesisError("Riccati gain does not stabilize the plant")
    return p, k


def h2_norm_squared(ss):
    """Squared H2 norm of a stable system with zero feedthrough.

    Returns ``trace(B^T Q_o B)`` where Q_o is the observability Gramian
    solving ``A^T Q_o + Q_o A + C^T C = 0``.
    """
    if np.abs(ss.d).max(initial=0.0) > 0.0:
        raise ContractError("H2 norm needs zero disturbance feedthrough")
    if not is_hurwitz(ss.a):
        raise ContractError("H2 norm of an unstable system is infinite")
    gram = solve_lyapunov(ss.a, ss.c.T @ ss.c)
    return float(np.trace(ss.b.T @ gram @ ss.b))
