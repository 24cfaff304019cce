"""Vectorized zeta/mu operators, the lifted plant, and block-diagonalization.

Vectorization is column-major (columns concatenated), so a coordinate of
``vec(X)`` addresses (subsystem column, state row) and the d-pattern picks
the coordinates with subsystem <= state.  On those coordinates the
operators

    zeta_bar = Pi_d (zeta (x) I)      mu_bar = Pi_d (mu (x) I)

are inverse to each other, and conjugating the lifted plant by them makes
it block diagonal: one plant copy per predicting subsystem.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .numlin import eigenvalues
from .poset import mobius_matrix, zeta_matrix


def vec_d_mask(p):
    """Mask of the free-variable coordinates of a column-major vectorization."""
    s = p.size
    mask = np.zeros(s * s, dtype=bool)
    for i in range(s):
        for j in range(s):
            mask[i * s + j] = p.leq[i, j]
    return mask


def build_vector_operators(p):
    """Integer matrices (zeta_bar, mu_bar, theta) acting on vec(X).

    ``theta`` completes downstream inputs to full local inputs:
    theta vec(U_d) = vec(U).  zeta_bar mu_bar = mu_bar zeta_bar = Pi_d
    exactly.
    """
    s = p.size
    eye = np.eye(s, dtype=np.int64)
    pi_d = np.diag(vec_d_mask(p).astype(np.int64))
    zeta_kron = np.kron(zeta_matrix(p), eye)
    mu_kron = np.kron(mobius_matrix(p), eye)
    zeta_bar = pi_d @ zeta_kron
    mu_bar = pi_d @ mu_kron
    theta = zeta_kron @ pi_d @ mu_kron
    return zeta_bar, mu_bar, theta


@dataclass(frozen=True)
class LiftedPlant:
    """State-space realization of the map vec(U_d) -> vec(X).

    One copy of the plant per subsystem column, fed through the completion
    operator theta; realization dimension is s*s.
    """

    poset: object
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def evaluate(self, sigma):
        """Transfer matrix at one complex frequency (must avoid the spectrum)."""
        n = self.a.shape[0]
        eigs = eigenvalues(self.a)
        if np.abs(eigs - sigma).min() < 1e-9:
            raise ContractError(f"evaluation frequency {sigma} hits the plant spectrum")
        return self.c @ np.linalg.solve(sigma * np.eye(n) - self.a, self.b)


def lift_plant(sys):
    """Lifted plant realization: block-diagonal plant copies behind theta."""
    s = sys.poset.size
    _, _, theta = build_vector_operators(sys.poset)
    eye = np.eye(s)
    return LiftedPlant(
        poset=sys.poset,
        a=np.kron(eye, sys.a),
        b=np.kron(eye, sys.b) @ theta,
        c=np.eye(s * s),
    )


def sample_frequencies(sys, count, rng, radius=(0.5, 5.0), spectrum_gap=1e-3):
    """Random complex frequencies away from the plant spectrum."""
    eigs = eigenvalues(sys.a)
    out = []
    while len(out) < count:
        r = rng.uniform(*radius)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        sigma = r * np.exp(1j * phi)
        if np.abs(eigs - sigma).min() > spectrum_gap:
            out.append(sigma)
    return np.array(out)


@dataclass(frozen=True)
class BlockDiagonalReport:
    """Frequency-sampled check that mu_bar G_vec zeta_bar is block diagonal."""

    frequencies: np.ndarray
    max_offdiag: np.ndarray
    identity_error: np.ndarray
    tolerance: float
    passed: bool

    def to_dict(self):
        return {
            "frequencies": [[z.real, z.imag] for z in self.frequencies],
            "max_offdiagonal_block_norm": list(map(float, self.max_offdiag)),
            "diagonal_identity_error": list(map(float, self.identity_error)),
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def check_block_diagonal(sys, frequencies=None, count=10, seed=0, tol=1e-10):
    """Evaluate mu_bar G_vec(sigma) zeta_bar over sampled frequencies.

    Checks both that every off-diagonal s x s block vanishes and that the
    conjugated plant equals Pi_d (I (x) G(sigma)) Pi_d.
    """
    p = sys.poset
    s = p.size
    if frequencies is None:
        frequencies = sample_frequencies(sys, count, np.random.default_rng(seed))
    frequencies = np.asarray(frequencies, dtype=complex)
    zeta_bar, mu_bar, _ = build_vector_operators(p)
    plant = lift_plant(sys)
    pi_d = np.diag(vec_d_mask(p).astype(float))

    offdiag = []
    ident_err = []
    for sigma in frequencies:
        conjugated = mu_bar @ plant.evaluate(sigma) @ zeta_bar
        worst = 0.0
        for bi in range(s):
            for bj in range(s):
                if bi == bj:
                    continue
                block = conjugated[bi * s:(bi + 1) * s, bj * s:(bj + 1) * s]
                worst = max(worst, float(np.linalg.norm(block)))
        offdiag.append(worst)
        g_sigma = np.linalg.solve(sigma * np.eye(s) - sys.a, sys.b)
        reference = pi_d @ np.kron(np.eye(s), g_sigma) @ pi_d
        ident_err.append(float(np.abs(conjugated - reference).max()))

    offdiag = np.array(offdiag)
    ident_err = np.array(ident_err)
    passed = bool(offdiag.max(initial=0.0) < tol and ident_err.max(initial=0.0) < tol)
    return BlockDiagonalReport(
        frequencies=frequencies,
        max_offdiag=offdiag,
        identity_error=ident_err,
        tolerance=tol,
        passed=passed,
    )
