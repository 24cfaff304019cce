"""Time-domain simulation: continuous closed loops and the discrete
disturbance-reconstruction pipeline.

Continuous runs integrate the free-variable dynamics with fixed-step
classical RK4 (deterministic, order-checkable).  Discrete runs iterate the
local-variable update, reconstruct the previous disturbance exactly by
differencing the one-step prediction, and feed it through a causal FIR
filter whose taps live in the incidence algebra.
"""

import re

from dataclasses import dataclass

import numpy as np

from . import algebra
from .errors import ContractError, DivergenceError
from .poset import intervals, zeta_matrix

DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 20.0
DEFAULT_TAPS = 8


def _token(label):
    return re.sub(r"[\s,()\[\]]+", "-", str(label)).strip("-")


@dataclass
class Trace:
    """Sampled trajectory of a run.

    ``xd`` rows hold the free variables in interval order (pairs
    ``(subsystem, state)``); for discrete runs ``w`` holds the injected
    disturbance applied in the update leaving each step and ``what`` the
    reconstructed estimate of the previous step's disturbance.
    """

    t: np.ndarray
    x: np.ndarray
    xd: np.ndarray
    u: np.ndarray
    z: np.ndarray
    pairs: tuple
    elements: tuple
    w: np.ndarray = None
    what: np.ndarray = None

    def header(self):
        cols = ["t"]
        cols += [f"x_{_token(e)}" for e in self.elements]
        cols += [f"xd_{_token(i)}_{_token(j)}" for i, j in self.pairs]
        cols += [f"u_{_token(e)}" for e in self.elements]
        cols += [f"z_{k + 1}" for k in range(self.z.shape[1])]
        if self.w is not None:
            cols += [f"w_{_token(e)}" for e in self.elements]
            cols += [f"what_{_token(e)}" for e in self.elements]
        return cols

    def rows(self):
        blocks = [self.t[:, None], self.x, self.xd, self.u, self.z]
        if self.w is not None:
            blocks += [self.w, self.what]
        return np.hstack(blocks)

    def to_csv(self, path):
        """Write one row per step; floats serialized with 17 significant digits."""
        rows = self.rows()
        with open(path, "w") as fh:
            fh.write(",".join(self.header()) + "\n")
            for row in rows:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def simulate_continuous(cl, x0, disturbance=None, horizon=DEFAULT_HORIZON, dt=DEFAULT_DT):
    """Integrate the closed loop with classical fixed-step RK4.

    ``disturbance`` is a callable from time to an s-vector (or None for
    none); predictions start at zero and the diagonal coordinates start at
    ``x0``.  Raises when the state leaves the finite range, naming the step.
    """
    if dt <= 0:
        raise ContractError("dt must be positive")
    if horizon < dt:
        raise ContractError("horizon must cover at least one step")
    s = len(cl.poset.elements)
    x0 = np.asarray(x0, dtype=float).reshape(s)
    if disturbance is None:
        w_of = lambda t: np.zeros(s)
    else:
        w_of = lambda t: np.asarray(disturbance(t), dtype=float).reshape(s)

    steps = int(round(horizon / dt))
    y = cl.vec_d(np.diag(x0))
    a, b_w = cl.a, cl.b_w

    states = np.empty((steps + 1, cl.dim))
    states[0] = y
    # overflow surfaces as the explicit divergence error below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            t = k * dt
            f1 = a @ y + b_w @ w_of(t)
            f2 = a @ (y + 0.5 * dt * f1) + b_w @ w_of(t + 0.5 * dt)
            f3 = a @ (y + 0.5 * dt * f2) + b_w @ w_of(t + 0.5 * dt)
            f4 = a @ (y + dt * f3) + b_w @ w_of(t + dt)
            y = y + (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
            if not np.all(np.isfinite(y)):
                raise DivergenceError(
                    f"state became non-finite at step {k + 1} (t={t + dt:g})"
                )
            states[k + 1] = y

    t_grid = np.arange(steps + 1) * dt
    return Trace(
        t=t_grid,
        x=states @ cl.c_x.T,
        xd=states,
        u=states @ cl.c_u.T,
        z=states @ cl.c_z.T,
        pairs=cl.pairs,
        elements=cl.poset.elements,
    )


class YoulaFilter:
    """Causal FIR filter from reconstructed disturbances to inputs.

    Tap ``k`` multiplies the disturbance reconstructed ``k + 1`` steps ago,
    so the filter is causal in time; every tap must be a member of the
    incidence algebra, which makes it poset-causal as well.
    """

    def __init__(self, p, taps):
        self.poset = p
        clean = []
        for k, tap in enumerate(taps):
            tap = np.asarray(tap, dtype=float)
            if tap.shape != (p.size, p.size):
                raise ContractError(f"tap {k} has shape {tap.shape}, expected square of size {p.size}")
            if not algebra.is_member(p, tap):
                raise ContractError(f"tap {k} is not in the incidence algebra")
            clean.append(tap)
        self.taps = tuple(clean)

    def __len__(self):
        return len(self.taps)

    def scaled(self, factor):
        return YoulaFilter(self.poset, [factor * tap for tap in self.taps])

    def plus(self, other):
        if len(other) != len(self):
            raise ContractError("filters must have the same length to add")
        return YoulaFilter(self.poset, [a + b for a, b in zip(self.taps, other.taps)])


def random_youla_filter(p, length=DEFAULT_TAPS, seed=0, scale=None):
    """Deterministic random filter supported on the incidence pattern."""
    rng = np.random.default_rng(seed)
    if scale is None:
        scale = 0.5 / max(length, 1)
    mask = algebra.d_pattern_mask(p)
    return YoulaFilter(p, [scale * rng.standard_normal((p.size, p.size)) * mask
                           for _ in range(length)])


def youla_reconstruct(p, x_t, x_hat_t):
    """Recover the previous step's disturbance from state and prediction.

    The product-poset difference of the trajectory reduces to the local
    difference of the two matrices; the result is the diagonal disturbance
    matrix of the previous step, exactly up to arithmetic error.
    """
    return algebra.mu_local(p, np.asarray(x_t, dtype=float) - np.asarray(x_hat_t, dtype=float))


def simulate_discrete(sys, filt, w, steps=None):
    """Run the discrete pipeline: simulate, reconstruct, filter, feed forward.

    ``w`` is the disturbance sequence (one s-vector per step); ``w[t]``
    enters the update from step t to t+1.  The input at each step is the
    filter applied to the reconstructed disturbances, never to the true
    ones.  Trajectories start at rest.
    """
    p = sys.poset
    s = p.size
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if w.shape[1] != s:
        raise ContractError(f"disturbance rows must have {s} entries")
    if steps is None:
        steps = w.shape[0]
    if steps > w.shape[0]:
        w = np.vstack([w, np.zeros((steps - w.shape[0], s))])
    if filt is None:
        filt = YoulaFilter(p, [])

    zt = zeta_matrix(p).T
    pairs = intervals(p)
    pair_idx = [(p.index(j), p.index(i)) for i, j in pairs]

    x_loc = np.zeros((s, s))
    u_loc = np.zeros((s, s))
    w_rec = np.zeros((steps + 1, s))

    t_grid = np.arange(steps + 1, dtype=float)
    x_out = np.zeros((steps + 1, s))
    xd_out = np.zeros((steps + 1, len(pairs)))
    u_out = np.zeros((steps + 1, s))
    z_out = np.zeros((steps + 1, sys.output_dim))
    what_out = np.zeros((steps + 1, s))

    def record(t, x_loc, u_loc):
        x = np.diag(x_loc).copy()
        u = np.diag(u_loc).copy()
        x_out[t] = x
        u_out[t] = u
        xd_out[t] = [x_loc[r, c] for r, c in pair_idx]
        z_out[t] = sys.c @ x + sys.d @ u

    record(0, x_loc, u_loc)
    for t in range(1, steps + 1):
        x_hat = sys.a @ x_loc + sys.b @ u_loc
        x_loc = x_hat + np.diag(w[t - 1]) @ zt
        estimate = youla_reconstruct(p, x_loc, x_hat)
        w_rec[t - 1] = np.diag(estimate)
        what_out[t] = w_rec[t - 1]
        # local input: each subsystem filters the reconstructed disturbances
        # it knows about (its up-set), which completes the input predictions
        u_loc = np.zeros((s, s))
        for k, tap in enumerate(filt.taps):
            lag = t - (k + 1)
            if lag >= 0:
                u_loc += tap @ np.diag(w_rec[lag]) @ zt
        record(t, x_loc, u_loc)

    return Trace(
        t=t_grid,
        x=x_out,
        xd=xd_out,
        u=u_out,
        z=z_out,
        pairs=pairs,
        elements=p.elements,
        w=np.vstack([w[:steps], np.zeros((1, s))]),
        what=what_out,
    )
