"""Batch front-end: synthesis, simulation and verification subcommands.

Reports go to stdout as JSON; traces go to CSV files named by flag, with an
optional rendered figure alongside.  Exit codes: 0 success, 2 malformed
input, 3 numerical failure, 4 verification failure.
"""

import argparse
import json
import sys as _sys

import numpy as np

from . import algebra, blockdiagram, h2, simulate, synthesis
from . import poset as poset_mod
from .errors import NumericalError, PosetCtrlError, SpecFormatError
from .numlin import is_hurwitz, spectral_radius

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4

BLOCKDIAG_TOL = 1e-10
OPTIMALITY_TOL = 1e-6


def load_system(path):
    """Parse a system-specification JSON file into a PosetSystem."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecFormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"{path}: invalid JSON ({exc})") from exc

    try:
        poset_raw = raw["poset"]
        elements = poset_raw["elements"]
        covers = [tuple(c) for c in poset_raw.get("covers", [])]
        matrices = {key: np.array(raw[key], dtype=float) for key in ("A", "B", "C", "D")}
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecFormatError(f"{path}: missing or malformed field ({exc})") from exc

    try:
        p = poset_mod.from_cover_relations(elements, covers)
    except PosetCtrlError as exc:
        raise SpecFormatError(f"{path}: bad poset ({exc})") from exc

    s = p.size
    for key in ("A", "B"):
        if matrices[key].shape != (s, s):
            raise SpecFormatError(f"{path}: {key} must be a {s}x{s} matrix")
    for key in ("C", "D"):
        if matrices[key].ndim != 2 or matrices[key].shape[1] != s:
            raise SpecFormatError(f"{path}: {key} must be 2-d with {s} columns")

    # input matrices are indexed by the element order of the file; reindex
    # into linear-extension order
    perm = [elements.index(e) for e in p.elements]
    a = matrices["A"][np.ix_(perm, perm)]
    b = matrices["B"][np.ix_(perm, perm)]
    c = matrices["C"][:, perm]
    d = matrices["D"][:, perm]
    try:
        return synthesis.PosetSystem(p, a, b, c, d)
    except PosetCtrlError as exc:
        raise SpecFormatError(f"{path}: {exc}") from exc


def system_to_dict(sysm):
    """Serialize a system in canonical (linear-extension) element order."""
    return {
        "poset": {
            "elements": list(sysm.poset.elements),
            "covers": [list(c) for c in sysm.poset.covers],
        },
        "A": sysm.a.tolist(),
        "B": sysm.b.tolist(),
        "C": sysm.c.tolist(),
        "D": sysm.d.tolist(),
    }


def _emit(payload):
    json.dump(payload, _sys.stdout, indent=2, sort_keys=True, default=str)
    _sys.stdout.write("\n")


def _gains_payload(sysm, fams):
    out = []
    for label in sysm.poset.elements:
        down = sysm.poset.down_positions(sysm.poset.index(label))
        out.append({
            "element": label,
            "support": [sysm.poset.elements[k] for k in down],
            "gain": fams.local(label).tolist(),
        })
    return out


def cmd_synth(args):
    sysm = load_system(args.spec)
    fams = synthesis.optimal_gains(sysm)
    report = synthesis.separation_report(sysm, fams)
    _emit({
        "gains": _gains_payload(sysm, fams),
        "separation": report.to_dict(),
    })
    return EXIT_OK


def _sinusoid_disturbance(s, seed):
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal((3, s))
    freqs = rng.uniform(0.2, 2.0, size=3)
    phases = rng.uniform(0, 2 * np.pi, size=3)

    def w_of(t):
        return sum(a * np.sin(f * t + ph) for a, f, ph in zip(amps, freqs, phases))

    return w_of


def cmd_simulate(args):
    sysm = load_system(args.spec)
    fams = synthesis.optimal_gains(sysm)
    cl = synthesis.assemble_closed_loop(sysm, fams)
    s = sysm.poset.size
    if args.x0 is not None:
        x0 = np.array([float(v) for v in args.x0.split(",")])
        if x0.size != s:
            raise SpecFormatError(f"--x0 needs {s} comma-separated values")
    else:
        x0 = np.ones(s)
    disturbance = _sinusoid_disturbance(s, args.seed) if args.seed is not None else None
    trace = simulate.simulate_continuous(
        cl, x0, disturbance=disturbance, horizon=args.horizon, dt=args.dt
    )
    trace.to_csv(args.csv)
    payload = {
        "csv": args.csv,
        "steps": int(len(trace.t) - 1),
        "closed_loop_stable": bool(is_hurwitz(cl.a)),
        "final_state_norm": float(np.linalg.norm(trace.x[-1])),
    }
    if args.plot is not None:
        from . import plots

        payload["figure"] = plots.render_trace_figure(trace, args.plot)
    _emit(payload)
    return EXIT_OK


def cmd_verify(args):
    sysm = load_system(args.spec)
    p = sysm.poset
    rng = np.random.default_rng(args.seed)
    mask = algebra.d_pattern_mask(p)
    checks = {}

    worst_inv = worst_dep = worst_push = 0.0
    closed = True
    for _ in range(100):
        x = rng.standard_normal((p.size, p.size))
        x_d = rng.standard_normal((p.size, p.size)) * mask
        a_mem = rng.standard_normal((p.size, p.size)) * mask
        worst_inv = max(
            worst_inv,
            float(np.abs(algebra.zeta_local(p, algebra.mu_local(p, x_d)) - x_d).max()),
            float(np.abs(algebra.mu_local(p, algebra.zeta_local(p, x_d)) - x_d).max()),
        )
        worst_dep = max(
            worst_dep,
            float(np.abs(algebra.mu_local(p, x) - algebra.mu_local(p, algebra.project_d(p, x))).max()),
            float(np.abs(algebra.zeta_local(p, x) - algebra.zeta_local(p, algebra.project_d(p, x))).max()),
        )
        closed = closed and algebra.is_member(p, a_mem @ algebra.mu_local(p, x_d))
        closed = closed and algebra.is_member(p, a_mem @ algebra.zeta_local(p, x_d))
        completed = algebra.complete_from_downstream(p, x_d)
        worst_push = max(
            worst_push,
            float(np.abs(algebra.mu_local(p, a_mem @ completed) - a_mem @ algebra.mu_local(p, x_d)).max()),
        )
    checks["local_operators_inverse"] = {"error": worst_inv, "passed": worst_inv < 1e-12}
    checks["local_operators_depend_on_free_part"] = {"error": worst_dep, "passed": worst_dep < 1e-12}
    checks["member_products_stay_members"] = {"passed": closed}
    checks["members_commute_on_completed_variables"] = {"error": worst_push, "passed": worst_push < 1e-12}

    fams = synthesis.optimal_gains(sysm)
    rep = synthesis.separation_report(sysm, fams)
    checks["spectrum_separation"] = {
        "error": rep.max_pair_distance,
        "passed": rep.matched and rep.stable,
    }

    worst_rec = synthesis.reconstruction_consistency(sysm, rng, trials=20)
    checks["prediction_dynamics_consistency"] = {"error": worst_rec, "passed": worst_rec < 1e-10}

    passed = all(c["passed"] for c in checks.values())
    _emit({"checks": checks, "passed": passed})
    return EXIT_OK if passed else EXIT_VERIFICATION


def cmd_blockdiag(args):
    sysm = load_system(args.spec)
    report = blockdiagram.check_block_diagonal(
        sysm, count=args.freqs, seed=args.seed, tol=BLOCKDIAG_TOL
    )
    _emit(report.to_dict())
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def cmd_youla(args):
    sysm = load_system(args.spec)
    p = sysm.poset
    rho = spectral_radius(sysm.a)
    mapping = {"applied": False}
    discrete = sysm
    if rho >= 1.0:
        if not is_hurwitz(sysm.a):
            raise NumericalError(
                f"A has spectral radius {rho:.3f} and is not Hurwitz either; "
                "no stable discrete interpretation"
            )
        h = 1.0
        while spectral_radius(np.eye(p.size) + h * sysm.a) >= 0.999:
            h *= 0.5
            if h < 1e-9:
                raise NumericalError("could not find a contracting Euler step")
        discrete = synthesis.PosetSystem(
            p, np.eye(p.size) + h * sysm.a, h * sysm.b, sysm.c, sysm.d
        )
        mapping = {"applied": True, "h": h}

    rng = np.random.default_rng(args.seed)
    w = rng.standard_normal((args.steps, p.size))
    filt = simulate.random_youla_filter(p, length=args.taps, seed=args.seed)
    trace = simulate.simulate_discrete(discrete, filt, w)
    err = float(np.abs(trace.what[1:] - trace.w[:-1]).max()) if args.steps else 0.0
    payload = {
        "steps": args.steps,
        "taps": args.taps,
        "seed": args.seed,
        "euler_mapping": mapping,
        "spectral_radius": spectral_radius(discrete.a),
        "max_reconstruction_error": err,
    }
    if args.csv is not None:
        trace.to_csv(args.csv)
        payload["csv"] = args.csv
    if args.plot is not None:
        from . import plots

        payload["figure"] = plots.render_reconstruction_figure(trace, args.plot)
    _emit(payload)
    return EXIT_OK


def cmd_h2(args):
    sysm = load_system(args.spec)
    cert = h2.optimality_certificate(sysm)
    payload = cert.to_dict()
    payload["tolerance"] = OPTIMALITY_TOL
    payload["passed"] = cert.relative_gap < OPTIMALITY_TOL
    _emit(payload)
    return EXIT_OK if payload["passed"] else EXIT_VERIFICATION


def build_parser():
    parser = argparse.ArgumentParser(
        prog="posetctrl",
        description="Synthesis, simulation and verification for poset-causal systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize optimal local gains")
    p_synth.add_argument("spec")
    p_synth.set_defaults(func=cmd_synth)

    p_sim = sub.add_parser("simulate", help="integrate the closed loop, write a trace CSV")
    p_sim.add_argument("spec")
    p_sim.add_argument("--csv", required=True, help="output trace path")
    p_sim.add_argument("--x0", default=None, help="comma-separated initial state")
    p_sim.add_argument("--horizon", type=float, default=simulate.DEFAULT_HORIZON)
    p_sim.add_argument("--dt", type=float, default=simulate.DEFAULT_DT)
    p_sim.add_argument("--seed", type=int, default=None,
                       help="seed a smooth random disturbance (default: none)")
    p_sim.add_argument("--plot", default=None, help="also render a figure to this path")
    p_sim.set_defaults(func=cmd_simulate)

    p_verify = sub.add_parser("verify", help="run the invariant suite on a system")
    p_verify.add_argument("spec")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    p_block = sub.add_parser("blockdiag", help="frequency-sampled block-diagonalization check")
    p_block.add_argument("spec")
    p_block.add_argument("--freqs", type=int, default=10)
    p_block.add_argument("--seed", type=int, default=0)
    p_block.set_defaults(func=cmd_blockdiag)

    p_youla = sub.add_parser("youla", help="discrete disturbance-reconstruction pipeline")
    p_youla.add_argument("spec")
    p_youla.add_argument("--steps", type=int, default=50)
    p_youla.add_argument("--taps", type=int, default=simulate.DEFAULT_TAPS)
    p_youla.add_argument("--seed", type=int, default=0)
    p_youla.add_argument("--csv", default=None, help="optional trace path")
    p_youla.add_argument("--plot", default=None, help="also render a figure to this path")
    p_youla.set_defaults(func=cmd_youla)

    p_h2 = sub.add_parser("h2", help="optimality certificate: closed loop vs oracle")
    p_h2.add_argument("spec")
    p_h2.set_defaults(func=cmd_h2)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpecFormatError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_SCHEMA
    except PosetCtrlError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
