"""
Command-line interface.

Tables are comma-separated with one header row; floats use Python's
shortest round-trip ``repr`` and undefined values the token ``undef``.
Frequencies are printed as nu = omega/2pi in MHz, times in microseconds.
With ``--out PATH`` a JSON sidecar ``PATH.meta.json`` records the config
echo, seeds, timings and versions.

Exit codes: 0 success (possibly with per-cell warnings), 2 configuration
error, 3 solver failure, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .dynamics import TrajectoryRecord
from .errors import ConfigError, InvariantError, ResonanceError, SolverError
from .experiments import (
    MHZ,
    US,
    check_record_invariants,
    load_config,
    load_microscopic,
    run_double_evolution,
    run_single_evolution,
    run_steady_sweep,
)
from .hilbert import HilbertSpace, basis_ket
from .models import (
    SingleEnsembleParams,
    TwoEnsembleParams,
    build_hamiltonian,
    dark_state_double,
    dark_state_single,
    effective_coeffs_approx,
    effective_coeffs_exact,
    relative_errors,
    single_excitation_energies,
)
from .observables import UNDEF_TOKEN, is_undefined

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4


def fmt(value) -> str:
    if is_undefined(value) or value is None:
        return UNDEF_TOKEN
    if isinstance(value, (complex, np.complexfloating)):
        if value.imag != 0:
            return repr(complex(value))
        value = value.real
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value) + 0.0)  # no -0.0


def render_table(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        if len(row) != len(header):
            raise InvariantError("row length does not match the header")
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text: str, out, meta=None, suffix: str = ""):
    if out is None:
        sys.stdout.write(text)
        return
    path = out + suffix
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    if meta is not None:
        with open(path + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _meta(args, **extra) -> dict:
    out = {"tool": "cyclicqed", "version": __version__, "argv": list(args.argv)}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_coeffs(args) -> int:
    p = load_microscopic(args.config)
    start = time.perf_counter()
    if args.approx:
        coeffs = {"": effective_coeffs_approx(p).as_dict()}
    else:
        exact = effective_coeffs_exact(p)
        coeffs = {"": exact.as_dict()}
        if args.compare:
            approx = effective_coeffs_approx(p)
            coeffs = {"exact_": exact.as_dict(), "approx_": approx.as_dict(),
                      "relerr_": relative_errors(exact, approx)}
    header, row = [], []
    for prefix, values in coeffs.items():
        for key, value in values.items():
            if prefix == "relerr_":
                header.append(f"{prefix}{key}")
                row.append(value)
            else:
                header.append(f"{prefix}{key}_MHz")
                row.append(value / MHZ)
    meta = _meta(args, mode="approx" if args.approx else ("compare" if args.compare else "exact"),
                 wall_time_s=time.perf_counter() - start)
    _emit(render_table(header, [row]), args.out, meta)
    return EXIT_OK


def darkstate_table(kind: str, g_mhz: float, J_mhz: float) -> tuple:
    """Header and single row for the dark-state check, in MHz.

    The residual is ``||H|DS>|| / sqrt(g^2 + J_c^2)`` evaluated with the
    couplings in MHz, i.e. relative to the coupling scale.
    """
    if g_mhz == 0 and J_mhz == 0:
        raise ConfigError("dark state undefined for g = J = 0", "g")
    if kind == "single":
        space = HilbertSpace.single_ensemble(2, 2)
        H = build_hamiltonian(SingleEnsembleParams(g=g_mhz, J=J_mhz, n_fock_a=2, n_fock_b=2), space)
        ds = dark_state_single(g_mhz, J_mhz, space)
        kets = ("10g", "01g", "00e")
        scale = math.hypot(g_mhz, J_mhz)
    else:
        space = HilbertSpace.two_ensemble(2, 2, 2)
        H = build_hamiltonian(TwoEnsembleParams(g=g_mhz, J_1=J_mhz, J_2=J_mhz,
                                                n_fock_1=2, n_fock_b=2, n_fock_2=2), space)
        ds = dark_state_double(g_mhz, J_mhz, space)
        kets = ("100g", "010g", "001g", "000e")
        scale = math.sqrt(g_mhz**2 + 2 * J_mhz**2)
    amps = [basis_ket(space, k).overlap(ds) for k in kets]
    residual = float(np.linalg.norm(H.matrix @ ds.amplitudes)) / scale
    spectrum = single_excitation_energies(H)
    header = ["g_MHz", "J_MHz"] + [f"amp_{k}" for k in kets] + ["residual"]
    header += [f"E{i}_MHz" for i in range(len(spectrum))]
    row = [g_mhz, J_mhz] + [a.real for a in amps] + [residual] + list(spectrum)
    return header, row


def cmd_darkstate(args) -> int:
    header, row = darkstate_table(args.kind, args.g, args.J)
    _emit(render_table(header, [row]), args.out, _meta(args, kind=args.kind))
    return EXIT_OK


def sweep_table(result) -> str:
    header = ["delta_MHz", "g_MHz"] + list(result.columns)
    rows = ([d / MHZ, g / MHZ] + [cell[c] for c in result.columns] for d, g, cell in result.rows())
    return render_table(header, rows)


def branches_table(result) -> str:
    n = result.branches.shape[1]
    header = ["g_MHz"] + [f"delta_{i}_MHz" for i in range(n)]
    rows = ([g / MHZ] + list(br / MHZ) for g, br in zip(result.g_values, result.branches))
    return render_table(header, rows)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if cfg.run != "steady_sweep":
        raise ConfigError(f"sweep needs run = steady_sweep, got {cfg.run}", "scenario.run")
    result = run_steady_sweep(cfg, threads=args.threads)
    meta = _meta(args, provenance=result.provenance, warnings=result.warnings)
    _emit(sweep_table(result), args.out, meta)
    if args.out is not None:
        _emit(branches_table(result), args.out + ".branches.csv")
    if result.warnings:
        print(f"warning: {len(result.warnings)} cell(s) failed and are reported as undef", file=sys.stderr)
    return EXIT_OK


def record_table(record) -> str:
    names = list(record.observables)
    stderr = getattr(record, "stderr", {}) or {}
    header = ["time_us"]
    for n in names:
        header.append(n)
        if n in stderr:
            header.append(f"{n}_se")
    rows = []
    for i, t in enumerate(record.times):
        row = [t / US]
        for n in names:
            row.append(record.observables[n][i])
            if n in stderr:
                row.append(stderr[n][i])
        rows.append(row)
    return render_table(header, rows)


def _run_evolution(cfg, args):
    if cfg.run == "single_evolution":
        return run_single_evolution(cfg)
    if cfg.run == "double_evolution":
        return run_double_evolution(cfg, threads=args.threads)
    raise ConfigError(f"expected an evolution scenario, got run = {cfg.run}", "scenario.run")


def _finish_evolution(cfg, args, record) -> int:
    if not isinstance(record, TrajectoryRecord):
        check_record_invariants(record, cfg.rtol)
    meta = _meta(args, provenance=record.diagnostics.get("provenance", {}))
    _emit(record_table(record), args.out, meta)
    return EXIT_OK


def _with_partial(cfg, args, fn):
    try:
        return _finish_evolution(cfg, args, fn())
    except SolverError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None and args.out is not None:
            _emit(record_table(partial), args.out, _meta(args, error=str(exc)), suffix=".partial")
        raise


def cmd_evolve(args) -> int:
    cfg = load_config(args.config)
    if cfg.run == "double_evolution" and cfg.method != "master":
        cfg = cfg.with_overrides(method="master")
    return _with_partial(cfg, args, lambda: _run_evolution(cfg, args))


def cmd_trajectories(args) -> int:
    cfg = load_config(args.config)
    if cfg.run != "double_evolution":
        raise ConfigError("trajectories needs run = double_evolution", "scenario.run")
    changes = {"method": "trajectories", "n_traj": args.ntraj}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.ntraj < 1:
        raise ConfigError("--ntraj must be >= 1", "ntraj")
    cfg = cfg.with_overrides(**changes)
    return _with_partial(cfg, args, lambda: run_double_evolution(cfg, threads=args.threads))


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output CSV path (default: standard output)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes for grids and trajectories (output does not depend on it)")

    parser = argparse.ArgumentParser(prog="cyclicqed", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", parents=[common], help="effective coefficients from ensemble parameters")
    p.add_argument("config")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--approx", action="store_true", help="large-Omega expansion instead of exact sums")
    mode.add_argument("--compare", action="store_true", help="exact, approximate and relative errors")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("darkstate", parents=[common], help="dark-state amplitudes, residual and spectrum")
    p.add_argument("kind", choices=("single", "double"))
    p.add_argument("g", type=float, help="g/2pi in MHz")
    p.add_argument("J", type=float, help="J/2pi in MHz")
    p.set_defaults(func=cmd_darkstate)

    p = sub.add_parser("sweep", parents=[common], help="steady-state (delta, g) sweep")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evolve", parents=[common], help="master-equation evolution")
    p.add_argument("config")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("trajectories", parents=[common], help="two-ensemble quantum-trajectory run")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--ntraj", type=int, default=25)
    p.set_defaults(func=cmd_trajectories)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResonanceError as exc:
        print(f"resonance error [{exc.symbol}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
