"""Command-line entry point: rescale, refocus, verify, scan-rounding, rros-sweep, bench."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import bench, loglog_slope, rros_sweep, sweep_to_csv, worker_count
from .fidelity import log_resolutions, rounding_scan, scan_to_csv
from .model import (
    InfeasibleError,
    InteractionIndex,
    PhaseTarget,
    load_spin_system,
    load_target,
    lower_bound,
    naive_time,
    parse_phase,
)
from .pulseseq import PulseParityError, emit_pulses, read_sequence, simulate_phases, write_sequence
from .scheduler import DIRECT, SYMMETRIC, RrosConfig, compile_schedule
from .simplex import TOL_OPT
from .walsh import build_refocusing_network, refocusing_pulse_count

log = logging.getLogger("echosculpt")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
VERIFY_TOL = 1e-9


def _write_manifest(out: Path, command: str, **fields) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "tolerances": {"tol_feas_rel": 1e-10, "tol_opt": TOL_OPT, "zero_time_rel": 1e-9, "verify_rad": VERIFY_TOL},
    }
    manifest.update(fields)
    path = out.with_name(out.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _labels(q: int) -> list[str]:
    return [InteractionIndex.from_row(q, row).label() for row in range(q * (q + 1) // 2)]


def _residual(achieved: np.ndarray, target: PhaseTarget) -> np.ndarray:
    return np.where(target.constrained, np.abs(achieved - np.nan_to_num(target.values)), 0.0)


def cmd_rescale(args) -> int:
    system = load_spin_system(Path(args.system))
    target = load_target(Path(args.target), system.q)
    mode = args.mode
    z_note = None
    if mode == SYMMETRIC and args.z_phase_note:
        one = target.one_spin()
        if np.any(np.nan_to_num(one) != 0):
            z_note = [None if math.isnan(v) else float(v) for v in one]
            target = PhaseTarget(system.q, np.concatenate([np.full(system.q, np.nan), target.two_spin()]))
    strategy, iters = args.perm, 10_000
    if strategy.startswith("random:"):
        strategy, iters = "random", int(strategy.split(":", 1)[1])
    rros = RrosConfig(k=args.rros, seed=args.seed) if args.rros else None
    sched = compile_schedule(
        system,
        target,
        mode=mode,
        rros=rros,
        perm_strategy=strategy,
        perm_iters=iters,
        seed=args.seed,
        max_exhaustive_q=10_000 if args.force_exhaustive else 20,
    )
    seq = emit_pulses(sched)
    achieved = simulate_phases(system, seq)
    resid = float(_residual(achieved, target).max(initial=0.0))
    summary = {
        "total_time_s": seq.total_time,
        "naive_time_s": naive_time(system, target),
        "lower_bound_s": lower_bound(system, target),
        "periods": sum(1 for s in seq.segments if s.delay > 0),
        "pulses": seq.pulse_count,
        "optimality": sched.optimal,
        "max_residual_rad": resid,
    }
    seq.metadata.update({"mode": sched.mode, "summary": summary})
    if z_note is not None:
        seq.metadata["z_phases_required_rad"] = z_note
        seq.metadata["z_phase_note"] = "one-spin phases cancelled; apply them by shifting the phase of a pi-pulse pair"
    out = Path(args.out)
    write_sequence(seq, out)
    _write_manifest(
        out, "rescale", inputs=[args.system, args.target], seed=args.seed, mode=mode, k=args.rros, perm=args.perm
    )
    for key, val in summary.items():
        print(f"{key}: {val:.12g}" if isinstance(val, float) else f"{key}: {val}")
    return EXIT_OK


def cmd_refocus(args) -> int:
    system = load_spin_system(Path(args.system))
    spins = [int(s) for s in args.retain.split(",")]
    retain = InteractionIndex.of(system.q, *spins)
    phase = parse_phase(args.phase)
    if phase is None:
        raise ValueError("the retained phase must be a number")
    seq = build_refocusing_network(system, retain, phase)
    out = Path(args.out)
    write_sequence(seq, out)
    _write_manifest(out, "refocus", inputs=[args.system], retain=retain.label(), phase=phase)
    print(f"sequence: {seq.notation(one_based=False)}")
    print(f"total_time_s: {seq.total_time:.12g}")
    print(f"pulses: {seq.pulse_count}")
    if retain.kind == "two_spin":
        print(f"pulse_formula: {refocusing_pulse_count(system.q)}")
    print(f"pulse_bound: {system.q ** 2 / 2 + 2:.12g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    system = load_spin_system(Path(args.system))
    seq = read_sequence(Path(args.sequence), system.q)
    achieved = simulate_phases(system, seq)
    target = load_target(Path(args.target), system.q) if args.target else None
    resid = _residual(achieved, target) if target is not None else None
    for row, label in enumerate(_labels(system.q)):
        line = f"{label}: {achieved[row]:.12g}"
        if resid is not None:
            line += f"  residual {resid[row]:.3e}"
        print(line)
    if resid is None:
        return EXIT_OK
    worst = float(resid.max(initial=0.0))
    print(f"max_residual_rad: {worst:.3e}")
    return EXIT_OK if worst < VERIFY_TOL else EXIT_ERROR


def cmd_scan_rounding(args) -> int:
    system = load_spin_system(Path(args.system))
    seq = read_sequence(Path(args.sequence), system.q)
    target = load_target(Path(args.target), system.q)
    curve = rounding_scan(system, seq, target, log_resolutions(args.res_from, args.res_to, args.points))
    out = Path(args.out)
    out.write_text(scan_to_csv(curve))
    _write_manifest(
        out, "scan-rounding", inputs=[args.system, args.sequence, args.target],
        res_from=args.res_from, res_to=args.res_to, points=args.points,
    )
    return EXIT_OK


def cmd_rros_sweep(args) -> int:
    ks = np.linspace(args.k_from, args.k_to, args.k_steps)
    rows, fit = rros_sweep(args.q, ks, args.trials, args.seed, workers=worker_count())
    out = Path(args.out)
    out.write_text(sweep_to_csv(rows))
    fit_info = None if fit is None else {"b": round(fit.b, 9), "c": round(fit.c, 9), "residual": fit.residual}
    _write_manifest(
        out, "rros-sweep", q=args.q, k=[float(k) for k in ks], trials=args.trials, seed=args.seed,
        mode=SYMMETRIC, fit=fit_info,
    )
    if fit is None:
        print("fit: not enough of a transition to fit")
    else:
        print(f"fit_b: {fit.b:.6g}")
        print(f"fit_c: {fit.c:.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = bench(range(args.q_from, args.q_to + 1), args.k, args.trials, args.seed)
    out = Path(args.out)
    lines = ["q,r,median_solve_s"] + [f"{q},{r},{t:.12g}" for q, r, t in rows]
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(out, "bench", q_from=args.q_from, q_to=args.q_to, k=args.k, trials=args.trials, seed=args.seed)
    slope = loglog_slope(rows)
    if slope is not None:
        print(f"loglog_slope_time_vs_r: {slope:.3f} (interior-point reference: 3)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="echosculpt", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("rescale", help="compile target phases into a pulse sequence")
    s.add_argument("--system", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--mode", choices=[SYMMETRIC, DIRECT], default=SYMMETRIC)
    s.add_argument("--rros", type=float, metavar="K", help="sample K*r random columns instead of all 2^q")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--perm", default="auto", help="auto, exhaustive or random:ITERS")
    s.add_argument("--out", required=True)
    s.add_argument("--force-exhaustive", action="store_true", help="allow the full basis above q=20")
    s.add_argument("--z-phase-note", action="store_true",
                   help="symmetric mode: drop one-spin targets and record them in the metadata")
    s.set_defaults(func=cmd_rescale)

    s = sub.add_parser("refocus", help="keep one interaction, refocus all others")
    s.add_argument("--system", required=True)
    s.add_argument("--retain", required=True, help='"i" for an offset or "i,j" for a coupling')
    s.add_argument("--phase", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_refocus)

    s = sub.add_parser("verify", help="simulate a sequence and report its phases")
    s.add_argument("--system", required=True)
    s.add_argument("--sequence", required=True)
    s.add_argument("--target")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("scan-rounding", help="infidelity against clock resolution")
    s.add_argument("--system", required=True)
    s.add_argument("--sequence", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--res-from", type=float, default=1e-3)
    s.add_argument("--res-to", type=float, default=1e-9)
    s.add_argument("--points", type=int, default=121)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scan_rounding)

    s = sub.add_parser("rros-sweep", help="RROS success probability against k")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--k-from", type=float, default=1.0)
    s.add_argument("--k-to", type=float, default=3.0)
    s.add_argument("--k-steps", type=int, default=5)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rros_sweep)

    s = sub.add_parser("bench", help="RROS solve time against q (informational)")
    s.add_argument("--q-from", type=int, default=10)
    s.add_argument("--q-to", type=int, default=20)
    s.add_argument("--k", type=float, default=4.0)
    s.add_argument("--trials", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PulseParityError, ValueError, IndexError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
