"""Seeded RROS feasibility sweeps and solve-time benchmarks."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import InfeasibleError, PhaseTarget, SpinSystem, pairs
from .oracle import LogisticFit, credible_interval, logistic_fit
from .scheduler import SYMMETRIC, RrosConfig, assemble_constraints, rros_basis, rros_solve, solve_schedule

THREADS_ENV = "ECHO_SCULPT_THREADS"


def worker_count() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def random_instance(q: int, rng: np.random.Generator) -> tuple[SpinSystem, PhaseTarget]:
    """Log-uniform 1-100 Hz frequencies, coupling targets uniform in [-pi, pi]."""
    lo, hi = math.log(1.0), math.log(100.0)
    offsets = np.exp(rng.uniform(lo, hi, q))
    prs = pairs(q)
    couplings = np.exp(rng.uniform(lo, hi, len(prs)))
    system = SpinSystem.from_hz(offsets, dict(zip(prs, couplings)))
    phases = rng.uniform(-math.pi, math.pi, len(prs))
    return system, PhaseTarget.couplings_only(q, dict(zip(prs, phases)))


def _sweep_trial(args) -> bool:
    q, k, entropy, spawn_key = args
    rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=spawn_key))
    system, target = random_instance(q, rng)
    r = int(assemble_constraints(system, target, SYMMETRIC).rows.size)
    basis = rros_basis(q, r, k, rng, canonical=True)
    try:
        solve_schedule(system, target, basis, SYMMETRIC)
    except InfeasibleError:
        return False
    return True


@dataclass(frozen=True)
class SweepRow:
    k: float
    trials: int
    successes: int

    @property
    def fraction(self) -> float:
        return self.successes / self.trials

    def interval(self) -> tuple[float, float]:
        return credible_interval(self.successes, self.trials)


def rros_sweep(q: int, ks, trials: int, seed: int = 0, workers: int | None = None) -> tuple[list[SweepRow], LogisticFit | None]:
    """Single-attempt RROS success fraction per k, plus a logistic fit.

    Trial (i, t) draws from SeedSequence(seed, spawn_key=(i, t)), so results
    do not depend on the worker count.
    """
    ks = [float(k) for k in ks]
    tasks = [(q, k, seed, (i, t)) for i, k in enumerate(ks) for t in range(trials)]
    workers = workers or worker_count()
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_sweep_trial(t) for t in tasks]
    rows = [SweepRow(k, trials, int(sum(results[i * trials : (i + 1) * trials]))) for i, k in enumerate(ks)]
    fracs = [row.fraction for row in rows]
    fit = None
    if len(rows) >= 4 and min(fracs) < 1 and max(fracs) > 0:
        fit = logistic_fit([(row.k, row.fraction) for row in rows])
    return rows, fit


def sweep_to_csv(rows: list[SweepRow]) -> str:
    out = ["k,trials,successes,fraction,ci_low,ci_high"]
    for row in rows:
        lo, hi = row.interval()
        out.append(f"{row.k:.12g},{row.trials},{row.successes},{row.fraction:.12g},{lo:.12g},{hi:.12g}")
    return "\n".join(out) + "\n"


def bench(q_values, k: float = 4.0, trials: int = 3, seed: int = 0) -> list[tuple[int, int, float]]:
    """Median wall-clock RROS solve time per q (symmetric mode)."""
    rows = []
    for q in q_values:
        times = []
        for t in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(q, t)))
            system, target = random_instance(q, rng)
            cfg = RrosConfig(k=k, seed=int(rng.integers(2**31)), refine=False)
            start = time.perf_counter()
            try:
                rros_solve(system, target, cfg)
            except InfeasibleError:
                pass
            times.append(time.perf_counter() - start)
        rows.append((q, q * (q + 1) // 2, float(np.median(times))))
    return rows


def loglog_slope(rows) -> float | None:
    r = np.array([row[1] for row in rows], dtype=float)
    t = np.array([row[2] for row in rows], dtype=float)
    ok = t > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(r[ok]), np.log(t[ok]), 1)[0])
