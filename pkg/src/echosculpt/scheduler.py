"""From target phases to a reduced sign matrix with delays.

Two solve modes exist. `direct` constrains every requested row. `symmetric`
constrains couplings only, at half their target, over canonical columns
(spin 0 at +1); mirroring the result with -R then cancels every one-spin
phase exactly, rounding included.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .model import InfeasibleError, PhaseTarget, SpinSystem, n_interactions, required_times
from .pulseseq import count_pulses
from .simplex import LpProblem, LpSolution, Status, solve_lp
from .walsh import SignMatrix, build_full_sign_matrix, canonical_sign_matrix, columns_from_indices

DIRECT = "direct"
SYMMETRIC = "symmetric"
# solved in symmetric mode but not yet mirrored
HALF = "half"
SYMMETRIZED = "symmetrized"

EXHAUSTIVE_PERM_LIMIT = 8
EXHAUSTIVE_PERM_MAX = 10  # 10! orderings is the most an explicit request may ask for
DEFAULT_PERM_ITERS = 10_000


class AllAttemptsInfeasible(InfeasibleError):
    pass


@dataclass(frozen=True)
class Constraints:
    rows: np.ndarray  # canonical interaction rows
    b: np.ndarray  # signed evolution time per row (s)
    mode: str


@dataclass(frozen=True)
class Schedule:
    signs: np.ndarray  # q x n_t one-spin signs; coupling signs follow by products
    times: np.ndarray
    mode: str
    optimal: str = "global"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.array(self.signs, dtype=np.int8, ndmin=2)
        t = np.array(self.times, dtype=float).ravel()
        if s.shape[1] != t.size:
            raise ValueError("one time per column is required")
        s.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "signs", s)
        object.__setattr__(self, "times", t)

    @property
    def q(self) -> int:
        return self.signs.shape[0]

    @property
    def n_columns(self) -> int:
        return self.signs.shape[1]

    @property
    def total_time(self) -> float:
        return math.fsum(self.times)

    @property
    def R(self) -> np.ndarray:
        return SignMatrix(self.signs).full()

    def evolution_times(self) -> np.ndarray:
        """Net signed time per canonical row, sum_m R[row, m] tau_m."""
        R = self.R
        return np.array([math.fsum(R[k] * self.times) for k in range(R.shape[0])])

    def phases(self, system: SpinSystem) -> np.ndarray:
        return system.frequencies() * self.evolution_times()

    def pulse_count(self) -> int:
        return count_pulses(self.layout_signs())

    def layout_signs(self) -> np.ndarray:
        """Signs in emission order (a half schedule is laid out as [R, -R])."""
        if self.mode == HALF:
            return np.hstack([self.signs, -self.signs])
        return self.signs


def _is_nonzero(x) -> bool:
    return bool(np.any(np.asarray(x) != 0))


def assemble_constraints(system: SpinSystem, target: PhaseTarget, mode: str = SYMMETRIC) -> Constraints:
    """Rows and right-hand sides of sum_m S[row, m] tau_m = target / frequency."""
    if mode not in (DIRECT, SYMMETRIC):
        raise ValueError(f"unknown mode {mode!r}")
    times = required_times(system, target)
    freq = system.frequencies()
    q = system.q
    keep = target.constrained & (freq != 0)
    if mode == SYMMETRIC:
        one = target.one_spin()
        if _is_nonzero(np.nan_to_num(one[~np.isnan(one)])):
            raise ValueError(
                "symmetric mode cancels all one-spin phases; use direct mode or apply "
                "the z rotations separately (e.g. by shifting the phase of a pi-pulse pair)"
            )
        keep[:q] = False
    rows = np.flatnonzero(keep)
    b = times[rows]
    if mode == SYMMETRIC:
        b = b / 2.0
    return Constraints(rows, b, mode)


def solve_schedule(system: SpinSystem, target: PhaseTarget, basis: SignMatrix | None = None, mode: str = SYMMETRIC) -> Schedule:
    """Minimum-time schedule over the columns of `basis`.

    Without a basis the full Walsh basis is used (its first half in
    symmetric mode). Symmetric solves return a HALF schedule; pass it to
    `symmetrize` before emitting pulses.
    """
    cons = assemble_constraints(system, target, mode)
    if basis is None:
        basis = canonical_sign_matrix(system.q) if mode == SYMMETRIC else build_full_sign_matrix(system.q)
    if basis.q != system.q:
        raise ValueError("basis and system disagree on the number of spins")
    out_mode = HALF if mode == SYMMETRIC else DIRECT
    if mode == DIRECT and _is_nonzero(np.nan_to_num(target.one_spin()[: system.q])):
        warnings.warn(
            "direct schedule with nonzero one-spin targets is sensitive to delay rounding",
            stacklevel=2,
        )
    if cons.rows.size == 0 or not np.any(cons.b):
        return Schedule(np.zeros((system.q, 0)), np.zeros(0), out_mode, metadata={"constraints": int(cons.rows.size)})

    A = basis.rows(cons.rows).astype(float)
    sol = solve_lp(LpProblem(A, cons.b))
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleError("no non-negative delays reach the targets on this basis")
    if sol.status is not Status.OPTIMAL:
        raise RuntimeError(f"unexpected LP status {sol.status}")
    idx, tau = _reduce(A, cons.b, sol)
    return Schedule(
        basis.one_spin[:, idx],
        tau,
        out_mode,
        metadata={"constraints": int(cons.rows.size), "lp_iterations": sol.iterations},
    )


def _reduce(A: np.ndarray, b: np.ndarray, sol: LpSolution) -> tuple[np.ndarray, np.ndarray]:
    """Drop sub-threshold delays, then re-solve the kept columns exactly."""
    x = sol.x
    T = float(sol.objective)
    thresh = max(1e-9 * T, 1e-15)
    idx = np.flatnonzero(x > thresh)
    tau = x[idx]
    if idx.size:
        polished, *_ = np.linalg.lstsq(A[:, idx], b, rcond=None)
        if polished.min() > thresh:
            old = np.abs(A[:, idx] @ tau - b).max()
            new = np.abs(A[:, idx] @ polished - b).max()
            if new <= old:
                tau = polished
    return idx, tau


# --- column ordering -----------------------------------------------------------------


def _batch_pulses(signs: np.ndarray, perms: np.ndarray, mirror: bool) -> np.ndarray:
    """Boundary-inclusive sign changes for every permutation in `perms`."""
    lay = signs[:, perms]  # q x P x n
    if mirror:
        lay = np.concatenate([lay, -lay], axis=2)
    q, P, _ = lay.shape
    ones = np.ones((q, P, 1), dtype=np.int8)
    padded = np.concatenate([ones, lay, ones], axis=2)
    return np.count_nonzero(padded[:, :, 1:] != padded[:, :, :-1], axis=(0, 2))


def optimize_permutation(schedule: Schedule, strategy: str = "auto", iters: int = DEFAULT_PERM_ITERS, seed: int = 0) -> Schedule:
    """Reorder columns to minimise the number of pi pulses.

    `strategy` is "exhaustive", "random" or "auto" (exhaustive up to eight
    columns). The random search always scores the identity first, so the
    result is never worse than the input. Ties keep the earliest candidate.
    """
    n = schedule.n_columns
    if n <= 1:
        return schedule
    if strategy == "auto":
        strategy = "exhaustive" if n <= EXHAUSTIVE_PERM_LIMIT else "random"
    mirror = schedule.mode == HALF
    signs = schedule.signs
    best_count, best_perm = None, None
    if strategy == "exhaustive":
        if n > EXHAUSTIVE_PERM_MAX:
            raise ValueError(f"exhaustive search over {n}! orderings is impractical; use 'random'")
        chunks = _chunked(itertools.permutations(range(n)), 5000)
    elif strategy == "random":
        rng = np.random.default_rng(seed)
        chunks = _random_perm_chunks(n, iters, rng, 500)
    else:
        raise ValueError(f"unknown permutation strategy {strategy!r}")
    for perms in chunks:
        counts = _batch_pulses(signs, perms, mirror)
        k = int(np.argmin(counts))
        if best_count is None or counts[k] < best_count:
            best_count, best_perm = int(counts[k]), perms[k]
    meta = dict(schedule.metadata)
    meta["pulses_before_permutation"] = schedule.pulse_count()
    meta["permutation_strategy"] = strategy
    return replace(schedule, signs=signs[:, best_perm], times=schedule.times[best_perm], metadata=meta)


def _chunked(it, size):
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def _random_perm_chunks(n, iters, rng, size):
    yield np.arange(n)[None, :]
    done = 0
    while done < iters:
        k = min(size, iters - done)
        yield np.argsort(rng.random((k, n)), axis=1)
        done += k


# --- stabilisation --------------------------------------------------------------------


def symmetrize(schedule: Schedule) -> Schedule:
    """Append -R so one-spin phases cancel exactly; couplings are unchanged.

    A HALF schedule already carries halved times. A DIRECT schedule is
    halved here so the total time is preserved.
    """
    if schedule.mode == SYMMETRIZED:
        return schedule
    times = schedule.times if schedule.mode == HALF else schedule.times / 2.0
    meta = dict(schedule.metadata)
    meta["mirrored_from"] = schedule.mode
    return replace(
        schedule,
        signs=np.hstack([schedule.signs, -schedule.signs]),
        times=np.concatenate([times, times]),
        mode=SYMMETRIZED,
        metadata=meta,
    )


def merge_duplicate_columns(schedule: Schedule) -> Schedule:
    """Coalesce identical sign columns at their first position, summing times."""
    n = schedule.n_columns
    if n <= 1:
        return schedule
    first: dict[bytes, int] = {}
    order: list[int] = []
    groups: dict[int, list[float]] = {}
    for m in range(n):
        key = schedule.signs[:, m].tobytes()
        if key not in first:
            first[key] = m
            order.append(m)
            groups[m] = []
        groups[first[key]].append(float(schedule.times[m]))
    if len(order) == n:
        return schedule
    times = np.array([math.fsum(groups[m]) for m in order])
    return replace(schedule, signs=schedule.signs[:, order], times=times)


# --- random reduced overcomplete sets ----------------------------------------------------


@dataclass(frozen=True)
class RrosConfig:
    k: float = 4.0
    k_refine: float = 1.2
    max_attempts: int = 3
    seed: int = 0
    refine: bool = True

    def __post_init__(self):
        if not self.k > 1:
            raise ValueError("RROS needs k > 1")
        if self.k_refine < 1:
            raise ValueError("k_refine must be at least 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be positive")


def rros_basis(q: int, r: int, k: float, rng: np.random.Generator | int | None = None, canonical: bool = False) -> SignMatrix:
    """ceil(k r) distinct columns drawn uniformly without building the full basis.

    With `canonical` the draw is from the 2^(q-1) columns with spin 0 at +1.
    """
    rng = np.random.default_rng(rng)
    n = math.ceil(k * r - 1e-9)
    pool_bits = q - 1 if canonical else q
    pool = 1 << pool_bits
    if n > pool:
        raise ValueError(f"k*r = {n} columns exceeds the {pool} available")
    if pool_bits <= 62:
        idx = np.sort(rng.choice(pool, size=n, replace=False).astype(np.uint64))
        if canonical:
            idx = idx << np.uint64(1)
        return SignMatrix(columns_from_indices(idx, q))
    # too wide for int64 indices: draw bit patterns directly and discard repeats
    seen, cols = set(), []
    while len(cols) < n:
        bits = rng.integers(0, 2, size=(n - len(cols), pool_bits), dtype=np.int8)
        for row in bits:
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                cols.append(row)
    bits = np.array(cols).T
    if canonical:
        bits = np.vstack([np.zeros((1, n), dtype=np.int8), bits])
    return SignMatrix((1 - 2 * bits).astype(np.int8))


def rros_solve(system: SpinSystem, target: PhaseTarget, config: RrosConfig = RrosConfig(), mode: str = SYMMETRIC) -> Schedule:
    """Solve over k r random columns, where r is the number of constraint rows.

    Failed attempts are retried with seeds spawned from `config.seed`. A
    successful solve is optionally re-run on the ceil(k_refine r) columns
    with the largest delays and kept only if it is no slower.
    """
    cons = assemble_constraints(system, target, mode)
    r = max(int(cons.rows.size), 1)
    canonical = mode == SYMMETRIC
    seeds = np.random.SeedSequence(config.seed).spawn(config.max_attempts)
    last_err = None
    for attempt, ss in enumerate(seeds):
        basis = rros_basis(system.q, r, config.k, np.random.default_rng(ss), canonical=canonical)
        try:
            sched = solve_schedule(system, target, basis, mode)
        except InfeasibleError as exc:
            last_err = exc
            continue
        if config.refine and sched.n_columns:
            sched = _refine(system, target, basis, sched, r, config, mode)
        meta = dict(sched.metadata)
        meta.update({"rros_attempt": attempt, "rros_k": config.k, "rros_columns": basis.n_columns})
        return replace(sched, optimal="subset-only", metadata=meta)
    raise AllAttemptsInfeasible(f"RROS found no feasible basis in {config.max_attempts} attempts") from last_err


def _refine(system, target, basis, sched, r, config, mode):
    n_keep = min(basis.n_columns, math.ceil(config.k_refine * r - 1e-9))
    used = {c.tobytes(): t for c, t in zip(sched.signs.T, sched.times)}
    weight = np.array([used.get(basis.one_spin[:, m].tobytes(), 0.0) for m in range(basis.n_columns)])
    top = np.sort(np.argsort(-weight, kind="stable")[:n_keep])
    try:
        refined = solve_schedule(system, target, basis.columns(top), mode)
    except InfeasibleError:
        return sched
    if refined.total_time <= sched.total_time + 1e-12 * max(1.0, sched.total_time):
        meta = dict(refined.metadata)
        meta["refined_columns"] = int(n_keep)
        return replace(refined, metadata=meta)
    return sched


# --- end to end ---------------------------------------------------------------------


def compile_schedule(
    system: SpinSystem,
    target: PhaseTarget,
    mode: str = SYMMETRIC,
    rros: RrosConfig | None = None,
    perm_strategy: str = "auto",
    perm_iters: int = DEFAULT_PERM_ITERS,
    seed: int = 0,
    max_exhaustive_q: int = 20,
) -> Schedule:
    """assemble -> solve -> reduce -> permute -> (mirror + merge) in one call."""
    q = system.q
    use_full = rros is None
    if rros is not None:
        r = max(int(assemble_constraints(system, target, mode).rows.size), 1)
        pool = 1 << (q - 1 if mode == SYMMETRIC else q)
        use_full = pool <= 2 * rros.k * r
    if use_full:
        if q > max_exhaustive_q:
            raise ValueError(
                f"the exhaustive basis has 2^{q} columns, impractical beyond q={max_exhaustive_q}; "
                "use RROS (--rros K) instead"
            )
        sched = solve_schedule(system, target, None, mode)
    else:
        sched = rros_solve(system, target, rros, mode)
    sched = optimize_permutation(sched, perm_strategy, perm_iters, seed)
    if mode == SYMMETRIC:
        sched = merge_duplicate_columns(symmetrize(sched))
    return sched


__all__ = [
    "AllAttemptsInfeasible",
    "Constraints",
    "DIRECT",
    "HALF",
    "RrosConfig",
    "SYMMETRIC",
    "SYMMETRIZED",
    "Schedule",
    "assemble_constraints",
    "compile_schedule",
    "merge_duplicate_columns",
    "n_interactions",
    "optimize_permutation",
    "rros_basis",
    "rros_solve",
    "solve_schedule",
    "symmetrize",
]
