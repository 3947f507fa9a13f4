"""Slow independent references used by the tests and the sweep experiment."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .model import InfeasibleError, PhaseTarget, SpinSystem, pairs
from .scheduler import DIRECT, HALF, SYMMETRIC, Schedule

BRUTE_FORCE_MAX_Q = 4


def _all_columns(q: int, canonical: bool) -> np.ndarray:
    """Every sign assignment, spin j negative iff bit j of the column index is set."""
    m = np.arange(1 << q)
    if canonical:
        m = m[(m & 1) == 0]
    return (1 - 2 * ((m[None, :] >> np.arange(q)[:, None]) & 1)).astype(np.int8)


def brute_force_min_time(system: SpinSystem, target: PhaseTarget, mode: str = DIRECT) -> Schedule:
    """Minimum total time by enumerating every basic solution.

    Each vertex of {S tau = b, tau >= 0} is the solution of a square system
    on rank(S) columns, so all such column subsets are tried.
    """
    q = system.q
    if q > BRUTE_FORCE_MAX_Q:
        raise ValueError(f"brute force is limited to q <= {BRUTE_FORCE_MAX_Q}")
    cols = _all_columns(q, canonical=mode == SYMMETRIC)
    prs = pairs(q)
    freq_one = np.array(system.offsets)
    freq_two = np.array([system.coupling(i, j) for i, j in prs])

    rows, rhs = [], []
    one_t, two_t = target.one_spin(), target.two_spin()
    if mode == DIRECT:
        for i in range(q):
            if np.isnan(one_t[i]) or (freq_one[i] == 0 and one_t[i] == 0):
                continue
            if freq_one[i] == 0:
                raise InfeasibleError(f"spin {i} has zero offset but a nonzero target")
            rows.append(cols[i])
            rhs.append(one_t[i] / freq_one[i])
    elif mode == SYMMETRIC:
        if np.any(np.nan_to_num(one_t) != 0):
            raise ValueError("symmetric mode cannot produce one-spin phases")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    for k, (i, j) in enumerate(prs):
        if np.isnan(two_t[k]) or (freq_two[k] == 0 and two_t[k] == 0):
            continue
        if freq_two[k] == 0:
            raise InfeasibleError(f"coupling {i},{j} is zero but has a nonzero target")
        rows.append(cols[i] * cols[j])
        rhs.append(two_t[k] / freq_two[k] / (2.0 if mode == SYMMETRIC else 1.0))

    out_mode = HALF if mode == SYMMETRIC else DIRECT
    empty = Schedule(np.zeros((q, 0)), np.zeros(0), out_mode, metadata={"oracle": "brute_force"})
    if not rows or not np.any(rhs):
        return empty
    A = np.array(rows, dtype=float)
    b = np.array(rhs)
    tol = 1e-10 * max(1.0, float(np.abs(b).max()))

    # independent row subset and a consistency check for the rest
    basis_rows = []
    for k in range(A.shape[0]):
        if np.linalg.matrix_rank(A[basis_rows + [k]]) > len(basis_rows):
            basis_rows.append(k)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.abs(A @ sol - b).max() > tol:
        raise InfeasibleError("targets are inconsistent with every sign pattern")
    Ar, br = A[basis_rows], b[basis_rows]
    rank = len(basis_rows)

    best = None
    combos = np.array(list(itertools.combinations(range(A.shape[1]), rank)), dtype=np.int64)
    for start in range(0, len(combos), 4096):
        block = combos[start : start + 4096]
        mats = np.transpose(Ar[:, block], (1, 0, 2))  # N x rank x rank
        ok = np.abs(np.linalg.det(mats)) > 0.5  # +-1 integer matrices
        if not ok.any():
            continue
        xs = np.linalg.solve(mats[ok], np.broadcast_to(br, (int(ok.sum()), rank))[..., None])[..., 0]
        for sub, x in zip(block[ok], xs):
            if x.min() < -tol:
                continue
            x = np.where(x < 0, 0.0, x)
            if np.abs(A[:, sub] @ x - b).max() > tol:
                continue
            T = math.fsum(x)
            if best is None or T < best[0] - 1e-15 * max(1.0, T):
                best = (T, sub, x)
    if best is None:
        raise InfeasibleError("no non-negative basic solution exists")
    T, sub, x = best
    nz = x > max(1e-9 * T, 1e-15)
    return Schedule(cols[:, sub[nz]], x[nz], out_mode, metadata={"oracle": "brute_force"})


# --- logistic transition fits ---------------------------------------------------------


def logistic(k, b: float, c: float):
    return special.expit(b * (np.asarray(k, dtype=float) - c))


@dataclass(frozen=True)
class LogisticFit:
    b: float
    c: float
    residual: float
    history: tuple[float, ...] = field(default=(), compare=False)

    def __call__(self, k):
        return logistic(k, self.b, self.c)


def _sse(k, f, b, c) -> float:
    return float(np.sum((logistic(k, b, c) - f) ** 2))


def logistic_fit(points, max_iter: int = 200) -> LogisticFit:
    """Least-squares fit of f(k) = 1 / (1 + exp(-b (k - c))).

    A coarse (b, c) grid picks the start, then damped Gauss-Newton steps are
    accepted only when they lower the residual, so `history` never rises.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ValueError("need at least four (k, f) points")
    k, f = pts[:, 0], pts[:, 1]
    if np.all(f <= 0) or np.all(f >= 1):
        raise ValueError("success fractions are all 0 or all 1; no transition to fit")

    span = float(k.max() - k.min()) or 1.0
    bs = np.geomspace(0.1 / span, 1000.0 / span, 60)
    cs = np.linspace(k.min() - 0.5 * span, k.max() + 0.5 * span, 121)
    grid = [(_sse(k, f, bb, cc), bb, cc) for bb in bs for cc in cs]
    sse, b, c = min(grid)
    history = [sse]
    lam = 1e-3
    for _ in range(max_iter):
        g = logistic(k, b, c)
        res = g - f
        dg = g * (1.0 - g)
        J = np.column_stack([dg * (k - c), -dg * b])
        H = J.T @ J
        grad = J.T @ res
        improved = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(H + lam * np.diag(np.diag(H) + 1e-300), -grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            nb, nc = b + step[0], c + step[1]
            if nb > 0:
                new = _sse(k, f, nb, nc)
                if new < sse:
                    b, c, sse = nb, nc, new
                    lam = max(lam / 10, 1e-12)
                    improved = True
                    break
            lam *= 10
        if not improved:
            break
        history.append(sse)
        if abs(history[-2] - sse) <= 1e-30 + 1e-15 * history[-2] and np.abs(step).max() < 1e-12:
            break
    return LogisticFit(float(b), float(c), float(sse), tuple(history))


def credible_interval(successes: int, trials: int, mass: float = 0.68) -> tuple[float, float]:
    """Central credible region of the Beta(s + 1, n - s + 1) posterior."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    post = stats.beta(successes + 1, trials - successes + 1)
    lo, hi = post.ppf([0.5 - mass / 2, 0.5 + mass / 2])
    return float(lo), float(hi)
