"""Two-phase revised primal simplex for min c.x subject to A x = b, x >= 0.

The basis is held as a dense LU factorisation plus a product-form eta file,
refactorised every `REFACTOR_EVERY` pivots. Entering columns are chosen by
Dantzig's most-negative reduced cost; after `STALL_LIMIT` consecutive
degenerate pivots the solver switches to Bland's rule until progress
resumes, which rules out cycling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import lu_factor, lu_solve

logger = logging.getLogger(__name__)

REFACTOR_EVERY = 64
STALL_LIMIT = 50
PIVOT_TOL = 1e-9
TOL_OPT = 1e-10


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class IterationLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class LpProblem:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        b = np.array(self.b, dtype=float).ravel()
        c = np.ones(A.shape[1]) if self.c is None else np.array(self.c, dtype=float).ravel()
        if A.shape[0] != b.size or A.shape[1] != c.size:
            raise ValueError(f"inconsistent LP dimensions A{A.shape}, b({b.size}), c({c.size})")
        if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(c).all()):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def tol_feas(self) -> float:
        return 1e-10 * max(1.0, float(np.abs(self.b).max(initial=0.0)))


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    objective: float | None = None
    basis: np.ndarray | None = None
    dual: np.ndarray | None = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Factor:
    """B^-1 as the LU of a reference basis followed by eta column updates."""

    def __init__(self, M: np.ndarray, basis: np.ndarray):
        self.M = M
        self.refactor(basis)

    def refactor(self, basis: np.ndarray):
        self.lu = lu_factor(self.M[:, basis], check_finite=False) if len(basis) else None
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        if self.lu is None:
            return np.array(a, dtype=float)
        v = lu_solve(self.lu, a, check_finite=False)
        for r, w in self.etas:
            vr = v[r] / w[r]
            if vr:
                v -= vr * w
            v[r] = vr
        return v

    def btran(self, u: np.ndarray) -> np.ndarray:
        z = np.array(u, dtype=float)
        if self.lu is None:
            return z
        for r, w in reversed(self.etas):
            zr = z[r]
            z[r] = 0.0
            z[r] = (zr - w @ z) / w[r]
        return lu_solve(self.lu, z, trans=1, check_finite=False)


class _Simplex:
    """Pivoting state for one phase: columns 0..n_enter-1 may enter."""

    def __init__(self, M, b, basis, n_enter, tol_opt, max_iter, counter):
        self.M = M
        self.b = b
        self.basis = basis
        self.n_enter = n_enter
        self.tol_opt = tol_opt
        self.max_iter = max_iter
        self.counter = counter
        self.fac = _Factor(M, basis)
        self.xB = self.fac.ftran(b)

    def run(self, cost: np.ndarray) -> Status:
        M, basis, xB = self.M, self.basis, self.xB
        if M.shape[0] == 0:
            return Status.OPTIMAL
        priced = M[:, : self.n_enter]
        scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
        degenerate_eps = 1e-12 * scale
        stall = 0
        while True:
            if self.counter[0] >= self.max_iter:
                raise IterationLimitError(f"simplex exceeded {self.max_iter} iterations")
            y = self.fac.btran(cost[basis])
            d = cost[: self.n_enter] - priced.T @ y
            d[basis[basis < self.n_enter]] = 0.0
            neg = np.flatnonzero(d < -self.tol_opt)
            if neg.size == 0:
                return Status.OPTIMAL
            bland = stall >= STALL_LIMIT
            j = neg[0] if bland else neg[np.argmin(d[neg])]

            w = self.fac.ftran(M[:, j])
            rows = np.flatnonzero(w > PIVOT_TOL)
            if rows.size == 0:
                return Status.UNBOUNDED
            ratios = np.maximum(xB[rows], 0.0) / w[rows]
            theta = ratios.min()
            ties = rows[ratios <= theta + 1e-12 * scale]
            r = ties[np.argmin(basis[ties])] if bland else ties[np.argmax(w[ties])]

            xB -= theta * w
            xB[r] = theta
            basis[r] = j
            self.counter[0] += 1
            stall = stall + 1 if theta <= degenerate_eps else 0

            if len(self.fac.etas) + 1 >= REFACTOR_EVERY:
                self.fac.refactor(basis)
                xB[:] = self.fac.ftran(self.b)
            else:
                self.fac.etas.append((r, w))


def solve_lp(problem: LpProblem, max_iter: int | None = None, tol_opt: float = TOL_OPT) -> LpSolution:
    """Minimise c.x over {A x = b, x >= 0}, returning an exact vertex.

    Infeasible and unbounded problems come back with the matching status;
    exceeding `max_iter` pivots raises IterationLimitError.
    """
    A0, b0, c0 = problem.A, problem.b, problem.c
    m0, n = A0.shape
    tol_feas = problem.tol_feas
    if max_iter is None:
        max_iter = 50 * (m0 + n) + 1000

    sign = np.where(b0 < 0, -1.0, 1.0)
    A = A0 * sign[:, None]
    b = b0 * sign
    empty = ~np.any(A != 0, axis=1)
    if np.any(np.abs(b[empty]) > tol_feas):
        return LpSolution(Status.INFEASIBLE, info={"reason": "empty row with nonzero rhs"})
    keep = np.flatnonzero(~empty)
    A, b = A[keep], b[keep]
    m = A.shape[0]
    counter = [0]

    # phase one from the artificial identity basis
    M = np.hstack([A, np.eye(m)])
    basis = np.arange(n, n + m)
    phase1 = _Simplex(M, b, basis, n, tol_opt, max_iter, counter)
    phase1.run(np.concatenate([np.zeros(n), np.ones(m)]))
    fac = _Factor(M, basis)
    xB = fac.ftran(b)
    infeas = float(np.sum(xB[basis >= n]))
    if infeas > tol_feas:
        return LpSolution(Status.INFEASIBLE, iterations=counter[0], info={"phase1_objective": infeas})

    # pivot zero-level artificials out; a row with no usable pivot is redundant
    redundant = 0
    while np.any(basis >= n):
        r = int(np.flatnonzero(basis >= n)[0])
        e = np.zeros(len(basis))
        e[r] = 1.0
        alpha = fac.btran(e) @ M[:, :n]
        alpha[basis[basis < n]] = 0.0
        j = int(np.argmax(np.abs(alpha)))
        if abs(alpha[j]) > PIVOT_TOL:
            basis[r] = j
            counter[0] += 1
        else:
            row = basis[r] - n
            live = np.delete(np.arange(M.shape[0]), row)
            M, b, keep = M[live], b[live], keep[live]
            basis = np.delete(basis, r)
            basis = np.where(basis > row + n, basis - 1, basis)
            M = np.delete(M, n + row, axis=1)
            redundant += 1
        fac = _Factor(M, basis)

    A2 = np.ascontiguousarray(M[:, :n])
    phase2 = _Simplex(A2, b, basis, n, tol_opt, max_iter, counter)
    if phase2.run(c0) is Status.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, iterations=counter[0])

    fac = _Factor(A2, basis)
    xB = fac.ftran(b)
    y = fac.btran(c0[basis])
    x = np.zeros(n)
    x[basis] = np.where((xB < 0) & (xB > -tol_feas), 0.0, xB)
    dual = np.zeros(m0)
    dual[keep] = y
    dual *= sign
    return LpSolution(
        Status.OPTIMAL,
        x=x,
        objective=float(c0 @ x),
        basis=np.sort(basis),
        dual=dual,
        iterations=counter[0],
        info={"redundant_rows": redundant},
    )


def certificate_holds(problem: LpProblem, sol: LpSolution, tol_opt: float = TOL_OPT) -> bool:
    """Primal feasibility, dual feasibility and a closed duality gap."""
    if not sol.optimal:
        return False
    A, b, c = problem.A, problem.b, problem.c
    tol_feas = problem.tol_feas
    primal = np.abs(A @ sol.x - b).max(initial=0.0) <= tol_feas and sol.x.min(initial=0.0) >= -tol_feas
    dual_ok = (c - A.T @ sol.dual).min(initial=0.0) >= -tol_opt
    gap = float(c @ sol.x) - float(b @ sol.dual)
    return bool(primal and dual_ok and gap <= tol_opt)
