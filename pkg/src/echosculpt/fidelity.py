"""Propagator fidelity for diagonal z/zz evolutions and clock-rounding scans."""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import PhaseTarget, SpinSystem
from .pulseseq import PulseSequence, round_times, simulate_phases

EXACT_MAX_Q = 24


@dataclass(frozen=True)
class PhaseError:
    delta_one_spin: np.ndarray
    delta_two_spin: np.ndarray

    def __post_init__(self):
        one = np.array(self.delta_one_spin, dtype=float).ravel()
        two = np.array(self.delta_two_spin, dtype=float).ravel()
        q = one.size
        if two.size != q * (q - 1) // 2:
            raise ValueError(f"{q} spins need {q * (q - 1) // 2} coupling errors, got {two.size}")
        if not (np.isfinite(one).all() and np.isfinite(two).all()):
            raise ValueError("phase errors must be finite")
        object.__setattr__(self, "delta_one_spin", one)
        object.__setattr__(self, "delta_two_spin", two)

    @property
    def q(self) -> int:
        return self.delta_one_spin.size

    @classmethod
    def from_rows(cls, q: int, rows: np.ndarray) -> "PhaseError":
        rows = np.asarray(rows, dtype=float)
        return cls(rows[:q], rows[q:])


def diagonal_phases(error: PhaseError) -> np.ndarray:
    """theta(z) = sum_i dPhi_i s_i / 2 + sum_{i<j} dphi_ij s_i s_j / 4 for all 2^q states.

    State index bit i set means spin i has s_i = -1. The array is grown one
    spin at a time, so the cost is O(2^q) rather than O(q^2 2^q).
    """
    q = error.q
    coup = np.zeros((q, q))
    if q > 1:
        iu = np.triu_indices(q, k=1)
        coup[iu] = error.delta_two_spin / 4.0
    theta = np.zeros(1)
    for k in range(q):
        # field seen by spin k from spins < k, as a function of their states
        local = np.full(1, error.delta_one_spin[k] / 2.0)
        for i in range(k):
            local = np.concatenate([local + coup[i, k], local - coup[i, k]])
        theta = np.concatenate([theta + local, theta - local])
    return theta


def exact_infidelity(error: PhaseError) -> float:
    """1 - |mean exp(i theta)|^2, evaluated without cancellation near F = 1.

    With u = mean(exp(i (theta - c))) - 1 for a reference phase c, the
    infidelity is -2 Re(u) - |u|^2, and Re(u) = -2 mean(sin^2((theta - c)/2))
    is summed with math.fsum.
    """
    if error.q > EXACT_MAX_Q:
        raise ValueError(f"exact fidelity needs 2^q terms; q={error.q} exceeds {EXACT_MAX_Q}")
    theta = diagonal_phases(error)
    n = theta.size
    delta = theta - math.fsum(theta) / n
    re_u = -2.0 * math.fsum(np.sin(delta / 2.0) ** 2) / n
    im_u = math.fsum(np.sin(delta)) / n
    infid = -2.0 * re_u - (re_u * re_u + im_u * im_u)
    return min(max(infid, 0.0), 1.0)


def exact_fidelity(error: PhaseError) -> float:
    return 1.0 - exact_infidelity(error)


def approx_infidelity(error: PhaseError) -> float:
    """Leading-order infidelity from coupling errors alone."""
    if np.any(error.delta_one_spin != 0):
        warnings.warn("approximation assumes zero one-spin phase errors (symmetrised schedule)", stacklevel=2)
    return math.fsum(error.delta_two_spin**2) / 16.0


def infidelity(error: PhaseError) -> float:
    return exact_infidelity(error) if error.q <= EXACT_MAX_Q else approx_infidelity(error)


def phase_error(system: SpinSystem, sequence: PulseSequence, target: PhaseTarget) -> PhaseError:
    achieved = simulate_phases(system, sequence)
    diff = np.where(target.constrained, achieved - np.nan_to_num(target.values), 0.0)
    return PhaseError.from_rows(system.q, diff)


def rounding_scan(system: SpinSystem, sequence: PulseSequence, target: PhaseTarget, resolutions) -> list[tuple[float, float]]:
    """Infidelity after rounding every delay, coarsest resolution first."""
    res = sorted({float(r) for r in resolutions}, reverse=True)
    if any(r <= 0 for r in res):
        raise ValueError("resolutions must be positive")
    return [(r, infidelity(phase_error(system, round_times(sequence, r), target))) for r in res]


def log_resolutions(res_from: float, res_to: float, points: int) -> np.ndarray:
    if points < 1:
        raise ValueError("need at least one point")
    return np.logspace(math.log10(res_from), math.log10(res_to), points)


def scan_to_csv(curve) -> str:
    buf = io.StringIO()
    buf.write("resolution_s,infidelity\n")
    for r, inf in curve:
        buf.write(f"{r:.11e},{inf:.11e}\n")
    return buf.getvalue()


__all__ = [
    "EXACT_MAX_Q",
    "PhaseError",
    "approx_infidelity",
    "diagonal_phases",
    "exact_fidelity",
    "exact_infidelity",
    "infidelity",
    "log_resolutions",
    "phase_error",
    "rounding_scan",
    "scan_to_csv",
]
