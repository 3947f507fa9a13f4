"""Sequency-ordered Walsh functions and the sign matrices built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import InteractionIndex, SpinSystem, n_interactions, pairs


def _log2_exact(length: int) -> int:
    if length < 1 or length & (length - 1):
        raise ValueError(f"length {length} is not a power of two")
    return length.bit_length() - 1


def gray(n: int) -> int:
    return n ^ (n >> 1)


def walsh_function(n: int, length: int) -> np.ndarray:
    """W_n of the given length, with exactly n sign changes.

    W_n(x) = (-1)^(sum_k g_k x_{B-1-k}) with g the Gray code of n, so the
    most significant bit of x pairs with the least significant Gray bit.
    """
    bits = _log2_exact(length)
    if not 0 <= n < length:
        raise ValueError(f"Walsh index {n} needs 0 <= n < {length}")
    g = gray(n)
    x = np.arange(length)
    parity = np.zeros(length, dtype=np.int64)
    for k in range(bits):
        if (g >> k) & 1:
            parity ^= (x >> (bits - 1 - k)) & 1
    return (1 - 2 * parity).astype(np.int8)


def walsh_matrix(length: int) -> np.ndarray:
    return np.stack([walsh_function(n, length) for n in range(length)])


def schur_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return (a * b).astype(np.int8)


def expand_two_spin(one_spin: np.ndarray) -> np.ndarray:
    """Coupling rows S^i * S^j for every i < j, in lexicographic order."""
    one_spin = np.asarray(one_spin, dtype=np.int8)
    q = one_spin.shape[0]
    if q < 2:
        return np.zeros((0, one_spin.shape[1]), dtype=np.int8)
    i, j = np.triu_indices(q, k=1)
    return one_spin[i] * one_spin[j]


@dataclass(frozen=True)
class SignMatrix:
    """One-spin sign rows (q x m); coupling rows are derived on demand."""

    one_spin: np.ndarray

    def __post_init__(self):
        s = np.array(self.one_spin, dtype=np.int8, ndmin=2)
        if s.size and not np.all(np.abs(s) == 1):
            raise ValueError("sign matrix entries must be +1 or -1")
        s.setflags(write=False)
        object.__setattr__(self, "one_spin", s)

    @property
    def q(self) -> int:
        return self.one_spin.shape[0]

    @property
    def n_columns(self) -> int:
        return self.one_spin.shape[1]

    @property
    def two_spin(self) -> np.ndarray:
        return expand_two_spin(self.one_spin)

    def full(self) -> np.ndarray:
        """All r = q(q+1)/2 rows in canonical order."""
        return np.vstack([self.one_spin, self.two_spin])

    def rows(self, rows) -> np.ndarray:
        """Selected canonical rows without building unused coupling rows."""
        q = self.q
        rows = np.asarray(rows, dtype=np.int64)
        out = np.empty((rows.size, self.n_columns), dtype=np.int8)
        prs = pairs(q)
        for k, row in enumerate(rows):
            if row < q:
                out[k] = self.one_spin[row]
            else:
                i, j = prs[row - q]
                out[k] = self.one_spin[i] * self.one_spin[j]
        return out

    def columns(self, idx) -> "SignMatrix":
        return SignMatrix(self.one_spin[:, idx])

    def negated(self) -> "SignMatrix":
        return SignMatrix(-self.one_spin)


def walsh_row_indices(q: int) -> list[int]:
    """Walsh index of every canonical row of the full sign matrix."""
    one = [1 << j for j in range(q)]
    return one + [one[i] ^ one[j] for i, j in pairs(q)]


def build_full_sign_matrix(q: int) -> SignMatrix:
    """The 2^q-column overcomplete basis: spin j follows W_{2^j}."""
    if q < 1:
        raise ValueError("q must be at least 1")
    length = 1 << q
    return SignMatrix(np.stack([walsh_function(1 << j, length) for j in range(q)]))


def canonical_sign_matrix(q: int) -> SignMatrix:
    """First half of the full basis: every column has spin 0 at +1."""
    full = build_full_sign_matrix(q)
    return full.columns(slice(0, full.n_columns // 2))


def column_from_index(m: int, q: int) -> np.ndarray:
    """Spin j is -1 exactly when bit j of m is set."""
    if not 0 <= m < (1 << q):
        raise ValueError(f"column index {m} outside [0, 2^{q})")
    return np.array([1 - 2 * ((m >> j) & 1) for j in range(q)], dtype=np.int8)


def columns_from_indices(indices, q: int) -> np.ndarray:
    """Vectorised column_from_index; returns a q x len(indices) sign array."""
    idx = np.asarray(indices, dtype=np.uint64)
    shifts = np.arange(q, dtype=np.uint64)[:, None]
    bits = (idx[None, :] >> shifts) & np.uint64(1)
    return (1 - 2 * bits.astype(np.int8)).astype(np.int8)


# --- refocusing networks -------------------------------------------------------


def refocusing_assignment(q: int, retain: InteractionIndex) -> list[int]:
    """Walsh index per spin that keeps `retain` and refocuses everything else.

    A retained coupling puts both spins on W_1 and the others on W_2, W_3, ...;
    a retained offset puts that spin on W_0 and the others on W_1, W_2, ...
    """
    assign = [0] * q
    if retain.kind == "two_spin":
        i, j = retain.spins
        assign[i] = assign[j] = 1
        nxt = 2
    else:
        (i,) = retain.spins
        assign[i] = 0
        nxt = 1
    for s in range(q):
        if s in retain.spins:
            continue
        assign[s] = nxt
        nxt += 1
    return assign


def refocusing_pulse_count(q: int) -> int:
    """Pulses needed to keep one coupling of q spins at full strength."""
    return q * (q - 1) // 2 + math.ceil((q - 1) / 2) + 2


def build_refocusing_network(system: SpinSystem, retain: InteractionIndex, phase: float):
    """Isolate one interaction with equal delays, refocusing all others.

    A negative phase/frequency ratio is realised by negating one retained
    spin's row, which amounts to flanking pulses on that spin.
    """
    from .pulseseq import sequence_from_signs

    q = system.q
    freq = system.frequencies()[retain.row]
    if freq == 0.0:
        raise ValueError(f"interaction {retain.label()} has zero frequency")
    assign = refocusing_assignment(q, retain)
    length = 1
    while length <= max(assign):
        length *= 2
    signs = np.stack([walsh_function(n, length) for n in assign])
    ratio = phase / freq
    if ratio < 0:
        signs[retain.spins[0]] *= -1
    tau = abs(ratio) / length
    return sequence_from_signs(
        signs,
        np.full(length, tau),
        metadata={
            "provenance": "refocus",
            "retain": list(retain.spins),
            "walsh_assignment": assign,
            "phase_rad": float(phase),
        },
    )


__all__ = [
    "SignMatrix",
    "build_full_sign_matrix",
    "build_refocusing_network",
    "canonical_sign_matrix",
    "column_from_index",
    "columns_from_indices",
    "expand_two_spin",
    "gray",
    "n_interactions",
    "refocusing_assignment",
    "refocusing_pulse_count",
    "schur_product",
    "walsh_function",
    "walsh_matrix",
    "walsh_row_indices",
]
