"""Spin systems, phase targets and the interaction row layout.

Frequencies are read in Hz and stored as angular frequencies (rad/s).
Phases are always radians. Rows are ordered with the q one-spin
interactions first, followed by the couplings in lexicographic (i, j) order.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

TWO_PI = 2.0 * math.pi


class ParseError(ValueError):
    """Malformed spin-system or target document."""


class InfeasibleError(ValueError):
    """No schedule can realise the requested phases."""


def pairs(q: int) -> list[tuple[int, int]]:
    return list(combinations(range(q), 2))


def n_interactions(q: int) -> int:
    return q * (q + 1) // 2


def pair_row(i: int, j: int, q: int) -> int:
    """Row of coupling (i, j), i < j, in the canonical layout."""
    if not 0 <= i < j < q:
        raise IndexError(f"coupling ({i}, {j}) out of range for q={q}")
    # couplings before row i: sum_{a<i} (q-1-a)
    return q + i * (2 * q - i - 1) // 2 + (j - i - 1)


@dataclass(frozen=True)
class InteractionIndex:
    spins: tuple[int, ...]
    row: int

    @property
    def kind(self) -> str:
        return "one_spin" if len(self.spins) == 1 else "two_spin"

    @classmethod
    def of(cls, q: int, *spins: int) -> "InteractionIndex":
        if len(spins) == 1:
            (i,) = spins
            if not 0 <= i < q:
                raise IndexError(f"spin {i} out of range for q={q}")
            return cls((i,), i)
        if len(spins) == 2:
            i, j = sorted(spins)
            return cls((i, j), pair_row(i, j, q))
        raise ValueError("an interaction involves one or two spins")

    @classmethod
    def from_row(cls, q: int, row: int) -> "InteractionIndex":
        if row < q:
            return cls((row,), row)
        i, j = pairs(q)[row - q]
        return cls((i, j), row)

    def label(self) -> str:
        return ",".join(str(s) for s in self.spins)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpinSystem:
    """q offsets and a sparse symmetric coupling map, all in rad/s."""

    q: int
    offsets: tuple[float, ...]
    couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("a spin system needs at least one spin")
        if len(self.offsets) != self.q:
            raise ParseError(f"expected {self.q} offsets, got {len(self.offsets)}")
        clean = {}
        for (i, j), w in self.couplings.items():
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            if not 0 <= i < j < self.q:
                raise IndexError(f"coupling ({i}, {j}) out of range for q={self.q}")
            if (i, j) in clean:
                raise IndexError(f"coupling ({i}, {j}) given twice")
            if not math.isfinite(w):
                raise ValueError("frequencies must be finite")
            if w != 0.0:
                clean[(i, j)] = float(w)
        if not all(math.isfinite(o) for o in self.offsets):
            raise ValueError("frequencies must be finite")
        object.__setattr__(self, "offsets", tuple(float(o) for o in self.offsets))
        object.__setattr__(self, "couplings", dict(sorted(clean.items())))

    @property
    def p(self) -> int:
        return self.q * (self.q - 1) // 2

    @property
    def r(self) -> int:
        return n_interactions(self.q)

    def coupling(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        return self.couplings.get((i, j), 0.0)

    def frequencies(self) -> np.ndarray:
        """Angular frequency of every interaction in canonical row order."""
        out = np.zeros(self.r)
        out[: self.q] = self.offsets
        for (i, j), w in self.couplings.items():
            out[pair_row(i, j, self.q)] = w
        return _readonly(out)

    @classmethod
    def from_hz(cls, offsets_hz: Iterable[float], couplings_hz: Mapping[tuple[int, int], float] | Iterable = ()) -> "SpinSystem":
        offsets_hz = [float(x) for x in offsets_hz]
        if isinstance(couplings_hz, Mapping):
            items = list(couplings_hz.items())
        else:
            items = [((int(i), int(j)), float(w)) for i, j, w in couplings_hz]
        couplings = {}
        for (i, j), w in items:
            key = (min(i, j), max(i, j))
            if key in couplings:
                raise IndexError(f"coupling {key} given twice")
            couplings[key] = TWO_PI * w
        return cls(len(offsets_hz), tuple(TWO_PI * x for x in offsets_hz), couplings)

    def to_dict(self) -> dict:
        return {
            "spins": self.q,
            "offsets_hz": [o / TWO_PI for o in self.offsets],
            "couplings_hz": [[i, j, w / TWO_PI] for (i, j), w in self.couplings.items()],
        }


@dataclass(frozen=True)
class PhaseTarget:
    """Target phase per interaction row; NaN marks a Free row."""

    q: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (n_interactions(self.q),):
            raise ValueError(f"expected {n_interactions(self.q)} target rows, got {v.shape}")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def build(cls, q: int, one_spin: Iterable[float | None], two_spin: Mapping[tuple[int, int], float | None] | None = None) -> "PhaseTarget":
        """None marks a Free interaction; couplings not listed default to 0."""
        one_spin = list(one_spin)
        if len(one_spin) != q:
            raise ParseError(f"expected {q} one-spin targets, got {len(one_spin)}")
        v = np.zeros(n_interactions(q))
        for i, t in enumerate(one_spin):
            v[i] = np.nan if t is None else float(t)
        for (i, j), t in (two_spin or {}).items():
            v[pair_row(min(i, j), max(i, j), q)] = np.nan if t is None else float(t)
        return cls(q, v)

    @classmethod
    def couplings_only(cls, q: int, two_spin: Mapping[tuple[int, int], float]) -> "PhaseTarget":
        return cls.build(q, [0.0] * q, two_spin)

    @property
    def free(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def constrained(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def one_spin(self) -> np.ndarray:
        return self.values[: self.q]

    def two_spin(self) -> np.ndarray:
        return self.values[self.q:]


def required_times(system: SpinSystem, target: PhaseTarget) -> np.ndarray:
    """Signed evolution time target/frequency per row; 0 for Free or trivial rows.

    Raises InfeasibleError when a nonzero target sits on a zero frequency.
    """
    if system.q != target.q:
        raise ValueError("target and system disagree on the number of spins")
    freq = system.frequencies()
    vals = target.values
    out = np.zeros_like(freq)
    for row in np.flatnonzero(target.constrained):
        if vals[row] == 0.0:
            continue
        if freq[row] == 0.0:
            ix = InteractionIndex.from_row(system.q, row)
            raise InfeasibleError(f"nonzero target on interaction {ix.label()} with zero frequency")
        out[row] = vals[row] / freq[row]
    return out


def naive_time(system: SpinSystem, target: PhaseTarget) -> float:
    """Total time when every interaction is isolated and run in sequence."""
    return math.fsum(np.abs(required_times(system, target)))


def lower_bound(system: SpinSystem, target: PhaseTarget) -> float:
    """Time of the slowest single interaction; no schedule can beat it."""
    t = np.abs(required_times(system, target))
    return float(t.max()) if t.size else 0.0


# --- documents ---------------------------------------------------------------

_PHASE_RE = re.compile(
    r"^(?P<sign>[+-]?)\s*(?P<mult>\d+(?:\.\d*)?|\.\d+)?\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+(?:\.\d*)?))?$"
)


def parse_phase(token) -> float | None:
    """Parse a phase literal: a number, 'free', or a rational multiple of pi."""
    if isinstance(token, bool):
        raise ParseError(f"bad phase literal {token!r}")
    if isinstance(token, (int, float)):
        if not math.isfinite(token):
            raise ParseError(f"non-finite phase {token!r}")
        return float(token)
    if not isinstance(token, str):
        raise ParseError(f"bad phase literal {token!r}")
    s = token.strip().lower()
    if s == "free":
        return None
    m = _PHASE_RE.match(s)
    if m:
        val = math.pi * float(m["mult"] or 1.0)
        if m["den"]:
            den = float(m["den"])
            if den == 0:
                raise ParseError(f"zero denominator in {token!r}")
            val /= den
        return -val if m["sign"] == "-" else val
    try:
        val = float(s)
    except ValueError:
        raise ParseError(f"bad phase literal {token!r}") from None
    if not math.isfinite(val):
        raise ParseError(f"non-finite phase {token!r}")
    return val


def _load_json(document) -> dict:
    if isinstance(document, Mapping):
        return dict(document)
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        document = Path(document).read_text()
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc)) from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    return doc


def load_spin_system(document) -> SpinSystem:
    """Build a SpinSystem from a dict, JSON text, or a path to a JSON file."""
    doc = _load_json(document)
    try:
        q = doc["spins"]
        offsets = doc["offsets_hz"]
        couplings = doc.get("couplings_hz", [])
    except KeyError as exc:
        raise ParseError(f"missing field {exc}") from None
    if not isinstance(q, int) or isinstance(q, bool) or q < 1:
        raise ParseError("'spins' must be a positive integer")
    if not isinstance(offsets, list) or len(offsets) != q:
        raise ParseError(f"'offsets_hz' must list {q} values")
    entries = []
    for c in couplings:
        if not isinstance(c, list) or len(c) != 3:
            raise ParseError(f"coupling entry {c!r} is not [i, j, hz]")
        i, j, w = c
        if not (isinstance(i, int) and isinstance(j, int)) or i == j:
            raise IndexError(f"bad coupling indices in {c!r}")
        if min(i, j) < 0 or max(i, j) >= q:
            raise IndexError(f"coupling indices in {c!r} out of range for q={q}")
        entries.append((i, j, w))
    try:
        return SpinSystem.from_hz([float(x) for x in offsets], entries)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc)) from exc


def load_target(document, q: int) -> PhaseTarget:
    doc = _load_json(document)
    one = doc.get("one_spin")
    if not isinstance(one, list) or len(one) != q:
        raise ParseError(f"'one_spin' must list {q} entries")
    two = {}
    for c in doc.get("two_spin", []):
        if not isinstance(c, list) or len(c) != 3:
            raise ParseError(f"two-spin entry {c!r} is not [i, j, phase]")
        i, j, t = c
        if not (isinstance(i, int) and isinstance(j, int)) or i == j:
            raise IndexError(f"bad coupling indices in {c!r}")
        key = (min(i, j), max(i, j))
        if key in two:
            raise IndexError(f"coupling {key} given twice")
        if key[0] < 0 or key[1] >= q:
            raise IndexError(f"coupling indices in {c!r} out of range for q={q}")
        two[key] = parse_phase(t)
    return PhaseTarget.build(q, [parse_phase(t) for t in one], two)


def target_to_dict(target: PhaseTarget) -> dict:
    def fmt(v):
        return "free" if math.isnan(v) else float(v)

    q = target.q
    return {
        "one_spin": [fmt(v) for v in target.one_spin()],
        "two_spin": [[i, j, fmt(v)] for (i, j), v in zip(pairs(q), target.two_spin())],
    }
