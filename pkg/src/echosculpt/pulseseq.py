"""Executable delay / pi-pulse sequences.

`simulate_phases` is deliberately written against the pulse list alone: it
rebuilds each spin's sign trajectory from the pulses, so it can check any
schedule producer without sharing code with it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .model import SpinSystem, pairs


class PulseParityError(ValueError):
    """A spin receives an odd number of pi pulses, so no echo is formed."""


@dataclass(frozen=True)
class Segment:
    delay: float
    pulses_after: frozenset[int] = frozenset()


@dataclass(frozen=True)
class PulseSequence:
    q: int
    segments: tuple[Segment, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def total_time(self) -> float:
        return math.fsum(s.delay for s in self.segments)

    @property
    def pulse_count(self) -> int:
        return sum(len(s.pulses_after) for s in self.segments)

    def pulses_per_spin(self) -> np.ndarray:
        counts = np.zeros(self.q, dtype=int)
        for s in self.segments:
            for i in s.pulses_after:
                counts[i] += 1
        return counts

    def notation(self, one_based: bool = True) -> str:
        """Compact text form, e.g. 'tau pi^3 tau pi^1,2'."""
        off = 1 if one_based else 0
        parts = []
        for s in self.segments:
            if s.delay > 0:
                parts.append("tau")
            if s.pulses_after:
                parts.append("pi^" + ",".join(str(i + off) for i in sorted(s.pulses_after)))
        return " ".join(parts)


def boundary_padded(signs: np.ndarray) -> np.ndarray:
    signs = np.asarray(signs, dtype=np.int8)
    ones = np.ones((signs.shape[0], 1), dtype=np.int8)
    return np.hstack([ones, signs, ones])


def count_pulses(signs: np.ndarray) -> int:
    """Sign changes across all rows including the implicit +1 boundaries."""
    padded = boundary_padded(signs)
    return int(np.count_nonzero(padded[:, 1:] != padded[:, :-1]))


def sequence_from_signs(signs, times, metadata: dict | None = None) -> PulseSequence:
    """Pulse every spin whose sign changes between consecutive columns."""
    signs = np.asarray(signs, dtype=np.int8)
    times = np.asarray(times, dtype=float)
    q, n = signs.shape
    if times.shape != (n,):
        raise ValueError("one delay per column is required")
    padded = boundary_padded(signs)
    flips = padded[:, 1:] != padded[:, :-1]  # q x (n+1)
    segments = []
    first = frozenset(np.flatnonzero(flips[:, 0]).tolist())
    if first:
        segments.append(Segment(0.0, first))
    for m in range(n):
        segments.append(Segment(float(times[m]), frozenset(np.flatnonzero(flips[:, m + 1]).tolist())))
    seq = PulseSequence(q, tuple(segments), dict(metadata or {}))
    seq.metadata.setdefault("total_time_s", seq.total_time)
    return seq


def emit_pulses(schedule, metadata: dict | None = None) -> PulseSequence:
    meta = {"mode": getattr(schedule, "mode", None), "provenance": "rescale"}
    meta.update(getattr(schedule, "metadata", {}) or {})
    meta.update(metadata or {})
    signs = schedule.layout_signs() if hasattr(schedule, "layout_signs") else schedule.signs
    times = np.asarray(schedule.times, dtype=float)
    if signs.shape[1] == 2 * times.size:  # half schedule mirrored on the fly
        times = np.concatenate([times, times])
    return sequence_from_signs(signs, times, meta)


def simulate_phases(system: SpinSystem, sequence: PulseSequence) -> np.ndarray:
    """Phase acquired by every interaction (canonical row order, radians)."""
    q = system.q
    if sequence.q != q:
        raise ValueError("sequence and system disagree on the number of spins")
    odd = np.flatnonzero(sequence.pulses_per_spin() % 2)
    if odd.size:
        raise PulseParityError(f"odd pi-pulse count on spins {odd.tolist()}")

    sigma = [1] * q
    one = [[] for _ in range(q)]
    prs = pairs(q)
    two = [[] for _ in prs]
    for seg in sequence.segments:
        d = seg.delay
        if d:
            for i in range(q):
                one[i].append(d if sigma[i] > 0 else -d)
            for k, (i, j) in enumerate(prs):
                two[k].append(d if sigma[i] == sigma[j] else -d)
        for i in seg.pulses_after:
            sigma[i] = -sigma[i]

    freq = system.frequencies()
    signed = [math.fsum(v) for v in one] + [math.fsum(v) for v in two]
    return freq * np.array(signed)


def round_delay(delay: float, resolution: float) -> float:
    """Nearest multiple of `resolution`, midpoints away from zero.

    Uses the shortest decimal form of both numbers so that e.g. 3.5 ms at
    1 ms resolution is a genuine midpoint.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    d = Decimal(repr(float(delay)))
    res = Decimal(repr(float(resolution)))
    steps = (d / res).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return float(steps * res)


def round_times(sequence: PulseSequence, resolution: float) -> PulseSequence:
    segs = tuple(Segment(round_delay(s.delay, resolution), s.pulses_after) for s in sequence.segments)
    meta = dict(sequence.metadata)
    meta["rounded_to_s"] = resolution
    out = replace(sequence, segments=segs, metadata=meta)
    out.metadata["total_time_s"] = out.total_time
    return out


# --- file format ---------------------------------------------------------------


def _num(x: float) -> str:
    return format(float(x), ".17g")


def dumps_sequence(sequence: PulseSequence) -> str:
    lines = ["{", f'  "total_time_s": {_num(sequence.total_time)},', '  "segments": [']
    segs = []
    for s in sequence.segments:
        pulses = ", ".join(str(i) for i in sorted(s.pulses_after))
        segs.append(f'    {{"delay_s": {_num(s.delay)}, "pulses_after": [{pulses}]}}')
    lines.append(",\n".join(segs))
    meta = {k: v for k, v in sequence.metadata.items() if k != "total_time_s"}
    meta["spins"] = sequence.q
    lines.append("  ],")
    lines.append('  "metadata": ' + json.dumps(meta, sort_keys=True, default=_json_default))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def loads_sequence(text: str, q: int | None = None) -> PulseSequence:
    doc = json.loads(text)
    meta = dict(doc.get("metadata", {}))
    spins = meta.get("spins", q)
    if spins is None:
        raise ValueError("sequence file does not record the spin count")
    if q is not None and spins != q:
        raise ValueError(f"sequence is for {spins} spins, system has {q}")
    segs = []
    for s in doc["segments"]:
        pulses = frozenset(int(i) for i in s.get("pulses_after", []))
        if any(not 0 <= i < spins for i in pulses):
            raise IndexError(f"pulse spin index out of range in {s!r}")
        delay = float(s["delay_s"])
        if delay < 0:
            raise ValueError("delays must be non-negative")
        segs.append(Segment(delay, pulses))
    return PulseSequence(int(spins), tuple(segs), meta)


def write_sequence(sequence: PulseSequence, path) -> None:
    Path(path).write_text(dumps_sequence(sequence))


def read_sequence(path, q: int | None = None) -> PulseSequence:
    return loads_sequence(Path(path).read_text(), q)
