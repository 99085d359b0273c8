"""Discrete-event core: integer-nanosecond clock, ordered event queue, seeded RNG streams."""

from __future__ import annotations

import hashlib
import heapq
import random
import re

NS = 1
US = 1_000
MS = 1_000_000
S = 1_000_000_000

# SimTime is an unsigned 64-bit nanosecond count.
MAX_TIME = 2**64 - 1

_UNITS = {"ns": NS, "us": US, "µs": US, "ms": MS, "s": S}
_DURATION_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ns|us|µs|ms|s)?\s*$")


class SimulationError(RuntimeError):
    """Raised when an event handler fails; carries the offending event's context."""

    def __init__(self, message, time=None, kind=None, target=None):
        super().__init__(message)
        self.time = time
        self.kind = kind
        self.target = target


class SchedulingError(ValueError):
    pass


def parse_duration(value) -> int:
    """Convert ``"400us"``, ``"5s"``, ``12000`` (ns) and similar into integer nanoseconds."""
    if isinstance(value, bool):
        raise ValueError(f"not a duration: {value!r}")
    if isinstance(value, int):
        if value < 0:
            raise ValueError(f"negative duration: {value}")
        return value
    if isinstance(value, float):
        if value < 0 or value != value:
            raise ValueError(f"bad duration: {value}")
        return round(value)
    m = _DURATION_RE.match(str(value))
    if not m:
        raise ValueError(f"cannot parse duration {value!r}")
    number, unit = m.groups()
    scaled = float(number) * _UNITS[unit or "ns"]
    return round(scaled)


def check_time(t: int) -> int:
    if t < 0 or t > MAX_TIME:
        raise OverflowError(f"simulation time {t} outside [0, 2**64)")
    return t


def derive_seed(root_seed: int, *path) -> int:
    """Stable 64-bit seed for an entity, independent of the other entities in the run.

    The root seed and the entity path are hashed with BLAKE2b, so adding a node never
    shifts another node's stream.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(root_seed)).encode())
    for part in path:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "big")


def make_rng(root_seed: int, *path) -> random.Random:
    """Per-entity generator: Python's Mersenne Twister (MT19937) seeded via :func:`derive_seed`.

    MT19937 seeded with an int produces the same sequence on every platform CPython runs on.
    """
    return random.Random(derive_seed(root_seed, *path))


class Simulator:
    """Single-threaded event loop.

    Pending events are heap entries ``(fire_at, seq, kind, target, handler, arg)``;
    ``(fire_at, seq)`` is unique, so handlers are never compared.
    """

    def __init__(self, trace=False):
        self.now = 0
        self._queue = []
        self._seq = 0
        self.executed = 0
        self.trace = [] if trace else None

    @property
    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, fire_at: int, handler, arg=None, kind="event", target=None) -> int:
        if fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule {kind} for {target} at t={fire_at}ns, clock is {self.now}ns"
            )
        if fire_at > MAX_TIME:
            raise OverflowError(f"event time {fire_at} overflows SimTime")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, seq, kind, target, handler, arg))
        return seq

    def schedule_in(self, delay: int, handler, arg=None, kind="event", target=None) -> int:
        return self.schedule(self.now + delay, handler, arg, kind, target)

    def run_until(self, t_end: int) -> int:
        """Execute every event with ``fire_at <= t_end``; leave the clock at ``t_end``."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before the clock ({self.now})")
        check_time(t_end)
        queue = self._queue
        trace = self.trace
        pop = heapq.heappop
        count = 0
        while queue and queue[0][0] <= t_end:
            fire_at, seq, kind, target, handler, arg = pop(queue)
            self.now = fire_at
            if trace is not None:
                trace.append((fire_at, seq, kind, str(target)))
            try:
                handler(arg)
            except SimulationError:
                raise
            except Exception as exc:
                raise SimulationError(
                    f"{kind} event for {target} at t={fire_at}ns failed: {exc!r}",
                    time=fire_at, kind=kind, target=target,
                ) from exc
            count += 1
        self.now = t_end
        self.executed += count
        return count
