"""Egress transmission selection: FIFO, strict priority, CBS, TAS gates and frame preemption.

The selectors here are pure functions of port state and the current time; the port in
:mod:`tsnsim.fabric` owns the state and turns their answers into events.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .frames import ConfigError, serialization_time, bytes_on_wire

# 802.3br framing
FRAGMENT_OVERHEAD = 24   # preamble/SMD-C/frag count + MAC header on a continuation fragment
FRAGMENT_TRAILER = 4     # mCRC closing a cut fragment
MIN_CUT = 60             # bytes of the active fragment on the wire before a cut is legal
MIN_REMAINDER = 64       # payload left for the continuation

ALL_QUEUES = 0xFF


def cbs_slopes(idle_slope_fraction: float, port_rate_bps: int):
    """Return ``(idle_slope, send_slope)`` in bit/s for a bandwidth fraction of the port."""
    if not 0 < idle_slope_fraction < 1:
        raise ConfigError(
            f"CBS bandwidth fraction must lie in (0, 1), got {idle_slope_fraction}",
            [idle_slope_fraction])
    if port_rate_bps <= 0:
        raise ConfigError(f"port rate must be positive, got {port_rate_bps}", [port_rate_bps])
    idle = round(idle_slope_fraction * port_rate_bps)
    return idle, idle - port_rate_bps


class CbsState:
    """Credit of one CBS queue.

    Credit is kept as an exact integer in bit-nanoseconds-per-second (bits x 1e9), so
    slope x elapsed-ns accumulates without rounding.
    """

    __slots__ = ("idle_slope", "send_slope", "scaled_credit", "last_update")

    def __init__(self, idle_slope: int, send_slope: int, credit_bits=0, last_update=0):
        self.idle_slope = idle_slope
        self.send_slope = send_slope
        self.scaled_credit = round(credit_bits * 1_000_000_000)
        self.last_update = last_update

    @classmethod
    def for_fraction(cls, fraction, port_rate_bps):
        return cls(*cbs_slopes(fraction, port_rate_bps))

    @property
    def credit(self) -> float:
        """Credit in bits."""
        return self.scaled_credit / 1_000_000_000

    def ns_until_nonnegative(self) -> int:
        if self.scaled_credit >= 0:
            return 0
        return -(-(-self.scaled_credit) // self.idle_slope)

    def __repr__(self):
        return f"CbsState(credit={self.credit:.3f}b, idle={self.idle_slope}, send={self.send_slope})"


ACCUMULATING = "accumulating"
TRANSMITTING = "transmitting"
IDLE = "idle"


def cbs_update(state: CbsState, now: int, phase: str) -> CbsState:
    """Advance ``state`` to ``now`` assuming ``phase`` held since ``state.last_update``.

    accumulating: frames wait, credit rises at idleSlope.
    transmitting: credit falls at sendSlope.
    idle (queue empty, not sending): positive credit is discarded; negative credit
    recovers at idleSlope but never above zero.
    """
    dt = now - state.last_update
    if dt < 0:
        raise ValueError(f"CBS update goes back in time ({state.last_update} -> {now})")
    if phase == ACCUMULATING:
        state.scaled_credit += state.idle_slope * dt
    elif phase == TRANSMITTING:
        state.scaled_credit += state.send_slope * dt
    elif phase == IDLE:
        if state.scaled_credit > 0:
            state.scaled_credit = 0
        elif state.scaled_credit < 0:
            state.scaled_credit = min(0, state.scaled_credit + state.idle_slope * dt)
    else:
        raise ValueError(f"unknown CBS phase {phase!r}")
    state.last_update = now
    return state


def mask_of(queues) -> int:
    mask = 0
    for q in queues:
        if not 0 <= q <= 7:
            raise ConfigError(f"queue index {q} outside 0..7", [q])
        mask |= 1 << q
    return mask


def queues_of(mask: int):
    return [q for q in range(8) if mask >> q & 1]


class GateControlList:
    """Cyclic list of ``(gate_bitmask, duration_ns)`` entries starting at ``base_time``."""

    def __init__(self, entries, base_time=0):
        entries = [(int(mask), int(duration)) for mask, duration in entries]
        if not entries:
            raise ConfigError("gate control list must have at least one entry")
        bad = [e for e in entries if e[1] <= 0 or not 0 <= e[0] <= 0xFF]
        if bad:
            raise ConfigError("gate control entries need 8-bit masks and positive durations", bad)
        self.entries = entries
        self.base_time = int(base_time)
        self.cycle_time = sum(d for _, d in entries)
        self._starts = []
        t = 0
        for _, d in entries:
            self._starts.append(t)
            t += d

    def _locate(self, now):
        offset = (now - self.base_time) % self.cycle_time
        # entries are few; a linear scan beats bisect overhead here
        idx = len(self._starts) - 1
        for i, start in enumerate(self._starts):
            if start > offset:
                idx = i - 1
                break
        return idx, now - offset + self._starts[idx]

    def gate_state(self, now: int) -> int:
        return self.entries[self._locate(now)[0]][0]

    def is_open(self, now: int, queue: int) -> bool:
        return bool(self.gate_state(now) >> queue & 1)

    def window(self, now: int, queue: int):
        """``(is_open, boundary)``: when open, the instant the gate next closes; when
        closed, the instant it next opens. ``boundary`` is None if that never happens."""
        idx, entry_start = self._locate(now)
        bit = 1 << queue
        is_open = bool(self.entries[idx][0] & bit)
        n = len(self.entries)
        t = entry_start
        for step in range(n):
            t += self.entries[(idx + step) % n][1]
            if bool(self.entries[(idx + step + 1) % n][0] & bit) != is_open:
                return is_open, t
        return is_open, None

    def next_fit(self, now: int, queue: int, duration: int) -> Optional[int]:
        """Earliest ``t >= now`` at which a ``duration``-long frame of ``queue`` may start."""
        t = now
        for _ in range(2 * len(self.entries) + 2):
            is_open, boundary = self.window(t, queue)
            if is_open:
                if boundary is None or t + duration <= boundary:
                    return t
                t = boundary
            else:
                if boundary is None:
                    return None
                t = boundary
        return None

    def to_dict(self):
        return {"base_time": self.base_time,
                "entries": [[queues_of(m), d] for m, d in self.entries]}


def tas_gate_state(gcl: GateControlList, now: int) -> int:
    return gcl.gate_state(now)


def tas_can_start(gcl: Optional[GateControlList], now: int, tx_duration: int, queue: int) -> bool:
    """Length-aware guard band: start only if the frame finishes before the gate closes."""
    if gcl is None:
        return True
    is_open, close = gcl.window(now, queue)
    if not is_open:
        return False
    return close is None or now + tx_duration <= close


@dataclass
class ShaperConfig:
    """Per-port transmission selection.

    ``cbs`` maps queue index -> idle-slope fraction. ``gcl`` applies TAS gates, and
    ``express`` names the queues whose frames may preempt the others.
    """

    fifo: bool = False
    cbs: dict = field(default_factory=dict)
    gcl: Optional[GateControlList] = None
    express: frozenset = frozenset()

    def __post_init__(self):
        self.express = frozenset(self.express)
        bad = [q for q in self.express if not 0 <= q <= 7]
        if bad:
            raise ConfigError("express queues must be in 0..7", bad)
        for q, frac in self.cbs.items():
            if not 0 <= q <= 7:
                raise ConfigError(f"CBS queue {q} outside 0..7", [q])
            cbs_slopes(frac, 1)
        if self.fifo and (self.cbs or self.gcl is not None or self.express):
            raise ConfigError("FIFO ports take no CBS, TAS or preemption settings")


class Transmission:
    """One fragment (or whole frame) on the wire."""

    __slots__ = ("frame", "queue", "start", "end", "overhead", "payload_start",
                 "payload_len", "trailer", "token", "express")

    def __init__(self, frame, queue, start, end, overhead, payload_start, payload_len,
                 token, express):
        self.frame = frame
        self.queue = queue
        self.start = start
        self.end = end
        self.overhead = overhead
        self.payload_start = payload_start
        self.payload_len = payload_len
        self.trailer = 0
        self.token = token
        self.express = express

    @property
    def wire_bytes(self):
        return self.overhead + self.payload_len + self.trailer

    @property
    def final(self):
        return self.payload_start + self.payload_len == self.frame.size_bytes


class Suspended(NamedTuple):
    frame: object
    queue: int
    payload_offset: int


class Hold(NamedTuple):
    retry_at: Optional[int]


class Preempt(NamedTuple):
    cut_bytes: int        # payload bytes carried by the fragment being cut
    fragment_end: int     # when the cut fragment (plus trailer) leaves the wire


def fp_preempt_check(tx: Transmission, now: int, rate_bps: int):
    """Can an express frame that became ready at ``now`` cut the active transmission?

    The byte in progress always completes. A cut needs at least ``MIN_CUT`` bytes of the
    current fragment on the wire and ``MIN_REMAINDER`` payload bytes left over; the cut
    fragment is closed by a 4-byte trailer and the remainder later goes out with
    ``FRAGMENT_OVERHEAD`` bytes of framing.
    """
    wire_sent = bytes_on_wire(now - tx.start, rate_bps)
    fragment_wire = tx.overhead + tx.payload_len
    wire_sent = min(wire_sent, fragment_wire)
    payload_sent = max(0, wire_sent - tx.overhead)
    remaining = tx.payload_len - payload_sent
    if wire_sent >= MIN_CUT and payload_sent > 0 and remaining >= MIN_REMAINDER:
        end = tx.start + serialization_time(wire_sent + FRAGMENT_TRAILER, rate_bps)
        return Preempt(payload_sent, end)
    if wire_sent < MIN_CUT:
        payload_at_min = MIN_CUT - tx.overhead
        if payload_at_min > 0 and tx.payload_len - payload_at_min >= MIN_REMAINDER:
            return Hold(tx.start + serialization_time(MIN_CUT, rate_bps))
    return Hold(None)


class Transmit(NamedTuple):
    queue: int
    frame: object
    duration: int
    resume: Optional[Suspended] = None


class WaitUntil(NamedTuple):
    time: int


IDLE_RESULT = None


def _eligible(port, q, frame, now, waits):
    """Gate/credit checks for the head ``frame`` of queue ``q``."""
    gcl = port.gcl
    if gcl is not None:
        duration = serialization_time(frame.size_bytes, port.rate_bps)
        if not tas_can_start(gcl, now, duration, q):
            t = gcl.next_fit(now, q, duration)
            if t is not None:
                waits.append(t)
            return False
    cbs = port.cbs[q]
    if cbs is not None and cbs.scaled_credit < 0:
        waits.append(now + cbs.ns_until_nonnegative())
        return False
    return True


def select_next(port, now: int):
    """Pick what an idle transmitter sends next.

    Returns :class:`Transmit`, :class:`WaitUntil` (nothing eligible now, something will
    be) or ``None`` (nothing to do).
    """
    queues = port.queues
    if port.fifo:
        if queues[0]:
            frame = queues[0][0]
            return Transmit(0, frame, serialization_time(frame.size_bytes, port.rate_bps))
        return IDLE_RESULT
    waits = []
    suspended = port.suspended
    for q in range(7, -1, -1):
        if suspended is not None and q not in port.express:
            continue
        queue = queues[q]
        if not queue:
            continue
        frame = queue[0]
        if _eligible(port, q, frame, now, waits):
            return Transmit(q, frame, serialization_time(frame.size_bytes, port.rate_bps))
    if suspended is not None:
        rest = suspended.frame.size_bytes - suspended.payload_offset
        return Transmit(suspended.queue, suspended.frame,
                        serialization_time(FRAGMENT_OVERHEAD + rest, port.rate_bps), suspended)
    if waits:
        return WaitUntil(min(waits))
    return IDLE_RESULT
