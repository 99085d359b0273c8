"""Tagged Ethernet frames, PCP/traffic-class mapping and serialization arithmetic."""

from __future__ import annotations

import enum
import itertools

MIN_FRAME = 64
MAX_FRAME = 1522


class ConfigError(ValueError):
    """Invalid scenario or model configuration. ``offenders`` lists the bad items."""

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class App(str, enum.Enum):
    REMOTE_CONTROL = "RemoteControl"
    SAFETY = "Safety"
    AR = "AR"
    AGV = "AGV"
    CONDITION_MONITORING = "ConditionMonitoring"
    UPDATE = "Update"
    CONTROL_ACTUATORS = "ControlSignal-Actuators"
    CONTROL_VEHICLES = "ControlSignal-Vehicles"
    DATACENTER_REPORT = "DataCenterReport"

    def __str__(self):
        return self.value


APP_PCP = {
    App.REMOTE_CONTROL: 7,
    App.SAFETY: 6,
    App.AR: 5,
    App.AGV: 4,
    App.CONDITION_MONITORING: 3,
    App.UPDATE: 2,
    # controller reactions are remote-control class traffic
    App.CONTROL_ACTUATORS: 7,
    App.CONTROL_VEHICLES: 7,
    # reports to the data center ride with the monitoring class
    App.DATACENTER_REPORT: 3,
}

# 802.1Q default: PCP 1 (background) is the lowest priority, PCP 0 (best effort) the next.
_PCP_TO_PRIORITY = (1, 0, 2, 3, 4, 5, 6, 7)
_PRIORITY_TO_PCP = tuple(_PCP_TO_PRIORITY.index(p) for p in range(8))


def to_app(value) -> App:
    if isinstance(value, App):
        return value
    try:
        return App(value)
    except ValueError:
        raise ConfigError(f"unknown application {value!r}", [value]) from None


def pcp_to_priority(pcp: int) -> int:
    if not isinstance(pcp, int) or not 0 <= pcp <= 7:
        raise ConfigError(f"PCP must be an integer in 0..7, got {pcp!r}", [pcp])
    return _PCP_TO_PRIORITY[pcp]


def priority_to_pcp(priority: int) -> int:
    if not isinstance(priority, int) or not 0 <= priority <= 7:
        raise ConfigError(f"priority must be an integer in 0..7, got {priority!r}", [priority])
    return _PRIORITY_TO_PCP[priority]


def app_pcp(app) -> int:
    return APP_PCP[to_app(app)]


def serialization_time(size_bytes: int, link_rate_bps: int) -> int:
    """Nanoseconds to put ``size_bytes`` on a ``link_rate_bps`` wire, rounded up."""
    if link_rate_bps <= 0:
        raise ConfigError(f"link rate must be positive, got {link_rate_bps}", [link_rate_bps])
    return -(-size_bytes * 8 * 1_000_000_000 // link_rate_bps)


def bytes_on_wire(elapsed_ns: int, link_rate_bps: int) -> int:
    """Bytes started by ``elapsed_ns`` into a transmission (a byte in progress counts)."""
    return -(-elapsed_ns * link_rate_bps // 8_000_000_000)


_frame_ids = itertools.count()


class Frame:
    __slots__ = ("frame_id", "app", "src", "dst", "size_bytes", "pcp", "created_at",
                 "hops", "delivered_at", "fragments", "trigger_id")

    def __init__(self, app, src, dst, size_bytes, created_at, pcp=None, frame_id=None):
        if not MIN_FRAME <= size_bytes <= MAX_FRAME:
            raise ConfigError(
                f"frame size {size_bytes} B outside [{MIN_FRAME}, {MAX_FRAME}]", [size_bytes])
        self.app = to_app(app)
        self.pcp = APP_PCP[self.app] if pcp is None else pcp
        if not 0 <= self.pcp <= 7:
            raise ConfigError(f"PCP {self.pcp} outside 0..7", [self.pcp])
        self.frame_id = next(_frame_ids) if frame_id is None else frame_id
        self.src = src
        self.dst = dst
        self.size_bytes = size_bytes
        self.created_at = created_at
        # (node, enqueue time) per switch hop
        self.hops = []
        self.delivered_at = None
        # (payload_start, payload_end, wire_bytes) per fragment; filled only when preempted
        self.fragments = None
        self.trigger_id = None

    @property
    def delay(self):
        if self.delivered_at is None:
            return None
        return self.delivered_at - self.created_at

    def __repr__(self):
        return (f"Frame(#{self.frame_id} {self.app.value} {self.src}->{self.dst} "
                f"{self.size_bytes}B pcp={self.pcp} t0={self.created_at})")
