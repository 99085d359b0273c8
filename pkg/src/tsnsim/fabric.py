"""Switched Ethernet fabric: hosts, store-and-forward switches, full-duplex links,
static shortest-path routing and per-port egress queues."""

from __future__ import annotations

from collections import deque, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .engine import Simulator
from .frames import ConfigError, Frame, pcp_to_priority, serialization_time
from .shaping import (
    ACCUMULATING, FRAGMENT_OVERHEAD, FRAGMENT_TRAILER, IDLE, TRANSMITTING,
    CbsState, Hold, Preempt, ShaperConfig, Suspended, Transmission, Transmit, WaitUntil,
    cbs_update, fp_preempt_check, select_next,
)


@dataclass
class LinkSpec:
    a: str
    b: str
    rate_bps: int
    propagation_delay: int = 0

    def __post_init__(self):
        if self.rate_bps <= 0:
            raise ConfigError(f"link {self.a}-{self.b} needs a positive rate", [f"{self.a}-{self.b}"])
        if self.propagation_delay < 0:
            raise ConfigError(f"link {self.a}-{self.b} has negative propagation delay",
                              [f"{self.a}-{self.b}"])


@dataclass
class TopologySpec:
    switches: list
    hosts: list
    links: list = field(default_factory=list)


class EgressPort:
    """Output side of one link direction: queues, shaper state and the transmitter."""

    def __init__(self, net, owner, peer, rate_bps, propagation_delay=0,
                 shaper: Optional[ShaperConfig] = None, capacity=None):
        self.net = net
        self.sim: Simulator = net.sim
        self.owner = owner
        self.peer = peer
        self.name = f"{owner}->{peer}"
        self.rate_bps = rate_bps
        self.propagation_delay = propagation_delay
        shaper = shaper or ShaperConfig(fifo=True)
        self.shaper = shaper
        self.fifo = shaper.fifo
        nq = 1 if self.fifo else 8
        self.queues = [deque() for _ in range(nq)]
        self.capacity = capacity
        self.drops = [0] * nq
        self.cbs = [None] * 8
        for q, fraction in shaper.cbs.items():
            self.cbs[q] = CbsState.for_fraction(fraction, rate_bps)
        self.cbs_queues = sorted(shaper.cbs)
        self.gcl = shaper.gcl
        self.express = shaper.express
        self.tx: Optional[Transmission] = None
        self.suspended: Optional[Suspended] = None
        self.cutting = False
        self._select_pending = False
        self._recheck_at = None
        self._token = 0
        self.tx_log = None   # list of (start, end, queue, wire_bytes) when recording
        self.frames_sent = 0

    def __repr__(self):
        return f"<EgressPort {self.name} {self.rate_bps}bps>"

    # -- bookkeeping ------------------------------------------------------

    def occupancy(self):
        return [len(q) for q in self.queues]

    def queue_index(self, frame) -> int:
        return 0 if self.fifo else pcp_to_priority(frame.pcp)

    def _cbs_phase(self, q):
        tx = self.tx
        if tx is not None and tx.queue == q:
            return TRANSMITTING
        if self.queues[q] or (self.suspended is not None and self.suspended.queue == q):
            return ACCUMULATING
        return IDLE

    def _sync_cbs(self, now):
        for q in self.cbs_queues:
            cbs_update(self.cbs[q], now, self._cbs_phase(q))

    # -- frame entry -------------------------------------------------------

    def enqueue(self, frame: Frame, now: int):
        q = self.queue_index(frame)
        queue = self.queues[q]
        if self.capacity is not None and len(queue) >= self.capacity:
            self.drops[q] += 1
            self.net.frame_dropped(frame, self, now)
            return False
        if self.cbs_queues:
            self._sync_cbs(now)
        queue.append(frame)
        if self.cbs_queues:
            self._sync_cbs(now)
        tx = self.tx
        if tx is None:
            self._request_select(now)
        elif q in self.express and not tx.express and not self.cutting:
            self._try_preempt(now)
        return True

    # -- transmitter -------------------------------------------------------

    def _request_select(self, now):
        # deferred so every arrival at this instant competes for the wire
        if not self._select_pending:
            self._select_pending = True
            self.sim.schedule(now, self._on_select, None, "transmission-select", self.name)

    def _on_select(self, _):
        self._select_pending = False
        if self.tx is not None:
            return
        now = self.sim.now
        if self.cbs_queues:
            self._sync_cbs(now)
        decision = select_next(self, now)
        if decision is None:
            return
        if isinstance(decision, WaitUntil):
            t = decision.time
            if self._recheck_at is None or t < self._recheck_at:
                self._recheck_at = t
                kind = "gate-change" if self.gcl is not None else "credit-recheck"
                self.sim.schedule(t, self._on_recheck, t, kind, self.name)
            return
        self._start(decision, now)

    def _on_recheck(self, t):
        if self._recheck_at == t:
            self._recheck_at = None
        if self.tx is None:
            self._request_select(self.sim.now)

    def _start(self, decision: Transmit, now):
        q = decision.queue
        self._token += 1
        if decision.resume is not None:
            sus = decision.resume
            self.suspended = None
            offset = sus.payload_offset
            tx = Transmission(sus.frame, q, now, now + decision.duration, FRAGMENT_OVERHEAD,
                              offset, sus.frame.size_bytes - offset, self._token,
                              q in self.express)
        else:
            frame = self.queues[q].popleft()
            tx = Transmission(frame, q, now, now + decision.duration, 0, 0, frame.size_bytes,
                              self._token, q in self.express)
        self.tx = tx
        if self.cbs_queues:
            self._sync_cbs(now)
        self.sim.schedule(tx.end, self._on_tx_done, tx.token, "transmission-complete", self.name)

    def _on_tx_done(self, token):
        tx = self.tx
        if tx is None or tx.token != token:
            return
        now = self.sim.now
        if self.cbs_queues:
            self._sync_cbs(now)
        self.tx = None
        self.cutting = False
        frame = tx.frame
        if self.tx_log is not None:
            self.tx_log.append((tx.start, now, tx.queue, tx.wire_bytes))
        if tx.trailer:
            # a preempted fragment just finished; the rest waits in `suspended`
            self._record_fragment(tx)
            self.suspended = Suspended(frame, tx.queue, tx.payload_start + tx.payload_len)
        else:
            if tx.overhead:
                self._record_fragment(tx)
            self.frames_sent += 1
            self.net.transmit_done(self, frame, now)
        if self.cbs_queues:
            self._sync_cbs(now)
        self._request_select(now)

    def _record_fragment(self, tx):
        frame = tx.frame
        if frame.fragments is None:
            frame.fragments = []
        frame.fragments.append((tx.payload_start, tx.payload_start + tx.payload_len, tx.wire_bytes))

    # -- frame preemption --------------------------------------------------

    def _express_waiting(self):
        return any(self.queues[q] for q in self.express)

    def _try_preempt(self, now):
        tx = self.tx
        verdict = fp_preempt_check(tx, now, self.rate_bps)
        if isinstance(verdict, Preempt):
            self.cutting = True
            self._token += 1
            tx.token = self._token
            tx.payload_len = verdict.cut_bytes
            tx.trailer = FRAGMENT_TRAILER
            tx.end = verdict.fragment_end
            self.sim.schedule(tx.end, self._on_tx_done, tx.token, "transmission-complete",
                              self.name)
        elif isinstance(verdict, Hold) and verdict.retry_at is not None:
            self.sim.schedule(verdict.retry_at, self._on_preempt_retry, tx.token,
                              "preemption-check", self.name)

    def _on_preempt_retry(self, token):
        tx = self.tx
        if tx is None or tx.token != token or self.cutting or tx.express:
            return
        if self._express_waiting():
            self._try_preempt(self.sim.now)

    # -- state inspection --------------------------------------------------

    def frames_held(self):
        """Frames currently owned by this port (queued, on the wire, or suspended)."""
        held = [f for q in self.queues for f in q]
        if self.tx is not None:
            held.append(self.tx.frame)
        if self.suspended is not None:
            held.append(self.suspended.frame)
        return held


class Switch:
    def __init__(self, net, node_id):
        self.net = net
        self.id = node_id
        self.ports = {}      # neighbour id -> EgressPort
        self.forwarding = {}  # destination host -> EgressPort

    def __repr__(self):
        return f"<Switch {self.id}>"

    def ingest(self, frame: Frame, now: int):
        port = self.forwarding.get(frame.dst)
        if port is None:
            raise RuntimeError(f"switch {self.id} has no route to {frame.dst!r}")
        frame.hops.append((self.id, now))
        port.enqueue(frame, now)


class Host:
    def __init__(self, net, node_id):
        self.net = net
        self.id = node_id
        self.port: Optional[EgressPort] = None
        self.listeners = []   # callables (host, frame, now) run on every delivery

    def __repr__(self):
        return f"<Host {self.id}>"

    def send(self, frame: Frame, now: int):
        self.port.enqueue(frame, now)

    def deliver(self, frame: Frame, now: int):
        frame.delivered_at = now
        self.net.frame_delivered(self, frame, now)
        for listener in self.listeners:
            listener(self, frame, now)


class Network:
    """A built topology bound to one simulator instance."""

    def __init__(self, sim: Simulator, stats=None):
        self.sim = sim
        self.stats = stats
        self.switches = {}
        self.hosts = {}
        self.ports = []
        self.links = []
        self.propagating = set()
        self._next_frame_id = 0
        self.drop_log = None

    def node(self, node_id):
        return self.switches.get(node_id) or self.hosts.get(node_id)

    def new_frame(self, app, src, dst, size_bytes, created_at, pcp=None):
        fid = self._next_frame_id
        self._next_frame_id += 1
        return Frame(app, src, dst, size_bytes, created_at, pcp=pcp, frame_id=fid)

    def emit(self, host_id, frame, now):
        """Hand a freshly created frame to its source host."""
        if self.stats is not None:
            self.stats.on_sent(frame)
        self.hosts[host_id].send(frame, now)

    def transmit_done(self, port: EgressPort, frame: Frame, now: int):
        if port.propagation_delay:
            self.propagating.add(frame)
            self.sim.schedule(now + port.propagation_delay, self._arrive, (port.peer, frame),
                              "frame-arrival", port.peer)
        else:
            self._receive(port.peer, frame, now)

    def _arrive(self, arg):
        peer, frame = arg
        self.propagating.discard(frame)
        self._receive(peer, frame, self.sim.now)

    def _receive(self, node_id, frame, now):
        sw = self.switches.get(node_id)
        if sw is not None:
            sw.ingest(frame, now)
            return
        host = self.hosts[node_id]
        if frame.dst != node_id:
            raise RuntimeError(f"host {node_id} received frame for {frame.dst}")
        host.deliver(frame, now)

    def frame_delivered(self, host, frame, now):
        if self.stats is not None:
            self.stats.on_delivered(frame, now)

    def frame_dropped(self, frame, port, now):
        if self.stats is not None:
            self.stats.on_dropped(frame)
        if self.drop_log is not None:
            self.drop_log.append((now, port.name, frame))

    def in_flight(self):
        """Frames created but neither delivered nor dropped."""
        frames = [f for p in self.ports for f in p.frames_held()]
        frames.extend(self.propagating)
        return frames

    def path(self, src, dst):
        """Node ids a frame from ``src`` to ``dst`` visits, ends included."""
        hops = [src]
        port = self.hosts[src].port
        seen = set()
        while port.peer != dst:
            sw = self.switches[port.peer]
            if sw.id in seen:
                raise RuntimeError(f"routing loop between {src} and {dst}")
            seen.add(sw.id)
            hops.append(sw.id)
            port = sw.forwarding[dst]
        hops.append(dst)
        return hops

    def path_ports(self, src, dst):
        ports = [self.hosts[src].port]
        for node in self.path(src, dst)[1:-1]:
            ports.append(self.switches[node].forwarding[dst])
        return ports


def validate_topology(spec: TopologySpec):
    ids = list(spec.switches) + list(spec.hosts)
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ConfigError(f"duplicate node ids: {', '.join(map(str, dup))}", dup)
    known = set(ids)
    unknown = sorted({n for l in spec.links for n in (l.a, l.b) if n not in known})
    if unknown:
        raise ConfigError(f"links reference unknown nodes: {', '.join(unknown)}", unknown)
    self_loops = [f"{l.a}-{l.b}" for l in spec.links if l.a == l.b]
    if self_loops:
        raise ConfigError(f"self-loop links: {', '.join(self_loops)}", self_loops)
    pairs = [frozenset((l.a, l.b)) for l in spec.links]
    dup_links = sorted({"-".join(sorted(p)) for p in pairs if pairs.count(p) > 1})
    if dup_links:
        raise ConfigError(f"parallel links: {', '.join(dup_links)}", dup_links)
    degree = defaultdict(int)
    for l in spec.links:
        degree[l.a] += 1
        degree[l.b] += 1
    unattached = sorted(h for h in spec.hosts if degree[h] == 0)
    if unattached:
        raise ConfigError(f"unattached hosts: {', '.join(unattached)}", unattached)
    multi = sorted(h for h in spec.hosts if degree[h] > 1)
    if multi:
        raise ConfigError(f"hosts with more than one link: {', '.join(multi)}", multi)
    host_set = set(spec.hosts)
    host_host = [f"{l.a}-{l.b}" for l in spec.links if l.a in host_set and l.b in host_set]
    if host_host:
        raise ConfigError(f"hosts must attach to switches: {', '.join(host_host)}", host_host)
    # connectivity
    adj = defaultdict(set)
    for l in spec.links:
        adj[l.a].add(l.b)
        adj[l.b].add(l.a)
    if ids:
        seen = {ids[0]}
        stack = [ids[0]]
        while stack:
            n = stack.pop()
            for m in adj[n]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        cut_off = sorted(known - seen)
        if cut_off:
            raise ConfigError(f"disconnected nodes: {', '.join(cut_off)}", cut_off)


def compute_forwarding(spec: TopologySpec):
    """``{switch: {host: next_hop}}`` by hop count, ties to the lowest next-hop id.

    Hosts never forward, so paths only transit switches.
    """
    adj = defaultdict(set)
    for l in spec.links:
        adj[l.a].add(l.b)
        adj[l.b].add(l.a)
    switches = set(spec.switches)
    tables = {s: {} for s in spec.switches}
    for dst in spec.hosts:
        dist = {dst: 0}
        frontier = [dst]
        while frontier:
            nxt = []
            for n in frontier:
                if n != dst and n not in switches:
                    continue
                for m in sorted(adj[n]):
                    if m not in dist:
                        dist[m] = dist[n] + 1
                        nxt.append(m)
            frontier = nxt
        for s in spec.switches:
            if s not in dist:
                raise ConfigError(f"switch {s} cannot reach host {dst}", [s, dst])
            candidates = [m for m in adj[s] if dist.get(m) == dist[s] - 1
                          and (m == dst or m in switches)]
            tables[s][dst] = min(candidates)
    return tables


def build_network(spec: TopologySpec, sim: Simulator, shaper_for=None, capacity=None,
                  stats=None) -> Network:
    """Instantiate nodes, ports and forwarding tables.

    ``shaper_for(switch_id, neighbour_id, rate_bps)`` returns the :class:`ShaperConfig`
    of a switch egress port (strict priority by default). Host ports are always
    unshaped, unbounded FIFOs.
    """
    validate_topology(spec)
    net = Network(sim, stats)
    for s in spec.switches:
        net.switches[s] = Switch(net, s)
    for h in spec.hosts:
        net.hosts[h] = Host(net, h)
    for link in spec.links:
        net.links.append(link)
        for here, there in ((link.a, link.b), (link.b, link.a)):
            if here in net.hosts:
                port = EgressPort(net, here, there, link.rate_bps, link.propagation_delay,
                                  ShaperConfig(fifo=True), None)
                net.hosts[here].port = port
            else:
                shaper = shaper_for(here, there, link.rate_bps) if shaper_for else ShaperConfig()
                port = EgressPort(net, here, there, link.rate_bps, link.propagation_delay,
                                  shaper, capacity)
                net.switches[here].ports[there] = port
            net.ports.append(port)
    for s, table in compute_forwarding(spec).items():
        sw = net.switches[s]
        sw.forwarding = {dst: sw.ports[hop] for dst, hop in table.items()}
    return net


def hop_serialization(net: Network, src, dst, size_bytes):
    """Per-port serialization times along the route, in path order."""
    return [serialization_time(size_bytes, p.rate_bps) for p in net.path_ports(src, dst)]
