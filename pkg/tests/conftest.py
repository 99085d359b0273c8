import pytest

from tsnsim.engine import Simulator
from tsnsim.fabric import LinkSpec, TopologySpec, build_network
from tsnsim.frames import App
from tsnsim.metrics import StatsCollector
from tsnsim.shaping import ShaperConfig

MBPS = 1_000_000
GBPS = 1_000_000_000


def star(hosts, switch_rate=100 * MBPS, host_rates=None, shaper=None, capacity=None,
         trace=False):
    """One switch ``S`` with every host attached; returns ``(sim, net, stats)``."""
    host_rates = host_rates or {}
    links = [LinkSpec(h, "S", host_rates.get(h, switch_rate)) for h in hosts]
    spec = TopologySpec(["S"], list(hosts), links)
    sim = Simulator(trace=trace)
    stats = StatsCollector()
    shaper = shaper or ShaperConfig()
    net = build_network(spec, sim, lambda sw, nb, rate: ShaperConfig(
        fifo=shaper.fifo, cbs=dict(shaper.cbs), gcl=shaper.gcl, express=shaper.express),
        capacity, stats)
    return sim, net, stats


def inject(net, src, dst, size, at, app=App.AGV, pcp=None):
    """Schedule the creation of one frame at ``at``; returns nothing (frames are tracked
    through the stats collector and host listeners)."""
    def fire(_):
        frame = net.new_frame(app, src, dst, size, net.sim.now, pcp)
        net.emit(src, frame, net.sim.now)
    net.sim.schedule(at, fire, None, "test-inject", src)


@pytest.fixture
def delivered():
    """Factory attaching a delivery recorder to hosts: ``rec = delivered(net, 'H2')``."""
    def attach(net, *hosts):
        log = []
        for h in hosts:
            net.hosts[h].listeners.append(lambda host, frame, now: log.append((now, frame)))
        return log
    return attach
