"""Scenario configuration, built-in presets, single runs and parameter sweeps."""

from __future__ import annotations

import copy
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import yaml

from .compression import CompressionSpec, apply_compression
from .engine import MS, S, US, Simulator, parse_duration
from .fabric import LinkSpec, TopologySpec, build_network
from .frames import App, ConfigError, serialization_time, to_app
from .metrics import (REQUIREMENT_APPS, RequirementSpec, StatsCollector, default_requirements,
                      requirements_matrix)
from .shaping import GateControlList, ShaperConfig, mask_of, queues_of
from .traffic import (ACTUATORS_CONTROL, AR_RECEIVER, AR_SENDER, DATA_CENTER, ROBOT_CONTROLLER,
                      ROBOTIC_ARM, SAFETY_MONITOR, SAFETY_SENSOR, SENSORS, UPDATE_UNIT, VEHICLES,
                      VEHICLES_CONTROL, ConditionControllerSpec, GeneratorSpec, ReportSpec,
                      default_controllers, default_reports, default_traffic_table,
                      install_traffic)

log = logging.getLogger(__name__)

MBPS = 1_000_000
GBPS = 1_000_000_000

PRESETS = ("basic", "tsn-sp", "tsn-cbs", "tsn-tas", "tsn-fp", "upgrade", "enhanced")
PRESET_HELP = {
    "basic": "conventional Ethernet, one FIFO queue per switch port",
    "tsn-sp": "eight priority queues, strict priority",
    "tsn-cbs": "strict priority plus a credit-based shaper on the AR queue (5)",
    "tsn-tas": "strict priority plus time-aware gates protecting remote control",
    "tsn-fp": "strict priority plus frame preemption for queues 6 and 7",
    "upgrade": "tsn-fp with every link at 1 Gbps",
    "enhanced": "CBS(0.5) on AR, preemption for 6/7, edge-compressed AR stream",
}

SWEEPABLE = {
    "cbs_fraction": "shaping.cbs.5",
    "compression_ratio": "compression.ratio",
    "peripheral_rate": "topology.peripheral_rate_bps",
    "queue_capacity": "queue_capacity",
}

_RATE_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([kMG]?)(?:bps|b/s)?\s*$")


def parse_rate(value) -> int:
    """``100000000``, ``"100Mbps"`` or ``"1Gbps"`` -> bits per second."""
    if isinstance(value, bool):
        raise ConfigError(f"not a rate: {value!r}", [value])
    if isinstance(value, (int, float)):
        rate = round(value)
    else:
        m = _RATE_RE.match(str(value))
        if not m:
            raise ConfigError(f"cannot parse rate {value!r}", [value])
        rate = round(float(m.group(1)) * {"": 1, "k": 1e3, "M": 1e6, "G": 1e9}[m.group(2)])
    if rate <= 0:
        raise ConfigError(f"rate must be positive, got {value!r}", [value])
    return rate


def _duration(value, what):
    try:
        return parse_duration(value)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}", [what]) from None


# ---------------------------------------------------------------------------
# config sections


@dataclass
class HostAttachment:
    switch: str
    rate_bps: Optional[int] = None


@dataclass
class SwitchLink:
    a: str
    b: str
    rate_bps: Optional[int] = None


@dataclass
class TopologyConfig:
    peripheral_rate_bps: int
    switches: list
    hosts: dict               # host -> HostAttachment
    links: list               # SwitchLink between switches
    propagation_delay: int = 0

    def to_spec(self) -> TopologySpec:
        rate = self.peripheral_rate_bps
        links = [LinkSpec(l.a, l.b, l.rate_bps or rate, self.propagation_delay) for l in self.links]
        for host, att in self.hosts.items():
            links.append(LinkSpec(host, att.switch, att.rate_bps or rate, self.propagation_delay))
        return TopologySpec(list(self.switches), list(self.hosts), links)

    def to_dict(self):
        hosts = {}
        for h, att in self.hosts.items():
            entry = {"switch": att.switch}
            if att.rate_bps is not None:
                entry["rate_bps"] = att.rate_bps
            hosts[h] = entry
        links = []
        for l in self.links:
            entry = {"a": l.a, "b": l.b}
            if l.rate_bps is not None:
                entry["rate_bps"] = l.rate_bps
            links.append(entry)
        return {"peripheral_rate_bps": self.peripheral_rate_bps, "switches": list(self.switches),
                "hosts": hosts, "links": links, "propagation_delay": self.propagation_delay}

    @classmethod
    def from_dict(cls, d):
        hosts = {}
        for h, att in d.get("hosts", {}).items():
            if isinstance(att, str):
                att = {"switch": att}
            r = att.get("rate_bps")
            hosts[str(h)] = HostAttachment(str(att["switch"]), None if r is None else parse_rate(r))
        links = []
        for l in d.get("links", []):
            r = l.get("rate_bps")
            links.append(SwitchLink(str(l["a"]), str(l["b"]), None if r is None else parse_rate(r)))
        return cls(parse_rate(d["peripheral_rate_bps"]), [str(s) for s in d["switches"]],
                   hosts, links, _duration(d.get("propagation_delay", 0), "propagation_delay"))


@dataclass
class TasConfig:
    entries: list                       # [(queues, duration_ns)]
    protect_app: Optional[App] = App.REMOTE_CONTROL
    scope: str = "path"                 # "path": ports on the protected stream's route
    base_time: int = 0                  # used when not aligning to a stream

    def gcl(self, base_time=None) -> GateControlList:
        return GateControlList([(mask_of(q), d) for q, d in self.entries],
                               self.base_time if base_time is None else base_time)

    def to_dict(self):
        return {"entries": [[sorted(q), d] for q, d in self.entries],
                "protect_app": None if self.protect_app is None else self.protect_app.value,
                "scope": self.scope, "base_time": self.base_time}

    @classmethod
    def from_dict(cls, d):
        entries = [(sorted(int(q) for q in e[0]), _duration(e[1], "gcl entry")) for e in d["entries"]]
        app = d.get("protect_app", App.REMOTE_CONTROL.value)
        scope = d.get("scope", "path")
        if scope not in ("path", "all"):
            raise ConfigError(f"TAS scope must be 'path' or 'all', got {scope!r}", [scope])
        cfg = cls(entries, None if app is None else to_app(app), scope,
                  _duration(d.get("base_time", 0), "tas base_time"))
        cfg.gcl()   # validates
        return cfg


@dataclass
class ShapingConfig:
    mode: str = "priority"             # "fifo" | "priority"
    cbs: dict = field(default_factory=dict)
    tas: Optional[TasConfig] = None
    express: list = field(default_factory=list)

    def validate(self):
        if self.mode not in ("fifo", "priority"):
            raise ConfigError(f"shaping mode must be 'fifo' or 'priority', got {self.mode!r}",
                              [self.mode])
        if self.mode == "fifo" and (self.cbs or self.tas or self.express):
            raise ConfigError("FIFO mode takes no CBS, TAS or preemption settings", ["shaping"])
        if self.tas is not None and (self.cbs or self.express):
            raise ConfigError("TAS is not combined with CBS or frame preemption", ["shaping.tas"])
        ShaperConfig(cbs=dict(self.cbs), express=frozenset(self.express))

    def port_shaper(self, gcl=None) -> ShaperConfig:
        if self.mode == "fifo":
            return ShaperConfig(fifo=True)
        return ShaperConfig(cbs=dict(self.cbs), gcl=gcl, express=frozenset(self.express))

    def to_dict(self):
        return {"mode": self.mode, "cbs": {int(q): float(f) for q, f in sorted(self.cbs.items())},
                "tas": None if self.tas is None else self.tas.to_dict(),
                "express": sorted(self.express)}

    @classmethod
    def from_dict(cls, d):
        cbs = {int(q): float(f) for q, f in (d.get("cbs") or {}).items()}
        tas = d.get("tas")
        cfg = cls(d.get("mode", "priority"), cbs,
                  None if tas is None else TasConfig.from_dict(tas),
                  sorted(int(q) for q in d.get("express") or []))
        cfg.validate()
        return cfg


def _gen_to_dict(g: GeneratorSpec):
    out = {"app": g.app.value, "sources": list(g.sources), "destinations": list(g.destinations),
           "frame_size": g.frame_size, "interarrival": g.interarrival, "start_at": g.start_at}
    if g.stop_at is not None:
        out["stop_at"] = g.stop_at
    return out


def _gen_from_dict(d):
    stop = d.get("stop_at")
    return GeneratorSpec(to_app(d["app"]), tuple(d["sources"]), tuple(d["destinations"]),
                         int(d["frame_size"]), _duration(d["interarrival"], "interarrival"),
                         _duration(d.get("start_at", 0), "start_at"),
                         None if stop is None else _duration(stop, "stop_at"))


@dataclass
class TrafficConfig:
    generators: list
    controllers: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    randomize_phase: bool = True

    def to_dict(self):
        return {
            "generators": [_gen_to_dict(g) for g in self.generators],
            "controllers": [{"controller": c.controller, "trigger_app": c.trigger_app.value,
                             "probability": float(c.probability),
                             "reply_app": c.reply_app.value, "frame_size": c.frame_size}
                            for c in self.controllers],
            "reports": [{"src": r.src, "dst": r.dst, "frame_size": r.frame_size,
                         "period": r.period, "app": r.app.value} for r in self.reports],
            "randomize_phase": self.randomize_phase,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            [_gen_from_dict(g) for g in d.get("generators", [])],
            [ConditionControllerSpec(c["controller"], to_app(c["trigger_app"]),
                                     float(c["probability"]), to_app(c["reply_app"]),
                                     int(c.get("frame_size", 354)))
             for c in d.get("controllers", [])],
            [ReportSpec(r["src"], r["dst"], int(r.get("frame_size", 500)),
                        _duration(r.get("period", 100 * MS), "report period"),
                        to_app(r.get("app", App.DATACENTER_REPORT.value)))
             for r in d.get("reports", [])],
            bool(d.get("randomize_phase", True)),
        )


@dataclass
class CompressionConfig:
    enabled: bool = True
    source: str = AR_SENDER
    spec: CompressionSpec = field(default_factory=CompressionSpec)

    def to_dict(self):
        return {"enabled": self.enabled, "source": self.source, "ratio": float(self.spec.ratio),
                "processing_ms_per_mp": float(self.spec.processing_ms_per_mp),
                "width": self.spec.width, "height": self.spec.height}

    @classmethod
    def from_dict(cls, d):
        return cls(bool(d.get("enabled", True)), str(d.get("source", AR_SENDER)),
                   CompressionSpec(float(d.get("ratio", 22.0)),
                                   float(d.get("processing_ms_per_mp", 20.0)),
                                   int(d.get("width", 1920)), int(d.get("height", 1080))))


@dataclass
class MetricsConfig:
    delay_rule: str = "max"
    sample_interval: int = 10 * MS

    def to_dict(self):
        return {"delay_rule": self.delay_rule, "sample_interval": self.sample_interval}

    @classmethod
    def from_dict(cls, d):
        rule = d.get("delay_rule", "max")
        if rule not in ("max", "mean", "p99"):
            raise ConfigError(f"delay_rule must be max, mean or p99, got {rule!r}", [rule])
        return cls(rule, _duration(d.get("sample_interval", 10 * MS), "sample_interval"))


@dataclass
class ScenarioConfig:
    name: str
    topology: TopologyConfig
    shaping: ShapingConfig
    traffic: TrafficConfig
    compression: Optional[CompressionConfig] = None
    seed: int = 1
    horizon: int = 5 * S
    drain: int = 50 * MS
    queue_capacity: int = 7500
    requirements: dict = field(default_factory=default_requirements)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def to_dict(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "horizon": self.horizon,
            "drain": self.drain,
            "queue_capacity": self.queue_capacity,
            "topology": self.topology.to_dict(),
            "shaping": self.shaping.to_dict(),
            "traffic": self.traffic.to_dict(),
            "compression": None if self.compression is None else self.compression.to_dict(),
            "requirements": {a.value: {"max_delay": r.max_delay, "min_rdr": float(r.min_rdr)}
                             for a, r in self.requirements.items()},
            "metrics": self.metrics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        known = {"name", "seed", "horizon", "drain", "queue_capacity", "topology", "shaping",
                 "traffic", "compression", "requirements", "metrics"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config sections: {', '.join(unknown)}", unknown)
        try:
            reqs = default_requirements()
            if d.get("requirements") is not None:
                reqs = {to_app(a): RequirementSpec(_duration(r["max_delay"], f"{a} max_delay"),
                                                   float(r.get("min_rdr", 99.9)))
                        for a, r in d["requirements"].items()}
            comp = d.get("compression")
            cfg = cls(
                name=str(d.get("name", "custom")),
                topology=TopologyConfig.from_dict(d["topology"]),
                shaping=ShapingConfig.from_dict(d.get("shaping") or {}),
                traffic=TrafficConfig.from_dict(d.get("traffic") or {}),
                compression=None if comp is None else CompressionConfig.from_dict(comp),
                seed=int(d.get("seed", 1)),
                horizon=_duration(d.get("horizon", 5 * S), "horizon"),
                drain=_duration(d.get("drain", 50 * MS), "drain"),
                queue_capacity=int(d.get("queue_capacity", 7500)),
                requirements=reqs,
                metrics=MetricsConfig.from_dict(d.get("metrics") or {}),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc.args[0]!r}", [exc.args[0]]) from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def validate(self):
        """Closed-world checks: every referenced node exists and settings are legal."""
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", [self.seed])
        if self.queue_capacity <= 0:
            raise ConfigError("queue capacity must be positive", [self.queue_capacity])
        self.shaping.validate()
        spec = self.topology.to_spec()
        from .fabric import validate_topology
        validate_topology(spec)
        unknown_sw = sorted({a.switch for a in self.topology.hosts.values()}
                            - set(self.topology.switches))
        if unknown_sw:
            raise ConfigError(f"hosts attach to unknown switches: {', '.join(unknown_sw)}",
                              unknown_sw)
        hosts = set(self.topology.hosts)
        missing = set()
        for g in self.traffic.generators:
            missing |= (set(g.sources) | set(g.destinations)) - hosts
        for c in self.traffic.controllers:
            if c.controller not in hosts:
                missing.add(c.controller)
        if self.compression is not None and self.compression.enabled:
            if self.compression.source not in hosts:
                missing.add(self.compression.source)
        if missing:
            raise ConfigError(f"traffic references unknown hosts: {', '.join(sorted(missing))}",
                              sorted(missing))
        tas = self.shaping.tas
        if tas is not None and tas.scope == "path" and tas.protect_app is not None:
            if not any(g.app is tas.protect_app for g in self.traffic.generators):
                raise ConfigError(f"TAS protects {tas.protect_app} but no generator emits it",
                                  [tas.protect_app.value])

    def to_yaml(self) -> str:
        return dump_yaml(self.to_dict())


def dump_yaml(data) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc.strerror}", [str(path)]) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})", [str(path)]) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level", [str(path)])
    return ScenarioConfig.from_dict(data)


# ---------------------------------------------------------------------------
# presets


def default_topology(peripheral_rate_bps=100 * MBPS) -> dict:
    """Four switches: A-B is the 1 Gbps core, C hangs off A and D off B.

    C holds the field devices (condition sensors, robot controller, vehicles); D holds
    the controllers, the AR receiver, the data center and the safety pair; the robotic
    arm and update unit sit on B. The AR camera's edge server has a 1 Gbps uplink to A.
    """
    hosts = {AR_SENDER: {"switch": "A", "rate_bps": GBPS}}
    for h in (ROBOT_CONTROLLER,) + VEHICLES + SENSORS:
        hosts[h] = {"switch": "C"}
    for h in (ROBOTIC_ARM, UPDATE_UNIT):
        hosts[h] = {"switch": "B"}
    for h in (AR_RECEIVER, VEHICLES_CONTROL, ACTUATORS_CONTROL, DATA_CENTER, SAFETY_SENSOR,
              SAFETY_MONITOR):
        hosts[h] = {"switch": "D"}
    return {
        "peripheral_rate_bps": peripheral_rate_bps,
        "switches": ["A", "B", "C", "D"],
        "hosts": hosts,
        "links": [{"a": "A", "b": "B", "rate_bps": GBPS}, {"a": "C", "b": "A"},
                  {"a": "D", "b": "B"}],
        "propagation_delay": 0,
    }


def default_tas() -> dict:
    """400 us cycle (the robot controller's period): 60 us for queue 7, then 340 us for 0-6."""
    return {"entries": [[[7], 60 * US], [list(range(7)), 340 * US]],
            "protect_app": App.REMOTE_CONTROL.value, "scope": "path", "base_time": 0}


def _base_dict(name):
    traffic = TrafficConfig(default_traffic_table(), default_controllers(), default_reports())
    return {
        "name": name,
        "seed": 1,
        "horizon": 5 * S,
        "drain": 50 * MS,
        "queue_capacity": 7500,
        "topology": default_topology(),
        "shaping": {"mode": "priority", "cbs": {}, "tas": None, "express": []},
        "traffic": traffic.to_dict(),
        "compression": None,
        "requirements": {a.value: {"max_delay": r.max_delay, "min_rdr": r.min_rdr}
                         for a, r in default_requirements().items()},
        "metrics": MetricsConfig().to_dict(),
    }


def preset_dict(preset: str) -> dict:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}",
                          [preset])
    d = _base_dict(preset)
    sh = d["shaping"]
    if preset == "basic":
        sh["mode"] = "fifo"
    elif preset == "tsn-cbs":
        sh["cbs"] = {5: 0.5}
    elif preset == "tsn-tas":
        sh["tas"] = default_tas()
    elif preset == "tsn-fp":
        sh["express"] = [6, 7]
    elif preset == "upgrade":
        sh["express"] = [6, 7]
        d["topology"]["peripheral_rate_bps"] = GBPS
    elif preset == "enhanced":
        sh["cbs"] = {5: 0.5}
        sh["express"] = [6, 7]
        d["compression"] = CompressionConfig().to_dict()
    return d


def _split_key(key):
    return [p for p in str(key).split(".") if p]


def set_path(d: dict, key, value):
    """Set ``a.b.c`` in a nested dict; integer-looking parts also match int keys."""
    parts = _split_key(key)
    if not parts:
        raise ConfigError("empty override key", [key])
    cur = d
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        k = part
        if isinstance(cur, dict):
            if k not in cur and part.lstrip("-").isdigit() and int(part) in cur:
                k = int(part)
            elif k not in cur and part.isdigit() and i > 0 and parts[i - 1] == "cbs":
                k = int(part)
            if last:
                cur[k] = value
                return
            if k not in cur or cur[k] is None:
                if i == 0:
                    raise ConfigError(f"unknown override section {part!r}", [key])
                cur[k] = {}
            cur = cur[k]
        elif isinstance(cur, list) and part.isdigit() and int(part) < len(cur):
            if last:
                cur[int(part)] = value
                return
            cur = cur[int(part)]
        else:
            raise ConfigError(f"override key {key!r} does not address a config field", [key])


def parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}", [text])
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key.strip(), value


def expand_preset(preset: str, overrides=None) -> ScenarioConfig:
    """Build a preset's config and apply ``overrides`` (``{dotted.key: value}``).

    The enhanced preset picks its compression ratio from the peripheral link rate
    (22:1 below 1 Gbps, 2:1 otherwise) unless ``compression.ratio`` is overridden.
    """
    d = preset_dict(preset)
    overrides = dict(overrides or {})
    for key, value in overrides.items():
        set_path(d, key, value)
    if preset == "enhanced" and "compression.ratio" not in overrides and d.get("compression"):
        rate = parse_rate(d["topology"]["peripheral_rate_bps"])
        d["compression"]["ratio"] = 22.0 if rate < GBPS else 2.0
    return ScenarioConfig.from_dict(d)


def load_or_expand(preset=None, config_path=None, overrides=None) -> ScenarioConfig:
    if (preset is None) == (config_path is None):
        raise ConfigError("give exactly one of a preset or a config file")
    if preset is not None:
        return expand_preset(preset, overrides)
    cfg = load_config(config_path)
    if overrides:
        d = cfg.to_dict()
        for key, value in overrides.items():
            set_path(d, key, value)
        cfg = ScenarioConfig.from_dict(d)
    return cfg


# ---------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    config: ScenarioConfig
    report: dict
    stats: dict
    net: object = None
    sim: Simulator = None
    generators: list = None
    controllers: list = None


def _traffic_specs(cfg: ScenarioConfig):
    gens = list(cfg.traffic.generators)
    comp = cfg.compression
    if comp is not None and comp.enabled:
        hit = False
        for i, g in enumerate(gens):
            if g.app is App.AR and comp.source in g.sources:
                gens[i] = apply_compression(g, comp.spec)
                hit = True
        if not hit:
            raise ConfigError(f"no AR stream leaves {comp.source} to compress", [comp.source])
    return gens


def _install_tas(cfg, net, generators):
    tas = cfg.shaping.tas
    if tas is None:
        return
    ports = [p for sw in net.switches.values() for p in sw.ports.values()]
    if tas.scope == "all" or tas.protect_app is None:
        for p in ports:
            p.gcl = tas.gcl()
            p.shaper.gcl = p.gcl
        return
    # open the protected window exactly when the protected stream reaches each port
    aligned = set()
    for gen in generators:
        if gen.spec.app is not tas.protect_app:
            continue
        dst = gen.destinations[0]
        t = gen.first_tick
        for port in net.path_ports(gen.source, dst):
            if port.owner in net.switches and port not in aligned:
                port.gcl = tas.gcl(base_time=t)
                port.shaper.gcl = port.gcl
                aligned.add(port)
            t += serialization_time(gen.spec.frame_size, port.rate_bps) + port.propagation_delay


def _sample_queues(net, rows, interval, horizon):
    ports = sorted((p for sw in net.switches.values() for p in sw.ports.values()),
                   key=lambda p: p.name)

    def sample(_):
        now = net.sim.now
        for p in ports:
            occ = p.occupancy()
            row = {"time_ns": now, "port": p.name, "occupancy": sum(occ), "drops": sum(p.drops)}
            for i, n in enumerate(occ):
                row[f"q{i}"] = n
            rows.append(row)
        nxt = now + interval
        if nxt <= horizon:
            net.sim.schedule(nxt, sample, None, "sample", "queues")

    net.sim.schedule(0, sample, None, "sample", "queues")


def run(cfg: ScenarioConfig, keep_network=False, trace=False, sample=True) -> RunResult:
    """Build, simulate to the horizon and summarise one scenario."""
    cfg.validate()
    sim = Simulator(trace=trace)
    collector = StatsCollector()
    spec = cfg.topology.to_spec()
    shaper = cfg.shaping.port_shaper()

    def shaper_for(switch, neighbour, rate):
        return replace(shaper, cbs=dict(shaper.cbs))

    net = build_network(spec, sim, shaper_for, cfg.queue_capacity, collector)
    stop_at = max(0, cfg.horizon - cfg.drain)
    gens, ctrls = install_traffic(net, _traffic_specs(cfg), cfg.traffic.controllers,
                                  cfg.traffic.reports, cfg.seed, stop_at,
                                  cfg.traffic.randomize_phase)
    _install_tas(cfg, net, gens)
    series = []
    if sample and cfg.metrics.sample_interval > 0:
        _sample_queues(net, series, cfg.metrics.sample_interval, cfg.horizon)
    log.info("running %s to %d ns", cfg.name, cfg.horizon)
    sim.run_until(cfg.horizon)
    collector.set_in_flight(net.in_flight())
    for app in REQUIREMENT_APPS:
        collector.get(app)
    order = list(App)
    apps = sorted(collector.apps.values(), key=lambda s: order.index(s.app))
    matrix = requirements_matrix(collector.apps, cfg.requirements, cfg.metrics.delay_rule)
    ports = sorted(net.ports, key=lambda p: p.name)
    report = {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "horizon_ns": cfg.horizon,
        "events": sim.executed,
        "apps": [s.summary() for s in apps],
        "requirements": {a.value: v for a, v in matrix.items()},
        "ports": [{"port": p.name, "rate_bps": p.rate_bps, "frames_sent": p.frames_sent,
                   "drops": sum(p.drops), "drops_per_queue": list(p.drops)} for p in ports],
        "controllers": [{"controller": c.spec.controller, "triggers": c.triggers,
                         "reactions": c.reactions} for c in ctrls],
        "queue_series": series,
        "config": cfg.to_dict(),
    }
    result = RunResult(cfg, report, dict(collector.apps))
    if keep_network:
        result.net, result.sim, result.generators, result.controllers = net, sim, gens, ctrls
    return result


def _run_summary(cfg):
    return run(cfg).report


def sweep(preset, parameter, values, overrides=None, jobs=1, config=None):
    """One independent run per value; returns ``[(value, report), ...]`` in input order."""
    if parameter not in SWEEPABLE:
        raise ConfigError(f"{parameter!r} is not sweepable; choose from "
                          f"{', '.join(SWEEPABLE)}", [parameter])
    key = SWEEPABLE[parameter]
    configs = []
    for v in values:
        ov = dict(overrides or {})
        ov[key] = v
        if config is not None:
            d = copy.deepcopy(config.to_dict())
            for k, val in ov.items():
                set_path(d, k, val)
            configs.append(ScenarioConfig.from_dict(d))
        else:
            configs.append(expand_preset(preset, ov))
    if jobs > 1 and len(configs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_summary, configs))
    else:
        reports = [_run_summary(c) for c in configs]
    return list(zip(values, reports))


def app_row(report: dict, app) -> dict:
    name = to_app(app).value
    for row in report["apps"]:
        if row["app"] == name:
            return row
    raise KeyError(name)
