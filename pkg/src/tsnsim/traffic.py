"""Application traffic: periodic generators, condition-triggered controllers, reports."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .engine import MS, US, make_rng
from .frames import App, ConfigError, MAX_FRAME, MIN_FRAME, app_pcp, to_app

# default node names
AR_SENDER = "AR_Sender"
AR_RECEIVER = "AR_Receiver"
ROBOT_CONTROLLER = "robotcontroller"
ROBOTIC_ARM = "RoboticArm"
VEHICLES = ("Vehicle1", "Vehicle2")
VEHICLES_CONTROL = "Vehicles_control"
SENSORS = tuple(f"CS{i:02d}" for i in range(1, 21))
ACTUATORS_CONTROL = "Actuators_control"
SAFETY_SENSOR = "SafetySensor"
SAFETY_MONITOR = "SafetyMonitor"
UPDATE_UNIT = "UpdateUnit"
DATA_CENTER = "DataCenter"

APPLICATION_HOSTS = (
    (AR_SENDER, AR_RECEIVER, ROBOT_CONTROLLER, ROBOTIC_ARM) + VEHICLES
    + (VEHICLES_CONTROL,) + SENSORS + (ACTUATORS_CONTROL, SAFETY_SENSOR, SAFETY_MONITOR,
                                       DATA_CENTER)
)


@dataclass(frozen=True)
class GeneratorSpec:
    """Constant-rate source. Each entry of ``sources`` is one replica.

    With several ``destinations`` a replica cycles through them in order, skipping itself.
    ``injection_offset`` delays a frame's entry into the network after its creation
    (edge processing).
    """

    app: App
    sources: tuple
    destinations: tuple
    frame_size: int
    interarrival: int
    start_at: int = 0
    stop_at: Optional[int] = None
    injection_offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "app", to_app(self.app))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "destinations", tuple(self.destinations))
        if self.interarrival <= 0:
            raise ConfigError(f"{self.app} generator needs a positive interarrival",
                              [self.app.value])
        if not MIN_FRAME <= self.frame_size <= MAX_FRAME:
            raise ConfigError(f"{self.app} frame size {self.frame_size} B outside "
                              f"[{MIN_FRAME}, {MAX_FRAME}]", [self.app.value])
        if not self.sources or not self.destinations:
            raise ConfigError(f"{self.app} generator needs sources and destinations",
                              [self.app.value])
        if self.injection_offset < 0 or self.start_at < 0:
            raise ConfigError(f"{self.app} generator has negative timing", [self.app.value])

    @property
    def replicas(self):
        return len(self.sources)

    def offered_bps(self):
        """Aggregate offered load of all replicas."""
        return self.replicas * self.frame_size * 8 * 1_000_000_000 / self.interarrival


@dataclass(frozen=True)
class ConditionControllerSpec:
    """A node that may answer a delivered trigger frame with a control frame to its sender."""

    controller: str
    trigger_app: App
    probability: float
    reply_app: App
    frame_size: int = 354

    def __post_init__(self):
        object.__setattr__(self, "trigger_app", to_app(self.trigger_app))
        object.__setattr__(self, "reply_app", to_app(self.reply_app))
        if not 0 <= self.probability <= 1:
            raise ConfigError(f"reaction probability {self.probability} outside [0, 1]",
                              [self.controller])


@dataclass(frozen=True)
class ReportSpec:
    src: str
    dst: str
    frame_size: int = 500
    period: int = 100 * MS
    app: App = App.DATACENTER_REPORT

    def __post_init__(self):
        object.__setattr__(self, "app", to_app(self.app))
        if self.period <= 0:
            raise ConfigError("report period must be positive", [self.src])


def default_traffic_table():
    """Generators of the smart-factory model (the update unit's traffic is a modelling choice)."""
    update_targets = tuple(h for h in APPLICATION_HOSTS)
    return [
        GeneratorSpec(App.AR, (AR_SENDER,), (AR_RECEIVER,), 1500, 12 * US),
        GeneratorSpec(App.AR, (AR_RECEIVER,), (AR_SENDER,), 1500, 40 * MS),
        GeneratorSpec(App.CONDITION_MONITORING, SENSORS, (ACTUATORS_CONTROL,), 500, 100 * MS),
        GeneratorSpec(App.SAFETY, (SAFETY_SENSOR,), (SAFETY_MONITOR,), 500, 100 * MS),
        GeneratorSpec(App.AGV, VEHICLES, (VEHICLES_CONTROL,), 1500, 500 * US),
        GeneratorSpec(App.REMOTE_CONTROL, (ROBOT_CONTROLLER,), (ROBOTIC_ARM,), 354, 400 * US),
        GeneratorSpec(App.UPDATE, (UPDATE_UNIT,), update_targets, 1500, 10 * MS),
    ]


def default_controllers(p_defect=0.05, p_reroute=0.05):
    return [
        ConditionControllerSpec(ACTUATORS_CONTROL, App.CONDITION_MONITORING, p_defect,
                                App.CONTROL_ACTUATORS),
        ConditionControllerSpec(VEHICLES_CONTROL, App.AGV, p_reroute, App.CONTROL_VEHICLES),
    ]


def default_reports():
    return [ReportSpec(ACTUATORS_CONTROL, DATA_CENTER)]


class Generator:
    """Event-loop entity driving one replica of a :class:`GeneratorSpec`."""

    def __init__(self, net, spec: GeneratorSpec, source, phase=0, stop_at=None):
        self.net = net
        self.spec = spec
        self.source = source
        self.phase = phase
        self.pcp = app_pcp(spec.app)
        self.stop_at = spec.stop_at if spec.stop_at is not None else stop_at
        dests = [d for d in spec.destinations if d != source]
        if not dests:
            raise ConfigError(f"{spec.app} replica {source} has no destination", [source])
        self.destinations = dests
        self.emitted = 0
        self.first_tick = spec.start_at + phase + spec.injection_offset

    def start(self):
        if self.stop_at is None or self.first_tick - self.spec.injection_offset < self.stop_at:
            self.net.sim.schedule(self.first_tick, self.tick, None, "generator-tick", self.source)

    def tick(self, _=None):
        now = self.net.sim.now
        spec = self.spec
        created = now - spec.injection_offset
        dst = self.destinations[self.emitted % len(self.destinations)]
        frame = self.net.new_frame(spec.app, self.source, dst, spec.frame_size, created, self.pcp)
        self.emitted += 1
        self.net.emit(self.source, frame, now)
        nxt = now + spec.interarrival
        if self.stop_at is None or nxt - spec.injection_offset < self.stop_at:
            self.net.sim.schedule(nxt, self.tick, None, "generator-tick", self.source)


def generator_tick(gen: Generator):
    """Emit one frame from ``gen`` now and schedule its next tick."""
    gen.tick()


class ConditionController:
    def __init__(self, net, spec: ConditionControllerSpec, rng):
        self.net = net
        self.spec = spec
        self.rng = rng
        self.triggers = 0
        self.reactions = 0
        self.pcp = app_pcp(spec.reply_app)

    def __call__(self, host, frame, now):
        if frame.app is not self.spec.trigger_app:
            return
        reply = controller_react(self, frame, now)
        if reply is not None:
            self.net.emit(self.spec.controller, reply, now)


def controller_react(ctrl: ConditionController, trigger, now):
    """With the controller's probability, build a control frame answering ``trigger``."""
    ctrl.triggers += 1
    spec = ctrl.spec
    if spec.probability <= 0 or ctrl.rng.random() >= spec.probability:
        return None
    ctrl.reactions += 1
    frame = ctrl.net.new_frame(spec.reply_app, spec.controller, trigger.src, spec.frame_size,
                               now, ctrl.pcp)
    frame.trigger_id = trigger.frame_id
    return frame


def report_generator_spec(report: ReportSpec, start_at=0) -> GeneratorSpec:
    return GeneratorSpec(report.app, (report.src,), (report.dst,), report.frame_size,
                         report.period, start_at=start_at)


def install_traffic(net, generators, controllers=(), reports=(), seed=0, stop_at=None,
                    randomize_phase=True):
    """Attach generators, controllers and report sources to ``net`` and start them.

    Phases are drawn once per replica in ``[0, interarrival)`` from a stream keyed by the
    replica's identity. Returns ``(generators, controllers)``.
    """
    gens = []
    for spec in generators:
        for src in spec.sources:
            if src not in net.hosts:
                raise ConfigError(f"{spec.app} source {src} is not a host", [src])
            missing = [d for d in spec.destinations if d not in net.hosts]
            if missing:
                raise ConfigError(f"{spec.app} destinations are not hosts", missing)
            phase = 0
            if randomize_phase:
                phase = make_rng(seed, "phase", spec.app.value, src).randrange(spec.interarrival)
            gens.append(Generator(net, spec, src, phase, stop_at))
    for report in reports:
        if report.src not in net.hosts or report.dst not in net.hosts:
            # e.g. a topology without a data center: reporting is simply off
            continue
        spec = report_generator_spec(report)
        phase = 0
        if randomize_phase:
            phase = make_rng(seed, "phase", spec.app.value, report.src).randrange(spec.interarrival)
        gens.append(Generator(net, spec, report.src, phase, stop_at))
    ctrls = []
    for cspec in controllers:
        host = net.hosts.get(cspec.controller)
        if host is None:
            raise ConfigError(f"controller {cspec.controller} is not a host", [cspec.controller])
        ctrl = ConditionController(net, cspec, make_rng(seed, "controller", cspec.controller))
        host.listeners.append(ctrl)
        ctrls.append(ctrl)
    for g in gens:
        g.start()
    return gens, ctrls


def with_stop(spec: GeneratorSpec, stop_at) -> GeneratorSpec:
    return replace(spec, stop_at=stop_at)
