"""Acceptance criteria 1-9, one printed PASS/FAIL line each.

Full-scenario runs use the presets' defaults (5 s horizon, seed 1) and are cached for
the session, so each preset is simulated once (plus the reruns of criterion 9).
"""

import filecmp
import random
import time

import pytest

from conftest import GBPS, MBPS, star
from tsnsim.compression import mse_for_psnr, processing_delay, psnr
from tsnsim.engine import MS, S, US
from tsnsim.frames import App, serialization_time
from tsnsim.metrics import PASS, REQUIREMENT_APPS, emit_report
from tsnsim.scenario import PRESETS, expand_preset, run
from tsnsim.shaping import (ACCUMULATING, IDLE, TRANSMITTING, CbsState, GateControlList,
                            ShaperConfig, cbs_slopes, cbs_update, tas_can_start)

RC, SAFETY, AR, AGV, CM = (App.REMOTE_CONTROL, App.SAFETY, App.AR, App.AGV,
                           App.CONDITION_MONITORING)

_RUNS = {}
_WALL = {}


def scenario(key, preset, overrides=None):
    if key not in _RUNS:
        t0 = time.perf_counter()
        _RUNS[key] = run(expand_preset(preset, overrides))
        _WALL[key] = time.perf_counter() - t0
    return _RUNS[key]


def app(result, which):
    return result.stats[which]


def rdr(result, which):
    return app(result, which).summary()["rdr_percent"]


def mean_ms(result, which):
    d = app(result, which).mean_delay
    return None if d is None else d / MS


@pytest.fixture
def verdict(capsys):
    def emit(number, title, checks):
        ok = all(c[1] for c in checks)
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {title}")
            for desc, good in checks:
                print(f"    [{'ok' if good else 'XX'}] {desc}")
        failed = [desc for desc, good in checks if not good]
        assert not failed, f"criterion {number}: " + "; ".join(failed)
    return emit


def _fmt(x, digits=3):
    return "none" if x is None or isinstance(x, str) else f"{x:.{digits}f}"


def _is(x, value):
    return isinstance(x, float) and x == value


def _within(x, lo, hi):
    return isinstance(x, (int, float)) and lo <= x <= hi


def test_criterion_1_strict_priority_saturation(verdict):
    r = scenario("tsn-sp", "tsn-sp")
    verdict(1, "SP saturation split (tsn-sp)", [
        (f"RemoteControl RDR {_fmt(rdr(r, RC))}% == 100", _is(rdr(r, RC), 100.0)),
        (f"Safety RDR {_fmt(rdr(r, SAFETY))}% == 100", _is(rdr(r, SAFETY), 100.0)),
        (f"AR RDR {_fmt(rdr(r, AR))}% in [8, 11]", _within(rdr(r, AR), 8, 11)),
        (f"AGV RDR {_fmt(rdr(r, AGV))}% == 0", _is(rdr(r, AGV), 0.0)),
        (f"ConditionMonitoring RDR {_fmt(rdr(r, CM))}% == 0", _is(rdr(r, CM), 0.0)),
    ])


def test_criterion_2_fifo_unreliability(verdict):
    r = scenario("basic", "basic")
    verdict(2, "FIFO unreliability (basic, 7500-frame queues)", [
        (f"AR RDR {_fmt(rdr(r, AR))}% in [5, 11]", _within(rdr(r, AR), 5, 11)),
        (f"RemoteControl RDR {_fmt(rdr(r, RC))}% < 100",
         isinstance(rdr(r, RC), float) and rdr(r, RC) < 100),
        (f"AR mean delay {_fmt(mean_ms(r, AR), 1)} ms in [700, 1100]",
         _within(mean_ms(r, AR), 700, 1100)),
        (f"RemoteControl mean delay {_fmt(mean_ms(r, RC))} ms > 1",
         mean_ms(r, RC) is not None and mean_ms(r, RC) > 1),
    ])


def test_criterion_3_tsn_delay_ordering(verdict):
    runs = {name: scenario(name, name) for name in ("tsn-sp", "tsn-cbs", "tsn-tas", "tsn-fp")}
    tas, fp, sp = (mean_ms(runs[n], RC) for n in ("tsn-tas", "tsn-fp", "tsn-sp"))
    safety = {n: mean_ms(r, SAFETY) for n, r in runs.items()}
    ref = safety["tsn-sp"]
    verdict(3, "TSN delay ordering for remote control; Safety unchanged", [
        (f"RC mean TAS {_fmt(tas, 4)} < FP {_fmt(fp, 4)} < SP {_fmt(sp, 4)} ms",
         None not in (tas, fp, sp) and tas < fp < sp),
        (f"all three <= 1 ms", None not in (tas, fp, sp) and max(tas, fp, sp) <= 1),
        ("Safety mean within 5% across SP/CBS/TAS/FP: "
         + ", ".join(f"{n} {_fmt(v, 4)}" for n, v in safety.items()),
         ref is not None and all(v is not None and abs(v - ref) <= 0.05 * ref
                                 for v in safety.values())),
    ])


def test_criterion_4_cbs_fraction_sweep(verdict):
    fractions = [0.1, 0.3, 0.5, 0.7, 0.9]
    runs = [scenario("tsn-cbs" if f == 0.5 else f"tsn-cbs-{f}", "tsn-cbs",
                     {"shaping.cbs.5": f}) for f in fractions]
    agv = [mean_ms(r, AGV) for r in runs]
    rc = [mean_ms(r, RC) for r in runs]
    rc_mean = sum(rc) / len(rc)
    verdict(4, "CBS fraction sweep {0.1..0.9}", [
        ("AGV mean delay non-decreasing: " + ", ".join(_fmt(a, 3) for a in agv) + " ms",
         None not in agv and all(a <= b for a, b in zip(agv, agv[1:]))),
        ("RemoteControl delay within 5% of its mean: " + ", ".join(_fmt(x, 4) for x in rc),
         all(abs(x - rc_mean) <= 0.05 * rc_mean for x in rc)),
    ])


def test_criterion_5_upgrade(verdict):
    up = scenario("upgrade", "upgrade")
    fp = scenario("tsn-fp", "tsn-fp")
    up_rc, fp_rc = mean_ms(up, RC), mean_ms(fp, RC)
    verdict(5, "Upgrade to 1 Gbps links", [
        (f"AR RDR {_fmt(rdr(up, AR))}% == 100", _is(rdr(up, AR), 100.0)),
        (f"AGV RDR {_fmt(rdr(up, AGV))}% == 0", _is(rdr(up, AGV), 0.0)),
        (f"ConditionMonitoring RDR {_fmt(rdr(up, CM))}% == 0", _is(rdr(up, CM), 0.0)),
        (f"RC mean {_fmt(up_rc * 1000, 1)} us <= tsn-fp {_fmt(fp_rc * 1000, 1)} us / 3",
         up_rc * 3 <= fp_rc),
        (f"RC mean {_fmt(up_rc * 1000, 1)} us <= 100 us", up_rc <= 0.1),
        (f"AR mean delay {_fmt(mean_ms(up, AR), 3)} ms <= 1", mean_ms(up, AR) <= 1),
    ])


def test_criterion_6_enhanced(verdict):
    en = scenario("enhanced", "enhanced")
    fast = scenario("enhanced-1g", "enhanced", {"topology.peripheral_rate_bps": GBPS})
    offset = processing_delay((1920, 1080), 20)
    ar = app(en, AR)
    matrix = en.report["requirements"]
    checks = [(f"{a.value} RDR {_fmt(rdr(en, a))}% >= 99.9",
               isinstance(rdr(en, a), float) and rdr(en, a) >= 99.9) for a in REQUIREMENT_APPS]
    checks += [
        ("every requirements-matrix cell passes",
         all(v == PASS for cells in matrix.values() for v in cells.values())),
        # AR statistics include the small uncompressed reverse stream (no edge offset)
        (f"AR mean {_fmt(mean_ms(en, AR), 3)} ms = offset {offset / MS:.3f} ms + network "
         f"{_fmt(mean_ms(en, AR) - offset / MS, 3)} ms",
         0 < ar.mean_delay - offset <= 50 * MS - offset
         and sum(d >= offset for d in ar.delays) >= 0.99 * len(ar.delays)),
        (f"AR mean {_fmt(mean_ms(en, AR), 3)} ms <= 50", mean_ms(en, AR) <= 50),
        (f"1 Gbps peripherals use CR {fast.config.compression.spec.ratio:g}",
         fast.config.compression.spec.ratio == 2),
        (f"AR RDR at 1 Gbps with CR 2: {_fmt(rdr(fast, AR))}% == 100",
         _is(rdr(fast, AR), 100.0)),
    ]
    verdict(6, "Enhanced scenario (CBS 0.5 + FP + edge compression)", checks)


def _cbs_share(fraction, horizon=10 * S):
    sim, net, stats = star(["cbs", "low", "sink"], host_rates={"cbs": GBPS, "low": GBPS},
                           shaper=ShaperConfig(cbs={5: fraction}), capacity=500)

    def source(host, app_):
        def tick(_):
            net.emit(host, net.new_frame(app_, host, "sink", 1500, sim.now), sim.now)
            if sim.now + 100 * US < horizon:
                sim.schedule(sim.now + 100 * US, tick)
        return tick

    # 120 Mbps offered by each flow: both queues stay backlogged on the 100 Mbps port
    sim.schedule(0, source("cbs", AR))
    sim.schedule(7 * US, source("low", AGV))
    sim.run_until(horizon)
    return stats.get(AR).bytes_received * 8 / (horizon / S)


def test_criterion_7_cbs_bandwidth_law(verdict):
    checks = []
    for f in (0.1, 0.5, 0.9):
        got = _cbs_share(f)
        want = f * 100 * MBPS
        checks.append((f"fraction {f}: CBS throughput {got / 1e6:.3f} Mbps vs "
                       f"{want / 1e6:.1f} Mbps (within 2%)", abs(got - want) <= 0.02 * want))
    verdict(7, "CBS bandwidth-fraction law (two saturated flows, 100 Mbps, 10 s)", checks)


def _timed(fn):
    t0 = time.perf_counter()
    ok = fn()
    return ok, time.perf_counter() - t0


def _credit_oracle():
    rng = random.Random(8)
    phases = [ACCUMULATING, TRANSMITTING, IDLE]
    for _ in range(1000):
        f = rng.uniform(0.01, 0.99)
        rate = rng.choice([100 * MBPS, GBPS])
        idle, send = cbs_slopes(f, rate)
        state = CbsState(idle, send)
        credit, t = 0, 0   # oracle in exact bit*ns/s units
        for _ in range(rng.randint(1, 40)):
            phase, dt = rng.choice(phases), rng.randint(0, 500_000)
            t += dt
            cbs_update(state, t, phase)
            if phase == ACCUMULATING:
                credit += idle * dt
            elif phase == TRANSMITTING:
                credit += send * dt
            else:
                credit = 0 if credit > 0 else min(0, credit + idle * dt)
            if state.scaled_credit != credit:
                return False
    return True


def _gcl_oracle():
    rng = random.Random(9)
    for _ in range(200):
        entries = [(rng.randrange(256), rng.randint(1, 30)) for _ in range(rng.randint(1, 5))]
        base = rng.randint(0, 200)
        gcl = GateControlList(entries, base)
        per_ns = [m for m, d in entries for _ in range(d)]
        cycle = len(per_ns)
        q, dur = rng.randrange(8), rng.randint(1, 40)
        always = all(m >> q & 1 for m, _ in entries)
        for t in range(base, base + 2 * cycle):
            if gcl.gate_state(t) != per_ns[(t - base) % cycle]:
                return False
            fits = always or all(per_ns[(t + k - base) % cycle] >> q & 1 for k in range(dur))
            if tas_can_start(gcl, t, dur, q) != fits:
                return False
    return True


def _storm_oracle():
    rng = random.Random(10)
    for _ in range(20):
        sim, net, stats = star(["P", "E", "D"], shaper=ShaperConfig(express=frozenset({6, 7})),
                               host_rates={"P": GBPS, "E": GBPS})
        port = net.switches["S"].ports["D"]
        port.tx_log = []
        got = []
        net.hosts["D"].listeners.append(lambda h, f, now: got.append(f))
        sizes = [rng.randint(64, 1522) for _ in range(30)]
        for i, size in enumerate(sizes):
            at = i * 13 * US
            sim.schedule(at, lambda _, s=size: net.emit(
                "P", net.new_frame(AGV, "P", "D", s, sim.now), sim.now))
        for _ in range(40):
            at, size = rng.randint(0, 4 * MS), rng.randint(64, 400)
            sim.schedule(at, lambda _, s=size: net.emit(
                "E", net.new_frame(RC, "E", "D", s, sim.now), sim.now))
        sim.run_until(1 * S)
        if len(got) != 70:
            return False
        cut = 0
        for f in got:
            if f.fragments:
                cut += 1
                spans = [(a, b) for a, b, _ in f.fragments]
                if spans[0][0] != 0 or spans[-1][1] != f.size_bytes:
                    return False
                if any(spans[i][1] != spans[i + 1][0] for i in range(len(spans) - 1)):
                    return False
        if any(w < 64 for *_, w in port.tx_log) or cut == 0:
            return False
    return True


def _conservation():
    for res in _RUNS.values():
        for st_ in res.stats.values():
            if st_.unaccounted_frames != 0 or st_.bytes_received > st_.bytes_sent:
                return False
    return bool(_RUNS)


def _serialization():
    return (serialization_time(1500, 100 * MBPS) == 120 * US
            and serialization_time(354, GBPS) == 2832
            and serialization_time(500, 100 * MBPS) == 40 * US)


def _psnr():
    mse = mse_for_psnr(255, 36)
    return abs(mse - 16.33) < 0.01 and abs(psnr(255, 16.33) - 36) < 0.01


def test_criterion_8_unit_oracles(verdict):
    # make sure every preset has run at least once before checking conservation
    for name in PRESETS:
        scenario(name, name)
    checks = []
    for label, fn in [("CBS credit vs piecewise-linear oracle, 1000 random sequences",
                       _credit_oracle),
                      ("TAS gate state / guard band vs brute-force modular oracle",
                       _gcl_oracle),
                      ("preemption storms: byte-exact reassembly, fragments >= 64 B",
                       _storm_oracle),
                      (f"flow conservation in every scenario run ({len(_RUNS)} runs)",
                       _conservation),
                      ("serialization arithmetic (1500B@100M, 354B@1G, 500B@100M)",
                       _serialization),
                      ("PSNR 36 dB <-> mse 16.33", _psnr)]:
        ok, secs = _timed(fn)
        checks.append((f"{label} [{secs:.2f} s]", ok and secs < 5))
    verdict(8, "Unit oracles", checks)


def test_criterion_9_determinism(verdict, tmp_path):
    checks = []
    for name in PRESETS:
        first = scenario(name, name)
        again = run(expand_preset(name))
        a = emit_report(first.report, tmp_path / name / "a")
        b = emit_report(again.report, tmp_path / name / "b")
        same = all(filecmp.cmp(x, y, shallow=False) for x, y in zip(a, b))
        checks.append((f"{name}: {len(a)} report files byte-identical on rerun", same))
    verdict(9, "Determinism with a fixed seed", checks)


def test_run_time_budget(capsys):
    for name in PRESETS:
        scenario(name, name)
    slow = {k: v for k, v in _WALL.items() if v >= 60}
    with capsys.disabled():
        print(f"\nRUN TIME {'PASS' if not slow else 'FAIL'}: full 5 s scenarios under 60 s wall")
        for k, v in sorted(_WALL.items()):
            print(f"    {k:<14} {v:6.1f} s")
    assert not slow
