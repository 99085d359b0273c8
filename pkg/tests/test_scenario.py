import json

import pytest
import yaml

from tsnsim.engine import MS, US
from tsnsim.frames import App, ConfigError
from tsnsim.metrics import emit_report
from tsnsim.scenario import (PRESETS, SWEEPABLE, ScenarioConfig, expand_preset, load_config,
                             load_or_expand, parse_override, run, set_path, sweep)
from tsnsim.traffic import ROBOT_CONTROLLER, ROBOTIC_ARM

SHORT = {"horizon": 80 * MS, "drain": 10 * MS}


@pytest.mark.parametrize("preset", PRESETS)
def test_every_preset_validates(preset):
    cfg = expand_preset(preset)
    cfg.validate()
    assert cfg.name == preset


@pytest.mark.parametrize("preset", PRESETS)
def test_serialize_then_parse_is_identity(preset):
    cfg = expand_preset(preset)
    text = cfg.to_yaml()
    again = ScenarioConfig.from_dict(yaml.safe_load(text))
    assert again.to_dict() == cfg.to_dict()
    assert again.to_yaml() == text


def test_expansion_is_pure():
    assert expand_preset("tsn-cbs").to_dict() == expand_preset("tsn-cbs").to_dict()


def test_preset_shapers():
    assert expand_preset("basic").shaping.mode == "fifo"
    sp = expand_preset("tsn-sp").shaping
    assert sp.mode == "priority" and not sp.cbs and sp.tas is None and not sp.express
    assert expand_preset("tsn-cbs").shaping.cbs == {5: 0.5}
    tas = expand_preset("tsn-tas").shaping.tas
    assert tas.entries == [([7], 60 * US), (list(range(7)), 340 * US)]
    assert expand_preset("tsn-fp").shaping.express == [6, 7]
    up = expand_preset("upgrade")
    assert up.shaping.express == [6, 7] and up.topology.peripheral_rate_bps == 10**9
    en = expand_preset("enhanced")
    assert en.shaping.cbs == {5: 0.5} and en.shaping.express == [6, 7]


def test_enhanced_compression_ratio_follows_link_rate():
    assert expand_preset("enhanced").compression.spec.ratio == 22
    fast = expand_preset("enhanced", {"topology.peripheral_rate_bps": "1Gbps"})
    assert fast.compression.spec.ratio == 2
    forced = expand_preset("enhanced", {"topology.peripheral_rate_bps": 10**9,
                                        "compression.ratio": 11})
    assert forced.compression.spec.ratio == 11


def test_cbs_fraction_override_sets_queue_5_only():
    res = run(expand_preset("tsn-cbs", {"shaping.cbs.5": 0.3, "horizon": 0}), keep_network=True)
    for port in res.net.ports:
        if port.owner not in res.net.switches:
            continue
        assert [q for q in range(8) if port.cbs[q] is not None] == [5]
        assert port.cbs[5].idle_slope == round(0.3 * port.rate_bps)
        if port.rate_bps == 100_000_000:
            assert port.cbs[5].idle_slope == 30_000_000


@pytest.mark.parametrize("overrides", [
    {"shaping.mode": "fifo", "shaping.cbs.5": 0.5},
    {"shaping.cbs.5": 1.5},
    {"shaping.tas": {"entries": [[[7], 1000]]}},
    {"topology.hosts.Ghost": {"switch": "Z"}},
    {"queue_capacity": 0},
    {"nonsense.key": 1},
    {"metrics.delay_rule": "median"},
])
def test_contradictory_or_invalid_overrides(overrides):
    with pytest.raises(ConfigError):
        expand_preset("tsn-cbs", overrides)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        expand_preset("turbo")


def test_traffic_must_reference_known_hosts():
    d = expand_preset("tsn-sp").to_dict()
    d["traffic"]["generators"][0]["destinations"] = ["Nowhere"]
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_dict(d)
    assert "Nowhere" in info.value.offenders


def test_overrides_parse_yaml_scalars():
    assert parse_override("shaping.cbs.5=0.3") == ("shaping.cbs.5", 0.3)
    assert parse_override("horizon=2s") == ("horizon", "2s")
    d = {"shaping": {"cbs": {5: 0.5}}}
    set_path(d, "shaping.cbs.5", 0.7)
    assert d == {"shaping": {"cbs": {5: 0.7}}}


def test_config_file_round_trip(tmp_path):
    cfg = expand_preset("enhanced", {"seed": 9})
    path = tmp_path / "enhanced.yaml"
    path.write_text(cfg.to_yaml())
    assert load_config(path).to_dict() == cfg.to_dict()
    edited = load_or_expand(config_path=path, overrides={"horizon": "2s"})
    assert edited.horizon == 2_000_000_000 and edited.seed == 9


def test_human_units_in_config(tmp_path):
    d = expand_preset("tsn-sp").to_dict()
    d["horizon"] = "250ms"
    d["topology"]["peripheral_rate_bps"] = "100Mbps"
    cfg = ScenarioConfig.from_dict(d)
    assert cfg.horizon == 250 * MS and cfg.topology.peripheral_rate_bps == 100_000_000


def test_tas_windows_follow_the_protected_stream():
    res = run(expand_preset("tsn-tas", {"horizon": 0}), keep_network=True)
    net = res.net
    rc_ports = [p for p in net.path_ports(ROBOT_CONTROLLER, ROBOTIC_ARM)
                if p.owner in net.switches]
    gated = [p for p in net.ports if p.gcl is not None]
    assert set(gated) == set(rc_ports)
    gen = next(g for g in res.generators if g.spec.app is App.REMOTE_CONTROL)
    # the first switch port opens its window as the first frame finishes arriving
    first_hop = net.hosts[ROBOT_CONTROLLER].port
    assert rc_ports[0].gcl.base_time == gen.first_tick + \
        (354 * 8 * 10**9 + first_hop.rate_bps - 1) // first_hop.rate_bps


def test_flow_conservation_short_runs():
    for preset in PRESETS:
        res = run(expand_preset(preset, SHORT))
        for a in res.report["apps"]:
            assert a["frames_sent"] == (a["frames_received"] + a["frames_dropped"]
                                        + a["frames_in_flight"]), (preset, a["app"])


def test_sweep_rejects_undeclared_parameter():
    with pytest.raises(ConfigError):
        sweep("tsn-cbs", "seed", [1, 2])


def test_sweep_rows_match_standalone_runs():
    values = [0.2, 0.6]
    results = sweep("tsn-cbs", "cbs_fraction", values, SHORT)
    assert [v for v, _ in results] == values
    for value, report in results:
        alone = run(expand_preset("tsn-cbs", {**SHORT, SWEEPABLE["cbs_fraction"]: value}))
        assert json.dumps(report["apps"], sort_keys=True) == \
            json.dumps(alone.report["apps"], sort_keys=True)


def test_single_value_sweep_equals_run():
    [(v, report)] = sweep("enhanced", "compression_ratio", [22], SHORT)
    assert report["apps"] == run(expand_preset("enhanced", SHORT)).report["apps"]


def test_parallel_sweep_matches_sequential():
    seq = sweep("tsn-sp", "queue_capacity", [10, 100], SHORT)
    par = sweep("tsn-sp", "queue_capacity", [10, 100], SHORT, jobs=2)
    assert [r["apps"] for _, r in seq] == [r["apps"] for _, r in par]
