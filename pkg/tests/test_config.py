import json

import pytest

from skinheal.cli import resolve_config
from dataclasses import replace

from skinheal.config import (InitialSpec, SingleBandSpec, TwoChainSpec, emit_config, emit_json, parse_config, parse_dict)
from skinheal.errors import ConfigError

from oracles import FIG2, FIG4

MINIMAL = """
model:
  type: single_band
  hops: [[-1, [1.0, 0.0]], [1, [0.5, 0.0]]]
"""


def test_bundled_fig2_is_fig2_symbol():
    cfg = resolve_config("fig2.config")
    assert isinstance(cfg.model, SingleBandSpec)
    assert dict(cfg.model.hops) == {l: complex(v) for l, v in FIG2.items()}


def test_bundled_fig4_is_two_chain():
    cfg = resolve_config("fig4.config")
    assert isinstance(cfg.model, TwoChainSpec)
    assert cfg.model == TwoChainSpec(**FIG4)


def test_bundled_set_complete():
    from skinheal.cli import bundled_configs
    assert {"fig2", "fig3a", "fig3b", "fig4", "fig4_gain", "hermitian"} <= set(bundled_configs())


@pytest.mark.parametrize("name, E0", [("fig3a", 0.35j), ("fig3b", -1 + 0.05j)])
def test_fig3_configs_are_fig2_plus_initial_state(name, E0):
    base = resolve_config("fig2")
    cfg = resolve_config(name)
    assert replace(base, initial=InitialSpec("skin_mode", E0), name=name) == cfg


def test_fig4_obstacle_signs():
    a, b = resolve_config("fig4"), resolve_config("fig4_gain")
    assert a.potential[0].value == -10j and b.potential[0].value == 10j


def test_zero_extreme_hop_rejected():
    text = MINIMAL.replace("[1, [0.5, 0.0]]", "[1, [0.5, 0.0]], [2, [0.0, 0.0]]")
    with pytest.raises(ConfigError, match="extreme offsets"):
        parse_config(text)


def test_defaults_are_explicit():
    cfg = parse_config(MINIMAL)
    assert cfg.lattice.N == 300 and cfg.lattice.guard_band == 10
    assert cfg.integrate.dt == 1e-3 and cfg.integrate.boundary == "driven"
    x0, x1, y0, y1 = cfg.scan.box
    assert x0 < -1.5 and x1 > 1.5 and y0 < -0.5 and y1 > 0.5
    assert cfg.initial is None and cfg.potential == ()


@pytest.mark.parametrize("text, path", [
    (MINIMAL + "lattice: {N: 300, size: 4}\n", "config.lattice"),
    (MINIMAL + "extra: 1\n", "config"),
    (MINIMAL + "potential:\n  - {n_min: 1, n_max: 2, t_on: 0, t_off: 1, value: [0, 1], colour: red}\n",
     r"config.potential\[0\]"),
])
def test_unknown_keys_name_their_path(text, path):
    with pytest.raises(ConfigError, match=path):
        parse_config(text)


@pytest.mark.parametrize("snippet, path", [
    ("lattice: {N: 2}", "config.lattice.N"),
    ("lattice: {N: 30, guard_band: 30}", "config.lattice.guard_band"),
    ("integrate: {dt: -1}", "config.integrate.dt"),
    ("integrate: {t_end: 5, snapshot_times: [6]}", "config.integrate.snapshot_times"),
    ("initial: {type: skin_mode}", "config.initial.E0"),
    ("initial: {type: skin_mode, E0: [1, 2, 3]}", "config.initial.E0"),
    ("scan: {box: [1, 0, 0, 1]}", "config.scan.box"),
    ("potential: [{n_min: 0, n_max: 3, t_on: 0, t_off: 1, value: 1}]", r"config.potential\[0\]"),
    ("potential: [{n_min: 1, n_max: 3, t_on: 0, t_off: 1, value: 1, band_mask: [1]}]", "band_mask"),
])
def test_invariant_violations(snippet, path):
    with pytest.raises(ConfigError, match=path):
        parse_config(MINIMAL + snippet + "\n")


def test_bad_model_type():
    with pytest.raises(ConfigError, match="config.model.type"):
        parse_dict({"model": {"type": "ladder"}})


def test_not_yaml():
    with pytest.raises(ConfigError):
        parse_config("model: [unclosed")


@pytest.mark.parametrize("name", ["fig2", "fig3a", "fig3b", "fig4", "fig4_gain", "hermitian"])
def test_round_trip(name):
    cfg = resolve_config(name)
    assert parse_config(emit_config(cfg)) == cfg
    assert parse_config(emit_json(cfg)) == cfg
    assert json.loads(emit_json(cfg)) == cfg.to_dict()


def test_complex_values_written_as_pairs():
    doc = json.loads(emit_json(resolve_config("fig3a")))
    assert doc["initial"]["E0"] == [0.0, 0.35]
    assert doc["potential"][0]["value"] == [0.0, -10.0]


def test_overrides():
    cfg = resolve_config("fig3a").with_overrides(dt=2e-3, t_end=5.0)
    assert cfg.integrate.dt == 2e-3 and cfg.integrate.t_end == 5.0
    assert cfg.evolve_params().t_end == 5.0
    same = resolve_config("fig3a").with_overrides()
    assert same == resolve_config("fig3a")


def test_missing_config_name():
    with pytest.raises(ConfigError, match="bundled"):
        resolve_config("no-such-config")
