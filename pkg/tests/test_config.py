import json

import pytest

from bhlab import config as cfgmod
from bhlab.errors import ConfigError


def test_defaults_validate():
    cfg = cfgmod.load_config(environ={})
    assert cfg["grid"]["n_points"] == 2 ** 16
    assert cfgmod.shoot_of(cfg).n_checkpoints == 3
    assert cfgmod.evolve_of(cfg).frame_every == 4


def test_ini_file_and_precedence(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[grid]\nn_points = 4096  # small\n[evolve]\nstop_slope = 300\n"
                    "[init]\nalpha = 0.01\n")
    env = {"BHLAB_INIT__ALPHA": "0.02", "BHLAB_EVOLVE__DEALIAS": "no"}
    cfg = cfgmod.load_config(path, {"init": {"alpha": "0.03"}}, environ=env)
    assert cfg["grid"]["n_points"] == 4096
    assert cfg["evolve"]["stop_slope"] == 300.0
    assert cfg["evolve"]["dealias"] is False
    assert cfg["init"]["alpha"] == 0.03
    assert cfgmod.load_config(path, environ=env)["init"]["alpha"] == 0.02


def test_json_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"init": {"epsilon": 0.05}, "evolve": {"stop_slope": None}}))
    cfg = cfgmod.load_config(path, environ={})
    assert cfg["init"]["epsilon"] == 0.05 and cfg["evolve"]["stop_slope"] is None


@pytest.mark.parametrize("raw, key", [
    ({"grid": {"n_pts": 10}}, "grid.n_pts"),
    ({"gird": {"n_points": 10}}, "gird"),
])
def test_unknown_keys_named(raw, key):
    with pytest.raises(ConfigError, match=key):
        cfgmod.merge(cfgmod.defaults(), raw)


def test_bad_values():
    with pytest.raises(ConfigError):
        cfgmod.load_config(overrides={"grid": {"n_points": "many"}}, environ={})
    with pytest.raises(ConfigError):
        cfgmod.load_config(overrides={"grid": {"n_points": "1000"}}, environ={})
    with pytest.raises(ConfigError):
        cfgmod.load_config(overrides={"evolve": {"cfl": "0.9"}}, environ={})


def test_assignments():
    assert cfgmod.parse_assignments(["grid.n_points=8192"]) == {"grid": {"n_points": "8192"}}
    with pytest.raises(ConfigError):
        cfgmod.parse_assignments(["n_points=8192"])


def test_family_one_skips_shooting():
    cfg = cfgmod.load_config(overrides={"init": {"family": "1"}}, environ={})
    assert cfgmod.evolve_of(cfg).family == 1


def test_ini_roundtrip(tmp_path):
    cfg = cfgmod.load_config(overrides={"init": {"beta": "-0.01"}}, environ={})
    path = tmp_path / "dump.ini"
    path.write_text(cfgmod.to_ini(cfg))
    assert cfgmod.load_config(path, environ={}) == cfg
