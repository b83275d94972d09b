import math

import pytest

from isac_lab.config import ConfigError, config_hash, dumps, load_config, loads, shipped_config

BASE = """\
[array]
n_elements = 4

[channels]
users = [{ model = "rayleigh", seed = 1 }, { model = "rician", seed = 2, kappa = 10.0, angle_deg = 30.0 }]
target = { angle_deg = 0.0 }

[power]
budget_dbm = 10.0

[comm]
sinr_threshold_db = 5.0
"""


def test_minimal_config_defaults():
    cfg = loads(BASE)
    sc = cfg.scenario
    assert sc.geometry.num_elements == 4
    assert sc.num_users == 2
    # budget relative to the -94 dBm user noise floor
    assert math.isclose(sc.power_budget, 10 ** 10.4)
    assert math.isclose(sc.user_sinr_threshold, 10 ** 0.5)
    assert sc.channels.noise_power_user == 1.0
    assert cfg.run.seed == 0


def test_hash_is_stable_and_sensitive():
    a, b = loads(BASE), loads(BASE + "\n# comment only\n")
    assert a.config_hash == b.config_hash
    assert len(a.config_hash) == 16
    c = loads(BASE.replace("budget_dbm = 10.0", "budget_dbm = 11.0"))
    assert c.config_hash != a.config_hash
    assert config_hash(a.data) == a.config_hash


def test_dumps_roundtrip():
    cfg = loads(BASE)
    assert loads(dumps(cfg.data)).data == cfg.data


@pytest.mark.parametrize("name", ["fig3_point.cfg", "fig3_interval.cfg", "fig3.cfg", "sweep_power.cfg",
                                  "ci_qpsk.cfg", "infeasible.cfg"])
def test_shipped_configs_load(name):
    cfg = load_config(shipped_config(name))
    assert cfg.scenario.num_users >= 1


def test_interval_config():
    sc = load_config(shipped_config("fig3_interval.cfg")).scenario
    iv = sc.uncertainty.angle_interval
    assert math.isclose(math.degrees(iv.lower), -5.0) and math.isclose(math.degrees(iv.upper), 5.0)
    assert sc.uncertainty.csi.kind == "gaussian" and not sc.uncertainty.csi.enforce


def error_of(text):
    with pytest.raises(ConfigError) as exc:
        loads(text, "test.cfg")
    return str(exc.value)


def test_unknown_key_has_location():
    msg = error_of(BASE.replace("n_elements = 4", "n_elements = 4\nspacing_m = 0.1"))
    assert msg.startswith("test.cfg:3:1:")
    assert "unknown key" in msg


def test_unit_suffix_hint():
    msg = error_of(BASE.replace("budget_dbm = 10.0", 'budget_dbm = "10 dBm"'))
    assert "test.cfg:9:1" in msg
    assert "bare number" in msg


def test_missing_section():
    assert "missing required section [power]" in error_of(BASE.replace("[power]\nbudget_dbm = 10.0\n", ""))


def test_syntax_error_location():
    assert error_of(BASE + "oops = \n").startswith("test.cfg:")


def test_wrong_type():
    assert "expected int" in error_of(BASE.replace("n_elements = 4", "n_elements = 4.5"))


def test_unknown_section():
    assert "unknown section" in error_of(BASE + "\n[extras]\nx = 1\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
