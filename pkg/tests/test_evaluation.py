import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import qfunc

from isac_lab.array import ArrayGeometry, ChannelSet, ValidationError, random_user_channel, steering_vector
from isac_lab.ci import PskConstellation
from isac_lab.evaluation import (ExperimentResult, beampattern_csv, beampattern_export, beamwidth_3db, bpsk_ser,
                                 dbm_to_linear, monte_carlo_ser, secrecy_rate_sweep, wilson_interval)
from isac_lab.scenario import BeampatternSpec, Scenario


def test_wilson_examples():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0.03 < hi < 0.04
    lo, hi = wilson_interval(50, 100)
    assert math.isclose(lo + hi, 1.0, rel_tol=1e-12)
    with pytest.raises(ValidationError):
        wilson_interval(0, 0)


@given(st.integers(1, 10 ** 6), st.data())
def test_wilson_contains_estimate(n, data):
    e = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(e, n)
    assert 0 <= lo <= e / n <= hi <= 1


def test_bpsk_ser_close_to_theory():
    res = bpsk_ser([0.0, 4.0], trials=20000, seed=5)
    for j, s in enumerate([0.0, 4.0]):
        p = qfunc(math.sqrt(2 * 10 ** (s / 10)))
        lo, hi = res["intervals"][0][j]
        width = hi - lo
        assert lo - width <= p <= hi + width


def test_monte_carlo_is_chunk_independent():
    const = PskConstellation(4)
    clean = const.points[[0, 1, 2, 3, 0]] * 2
    truth = np.array([0, 1, 2, 3, 0])
    a = monte_carlo_ser(clean[None], truth[None], const, [1.0], 5000, seed=3)
    b = monte_carlo_ser(clean[None], truth[None], const, [1.0], 5000, seed=3)
    np.testing.assert_array_equal(a["errors"], b["errors"])
    c = monte_carlo_ser(clean[None], truth[None], const, [1.0], 5000, seed=4)
    assert not np.array_equal(a["errors"], c["errors"]) or a["errors"].sum() == 0


def test_noiseless_limit_has_no_errors():
    const = PskConstellation(8)
    truth = np.arange(8)
    res = monte_carlo_ser(const.points[None] * 100, truth[None], const, [1e-6], 1000)
    assert res["errors"][0, 0] == 0


def test_monte_carlo_validates_shapes():
    const = PskConstellation(2)
    with pytest.raises(ValidationError):
        monte_carlo_ser(np.ones((1, 3)), np.zeros((1, 2), int), const, [1.0], 10)


def test_dbm_conversion():
    assert dbm_to_linear(-94.0, -94.0) == 1.0
    assert math.isclose(dbm_to_linear(20.0, -94.0), 10 ** 11.4)


def test_experiment_csv_format():
    r = ExperimentResult("power_dbm", [10.0, 12.0], {"rate": [1.0, 2.5], "flags": ["", "x"]}, 3, "abc",
                         wall_time=[1.2, 3.4])
    text = r.to_csv()
    assert text.splitlines() == ["# config_hash=abc, seed=3", "power_dbm,rate,flags", "10,1,", "12,2.5,x"]


def test_beampattern_export_and_width():
    geo = ArrayGeometry(8)
    a = steering_vector(geo, 0.0)
    grid = np.deg2rad(np.arange(-90, 90.01, 0.05))
    table = beampattern_export(np.outer(a, a.conj()), geo, grid)
    assert table["power_db"].max() == 0.0
    # uniform array half-power width is about 0.886 * 2/N radians around broadside
    bw = beamwidth_3db(table["angle_deg"], table["power_linear"])
    assert abs(bw - math.degrees(2 * math.asin(0.443 * 2 / 8))) < 0.2
    text = beampattern_csv(table, "h", 0)
    assert text.startswith("# config_hash=h, seed=0\nangle_deg,power_db,power_linear\n")


def test_beamwidth_interpolates():
    ang = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    p = np.array([0.0, 0.5, 1.0, 0.5, 0.0])
    half = 10 ** -0.3
    edge = (1 - half) / 0.5
    assert math.isclose(beamwidth_3db(ang, p), 2 * edge, rel_tol=1e-12)


def test_sweep_on_small_scenario():
    geo = ArrayGeometry(4)
    H = [random_user_channel(geo, 40 + k) for k in range(2)]
    sc = Scenario(geo, ChannelSet(H, 0.0, target_gain=1.0), 1.0, 10.0, beampattern=BeampatternSpec(0.5, 0.3))
    res = secrecy_rate_sweep(sc, [-80.0, 10.0, 15.0], noise_floor_dbm=-0.0, config_hash="x")
    m = res.metrics
    assert res.values == [-80.0, 10.0, 15.0]
    assert m["solver_status"][0] == "infeasible" and m["secrecy_rate"][0] == 0.0
    for s, b in zip(m["secrecy_rate"][1:], m["baseline_secrecy_rate"][1:]):
        assert s >= b - 1e-6
    assert "wall" not in res.to_csv()
    with pytest.raises(ValidationError):
        secrecy_rate_sweep(sc, [15.0, 10.0])
