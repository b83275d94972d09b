import dataclasses
import math

import numpy as np
import pytest

from isac_lab.array import ArrayGeometry, ChannelSet, random_user_channel, steering_vector
from isac_lab.scenario import BeampatternSpec, Scenario
from isac_lab.secure import (InfeasibleScenario, nominal_spec, rank1_recovery, solve_baseline_design,
                             solve_secure_design)


def k1_min_eve(h, a, gamma, noise, power):
    """Closed-form minimum of |a^H w|^2 s.t. |h^H w|^2 >= gamma*noise, |w|^2 <= power.

    The optimum lies in span(a, h): split h into its component c along a/|a|
    and the orthogonal remainder of norm d, then solve
    |c| x + d sqrt(power - x^2) = sqrt(gamma*noise) for the smallest x >= 0.
    """
    ua = a / np.linalg.norm(a)
    c = abs(np.vdot(ua, h))
    d = np.linalg.norm(h - np.vdot(ua, h) * ua)
    g = gamma * noise
    if d * d * power >= g:
        return 0.0
    q = c * c + d * d
    x = (math.sqrt(g) * c - math.sqrt(max(g * c * c - q * (g - d * d * power), 0.0))) / q
    return x * x * np.vdot(a, a).real


def k1_scenario(seed, n=4, gamma=10.0, angle=0.3, share=0.5):
    geo = ArrayGeometry(n)
    h = random_user_channel(geo, 500 + seed)
    a = steering_vector(geo, angle)
    along = abs(np.vdot(a, h)) ** 2 / n
    perp = np.vdot(h, h).real - along
    power = gamma / (perp + share * along)
    ch = ChannelSet([h], angle, target_gain=1.0)
    return Scenario(geo, ch, power, gamma, beampattern=BeampatternSpec(0.0, math.inf)), h, a


@pytest.mark.parametrize("seed", range(3))
def test_k1_matches_closed_form(seed):
    sc, h, a = k1_scenario(seed)
    d = solve_secure_design(sc)
    ref = k1_min_eve(h, a, sc.user_sinr_threshold, 1.0, sc.power_budget)
    assert ref > 0
    assert abs(10 * math.log10(d.eve_sinr_bound / ref)) <= 0.02
    assert abs(10 * math.log10(d.achieved["eve_sinr"] / ref)) <= 0.05
    assert d.solver["recovery"] == "principal"
    assert min(d.achieved["user_sinrs"]) >= sc.user_sinr_threshold * (1 - 1e-3)
    assert d.achieved["total_power"] <= sc.power_budget * (1 + 1e-6)


def test_user_at_target_leaks_its_own_sinr():
    geo = ArrayGeometry(4)
    a = steering_vector(geo, 0.2)
    sc = Scenario(geo, ChannelSet([a], 0.2, target_gain=1.0), 10.0, 5.0,
                  beampattern=BeampatternSpec(0.0, math.inf))
    d = solve_secure_design(sc)
    # identical channels and noise: the eavesdropper sees exactly the user SINR
    assert abs(10 * math.log10(d.eve_sinr_bound / 5.0)) <= 0.02


def test_zero_target_gain_gives_zero_level():
    sc, _, _ = k1_scenario(0)
    sc = dataclasses.replace(sc, channels=dataclasses.replace(sc.channels, target_gain=0.0))
    d = solve_secure_design(sc)
    assert d.eve_sinr_bound == 0.0
    assert d.achieved["eve_sinr"] == 0.0


def test_zero_power_is_infeasible():
    sc, _, _ = k1_scenario(0)
    with pytest.raises(InfeasibleScenario):
        solve_secure_design(dataclasses.replace(sc, power_budget=0.0))


def test_unreachable_sinr_reports_family():
    sc, _, _ = k1_scenario(0)
    with pytest.raises(InfeasibleScenario) as exc:
        solve_secure_design(dataclasses.replace(sc, user_sinr_threshold=1e9))
    assert exc.value.families == ["sinr"]


def test_sensing_floor_infeasible():
    geo = ArrayGeometry(8)
    h = random_user_channel(geo, 1)
    sc = Scenario(geo, ChannelSet([h], 0.0, target_gain=1.0), 100.0, 1.0,
                  beampattern=BeampatternSpec(1.0, 0.0))
    with pytest.raises(InfeasibleScenario):
        solve_secure_design(sc)


def test_scaling_power_and_noise_together():
    sc, _, _ = k1_scenario(1)
    c = 1e3
    ch = dataclasses.replace(sc.channels, noise_power_user=c, noise_power_eve=c, noise_power_radar=c)
    big = dataclasses.replace(sc, channels=ch, power_budget=sc.power_budget * c)
    d1, d2 = solve_secure_design(sc), solve_secure_design(big)
    assert abs(10 * math.log10(d1.eve_sinr_bound / d2.eve_sinr_bound)) <= 0.02


def test_principal_recovery_of_rank_one():
    sc, h, _ = k1_scenario(0)
    w = h / np.linalg.norm(h) * 2.0
    W, info = rank1_recovery([np.outer(w, w.conj())], sc)
    assert info["method"] == "principal"
    np.testing.assert_allclose(np.abs(W[:, 0]), np.abs(w), atol=1e-10)


def test_no_candidates_flags_rank1_failed():
    sc, h, _ = k1_scenario(0)
    R = np.eye(4, dtype=complex)
    W, info = rank1_recovery([R], sc, candidates=0)
    assert W is None
    assert "rank1-failed" in info["flags"]


@pytest.fixture(scope="module")
def two_user_pair():
    geo = ArrayGeometry(8)
    H = [random_user_channel(geo, 21 + k) for k in range(2)]
    sc = Scenario(geo, ChannelSet(H, 0.0, target_gain=1.0), 100.0, 10.0,
                  beampattern=BeampatternSpec(0.5, 0.2, transition=None))
    return sc, solve_secure_design(sc), solve_baseline_design(sc)


def test_two_user_design_meets_constraints(two_user_pair):
    sc, d, _ = two_user_pair
    a = d.achieved
    assert min(a["user_sinrs"]) >= sc.user_sinr_threshold * (1 - 1e-3)
    assert a["total_power"] <= sc.power_budget * (1 + 1e-6)
    assert d.eve_sinr_bound >= 0
    assert d.beamformers.shape == (8, 2)
    assert len(d.bisection_trace) >= 2


def test_secure_beats_baseline(two_user_pair):
    _, d, b = two_user_pair
    assert d.achieved["eve_sinr"] <= b.achieved["eve_sinr"] * (1 + 1e-3)
    assert d.achieved["secrecy_rate"] >= b.achieved["secrecy_rate"] - 1e-6


def test_nominal_spec_protects_all_streams(two_user_pair):
    sc, _, _ = two_user_pair
    spec = nominal_spec(sc)
    assert list(spec.protect) == [0, 1]
    assert len(spec.eve_angles) == 1
