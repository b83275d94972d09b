"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from oracles import grid_min_eve_k1, projected_gradient_min_power, qfunc
from planted import planted_program

from isac_lab.array import (AngleInterval, ArrayGeometry, ChannelSet, angle_grid, beampattern_u,
                            random_user_channel, steering_vector)
from isac_lab.ci import (CiProblem, ci_constraint_rows, di_constraint_rows, noiseless_ser, random_frame,
                         solve_ci_frame, solve_ci_slot)
from isac_lab.cli import main
from isac_lab.config import load_config, shipped_config
from isac_lab.conic import OPTIMAL, solve
from isac_lab.conic.cones import cone_distance
from isac_lab.evaluation import beampattern_export, beamwidth_3db, bpsk_ser, secrecy_rate_sweep
from isac_lab.robust import robust_spec, solve_robust_design
from isac_lab.scenario import BeampatternSpec, CsiErrorModel, Scenario, Uncertainty
from isac_lab.secure import BISECTION_TOL_DB, design, solve_secure_design


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


# 1 ---------------------------------------------------------------------------

def test_criterion_1_planted_conic_programs(report):
    t0 = time.perf_counter()
    worst_obj = worst_kkt = 0.0
    statuses = []
    for kind in ("sdp", "socp"):
        for seed in range(20):
            prog, opt = planted_program(seed, kind)
            sol = solve(prog, tol=1e-9)
            statuses.append(sol.status)
            worst_obj = max(worst_obj, abs(sol.objective - opt) / max(1.0, abs(opt)))
            x, s, z = sol.primal, sol.slack, sol.dual
            kkt = max(sol.primal_residual, sol.dual_residual, sol.gap,
                      cone_distance(s, prog.cones), cone_distance(z, prog.cones, dual=True))
            worst_kkt = max(worst_kkt, kkt)
    elapsed = time.perf_counter() - t0
    ok = worst_obj <= 1e-4 and worst_kkt <= 1e-6 and elapsed <= 60 and all(s == OPTIMAL for s in statuses)
    report(1, ok, f"40 planted programs, worst objective error {worst_obj:.2e}, worst KKT residual "
                  f"{worst_kkt:.2e}, {elapsed:.1f} s")
    assert ok


# 2 ---------------------------------------------------------------------------

def test_criterion_2_brute_force_k1(report):
    geo = ArrayGeometry(4)
    gaps = []
    for seed in range(10):
        h = random_user_channel(geo, 500 + seed)
        angle = 0.3
        a = steering_vector(geo, angle)
        along = abs(np.vdot(a, h)) ** 2 / 4
        gamma = 10.0
        power = gamma / (np.vdot(h, h).real - along + 0.5 * along)
        sc = Scenario(geo, ChannelSet([h], angle, target_gain=1.0), power, gamma,
                      beampattern=BeampatternSpec(0.0, math.inf))
        d = solve_secure_design(sc)
        ref = grid_min_eve_k1(h, a, 1.0, gamma, 1.0, 1.0, power)
        gaps.append(abs(10 * math.log10(d.achieved["eve_sinr"] / ref)))
    ok = max(gaps) <= 0.1
    report(2, ok, f"10 instances, worst |design - grid| {max(gaps):.4f} dB")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_criterion_3_beampattern_conservation(report):
    u = -1 + 2 * np.arange(4096) / 4096
    worst = 0.0
    for n in (4, 8, 16, 32):
        rng = np.random.default_rng(1000 + n)
        for _ in range(50):
            r = int(rng.integers(1, n + 1))
            G = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
            R = G @ G.conj().T
            tr = np.trace(R).real
            worst = max(worst, abs(beampattern_u(R, u).mean() - tr) / tr)
    ok = worst <= 1e-6
    report(3, ok, f"200 matrices, worst relative deviation {worst:.2e}")
    assert ok


# 4 ---------------------------------------------------------------------------

def _pattern(d, sc):
    tb = beampattern_export(d.total_covariance, sc.geometry, angle_grid(0.05))
    return beamwidth_3db(tb["angle_deg"], tb["power_linear"]), d.achieved["peak_gain"] / sc.power_budget


def test_criterion_4_figure_behaviors(report):
    point = load_config(shipped_config("fig3_point.cfg")).scenario
    interval = load_config(shipped_config("fig3_interval.cfg")).scenario
    dp = design(point, robust_spec(point))
    di, _ = solve_robust_design(interval, audit_draws=0)
    bw_p, peak_p = _pattern(dp, point)
    bw_i, peak_i = _pattern(di, interval)
    ok_a = bw_i > bw_p and peak_i < peak_p

    cfg = load_config(shipped_config("sweep_power.cfg"))
    t0 = time.perf_counter()
    with _quiet():
        res = secrecy_rate_sweep(cfg.scenario, cfg.run.sweep_power_dbm, cfg.noise_floor_dbm,
                                 candidates=cfg.run.candidates, seed=cfg.run.seed)
    elapsed = time.perf_counter() - t0
    sec, base = res.metrics["secrecy_rate"], res.metrics["baseline_secrecy_rate"]
    ok_b = all(s > b for s, b in zip(sec, base)) and res.values[-1] == 20.0 and sec[-1] > 0
    ok = ok_a and ok_b and elapsed <= 600
    pairs = ", ".join(f"{p:g}:{s:.3f}/{b:.3f}" for p, s, b in zip(res.values, sec, base))
    report(4, ok, f"(a) beamwidth interval {bw_i:.2f} deg vs point {bw_p:.2f} deg, peak {peak_i:.3f}P vs "
                  f"{peak_p:.3f}P; (b) dBm:secure/baseline {pairs}; sweep {elapsed:.0f} s")
    assert ok


class _quiet:
    def __enter__(self):
        import warnings
        self._cm = warnings.catch_warnings()
        self._cm.__enter__()
        warnings.simplefilter("ignore")

    def __exit__(self, *exc):
        return self._cm.__exit__(*exc)


# 5 ---------------------------------------------------------------------------

def _robust_scenario(csi):
    geo = ArrayGeometry(4)
    iv = AngleInterval(math.radians(-5), math.radians(5))
    H = [random_user_channel(geo, 100 + k) for k in range(2)]
    return Scenario(geo, ChannelSet(H, iv, target_gain=1.0), 100.0, 10.0, beampattern=BeampatternSpec(0.5, 0.2),
                    uncertainty=Uncertainty(iv, csi=csi))


def test_criterion_5_robust_audits(report):
    _, rb = solve_robust_design(_robust_scenario(CsiErrorModel("bounded", radius=0.2)), audit_draws=1000)
    _, rg = solve_robust_design(_robust_scenario(CsiErrorModel("gaussian", variance=0.005, outage=0.05)),
                                audit_draws=10000)
    ok = rb.audit["draws"] == 1000 and rb.audit["violations"] == 0 and rg.audit["draws"] == 10000 \
        and rg.audit["outage"] <= 0.05
    report(5, ok, f"bounded: {rb.audit['violations']} violations in 1000 sphere draws; gaussian: outage "
                  f"{rg.audit['outage']:.4f} over 10000 draws")
    assert ok


# 6 ---------------------------------------------------------------------------

def test_criterion_6_ci_di_geometry(report):
    cfg = load_config(shipped_config("ci_qpsk.cfg"))
    pr = CiProblem.from_scenario(cfg.scenario)
    frame = random_frame(cfg.scenario.num_users, 10000, 4, seed=cfg.run.seed)
    slots = solve_ci_frame(pr, frame)
    ser = noiseless_ser(pr, frame, slots)
    feasible = sum(s.feasible for s in slots)

    # oracle on the first 50 distinct symbol tuples
    seen, errs = set(), []
    pts_all = pr.constellation.points
    for t in range(frame.num_slots):
        key = tuple(frame.symbols[:, t])
        if key in seen or not slots[t].feasible:
            continue
        seen.add(key)
        pts = pts_all[list(key)]
        rows, rhs = [], []
        for k, h in enumerate(pr.user_channels):
            G, b = ci_constraint_rows(h, pts[k], pr.snr_targets[k], pr.noise, 4)
            rows.append(G)
            rhs.append(b)
        G, b = di_constraint_rows(pr.eve_channel, pts[pr.designated], pr.di_margin)
        x = projected_gradient_min_power(np.vstack(rows + [G]), np.concatenate(rhs + [b]))
        errs.append(abs(slots[t].power - x @ x) / (x @ x))
        if len(errs) == 50:
            break
    ok = (feasible > 0 and all(v == 0.0 for v in ser["ser_lu"]) and ser["ser_eve"] == 1.0 and pr.di_margin > 0
          and len(errs) == 50 and max(errs) <= 1e-3)
    report(6, ok, f"{feasible}/10000 feasible slots, user SER {ser['ser_lu']}, eavesdropper SER {ser['ser_eve']}, "
                  f"worst oracle gap {max(errs):.2e} on {len(errs)} slots")
    assert ok


# 7 ---------------------------------------------------------------------------

def test_criterion_7_bpsk_pipeline(report):
    snrs = [0.0, 4.0, 8.0]
    res = bpsk_ser(snrs, trials=100000, seed=0)
    details, ok = [], True
    for j, s in enumerate(snrs):
        p = qfunc(math.sqrt(2 * 10 ** (s / 10)))
        est = res["ser"][0][j]
        lo, hi = res["intervals"][0][j]
        # three interval half-widths on either side of the estimate
        inside = est - 3 * (est - lo) <= p <= est + 3 * (hi - est)
        ok &= inside
        details.append(f"{s:g} dB: {est:.5f} vs {p:.5f}")
    report(7, ok, "; ".join(details))
    assert ok


# 8 ---------------------------------------------------------------------------

def _mono_scenario(seed, power, interval=None):
    geo = ArrayGeometry(4)
    H = [random_user_channel(geo, 300 + 2 * seed + k) for k in range(2)]
    target = interval if interval is not None else 0.0
    unc = Uncertainty(interval) if interval is not None else None
    return Scenario(geo, ChannelSet(H, target, target_gain=1.0), power, 10.0,
                    beampattern=BeampatternSpec(0.0 if interval is None else 0.5, math.inf), uncertainty=unc)


def test_criterion_8_monotonicity(report):
    slack = 10 ** (2 * BISECTION_TOL_DB / 10)
    bad = []
    for seed in range(10):
        ts = [solve_secure_design(_mono_scenario(seed, p)).eve_sinr_bound for p in (100.0, 300.0, 1000.0)]
        if any(b > a * slack for a, b in zip(ts, ts[1:])):
            bad.append(("power", seed, ts))
        # nested angle samples: {-1, 0, 1} degrees lies inside the 11-point grid over [-5, 5]
        narrow = _mono_scenario(seed, 300.0, AngleInterval(math.radians(-1), math.radians(1)))
        wide = _mono_scenario(seed, 300.0, AngleInterval(math.radians(-5), math.radians(5)))
        tn = design(narrow, robust_spec(narrow, 3)).eve_sinr_bound
        tw = design(wide, robust_spec(wide, 11)).eve_sinr_bound
        if tw < tn / slack:
            bad.append(("interval", seed, [tn, tw]))

        geo = ArrayGeometry(6)
        H = [random_user_channel(geo, 700 + 3 * seed + k) for k in range(2)]
        base = Scenario(geo, ChannelSet(H, 0.3, target_gain=1.0), 100.0, 10.0)
        syms = tuple(int(v) for v in np.random.default_rng(seed).integers(0, 4, 2))
        pg = [solve_ci_slot(CiProblem.from_scenario(base, snr_targets=g, di_margin=0.3), syms).power
              for g in (2.0, 5.0, 10.0, 20.0)]
        pz = [solve_ci_slot(CiProblem.from_scenario(base, di_margin=z), syms).power for z in (0.0, 0.5, 1.0, 2.0)]
        for name, seq in (("gamma", pg), ("zeta", pz)):
            if any(b < a * (1 - 2e-6) for a, b in zip(seq, seq[1:])):
                bad.append((name, seed, seq))
    ok = not bad
    report(8, ok, "t* in P, t* in interval width, CI power in gamma and zeta on 10 seeds"
                  + ("" if ok else f"; violations {bad}"))
    assert ok


# 9 ---------------------------------------------------------------------------

DET_CFG = """\
[array]
n_elements = 4

[channels]
users = [{ model = "rayleigh", seed = 100 }, { model = "rayleigh", seed = 101 }]
target = { angle_deg = 0.0 }

[power]
budget_dbm = -74.0

[comm]
sinr_threshold_db = 10.0

[sensing]
cap_fraction = 0.2

[uncertainty]
interval_deg = [-5.0, 5.0]
csi_error = { kind = "bounded", radius = 0.2 }

[run]
seed = 3
candidates = 50
trials = 2000
slots = 300
audit_draws = 100
sweep_power_dbm = [-76.0, -74.0]
"""


def test_criterion_9_determinism(report, tmp_path):
    path = tmp_path / "det.cfg"
    path.write_text(DET_CFG)
    for run in ("a", "b"):
        for cmd in ("robust", "ci", "sweep"):
            with _quiet():
                assert main([cmd, str(path), "--out", str(tmp_path / run / cmd)]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*")
                   if p.suffix in (".csv", ".svg"))
    same = [(tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files]
    ok = len(files) >= 8 and all(same)
    report(9, ok, f"{sum(same)}/{len(files)} CSV/SVG artifacts byte-identical across two runs")
    assert ok
