"""Secrecy-constrained joint radar-communication beamforming.

The eavesdropping SINR of the sensed target is minimized over stream
covariances subject to per-user SINR, power and beampattern constraints.
At a fixed level ``t`` every constraint is linear in the covariances, so
the quasi-convex minimization is a bisection over semidefinite feasibility
problems. Beamformers are then extracted from the relaxed covariances.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .array import ValidationError, beampattern, desired_beampattern, mainlobe_mask
from .conic import OPTIMAL, BracketError, bisect_feasibility, solve
from .formulation import DesignSpec, Formulation, eve_angle_set, sidelobe_mask
from .metrics import eve_sinr, scnr, secrecy_rate, user_sinr, user_sinr_cov

log = logging.getLogger(__name__)

INNER_TOL = 1e-6
FINAL_TOL = 1e-7
ENGINE = "ipm"
CAP_RELAX_STEPS = (0.0, 1e-3, 1e-2, 3e-2, 1e-1)
REFINE_TOP = 8
SDP_WARN = 1e-4
BISECTION_TOL_DB = 0.008
FEASIBILITY_TOL = 1e-6
SINR_SLACK = 1e-3
EVE_SLACK = 1e-3


class InfeasibleScenario(Exception):
    """The scenario admits no design; ``families`` names the binding constraints."""

    def __init__(self, families, detail=None):
        self.families = list(families)
        self.detail = detail or {}
        super().__init__("infeasible scenario; binding constraint families: " + ", ".join(self.families))


@dataclass
class BeamformerDesign:
    covariances: list
    beamformers: np.ndarray | None
    eve_sinr_bound: float
    achieved: dict
    flags: list = field(default_factory=list)
    bisection_trace: list = field(default_factory=list)
    solver: dict = field(default_factory=dict)
    sdr_gap: float = 0.0

    @property
    def total_covariance(self) -> np.ndarray:
        if self.beamformers is not None:
            return self.beamformers @ self.beamformers.conj().T
        return sum(self.covariances)


def nominal_spec(scenario) -> DesignSpec:
    """Perfect angle and channel knowledge: caps and floor at the nominal angle."""
    angle = scenario.channels.nominal_target_angle
    return DesignSpec(eve_angles=np.array([angle]), mainlobe=angle, csi_radii=None,
                      protect=scenario.protected_streams)


# -- public builders -------------------------------------------------------

def build_feasibility_sdp(scenario, t):
    """Relaxed feasibility program at eavesdropping level ``t``.

    Returns ``(program, formulation, layout)``.
    """
    if t is not None and t < 0:
        raise ValidationError("eavesdropping level must be nonnegative")
    form = Formulation(scenario, nominal_spec(scenario))
    prog, layout = form.build(t=t)
    return prog, form, layout


# -- feasibility helpers ---------------------------------------------------

def check_feasible(form, t=None, tol=INNER_TOL):
    """Elastic check; returns ``(feasible, slack_by_family, solution)``."""
    prog, layout = form.build(t=t, elastic=True)
    sol = solve(prog, tol=tol, max_iter=200, method=ENGINE)
    slack = dict(zip(layout.families, np.maximum(sol.primal[layout.slack], 0.0)))
    feasible = all(v <= 10 * FEASIBILITY_TOL for v in slack.values())
    return feasible, slack, sol


class _Oracle:
    """Phase-one feasibility test of the eavesdropping cap at level ``t``."""

    def __init__(self, form, tol=INNER_TOL):
        self.form = form
        self.tol = tol
        self.calls = []

    def __call__(self, t):
        prog, layout = self.form.build(t=t, objective="phase1")
        sol = solve(prog, tol=self.tol, max_iter=200, method=ENGINE)
        if sol.status in ("infeasible", "unbounded"):
            ok, tau = False, math.inf
        else:
            tau = float(sol.primal[layout.tau][0])
            ok = tau <= FEASIBILITY_TOL
        self.calls.append({"t": float(t), "tau": tau, "feasible": ok, "iterations": sol.iterations})
        return ok


def _max_eve(covs_or_W, scenario, spec):
    """Worst eavesdropping SINR over protected streams and sampled angles."""
    worst = 0.0
    per_stream = {}
    for k in spec.protect:
        vals = [eve_sinr(covs_or_W, k, scenario.eve_channel(a), scenario.channels.noise_power_eve)
                for a in spec.eve_angles]
        per_stream[k] = vals
        worst = max(worst, max(vals))
    return worst, per_stream


def minimize_eve_level(form, scenario, spec, upper_hint=None, lower_hint=None):
    """Bisection (in dB) for the smallest feasible eavesdropping level.

    The level ``|alpha|^2 P N / sigma_E^2`` is always reachable when the
    other constraints are, so it bounds the bracket from above; a feasible
    ``upper_hint`` tightens it. Returns ``(t_mid, t_low, t_high, oracle)``
    where ``t_high`` is the smallest level certified feasible.
    """
    oracle = _Oracle(form)
    ch = scenario.channels
    t_max = scenario.power_budget * scenario.geometry.num_elements * abs(ch.target_gain) ** 2 / ch.noise_power_eve
    to_db = lambda t: 10 * math.log10(t)
    from_db = lambda u: 10 ** (u / 10)
    hi = t_max
    if upper_hint is not None and 0 < upper_hint < t_max and oracle(upper_hint):
        hi = upper_hint
    elif not oracle(t_max):
        raise InfeasibleScenario(["eve_cap"], {"t": t_max})
    if lower_hint is not None and 0 < lower_hint < hi:
        if oracle(lower_hint):
            return lower_hint, lower_hint, lower_hint, oracle
        u_lo = to_db(lower_hint)
    else:
        if oracle(0.0):
            return 0.0, 0.0, 0.0, oracle
        u_lo = to_db(hi) - 40.0
        while oracle(from_db(u_lo)):
            hi = from_db(u_lo)
            u_lo -= 40.0
            if u_lo < to_db(t_max) - 200:
                return 0.0, 0.0, hi, oracle
    res = bisect_feasibility(lambda u: oracle(from_db(u)), u_lo, to_db(hi), BISECTION_TOL_DB,
                             check_upper=False)
    return from_db(res.value), from_db(res.lower), from_db(res.upper), oracle


# -- rank-one recovery -----------------------------------------------------

def _principal(R):
    w, V = np.linalg.eigh(R)
    w = np.clip(w, 0, None)
    ratio = w[-1] / w.sum() if w.sum() > 0 else 1.0
    return np.sqrt(w[-1]) * V[:, -1], ratio


def _unit(v):
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 else v


def refine_powers(scenario, spec, directions, t_cap=None, objective="sensing"):
    """Re-optimize stream powers along fixed unit directions.

    The powers are re-solved with every constraint family and the cap
    ``t_cap``; if only the cap is out of reach for these directions, the
    smallest reachable cap is found by bisection. Returns ``(W, t_used)`` or
    ``(None, None)`` when the directions cannot meet the other constraints.
    """
    directions = [_unit(u) for u in directions]
    form = Formulation(scenario, spec, directions=directions)
    ok, slack, _ = check_feasible(form, t=t_cap, tol=1e-9)
    t_used = t_cap
    if not ok:
        if any(v > 10 * FEASIBILITY_TOL for f, v in slack.items() if f != "eve_cap"):
            return None, None
        # caps only: raise the level until these directions reach it
        try:
            _, _, t_used, _ = minimize_eve_level(form, scenario, spec, lower_hint=t_cap)
        except InfeasibleScenario:
            return None, None
    prog, layout = form.build(t=t_used if form.has_eve else None, objective=objective)
    sol = solve(prog, tol=1e-9, max_iter=200, method=ENGINE)
    if max(sol.primal_residual, sol.dual_residual) > 1e-6:
        return None, None
    p = np.array([max(sol.primal[sl][0], 0.0) for sl in layout.streams]) * form.P
    return np.column_stack([np.sqrt(pk) * u for pk, u in zip(p, directions)]), t_used


def sinr_power_control(scenario, directions):
    """Smallest powers meeting every user SINR with equality along fixed directions.

    Returns the beamformer matrix or ``None`` if no nonnegative solution
    within the power budget exists.
    """
    ch = scenario.channels
    U = np.column_stack([_unit(u) for u in directions])
    Hm = np.array(ch.user_channels)
    gains = np.abs(Hm.conj() @ U) ** 2
    M = -gains.copy()
    np.fill_diagonal(M, np.diag(gains) / scenario.user_sinr_threshold)
    try:
        p = np.linalg.solve(M, np.full(len(directions), ch.noise_power_user))
    except np.linalg.LinAlgError:
        return None
    if np.any(p <= 0) or p.sum() > scenario.power_budget:
        return None
    return U * np.sqrt(p)


def rank1_recovery(covariances, scenario, spec=None, t_cap=None, candidates=200, seed=0,
                   ratio_threshold=0.99, refine_top=REFINE_TOP):
    """Extract one beamformer per stream from relaxed covariances.

    Nearly rank-one covariances (dominant eigenvalue share at least
    ``ratio_threshold``) give their scaled principal eigenvectors. Otherwise
    Gaussian randomization draws ``candidates`` direction sets, rescales
    each by SINR power control, re-optimizes the powers of the
    ``refine_top`` best and keeps the one with the lowest eavesdropping SINR.

    Returns ``(W, info)``; ``W`` is ``None`` with flag ``rank1-failed`` when
    no candidate is feasible.
    """
    spec = spec or nominal_spec(scenario)
    principal = [_principal(R) for R in covariances]
    ratios = [r for _, r in principal]
    info = {"eigen_ratios": ratios, "method": "principal", "flags": [], "candidates_feasible": 0}
    if min(ratios) >= ratio_threshold:
        return np.column_stack([w for w, _ in principal]), info
    info["method"] = "randomization"
    if candidates <= 0:
        info["flags"].append("rank1-failed")
        return None, info
    rng = np.random.default_rng(seed)
    factors = []
    for R in covariances:
        w, V = np.linalg.eigh(R)
        factors.append(V * np.sqrt(np.clip(w, 0, None)))
    n = scenario.geometry.num_elements
    draws = [[_unit(w) for w, _ in principal]]
    for _ in range(candidates - 1):
        dirs = []
        for F in factors:
            z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
            dirs.append(_unit(F @ z))
        draws.append(dirs)
    # screen every draw with SINR power control, refine the most promising
    scored = []
    for i, dirs in enumerate(draws):
        W = sinr_power_control(scenario, dirs)
        if W is not None:
            scored.append((_max_eve(W, scenario, spec)[0] if _has_eve(scenario, spec) else 0.0, i))
    info["candidates_screened"] = len(scored)
    scored.sort()
    best, best_val = None, math.inf
    for _, i in scored[:refine_top]:
        W, _ = refine_powers(scenario, spec, draws[i], t_cap=t_cap)
        if W is None:
            continue
        info["candidates_feasible"] += 1
        val = _max_eve(W, scenario, spec)[0] if _has_eve(scenario, spec) else 0.0
        if val < best_val:
            best, best_val = W, val
    if best is None:
        info["flags"].append("rank1-failed")
    return best, info


def _has_eve(scenario, spec):
    return abs(scenario.channels.target_gain) > 0 and len(spec.eve_angles) > 0 and len(spec.protect) > 0


# -- evaluation ------------------------------------------------------------

def evaluate(scenario, spec, covariances, W=None) -> dict:
    """Achieved metrics of a design (beamformers if given, else covariances)."""
    ch = scenario.channels
    K = scenario.num_users
    if W is not None:
        sinrs = [user_sinr(W, k, ch) for k in range(K)]
        R_total = W @ W.conj().T
        source = W
    else:
        sinrs = [user_sinr_cov(covariances, k, ch) for k in range(K)]
        R_total = sum(covariances)
        source = list(covariances)
    worst_eve, per_stream = _max_eve(source, scenario, spec) if abs(ch.target_gain) > 0 else (0.0, {})
    secrecy = {}
    for k in spec.protect:
        eve_k = max(per_stream[k]) if per_stream else 0.0
        secrecy[k] = secrecy_rate(sinrs[k], eve_k)
    grid = scenario.beampattern.grid
    pattern = beampattern(R_total, grid, scenario.geometry)
    template = desired_beampattern(spec.mainlobe, scenario.geometry, grid)
    peak = pattern.max()
    mse = float(np.mean((pattern / peak - template) ** 2)) if peak > 0 else float("nan")
    ml = mainlobe_mask(spec.mainlobe, scenario.geometry, grid)
    sl = sidelobe_mask(spec.mainlobe, scenario.geometry, grid, scenario.beampattern.transition)
    eve_per_angle = []
    if per_stream:
        eve_per_angle = [max(per_stream[k][i] for k in spec.protect) for i in range(len(spec.eve_angles))]
    return {
        "user_sinrs": [float(s) for s in sinrs],
        "eve_sinr": float(worst_eve),
        "eve_sinr_per_stream": {int(k): float(max(v)) for k, v in per_stream.items()},
        "eve_sinr_per_angle": [float(v) for v in eve_per_angle],
        "eve_sinr_sum": float(sum(eve_per_angle)),
        "secrecy_rate": float(min(secrecy.values())) if secrecy else 0.0,
        "secrecy_rate_per_stream": {int(k): float(v) for k, v in secrecy.items()},
        "sensing_metric": float(scnr(R_total, scenario.geometry, ch.nominal_target_angle,
                                     ch.target_gain, ch.clutter, ch.noise_power_radar)),
        "total_power": float(np.real(np.trace(R_total))),
        "mainlobe_min_gain": float(pattern[ml].min()) if ml.any() else 0.0,
        "sidelobe_max_gain": float(pattern[sl].max()) if sl.any() else 0.0,
        "peak_gain": float(peak),
        "beampattern_mse": mse,
    }


def violations(scenario, achieved, t_cap=None) -> list:
    """Constraint families a recovered design violates beyond tolerance."""
    bad = []
    P = scenario.power_budget
    bp = scenario.beampattern
    if min(achieved["user_sinrs"]) < scenario.user_sinr_threshold * (1 - SINR_SLACK):
        bad.append("sinr")
    if achieved["total_power"] > P * (1 + 1e-6):
        bad.append("power")
    if bp.floor_fraction > 0 and achieved["mainlobe_min_gain"] < bp.floor_fraction * P * (1 - 1e-3):
        bad.append("floor")
    if np.isfinite(bp.sidelobe_cap_fraction) and achieved["sidelobe_max_gain"] > bp.sidelobe_cap_fraction * P * (1 + 1e-3):
        bad.append("ceiling")
    if t_cap is not None and achieved["eve_sinr"] > t_cap * (1 + EVE_SLACK) + 1e-12:
        bad.append("eve_cap")
    return bad


# -- top level -------------------------------------------------------------

def _solve_capped(form, t_cap):
    """Sensing-optimal program at cap ``t_cap``.

    Right at the bisection boundary the feasible set can be too thin for the
    interior-point method; the cap is then relaxed in small steps.
    """
    for step in CAP_RELAX_STEPS:
        t = t_cap * (1 + step)
        prog, layout = form.build(t=t, objective="sensing")
        sol = solve(prog, tol=FINAL_TOL, max_iter=200, method=ENGINE)
        if max(sol.primal_residual, sol.dual_residual) <= SDP_WARN:
            break
    return sol, layout, t


def _infeasible_zero_power():
    return InfeasibleScenario(["power", "sinr"], {"reason": "zero power budget"})


def design(scenario, spec, secure=True, candidates=200, seed=0) -> BeamformerDesign:
    """Full pipeline for a given cap/floor specification.

    ``secure=False`` drops the eavesdropping caps (beampattern-only
    baseline). Raises :class:`InfeasibleScenario` when the constraints other
    than the caps cannot be met.
    """
    if scenario.power_budget <= 0:
        raise _infeasible_zero_power()
    # even an interference-free user cannot beat P |h_k|^2 / sigma^2
    ch = scenario.channels
    best = [scenario.power_budget * np.vdot(h, h).real / ch.noise_power_user for h in ch.user_channels]
    if min(best) < scenario.user_sinr_threshold:
        raise InfeasibleScenario(["sinr"], {"max_single_user_sinr": [float(b) for b in best]})
    form = Formulation(scenario, spec)
    ok, slack, _ = check_feasible(form)
    if not ok:
        binding = [f for f, v in slack.items() if v > 10 * FEASIBILITY_TOL]
        raise InfeasibleScenario(binding, {"slack": {k: float(v) for k, v in slack.items()}})

    trace = []
    t_star = t_cap = cap_flag = None
    base_prog, base_layout = form.build(t=None, objective="sensing")
    base_sol = solve(base_prog, tol=FINAL_TOL, max_iter=200, method=ENGINE)
    base_covs = form.covariances(base_sol.primal, base_layout)
    final_sol, covs = base_sol, base_covs
    if secure and form.has_eve:
        hint, _ = _max_eve(base_covs, scenario, spec)
        t_star, t_lo, t_hi, oracle = minimize_eve_level(form, scenario, spec, upper_hint=hint * 1.01)
        trace = oracle.calls
        final_sol, layout, t_cap = _solve_capped(form, t_hi)
        covs = form.covariances(final_sol.primal, layout)
        if t_cap > t_hi:
            cap_flag = "cap-relaxed"
    elif secure:
        t_star = 0.0

    flags = [cap_flag] if cap_flag else []
    if final_sol.status != OPTIMAL and max(final_sol.primal_residual, final_sol.dual_residual) > SDP_WARN:
        flags.append(f"sdp-{final_sol.status}")
    W, rinfo = rank1_recovery(covs, scenario, spec, t_cap=t_cap, candidates=candidates, seed=seed)
    flags.extend(rinfo["flags"])
    if W is not None:
        achieved = evaluate(scenario, spec, covs, W)
        bad = violations(scenario, achieved, t_cap)
        if bad:
            refined, _ = refine_powers(scenario, spec, [W[:, k] for k in range(W.shape[1])], t_cap=t_cap)
            if refined is not None:
                W = refined
                flags.append("power-refined")
                achieved = evaluate(scenario, spec, covs, W)
        if violations(scenario, achieved, None):
            flags.append("rank1-infeasible")
    else:
        achieved = evaluate(scenario, spec, covs, None)
    sdr_gap = 0.0
    if t_star is not None and t_star > 0:
        sdr_gap = achieved["eve_sinr"] / t_star - 1.0
        if achieved["eve_sinr"] > t_star * (1 + EVE_SLACK):
            flags.append("sdr-gap")
    return BeamformerDesign(
        covariances=covs,
        beamformers=W,
        eve_sinr_bound=float(t_star) if t_star is not None else float("nan"),
        achieved=achieved,
        flags=flags,
        bisection_trace=trace,
        solver={"status": final_sol.status, "primal_residual": final_sol.primal_residual,
                "dual_residual": final_sol.dual_residual, "gap": final_sol.gap,
                "iterations": final_sol.iterations, "t_cap": t_cap,
                "recovery": rinfo["method"], "eigen_ratios": [float(r) for r in rinfo["eigen_ratios"]]},
        sdr_gap=float(sdr_gap),
    )


def solve_secure_design(scenario, candidates=200, seed=0) -> BeamformerDesign:
    """Secure design with perfect knowledge of the target angle and channels."""
    return design(scenario, nominal_spec(scenario), secure=True, candidates=candidates, seed=seed)


def solve_baseline_design(scenario, spec=None, candidates=200, seed=0) -> BeamformerDesign:
    """Same constraints without eavesdropping caps."""
    return design(scenario, spec or nominal_spec(scenario), secure=False, candidates=candidates, seed=seed)
