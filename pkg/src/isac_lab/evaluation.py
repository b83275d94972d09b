"""Monte-Carlo link evaluation, secrecy-rate sweeps and beampattern exports."""

from __future__ import annotations

import dataclasses
import io
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .array import ArrayGeometry, ValidationError, beampattern
from .ci import PskConstellation, classify_many
from .secure import InfeasibleScenario, solve_baseline_design

WILSON_Z = 1.959963984540054
CHUNK = 4096


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValidationError("trials must be positive")
    p = errors / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == trials else min(1.0, center + half)
    return lo, hi


def _noise(seed, receiver, point, chunk, size):
    rng = np.random.default_rng([seed, receiver, point, chunk])
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)


def monte_carlo_ser(clean, truth, constellation: PskConstellation, noise_powers, trials: int,
                    seed: int = 0) -> dict:
    """Symbol error rates of ML PSK detection under circular Gaussian noise.

    ``clean`` (receivers x slots) holds noiseless received points and
    ``truth`` the transmitted indices; trial ``i`` uses slot ``i mod T``.
    Noise for each block of trials comes from its own stream keyed by
    ``(seed, receiver, noise point, block)``, so results do not depend on
    how the work is split. Returns ``errors``, ``ser`` and Wilson
    ``intervals`` indexed ``[receiver][noise point]``.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    clean = np.atleast_2d(np.asarray(clean, dtype=complex))
    truth = np.atleast_2d(np.asarray(truth, dtype=int))
    if clean.shape != truth.shape:
        raise ValidationError("clean points and truth must have the same shape")
    R, T = clean.shape
    errors = np.zeros((R, len(noise_powers)), dtype=np.int64)
    for r in range(R):
        for j, n0 in enumerate(noise_powers):
            for c, start in enumerate(range(0, trials, CHUNK)):
                idx = np.arange(start, min(start + CHUNK, trials))
                rx = clean[r, idx % T] + math.sqrt(n0) * _noise(seed, r, j, c, len(idx))
                errors[r, j] += int(np.count_nonzero(classify_many(rx, constellation) != truth[r, idx % T]))
    ser = errors / trials
    intervals = [[wilson_interval(int(e), trials) for e in row] for row in errors]
    return {"errors": errors, "trials": trials, "ser": ser, "intervals": intervals}


def bpsk_ser(snr_db, trials: int = 100000, seed: int = 0) -> dict:
    """Single-user BPSK matched-filter baseline at symbol SNRs ``snr_db``."""
    const = PskConstellation(2)
    rng = np.random.default_rng([seed, 0xB95C])
    bits = rng.integers(0, 2, size=trials)
    clean = const.points[bits]
    noise = [10 ** (-s / 10) for s in snr_db]
    out = monte_carlo_ser(clean[None], bits[None], const, noise, trials, seed)
    out["snr_db"] = list(snr_db)
    return out


def ci_frame_ser(problem, frame, slots, snr_db, trials: int, seed: int = 0) -> dict:
    """Noisy SER of a precoded frame for every user and the eavesdropper.

    Only feasible slots are transmitted. The noise power at SNR ``s`` is
    the mean slot power divided by ``10^(s/10)``. Receiver ``K`` is the
    eavesdropper decoding the designated stream.
    """
    keep = [t for t, s in enumerate(slots) if s.feasible]
    if not keep:
        raise ValidationError("no feasible slots to evaluate")
    X = np.column_stack([slots[t].x for t in keep])
    Hm = np.array(problem.user_channels)
    clean = np.vstack([Hm.conj() @ X, problem.eve_channel.conj() @ X])
    sym = frame.symbols[:, keep]
    truth = np.vstack([sym, sym[problem.designated]])
    mean_power = float(np.mean(np.sum(np.abs(X) ** 2, axis=0)))
    noise = [mean_power / 10 ** (s / 10) for s in snr_db]
    out = monte_carlo_ser(clean, truth, problem.constellation, noise, trials, seed)
    out["snr_db"] = list(snr_db)
    return out


# -- sweeps -----------------------------------------------------------------

@dataclass
class ExperimentResult:
    sweep_variable: str
    values: list
    metrics: dict
    seed: int
    config_hash: str
    wall_time: list = field(default_factory=list)

    def to_csv(self) -> str:
        """CSV with a ``# config_hash=..., seed=...`` header comment.

        Wall times are kept out of the table so reruns are byte-identical.
        """
        cols = list(self.metrics)
        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash}, seed={self.seed}\n")
        buf.write(",".join([self.sweep_variable] + cols) + "\n")
        for i, v in enumerate(self.values):
            cells = [_fmt(v)] + [_fmt(self.metrics[c][i]) for c in cols]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_fmt(x) for x in v)
    if v is None:
        return ""
    return f"{float(v):.10g}"


def dbm_to_linear(power_dbm, noise_floor_dbm: float) -> float:
    """Power relative to a unit noise floor."""
    return 10 ** ((power_dbm - noise_floor_dbm) / 10)


def secrecy_rate_sweep(scenario, power_values_dbm, noise_floor_dbm: float = -94.0, design_fn=None,
                       baseline=True, candidates=200, seed: int = 0, config_hash: str = "") -> ExperimentResult:
    """Secure (and baseline) design at each power point.

    ``design_fn(scenario, candidates=, seed=)`` returns a design or a
    ``(design, report)`` pair; it defaults to the robust design, which
    reduces to the nominal secure design without uncertainty. Infeasible
    points record zero secrecy and status ``infeasible``.
    """
    from .robust import solve_robust_design

    values = [float(p) for p in power_values_dbm]
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValidationError("power values must be sorted ascending")
    design_fn = design_fn or solve_robust_design
    keys = ["secrecy_rate", "baseline_secrecy_rate", "eve_sinr", "eve_sinr_bound", "baseline_eve_sinr",
            "min_user_sinr_db", "sensing_metric", "total_power", "ser_lu", "ser_eve", "solver_status", "flags"]
    m = {k: [] for k in keys}
    times = []
    for p_dbm in values:
        sc = dataclasses.replace(scenario, power_budget=dbm_to_linear(p_dbm, noise_floor_dbm))
        t0 = time.perf_counter()
        row = _sweep_point(sc, design_fn, baseline, candidates, seed)
        times.append(time.perf_counter() - t0)
        for k in keys:
            m[k].append(row.get(k, float("nan")))
    sr = m["secrecy_rate"]
    if any(b < a - 1e-6 for a, b in zip(sr, sr[1:])):
        warnings.warn("secrecy rate is not monotone in power (relaxation gaps can cause small dips)")
    return ExperimentResult("power_dbm", values, m, seed, config_hash, times)


def _sweep_point(sc, design_fn, baseline, candidates, seed) -> dict:
    row = {"ser_lu": float("nan"), "ser_eve": float("nan")}
    if sc.power_budget <= 0:
        row.update(secrecy_rate=0.0, baseline_secrecy_rate=0.0, solver_status="infeasible", flags="")
        return row
    try:
        out = design_fn(sc, candidates=candidates, seed=seed)
        d = out[0] if isinstance(out, tuple) else out
    except InfeasibleScenario as exc:
        row.update(secrecy_rate=0.0, baseline_secrecy_rate=0.0, solver_status="infeasible",
                   flags="infeasible:" + "+".join(exc.families))
        return row
    a = d.achieved
    row.update(secrecy_rate=a["secrecy_rate"], eve_sinr=a["eve_sinr"], eve_sinr_bound=d.eve_sinr_bound,
               min_user_sinr_db=10 * math.log10(max(min(a["user_sinrs"]), 1e-300)),
               sensing_metric=a["sensing_metric"], total_power=a["total_power"],
               solver_status=d.solver.get("status", ""), flags="+".join(d.flags))
    if baseline:
        from .robust import robust_spec
        try:
            b = solve_baseline_design(sc, robust_spec(sc), candidates=candidates, seed=seed)
            row.update(baseline_secrecy_rate=b.achieved["secrecy_rate"], baseline_eve_sinr=b.achieved["eve_sinr"])
        except InfeasibleScenario:
            row.update(baseline_secrecy_rate=0.0)
    return row


# -- beampatterns -------------------------------------------------------------

def beampattern_export(R, geometry: ArrayGeometry, grid) -> dict:
    """Beampattern table: angles in degrees, dB relative to the peak, linear."""
    grid = np.asarray(grid, dtype=float)
    lin = beampattern(R, grid, geometry)
    peak = lin.max()
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(lin / peak) if peak > 0 else np.full_like(lin, -np.inf)
    return {"angle_deg": np.rad2deg(grid), "power_db": db, "power_linear": lin}


def beampattern_csv(table: dict, config_hash: str = "", seed: int = 0) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}, seed={seed}\n")
    buf.write("angle_deg,power_db,power_linear\n")
    for a, d, l in zip(table["angle_deg"], table["power_db"], table["power_linear"]):
        buf.write(f"{a:.10g},{d:.10g},{l:.10g}\n")
    return buf.getvalue()


def beamwidth_3db(angles, pattern) -> float:
    """Width of the contiguous region around the peak within 3 dB of it.

    Edges are located by linear interpolation between grid samples; the
    result is in the units of ``angles``.
    """
    angles = np.asarray(angles, dtype=float)
    p = np.asarray(pattern, dtype=float)
    i = int(np.argmax(p))
    half = p[i] / 10 ** 0.3
    lo = i
    while lo > 0 and p[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < len(p) - 1 and p[hi + 1] >= half:
        hi += 1

    def edge(inside, outside):
        if outside < 0 or outside >= len(p):
            return angles[inside]
        f = (p[inside] - half) / (p[inside] - p[outside])
        return angles[inside] + f * (angles[outside] - angles[inside])

    return float(edge(hi, hi + 1) - edge(lo, lo - 1))
