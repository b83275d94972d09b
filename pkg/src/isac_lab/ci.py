"""Symbol-level precoding with constructive and destructive interference.

Each slot's transmit vector ``x`` is chosen so every legitimate user's
noiseless received point ``h_k^H x`` lies inside the constructive region of
its PSK symbol (pushed away from the decision thresholds) while the sensed
eavesdropper's point for the designated stream lands in the half-plane
opposite the true symbol. Complex vectors are stacked as ``[Re x, Im x]``,
which makes every region a set of linear half-spaces.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .array import DomainError, ValidationError
from .conic import INFEASIBLE, OPTIMAL, ProgramBuilder, solve

SOFT_DI_WEIGHT = 1e3


@dataclass(frozen=True)
class PskConstellation:
    """Unit-modulus PSK points.

    ``convention="diagonal"`` places points at ``exp(i(2m+1)pi/M)`` so the
    QPSK thresholds are the real and imaginary axes; ``"axis"`` uses
    ``exp(i 2 m pi/M)``. The default is diagonal for QPSK, axis otherwise.
    """

    order: int = 4
    convention: str | None = None

    def __post_init__(self):
        if self.order not in (2, 4, 8, 16):
            raise ValidationError("PSK order must be 2, 4, 8 or 16")
        if self.convention not in (None, "diagonal", "axis"):
            raise ValidationError(f"unknown convention {self.convention!r}")

    @property
    def offset(self) -> float:
        conv = self.convention or ("diagonal" if self.order == 4 else "axis")
        return math.pi / self.order if conv == "diagonal" else 0.0

    @property
    def points(self) -> np.ndarray:
        m = np.arange(self.order)
        return np.exp(1j * (2 * np.pi * m / self.order + self.offset))


@dataclass
class PskFrame:
    symbols: np.ndarray  # K x T indices
    order: int = 4

    def __post_init__(self):
        self.symbols = np.atleast_2d(np.asarray(self.symbols, dtype=int))
        if np.any(self.symbols < 0) or np.any(self.symbols >= self.order):
            raise ValidationError("symbol indices out of range")

    @property
    def num_slots(self) -> int:
        return self.symbols.shape[1]


def random_frame(num_users: int, num_slots: int, order: int = 4, seed: int = 0) -> PskFrame:
    rng = np.random.default_rng(seed)
    return PskFrame(rng.integers(0, order, size=(num_users, num_slots)), order)


@dataclass
class PrecodedSlot:
    x: np.ndarray | None
    lu_margins: np.ndarray
    eve_margin: float
    power: float
    feasible: bool
    status: str = OPTIMAL
    info: dict = field(default_factory=dict)


def rotate_to_reference(received, symbol_point):
    """Rotate so the intended symbol sits on the positive real axis."""
    s = complex(symbol_point)
    if not math.isclose(abs(s), 1.0, rel_tol=0, abs_tol=1e-9):
        raise DomainError("symbol point must have unit modulus")
    return np.asarray(received) * s.conjugate()


def classify_symbol(point, constellation: PskConstellation):
    """Angularly nearest constellation point, lower index on ties.

    Returns ``(index, tie)``; the zero point is a tie at index 0.
    """
    point = complex(point)
    if point == 0:
        return 0, True
    d = np.abs(np.angle(point * constellation.points.conj()))
    best = d.min()
    close = np.flatnonzero(d <= best + 1e-12)
    return int(close[0]), len(close) > 1


def classify_many(points, constellation: PskConstellation) -> np.ndarray:
    """Vectorized :func:`classify_symbol` (indices only)."""
    points = np.asarray(points, dtype=complex)
    d = np.abs(np.angle(points[..., None] * constellation.points.conj()))
    idx = np.argmin(d + 1e-12 * np.arange(constellation.order), axis=-1)
    return np.where(points == 0, 0, idx)


def _rotated_rows(channel, symbol_point):
    """Rows giving ``Re`` and ``Im`` of the rotated received point from ``[Re x, Im x]``."""
    c = np.conj(channel) * np.conj(symbol_point)
    re = np.concatenate([c.real, -c.imag])
    im = np.concatenate([c.imag, c.real])
    return re, im


def ci_constraint_rows(h_k, symbol_point, snr_target, noise, order):
    """Constructive-region half-spaces ``G x <= b`` for one user.

    With ``r`` the rotated received point the region is
    ``|Im r| <= (Re r - sqrt(gamma sigma^2)) tan(pi/M)``; BPSK keeps only
    ``Re r >= sqrt(gamma sigma^2)``.
    """
    if order < 2:
        raise DomainError("PSK order must be at least 2")
    re, im = _rotated_rows(h_k, symbol_point)
    thr = math.sqrt(snr_target * noise)
    if order == 2:
        return -re[None], np.array([-thr])
    tn = math.tan(math.pi / order)
    G = np.vstack([im - tn * re, -im - tn * re])
    return G, np.full(2, -tn * thr)


def di_constraint_rows(eve_channel, symbol_point, margin):
    """Destructive half-plane ``Re r_eve <= -margin`` as ``G x <= b``."""
    if margin < 0:
        raise DomainError("destructive margin must be nonnegative")
    re, _ = _rotated_rows(eve_channel, symbol_point)
    return re[None], np.array([-float(margin)])


def ci_margin(received, symbol_point, snr_target, noise, order) -> float:
    """Signed depth inside the constructive region (nonnegative when inside)."""
    r = complex(rotate_to_reference(received, symbol_point))
    thr = math.sqrt(snr_target * noise)
    if order == 2:
        return r.real - thr
    return r.real - thr - abs(r.imag) / math.tan(math.pi / order)


def _as_complex(z: np.ndarray) -> np.ndarray:
    n = len(z) // 2
    return z[:n] + 1j * z[n:]


@dataclass
class CiProblem:
    """Per-slot data shared by every slot of a frame."""

    user_channels: list
    eve_channel: np.ndarray
    constellation: PskConstellation
    snr_targets: np.ndarray
    noise: float
    designated: int
    di_margin: float
    power_budget: float

    @classmethod
    def from_scenario(cls, scenario, snr_targets=None, di_margin=None):
        ch = scenario.channels
        K = scenario.num_users
        gam = np.full(K, scenario.user_sinr_threshold) if snr_targets is None else np.broadcast_to(
            np.asarray(snr_targets, float), (K,)).copy()
        k = scenario.designated_stream
        if di_margin is None:
            di_margin = scenario.di_margin
        if di_margin is None:
            di_margin = 0.1 * math.sqrt(gam[k] * ch.noise_power_user)
        return cls(list(ch.user_channels), scenario.eve_channel(), PskConstellation(scenario.modulation_order),
                   gam, ch.noise_power_user, k, float(di_margin), float(scenario.power_budget))


def solve_ci_slot(problem: CiProblem, symbols, mode="min_power", di_streams="designated",
                  tol=1e-8) -> PrecodedSlot:
    """Precode one slot.

    ``mode="min_power"`` minimizes ``||x||`` subject to the CI rows of every
    user and the DI row; ``"max_margin"`` maximizes a common CI margin
    under ``||x||^2 <= P``. ``di_streams="all"`` imposes DI on every stream
    and, if that is infeasible, falls back to max-margin with the DI rows
    softly penalized.
    """
    if mode not in ("min_power", "max_margin"):
        raise ValidationError(f"unknown mode {mode!r}")
    pts = problem.constellation.points[np.asarray(symbols, int)]
    di_set = [problem.designated] if di_streams == "designated" else list(range(len(pts)))
    slot = _solve(problem, pts, mode, di_set, soft=False, tol=tol)
    if not slot.feasible and di_streams == "all":
        slot = _solve(problem, pts, "max_margin", di_set, soft=True, tol=tol)
    return slot


def _solve(problem, pts, mode, di_set, soft, tol):
    n = len(problem.eve_channel)
    M = problem.constellation.order
    pb = ProgramBuilder()
    x = pb.variable("x", 2 * n)
    tau = pb.variable("tau", 1)
    delta = pb.variable("delta", 1) if mode == "max_margin" else None
    viol = pb.variable("viol", len(di_set)) if soft else None
    nv = pb.num_vars

    for k, h in enumerate(problem.user_channels):
        Gk, bk = ci_constraint_rows(h, pts[k], problem.snr_targets[k], problem.noise, M)
        G = pb.dense_rows(len(bk))
        G[:, x] = Gk
        if delta is not None:
            # shift the threshold by the common margin instead of the SNR target
            G[:, delta.start] = -bk / math.sqrt(problem.snr_targets[k] * problem.noise)
            bk = np.zeros_like(bk)
        pb.le(G, bk, tag=f"ci{k}")
    for i, k in enumerate(di_set):
        Gd, bd = di_constraint_rows(problem.eve_channel, pts[k], problem.di_margin)
        G = pb.dense_rows(1)
        G[:, x] = Gd
        if viol is not None:
            G[0, viol.start + i] = -1.0
        pb.le(G, bd, tag="di")
    if viol is not None:
        G = pb.dense_rows(len(di_set))
        G[np.arange(len(di_set)), np.arange(viol.start, viol.stop)] = 1.0
        pb.ge(G, 0.0, tag="viol")
    G = pb.dense_rows(2 * n + 1)
    G[0, tau.start] = 1.0
    G[1:, x] = np.eye(2 * n)
    pb.soc(G, np.zeros(2 * n + 1))
    c = np.zeros(nv)
    if delta is None:
        c[tau.start] = 1.0
    else:
        G = pb.dense_rows(1)
        G[0, tau.start] = 1.0
        pb.le(G, math.sqrt(problem.power_budget), tag="power")
        c[delta.start] = -1.0
        if viol is not None:
            c[viol] = SOFT_DI_WEIGHT
    pb.objective(c)
    prog = pb.build()
    sol = solve(prog, tol=tol)
    info = {"iterations": sol.iterations, "primal_residual": sol.primal_residual,
            "dual_residual": sol.dual_residual}
    if soft:
        info["soft_di"] = True
        info["soft_di_weight"] = SOFT_DI_WEIGHT
    K = len(problem.user_channels)
    if sol.status != OPTIMAL:
        status = sol.status
        if status != INFEASIBLE:
            # accept near-optimal iterates that still meet every region
            z = _as_complex(sol.primal[x])
            slot = _audit(problem, pts, z, di_set, status, info)
            if slot.feasible and sol.primal_residual < 1e-5:
                return slot
        if status == INFEASIBLE:
            # normalized dual ray: A'y ~ 0, y in the dual cone, b'y < 0
            nz = np.linalg.norm(sol.dual)
            if nz > 0:
                info["certificate"] = {"dual_ray": sol.dual / nz, "b_dot_ray": float(prog.b @ sol.dual / nz)}
        return PrecodedSlot(None, np.full(K, np.nan), float("nan"), float("nan"), False, status, info)
    z = _as_complex(sol.primal[x])
    return _audit(problem, pts, z, di_set, OPTIMAL, info)


def _audit(problem, pts, z, di_set, status, info, rtol=1e-6):
    """Margins of a precoded vector; feasibility up to a relative tolerance."""
    M = problem.constellation.order
    lu = np.array([ci_margin(np.vdot(h, z), pts[k], problem.snr_targets[k], problem.noise, M)
                   for k, h in enumerate(problem.user_channels)])
    eve_pts = [complex(rotate_to_reference(np.vdot(problem.eve_channel, z), pts[k])) for k in di_set]
    eve = min(-p.real - problem.di_margin for p in eve_pts)
    scale = max(1.0, float(np.linalg.norm(z)) * max(np.linalg.norm(h) for h in problem.user_channels))
    ok = bool(np.all(lu >= -rtol * scale))
    if "soft_di" not in info:
        ok = ok and eve >= -rtol * scale
    return PrecodedSlot(z, lu, float(eve), float(np.vdot(z, z).real), ok, status, info)


def solve_ci_frame(problem: CiProblem, frame: PskFrame, mode="min_power", di_streams="designated",
                   tol=1e-8) -> list:
    """Precode every slot; identical symbol tuples share one solve."""
    cache = {}
    out = []
    for t in range(frame.num_slots):
        key = tuple(int(s) for s in frame.symbols[:, t])
        if key not in cache:
            cache[key] = solve_ci_slot(problem, key, mode=mode, di_streams=di_streams, tol=tol)
        out.append(cache[key])
    return out


def noiseless_ser(problem: CiProblem, frame: PskFrame, slots) -> dict:
    """Symbol error rates of feasible slots without receiver noise.

    Returns per-user SER and the eavesdropper's SER on the designated stream.
    """
    const = problem.constellation
    K = len(problem.user_channels)
    keep = [t for t, s in enumerate(slots) if s.feasible]
    if not keep:
        return {"slots": 0, "ser_lu": [float("nan")] * K, "ser_eve": float("nan")}
    X = np.column_stack([slots[t].x for t in keep])
    Hm = np.array(problem.user_channels)
    rx = Hm.conj() @ X
    sym = frame.symbols[:, keep]
    ser_lu = [float(np.mean(classify_many(rx[k], const) != sym[k])) for k in range(K)]
    eve_rx = problem.eve_channel.conj() @ X
    ser_eve = float(np.mean(classify_many(eve_rx, const) != sym[problem.designated]))
    return {"slots": len(keep), "ser_lu": ser_lu, "ser_eve": ser_eve}


def read_frame_csv(text: str, order: int = 4) -> PskFrame:
    """Frame from CSV rows ``slot, stream, symbol_index``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValidationError("frame CSV is empty")
    T = max(int(r["slot"]) for r in rows) + 1
    K = max(int(r["stream"]) for r in rows) + 1
    S = np.full((K, T), -1, dtype=int)
    for r in rows:
        S[int(r["stream"]), int(r["slot"])] = int(r["symbol_index"])
    if np.any(S < 0):
        raise ValidationError("frame CSV leaves some (slot, stream) pairs unset")
    return PskFrame(S, order)


def write_frame_csv(frame: PskFrame) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot", "stream", "symbol_index"])
    K, T = frame.symbols.shape
    for t in range(T):
        for k in range(K):
            w.writerow([t, k, int(frame.symbols[k, t])])
    return buf.getvalue()


def slots_csv(slots) -> str:
    """Output rows ``slot, power, lu_margin_1..K, eve_margin, feasible_flag``."""
    K = len(slots[0].lu_margins) if slots else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot", "power"] + [f"lu_margin_{k + 1}" for k in range(K)] + ["eve_margin", "feasible_flag"])
    for t, s in enumerate(slots):
        w.writerow([t, f"{s.power:.10g}"] + [f"{m:.10g}" for m in s.lu_margins] + [f"{s.eve_margin:.10g}", int(s.feasible)])
    return buf.getvalue()
