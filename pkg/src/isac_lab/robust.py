"""Robust secure beamforming under target-angle and user-CSI uncertainty.

The eavesdropping caps are replicated over sampled angles of the target's
uncertainty interval and the sensing floor covers the widened interval.
Bounded CSI errors enter through an S-procedure LMI per user; Gaussian
errors are reduced to a bounded ball whose radius holds the error with
probability ``1 - outage`` (a safe restriction of the chance constraint).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .array import AngleInterval, DomainError, ValidationError
from .formulation import DesignSpec, Formulation
from .metrics import user_sinr_cov
from .secure import BeamformerDesign, design, nominal_spec

AUDIT_SLACK = 1e-3


def sample_angle_interval(interval: AngleInterval, L: int) -> np.ndarray:
    """``L`` evenly spaced angles including both endpoints (midpoint for ``L=1``)."""
    if L < 1:
        raise ValidationError("L must be at least 1")
    if L == 1:
        return np.array([interval.center])
    return np.linspace(interval.lower, interval.upper, L)


def gaussian_sphere_radius(variance: float, outage: float, num_elements: int) -> float:
    """Radius holding a ``CN(0, variance I_N)`` error with probability ``1 - outage``.

    ``2 ||e||^2 / variance`` is chi-square with ``2N`` degrees of freedom.
    """
    if not 0 < outage <= 0.5:
        raise DomainError(f"outage probability must be in (0, 0.5], got {outage}")
    if variance < 0:
        raise DomainError("variance must be nonnegative")
    if variance == 0:
        return 0.0
    return float(np.sqrt(variance / 2 * chi2.ppf(1 - outage, 2 * num_elements)))


def csi_radii(scenario) -> np.ndarray | None:
    """Per-user error-ball radii implied by the scenario's CSI model."""
    unc = scenario.uncertainty
    if unc is None or unc.csi is None or not unc.csi.enforce:
        return None
    m = unc.csi
    if m.kind == "bounded":
        r = m.radius
    else:
        r = gaussian_sphere_radius(m.variance, m.outage, scenario.geometry.num_elements)
    return np.full(scenario.num_users, float(r))


def robust_spec(scenario, num_samples=None) -> DesignSpec:
    """Caps over the sampled interval, floor over the widened interval."""
    region = scenario.target_region()
    if isinstance(region, AngleInterval):
        L = num_samples
        if L is None and scenario.uncertainty is not None:
            L = scenario.uncertainty.num_samples
        if L is None:
            L = scenario.default_num_samples(region)
        angles = sample_angle_interval(region, L)
    else:
        angles = np.array([float(region)])
    return DesignSpec(eve_angles=angles, mainlobe=region, csi_radii=csi_radii(scenario),
                      protect=scenario.protected_streams)


def build_robust_feasibility_sdp(scenario, t):
    """Robust feasibility program at eavesdropping level ``t``.

    Returns ``(program, formulation, layout)``.
    """
    if scenario.uncertainty is None:
        raise ValidationError("scenario has no uncertainty model")
    if t is not None and t < 0:
        raise ValidationError("eavesdropping level must be nonnegative")
    form = Formulation(scenario, robust_spec(scenario))
    prog, layout = form.build(t=t)
    return prog, form, layout


def bounded_csi_constraint(scenario, k: int, radius: float, spec: DesignSpec | None = None) -> DesignSpec:
    """Spec with user ``k`` protected against any error of norm at most ``radius``.

    The formulation turns a positive radius into the S-procedure LMI
    ``[[Q + mu I, Q h], [h^H Q, h^H Q h - gamma sigma^2 - mu radius^2]] >= 0``
    with ``Q = R_k - gamma sum_{j != k} R_j``; radius zero keeps the linear row.
    """
    if radius < 0:
        raise DomainError("error radius must be nonnegative")
    spec = spec or nominal_spec(scenario)
    radii = np.zeros(scenario.num_users) if spec.csi_radii is None else np.array(spec.csi_radii, float)
    radii[k] = radius
    return DesignSpec(spec.eve_angles, spec.mainlobe, radii, list(spec.protect))


def gaussian_csi_constraint(scenario, k: int, variance: float, outage: float,
                            spec: DesignSpec | None = None) -> DesignSpec:
    """Chance constraint ``Pr{SINR_k >= gamma} >= 1 - outage`` by sphere bounding."""
    r = gaussian_sphere_radius(variance, outage, scenario.geometry.num_elements)
    return bounded_csi_constraint(scenario, k, r, spec)


# -- audits -----------------------------------------------------------------

def _sinrs_with_errors(source, scenario, errors):
    """Realized user SINRs with channel estimates perturbed by ``errors`` (K x N)."""
    ch = scenario.channels
    out = []
    for k in range(scenario.num_users):
        h = ch.user_channels[k] + errors[k]
        if isinstance(source, list):
            out.append(user_sinr_cov(source, k, ch, h=h))
        else:
            gains = np.abs(h.conj() @ source) ** 2
            out.append(float(gains[k] / (gains.sum() - gains[k] + ch.noise_power_user)))
    return np.array(out)


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def audit_bounded(source, scenario, radius: float, draws: int = 1000, seed: int = 0) -> dict:
    """Realized SINRs with errors drawn uniformly on the sphere ``||e|| = radius``.

    ``source`` is a beamformer matrix or a list of covariances. A draw
    violates when some user falls below ``gamma (1 - AUDIT_SLACK)``.
    """
    K, n = scenario.num_users, scenario.geometry.num_elements
    rows = []
    for d in range(draws):
        rng = np.random.default_rng([seed, d])
        e = _complex_normal(rng, (K, n))
        e *= radius / np.linalg.norm(e, axis=1, keepdims=True)
        rows.append(_sinrs_with_errors(source, scenario, e))
    return _summary("bounded", rows, scenario, draws, radius=radius)


def audit_gaussian(source, scenario, variance: float, draws: int = 10000, seed: int = 0) -> dict:
    """Empirical per-user outage with ``CN(0, variance I)`` channel errors."""
    K, n = scenario.num_users, scenario.geometry.num_elements
    rows = []
    for d in range(draws):
        rng = np.random.default_rng([seed, d])
        e = np.sqrt(variance) * _complex_normal(rng, (K, n))
        rows.append(_sinrs_with_errors(source, scenario, e))
    return _summary("gaussian", rows, scenario, draws, variance=variance)


def _summary(kind, rows, scenario, draws, **extra):
    S = np.array(rows).reshape(draws, scenario.num_users)
    bad = S < scenario.user_sinr_threshold * (1 - AUDIT_SLACK)
    per_user = bad.mean(axis=0) if draws else np.zeros(scenario.num_users)
    return {
        "kind": kind,
        "draws": int(draws),
        "violations": int(bad.any(axis=1).sum()),
        "violation_fraction_per_user": [float(v) for v in per_user],
        "outage": float(per_user.max()) if draws else 0.0,
        "min_sinr": float(S.min()) if draws else float("nan"),
        "sinrs": S,
        "violated": bad.any(axis=1),
        **extra,
    }


def audit_csv(audit: dict) -> str:
    """Audit table: draw_index, realized_sinr_1..K, violated_flag."""
    S = audit["sinrs"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["draw_index"] + [f"realized_sinr_{k + 1}" for k in range(S.shape[1])] + ["violated_flag"])
    for d, (row, v) in enumerate(zip(S, audit["violated"])):
        w.writerow([d] + [f"{x:.10g}" for x in row] + [int(v)])
    return buf.getvalue()


@dataclass
class RobustReport:
    angles: np.ndarray
    eve_sinr_per_angle: list
    eve_sinr_sum: float
    eve_sinr_max: float
    csi_radius: float | None = None
    audit: dict | None = None
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        audit = None
        if self.audit is not None:
            audit = {k: v for k, v in self.audit.items() if k not in ("sinrs", "violated")}
        return {
            "angles_deg": [float(np.rad2deg(a)) for a in self.angles],
            "eve_sinr_per_angle": [float(v) for v in self.eve_sinr_per_angle],
            "eve_sinr_sum": float(self.eve_sinr_sum),
            "eve_sinr_max": float(self.eve_sinr_max),
            "csi_radius": self.csi_radius,
            "audit": audit,
            "notes": list(self.notes),
        }


def solve_robust_design(scenario, audit_draws=None, candidates=200, seed=0,
                        num_samples=None) -> tuple[BeamformerDesign, RobustReport]:
    """Robust secure design plus its report.

    ``audit_draws`` defaults to 1000 for bounded and 10000 for Gaussian
    errors. Without any uncertainty this is the nominal secure design.
    """
    spec = robust_spec(scenario, num_samples)
    d = design(scenario, spec, secure=True, candidates=candidates, seed=seed)
    per_angle = d.achieved["eve_sinr_per_angle"]
    report = RobustReport(
        angles=spec.eve_angles,
        eve_sinr_per_angle=per_angle,
        eve_sinr_sum=float(sum(per_angle)),
        eve_sinr_max=float(max(per_angle)) if per_angle else 0.0,
    )
    unc = scenario.uncertainty
    if unc is not None and unc.csi is not None:
        m = unc.csi
        source = d.beamformers if d.beamformers is not None else list(d.covariances)
        if m.kind == "bounded":
            report.csi_radius = float(m.radius)
            report.audit = audit_bounded(source, scenario, m.radius, audit_draws or 1000, seed)
        else:
            report.csi_radius = gaussian_sphere_radius(m.variance, m.outage, scenario.geometry.num_elements)
            report.audit = audit_gaussian(source, scenario, m.variance, audit_draws or 10000, seed)
        if not m.enforce:
            report.notes.append("csi-not-enforced")
    return d, report
