"""Uniform linear array model: steering vectors, channels and beampatterns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

HERMITIAN_ATOL = 1e-12


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(ValueError):
    """An input object violates a structural invariant."""


@dataclass(frozen=True)
class ArrayGeometry:
    num_elements: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValidationError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.spacing_wavelengths > 0:
            raise ValidationError("spacing_wavelengths must be positive")


@dataclass(frozen=True)
class AngleInterval:
    """Closed interval of angles in radians."""

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValidationError(f"interval lower {self.lower} exceeds upper {self.upper}")
        for v in (self.lower, self.upper):
            if abs(v) > np.pi / 2 + 1e-12:
                raise DomainError(f"interval endpoint {v} outside [-pi/2, pi/2]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)


Target = Union[float, AngleInterval]


@dataclass
class ChannelSet:
    """Channels seen by the transmitter.

    ``target_angle`` is either a single angle or an :class:`AngleInterval`
    when the sensed position is uncertain. Noise powers are linear.
    """

    user_channels: list
    target_angle: Target
    target_gain: complex = 1.0
    clutter: list = field(default_factory=list)
    noise_power_user: float = 1.0
    noise_power_eve: float = 1.0
    noise_power_radar: float = 1.0

    def __post_init__(self):
        self.user_channels = [np.asarray(h, dtype=complex) for h in self.user_channels]
        if len(self.user_channels) < 1:
            raise ValidationError("at least one user channel is required")
        for name in ("noise_power_user", "noise_power_eve", "noise_power_radar"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")

    @property
    def num_users(self) -> int:
        return len(self.user_channels)

    @property
    def nominal_target_angle(self) -> float:
        t = self.target_angle
        return t.center if isinstance(t, AngleInterval) else float(t)


def _check_angle(angle):
    a = np.asarray(angle, dtype=float)
    if np.any(np.abs(a) > np.pi / 2 + 1e-12):
        raise DomainError(f"angle outside [-pi/2, pi/2]: {angle}")
    return a


def steering_vector(geometry: ArrayGeometry, angle) -> np.ndarray:
    """Array response toward ``angle`` (radians from broadside).

    Element ``n`` carries the phase ``2*pi*d*n*sin(angle)`` so the first
    entry is always 1. A 1-D array of angles gives one row per angle.
    """
    a = _check_angle(angle)
    n = np.arange(geometry.num_elements)
    phase = 2 * np.pi * geometry.spacing_wavelengths * np.multiply.outer(np.sin(a), n)
    return np.exp(1j * phase)


def steering_matrix(geometry: ArrayGeometry, angles) -> np.ndarray:
    """Stack of steering vectors, shape (len(angles), N)."""
    return np.atleast_2d(steering_vector(geometry, np.atleast_1d(angles)))


def angular_resolution(geometry: ArrayGeometry) -> float:
    return 2.0 / geometry.num_elements


def check_hermitian(R, name="matrix") -> np.ndarray:
    R = np.asarray(R, dtype=complex)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {R.shape}")
    if not np.allclose(R, R.conj().T, rtol=0, atol=HERMITIAN_ATOL * max(1.0, np.abs(R).max())):
        raise ValidationError(f"{name} is not Hermitian")
    return R


def beampattern(R, angles, geometry: ArrayGeometry | None = None) -> np.ndarray:
    """Transmit beampattern ``a(θ)^H R a(θ)`` at each angle.

    Values below zero from round-off are clipped to 0.
    """
    R = check_hermitian(R, "covariance")
    if geometry is None:
        geometry = ArrayGeometry(R.shape[0])
    A = steering_matrix(geometry, angles)
    p = np.einsum("ai,ij,aj->a", A.conj(), R, A).real
    return np.clip(p, 0.0, None)


def beampattern_u(R, u, spacing_wavelengths=0.5) -> np.ndarray:
    """Beampattern sampled on the direction-sine axis ``u = sin θ``."""
    R = check_hermitian(R, "covariance")
    n = np.arange(R.shape[0])
    A = np.exp(1j * 2 * np.pi * spacing_wavelengths * np.multiply.outer(np.asarray(u, float), n))
    return np.einsum("ai,ij,aj->a", A.conj(), R, A).real


def los_channel(geometry: ArrayGeometry, angle: float, gain: complex) -> np.ndarray:
    return gain * steering_vector(geometry, angle)


def random_user_channel(geometry: ArrayGeometry, rng_seed: int, model: str = "rayleigh",
                        kappa: float = 0.0, angle: float = 0.0) -> np.ndarray:
    """Draw a user channel with unit per-entry power.

    ``model`` is ``"rayleigh"`` or ``"rician"``. The Rician channel mixes the
    line-of-sight response at ``angle`` with a Rayleigh part using weights
    ``sqrt(kappa/(1+kappa))`` and ``sqrt(1/(1+kappa))``; ``kappa=inf`` gives
    the pure line-of-sight vector.
    """
    n = geometry.num_elements
    rng = np.random.default_rng(rng_seed)
    scatter = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    if model == "rayleigh":
        return scatter
    if model != "rician":
        raise DomainError(f"unknown channel model {model!r}")
    if kappa < 0 or np.isnan(kappa):
        raise DomainError(f"Rician factor must be nonnegative, got {kappa}")
    los = steering_vector(geometry, angle)
    if np.isinf(kappa):
        return los
    return np.sqrt(kappa / (1 + kappa)) * los + np.sqrt(1 / (1 + kappa)) * scatter


def mainlobe_mask(target: Target, geometry: ArrayGeometry, grid, widen: float | None = None) -> np.ndarray:
    """Boolean mask of grid angles inside the mainlobe region.

    A point target covers ``θ_t ± 1/N``; an interval is widened by ``1/N``
    on each side (half the 2/N resolution cell).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValidationError("angle grid is empty")
    half = angular_resolution(geometry) / 2 if widen is None else widen
    if isinstance(target, AngleInterval):
        lo, hi = target.lower, target.upper
    else:
        lo = hi = float(target)
    tol = 1e-12
    return (grid >= lo - half - tol) & (grid <= hi + half + tol)


def desired_beampattern(target: Target, geometry: ArrayGeometry, grid) -> np.ndarray:
    """Rectangular sensing template: 1 on the mainlobe, 0 elsewhere."""
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) < 0):
        raise ValidationError("angle grid must be sorted")
    return mainlobe_mask(target, geometry, grid).astype(float)


def angle_grid(step_deg: float, lower_deg: float = -90.0, upper_deg: float = 90.0) -> np.ndarray:
    """Uniform closed grid in radians from ``lower_deg`` to ``upper_deg``."""
    count = int(round((upper_deg - lower_deg) / step_deg)) + 1
    return np.deg2rad(np.linspace(lower_deg, upper_deg, count))
