"""Experiment description shared by the design modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .array import (AngleInterval, ArrayGeometry, ChannelSet, DomainError, ValidationError,
                    angle_grid, angular_resolution)


@dataclass
class BeampatternSpec:
    """Linear sensing constraints on the total transmit beampattern.

    The mainlobe floor is ``floor_fraction * P`` and the sidelobe ceiling is
    ``sidelobe_cap_fraction * P`` (``inf`` disables it). Sidelobe samples
    exclude a transition band of ``transition`` radians around the mainlobe
    (default: one 2/N resolution cell).
    """

    floor_fraction: float = 0.5
    sidelobe_cap_fraction: float = 0.1
    grid: np.ndarray = field(default_factory=lambda: angle_grid(0.25))
    transition: float | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if not 0 <= self.floor_fraction <= 1:
            raise ValidationError("floor_fraction must lie in [0, 1]")
        if self.sidelobe_cap_fraction < 0:
            raise ValidationError("sidelobe_cap_fraction must be nonnegative")
        if self.grid.size == 0:
            raise ValidationError("beampattern grid is empty")


@dataclass
class CsiErrorModel:
    """User channel estimation error.

    ``kind="bounded"``: ``||e_k|| <= radius``. ``kind="gaussian"``: entries
    i.i.d. circular Gaussian with ``variance``; the SINR must hold with
    probability at least ``1 - outage``. With ``enforce=False`` the model is
    only used to audit a design built for the nominal channel.
    """

    kind: str
    radius: float = 0.0
    variance: float = 0.0
    outage: float = 0.05
    enforce: bool = True

    def __post_init__(self):
        if self.kind not in ("bounded", "gaussian"):
            raise ValidationError(f"unknown CSI error kind {self.kind!r}")
        if self.radius < 0 or self.variance < 0:
            raise DomainError("CSI error radius and variance must be nonnegative")
        if not 0 < self.outage <= 0.5:
            raise DomainError(f"outage probability must be in (0, 0.5], got {self.outage}")


@dataclass
class Uncertainty:
    angle_interval: AngleInterval | None = None
    num_samples: int | None = None
    csi: CsiErrorModel | None = None

    def __post_init__(self):
        if self.num_samples is not None and self.num_samples < 1:
            raise ValidationError("num_samples must be at least 1")


@dataclass
class Scenario:
    geometry: ArrayGeometry
    channels: ChannelSet
    power_budget: float
    user_sinr_threshold: float
    beampattern: BeampatternSpec = field(default_factory=BeampatternSpec)
    uncertainty: Uncertainty | None = None
    designated_stream: int = 0
    protect_all_streams: bool = True
    modulation_order: int = 4
    di_margin: float | None = None

    def __post_init__(self):
        if not self.power_budget >= 0:
            raise ValidationError("power budget must be nonnegative")
        if not self.user_sinr_threshold > 0:
            raise ValidationError("user SINR threshold must be positive")
        n = self.geometry.num_elements
        for h in self.channels.user_channels:
            if h.shape != (n,):
                raise ValidationError(f"user channel has shape {h.shape}, expected ({n},)")
        if not 0 <= self.designated_stream < self.num_users:
            raise ValidationError("designated_stream out of range")
        if self.modulation_order not in (2, 4, 8, 16):
            raise ValidationError("modulation order must be 2, 4, 8 or 16")

    @property
    def num_users(self) -> int:
        return self.channels.num_users

    @property
    def protected_streams(self) -> list:
        return list(range(self.num_users)) if self.protect_all_streams else [self.designated_stream]

    def eve_channel(self, angle=None) -> np.ndarray:
        from .array import steering_vector
        if angle is None:
            angle = self.channels.nominal_target_angle
        return self.channels.target_gain * steering_vector(self.geometry, angle)

    def target_region(self):
        """Angle interval if the target position is uncertain, else the angle."""
        if self.uncertainty is not None and self.uncertainty.angle_interval is not None:
            return self.uncertainty.angle_interval
        return self.channels.target_angle

    def default_num_samples(self, interval: AngleInterval) -> int:
        """Half-resolution sampling: width / (1/N) rounded up, plus one."""
        step = angular_resolution(self.geometry) / 2
        return int(math.ceil(interval.width / step - 1e-9)) + 1
