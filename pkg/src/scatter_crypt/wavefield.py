"""Scalar free-space propagation.

Time convention exp(-j w t): the outgoing Green's function is
exp(+j k d) / (4 pi d).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels, num_threads
from .errors import CoincidentPoints, ValidationError


def green(src, obs, k: float) -> complex:
    d = math.dist(src, obs)
    if d == 0.0:
        raise CoincidentPoints(f"source and observation coincide at {tuple(src)}")
    return complex(math.cos(k * d), math.sin(k * d)) / (4.0 * math.pi * d)


def propagation_matrix(src_points, obs_points, k: float) -> np.ndarray:
    """Dense Green's matrix, entry (n, m) = green(src[m], obs[n])."""
    src = np.ascontiguousarray(np.atleast_2d(src_points), dtype=np.float64)
    obs = np.ascontiguousarray(np.atleast_2d(obs_points), dtype=np.float64)
    out = kernels.green_matrix(src, obs, float(k), num_threads())
    if not np.isfinite(out).all():
        n, m = np.argwhere(~np.isfinite(out))[0]
        raise CoincidentPoints(
            f"observation point {int(n)} coincides with source point {int(m)} at {tuple(obs[n])}"
        )
    return out


@dataclass(frozen=True)
class ReferenceWave:
    """Off-axis plane wave amplitude * exp(j k (ax x + az z))."""

    amplitude: float
    alpha_x: float = 0.4
    alpha_z: float = 0.0
    wavelength: float = 1.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValidationError("reference amplitude must be positive")
        if abs(self.alpha_x) >= 1 or abs(self.alpha_z) >= 1 or self.alpha_x**2 + self.alpha_z**2 >= 1:
            raise ValidationError("reference direction cosines must describe a propagating wave")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude, "alpha_x": self.alpha_x,
                "alpha_z": self.alpha_z, "wavelength": self.wavelength}

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceWave":
        return cls(float(d["amplitude"]), float(d["alpha_x"]), float(d["alpha_z"]),
                   float(d.get("wavelength", 1.0)))


def reference_field(ref: ReferenceWave, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    phase = ref.k * (ref.alpha_x * pts[:, 0] + ref.alpha_z * pts[:, 2])
    return ref.amplitude * np.exp(1j * phase)
