"""Simulation geometry: hologram plane, sensor plane and the scattering volume.

All lengths are in units of the wavelength. Planes are normal to the y axis,
which is also the propagation direction; the hologram sits at y = 0 and the
sensor on the far side of the medium.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import InvalidGeometry

_DIST_RTOL = 1e-9


@dataclass(frozen=True)
class PlaneSpec:
    extent_x: float
    extent_z: float
    nx: int
    nz: int
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise InvalidGeometry(f"plane needs at least one pixel, got {self.nx}x{self.nz}")
        if not (self.extent_x > 0 and self.extent_z > 0):
            raise InvalidGeometry("plane extents must be positive")

    @property
    def n_pixels(self) -> int:
        return self.nx * self.nz

    @property
    def pitch(self) -> tuple[float, float]:
        return self.extent_x / self.nx, self.extent_z / self.nz

    @property
    def shape(self) -> tuple[int, int]:
        """Image shape (rows, cols) = (nz, nx); x runs along a row."""
        return self.nz, self.nx


@dataclass(frozen=True)
class MediumSpec:
    extent_x: float
    extent_z: float
    depth: float
    gx: int
    gy: int
    gz: int
    tau_min: float = -11.0
    tau_max: float = -3.0
    standoff_hologram: float = 10.0
    standoff_sensor: float = 10.0
    jitter: float = 0.0

    def __post_init__(self):
        if min(self.gx, self.gy, self.gz) < 1:
            raise InvalidGeometry("medium grid needs gx, gy, gz >= 1")
        if self.tau_min > self.tau_max:
            raise InvalidGeometry("tau_min must not exceed tau_max")
        if not (self.standoff_hologram > 0 and self.standoff_sensor > 0):
            raise InvalidGeometry("standoff distances must be positive")
        if min(self.extent_x, self.extent_z, self.depth) < 0:
            raise InvalidGeometry("medium extents must be non-negative")
        if self.jitter < 0:
            raise InvalidGeometry("jitter must be non-negative")

    @property
    def n_particles(self) -> int:
        return self.gx * self.gy * self.gz


@dataclass(frozen=True)
class Scene:
    hologram: PlaneSpec
    sensor: PlaneSpec
    medium: MediumSpec
    wavelength: float = 1.0
    extras: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def distance(self) -> float:
        return self.sensor.center[1] - self.hologram.center[1]

    @property
    def M(self) -> int:
        return self.hologram.n_pixels

    @property
    def N(self) -> int:
        return self.sensor.n_pixels

    def medium_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.medium
        y0 = self.hologram.center[1] + m.standoff_hologram
        lo = np.array([-m.extent_x / 2, y0, -m.extent_z / 2])
        hi = np.array([m.extent_x / 2, y0 + m.depth, m.extent_z / 2])
        return lo, hi


def _plane(cfg: Mapping[str, Any], y: float) -> PlaneSpec:
    try:
        return PlaneSpec(
            extent_x=float(cfg["extent_x"]),
            extent_z=float(cfg["extent_z"]),
            nx=int(cfg["nx"]),
            nz=int(cfg["nz"]),
            center=(0.0, float(y), 0.0),
        )
    except KeyError as exc:
        raise InvalidGeometry(f"plane config missing key {exc}") from None


def build_scene(config: Mapping[str, Any]) -> Scene:
    """Validate a scene description and place the planes around the medium.

    ``config`` follows the scene JSON layout. An optional top-level
    ``distance`` is checked against standoff + depth + standoff.
    """
    try:
        mcfg = config["medium"]
        medium = MediumSpec(
            extent_x=float(mcfg["extent_x"]),
            extent_z=float(mcfg["extent_z"]),
            depth=float(mcfg["depth"]),
            gx=int(mcfg["gx"]),
            gy=int(mcfg["gy"]),
            gz=int(mcfg["gz"]),
            tau_min=float(mcfg.get("tau_min", -11.0)),
            tau_max=float(mcfg.get("tau_max", -3.0)),
            standoff_hologram=float(mcfg["standoff_hologram"]),
            standoff_sensor=float(mcfg["standoff_sensor"]),
            jitter=float(mcfg.get("jitter", 0.0)),
        )
        hcfg, scfg = config["hologram"], config["sensor"]
    except KeyError as exc:
        raise InvalidGeometry(f"scene config missing key {exc}") from None

    wavelength = float(config.get("wavelength", 1.0))
    if not wavelength > 0:
        raise InvalidGeometry("wavelength must be positive")

    span = medium.standoff_hologram + medium.depth + medium.standoff_sensor
    declared = config.get("distance")
    if declared is not None and not math.isclose(float(declared), span, rel_tol=_DIST_RTOL):
        raise InvalidGeometry(
            f"declared hologram-sensor distance {declared} does not equal "
            f"standoffs + depth = {span}"
        )

    extras = {k: v for k, v in config.items() if k not in ("wavelength", "hologram", "sensor", "medium", "distance")}
    return Scene(
        hologram=_plane(hcfg, 0.0),
        sensor=_plane(scfg, span),
        medium=medium,
        wavelength=wavelength,
        extras=extras,
    )


def scene_to_config(scene: Scene) -> dict[str, Any]:
    def plane(p: PlaneSpec) -> dict[str, Any]:
        return {"extent_x": p.extent_x, "extent_z": p.extent_z, "nx": p.nx, "nz": p.nz}

    m = scene.medium
    cfg = {
        "wavelength": scene.wavelength,
        "distance": scene.distance,
        "hologram": plane(scene.hologram),
        "sensor": plane(scene.sensor),
        "medium": {
            "extent_x": m.extent_x, "extent_z": m.extent_z, "depth": m.depth,
            "gx": m.gx, "gy": m.gy, "gz": m.gz,
            "tau_min": m.tau_min, "tau_max": m.tau_max,
            "standoff_hologram": m.standoff_hologram,
            "standoff_sensor": m.standoff_sensor,
            "jitter": m.jitter,
        },
    }
    cfg.update(scene.extras)
    return cfg


def _centers(extent: float, n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) * (extent / n) - extent / 2


def sample_plane(p: PlaneSpec) -> np.ndarray:
    """Pixel centres as an (nx*nz, 3) array, x varying fastest."""
    cx, cy, cz = p.center
    xs = _centers(p.extent_x, p.nx) + cx
    zs = _centers(p.extent_z, p.nz) + cz
    X, Z = np.meshgrid(xs, zs)
    return np.column_stack([X.ravel(), np.full(X.size, cy), Z.ravel()])


def medium_grid(medium: MediumSpec) -> np.ndarray:
    """Regular particle lattice filling the medium box, x fastest, then z, then y.

    The box starts ``standoff_hologram`` beyond the hologram plane at y = 0.
    """
    m = medium
    xs = _centers(m.extent_x, m.gx)
    zs = _centers(m.extent_z, m.gz)
    ys = m.standoff_hologram + (np.arange(m.gy) + 0.5) * (m.depth / m.gy)
    Y, Z, X = np.meshgrid(ys, zs, xs, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
