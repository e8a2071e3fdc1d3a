"""Intensity and off-axis holographic records, and their demodulation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CarrierOverlap, GeometryMismatch
from .scene import PlaneSpec
from .wavefield import ReferenceWave

# pass-band radius as a fraction of the Nyquist frequency
DEFAULT_RC = 0.25
ZERO_ORDER_GAIN = 8.0


@dataclass(frozen=True, eq=False)
class CiphertextHologram:
    """Real transparency on the hologram plane plus what is needed to read it.

    ``field`` is the exact synthesised incident field; it is only carried in
    FIELD mode, where the transparency is treated as an ideal CGH.
    """

    transparency: np.ndarray
    reference: ReferenceWave
    provenance: dict
    mode: str = "field"
    rc: float = DEFAULT_RC
    field: np.ndarray | None = None
    shape: tuple[int, int] = (0, 0)


def intensity_record(psi) -> np.ndarray:
    psi = np.asarray(psi)
    return psi.real**2 + psi.imag**2


def hologram_record(psi, ref_values) -> np.ndarray:
    """|psi + psi_R|^2 per pixel; ``ref_values`` is the sampled reference wave."""
    psi = np.asarray(psi, dtype=np.complex128)
    ref = np.asarray(ref_values, dtype=np.complex128)
    if psi.shape != ref.shape:
        raise GeometryMismatch(f"field shape {psi.shape} != reference shape {ref.shape}")
    return intensity_record(psi + ref)


def passband_mask(shape: tuple[int, int], rc: float = DEFAULT_RC) -> np.ndarray:
    """Boolean FFT-layout disc of radius ``rc`` x Nyquist (cycles/sample)."""
    nz, nx = shape
    fz = np.fft.fftfreq(nz)[:, None]
    fx = np.fft.fftfreq(nx)[None, :]
    return np.hypot(fx, fz) <= rc * 0.5


def demodulate(holo, ref_values, shape: tuple[int, int], rc: float = DEFAULT_RC) -> np.ndarray:
    """Recover the object field from an off-axis record.

    The mean is removed (DC term), the record is multiplied by
    psi_R / |psi_R|^2 to shift the object term to baseband, and a hard disc
    of radius ``rc`` x Nyquist is kept in the spatial-frequency domain. Every
    step is linear, so complex combinations of holograms are allowed.
    """
    h = np.asarray(holo)
    ref = np.asarray(ref_values, dtype=np.complex128)
    if h.shape != ref.shape or h.size != shape[0] * shape[1]:
        raise GeometryMismatch(f"hologram {h.shape}, reference {ref.shape}, grid {shape}")
    x = (h - h.mean()) * (ref / (ref.real**2 + ref.imag**2))
    spec = np.fft.fft2(x.reshape(shape))
    spec *= passband_mask(shape, rc)
    return np.fft.ifft2(spec).ravel()


def carrier_frequency(ref: ReferenceWave, plane: PlaneSpec) -> tuple[float, float]:
    """Reference carrier in cycles/sample along (x, z), folded into [-0.5, 0.5)."""
    px, pz = plane.pitch
    fx = ref.alpha_x * px / ref.wavelength
    fz = ref.alpha_z * pz / ref.wavelength
    return ((fx + 0.5) % 1.0) - 0.5, ((fz + 0.5) % 1.0) - 0.5


def check_carrier(ref: ReferenceWave, plane: PlaneSpec, rc: float = DEFAULT_RC,
                  gain: float | None = None) -> bool:
    """Warn with :class:`CarrierOverlap` if the twin or zero-order terms reach the pass-band.

    After the shift to baseband the twin image sits at twice the carrier
    (radius ``r``) and the object zero-order at the carrier (radius ``2r``).
    The zero-order is scaled by 1/``gain`` (reference over object peak), so
    it is ignored once ``gain`` reaches ``ZERO_ORDER_GAIN``.
    """
    fx, fz = carrier_frequency(ref, plane)
    tx, tz = ((2 * fx + 0.5) % 1.0) - 0.5, ((2 * fz + 0.5) % 1.0) - 0.5
    radius = rc * 0.5
    problems = []
    if np.hypot(tx, tz) < 2 * radius:
        problems.append("twin")
    if np.hypot(fx, fz) < 3 * radius and not (gain is not None and gain >= ZERO_ORDER_GAIN):
        problems.append("zero-order")
    if problems:
        warnings.warn(
            f"carrier ({fx:.3f}, {fz:.3f}) cycles/sample with pass-band radius {radius:.3f}: "
            f"{' and '.join(problems)} term will leak",
            CarrierOverlap, stacklevel=2,
        )
    return not problems


def passband_basis(shape: tuple[int, int], rc: float = DEFAULT_RC) -> np.ndarray:
    """Orthonormal columns spanning fields whose spectrum lies in the pass-band."""
    nz, nx = shape
    iz, ix = np.nonzero(passband_mask(shape, rc))
    z = np.arange(nz)[:, None, None]
    x = np.arange(nx)[None, :, None]
    modes = np.exp(2j * np.pi * (iz[None, None, :] * z / nz + ix[None, None, :] * x / nx))
    return modes.reshape(nz * nx, -1) / np.sqrt(nz * nx)
