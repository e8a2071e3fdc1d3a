"""Truncated-SVD pseudoinverse of a scattering matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, EmptySpectrum, NumericalFailure, ValidationError

DEFAULT_EPSILON_REL = 1e-3


@dataclass(frozen=True, eq=False)
class SingularSystem:
    """Full singular system of K with a truncation threshold.

    ``u`` holds the output (sensor) singular vectors as columns, ``vh`` the
    conjugated input (hologram) singular vectors as rows.
    """

    sigma: np.ndarray
    u: np.ndarray
    vh: np.ndarray
    epsilon: float

    @property
    def p0(self) -> int:
        return int(np.count_nonzero(self.sigma > self.epsilon))

    def matrix(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vh


def _as_array(k) -> np.ndarray:
    return np.asarray(getattr(k, "entries", k), dtype=np.complex128)


def decompose(K, epsilon: float = 0.0, *, relative: bool = False) -> SingularSystem:
    """SVD of ``K``; ``epsilon`` is absolute, or a fraction of sigma_1 when ``relative``."""
    a = _as_array(K)
    if a.ndim != 2:
        raise DimensionMismatch("scattering matrix must be two-dimensional")
    if epsilon < 0:
        raise ValidationError("epsilon must be non-negative")
    if not np.isfinite(a).all():
        raise NumericalFailure("matrix has non-finite entries")
    try:
        u, s, vh = sla.svd(a, full_matrices=False, lapack_driver="gesdd")
    except sla.LinAlgError:
        try:
            u, s, vh = sla.svd(a, full_matrices=False, lapack_driver="gesvd")
        except sla.LinAlgError as exc:
            raise NumericalFailure(f"SVD did not converge: {exc}") from None
    eps = float(epsilon) * (s[0] if (relative and s.size) else 1.0)
    return SingularSystem(s, u, vh, eps)


def synthesize_incident(system: SingularSystem, target) -> np.ndarray:
    """Regularised incident field sum_p sigma_p^-1 v_p (u_p^H target), p <= P0."""
    t = np.asarray(target, dtype=np.complex128)
    if t.shape[0] != system.u.shape[0]:
        raise DimensionMismatch(f"target has {t.shape[0]} samples, expected {system.u.shape[0]}")
    p0 = system.p0
    if p0 == 0:
        raise EmptySpectrum(
            f"no singular value exceeds epsilon={system.epsilon:.3e}; matrix unusable as a key"
        )
    coeff = (system.u[:, :p0].conj().T @ t) / system.sigma[:p0].reshape((-1,) + (1,) * (t.ndim - 1))
    return system.vh[:p0].conj().T @ coeff
