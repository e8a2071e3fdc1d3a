"""Random scattering states and their Foldy-Lax scattering matrices."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from ._backend import kernels, num_threads
from .errors import NumericalFailure, ShapeMismatch, SingularSystemError
from .scene import MediumSpec, Scene, medium_grid, sample_plane
from .wavefield import propagation_matrix

# reciprocal condition number below which the Foldy-Lax system is rejected
RCOND_MIN = 1e-13


@dataclass(frozen=True, eq=False)
class ScatteringState:
    positions: np.ndarray
    potentials: np.ndarray
    state_index: int
    seed: int

    def __post_init__(self):
        if len(self.positions) != len(self.potentials):
            raise ShapeMismatch("positions and potentials differ in length")

    def __len__(self):
        return len(self.potentials)

    def to_dict(self) -> dict:
        return {
            "state_index": self.state_index,
            "seed": self.seed,
            "positions": self.positions.tolist(),
            "potentials": [[z.real, z.imag] for z in self.potentials.tolist()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScatteringState":
        pot = np.asarray(d["potentials"], dtype=np.float64).reshape(-1, 2)
        return cls(
            positions=np.asarray(d["positions"], dtype=np.float64).reshape(-1, 3),
            potentials=pot[:, 0] + 1j * pot[:, 1],
            state_index=int(d["state_index"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    """Dense N x M map from hologram-pixel field to scattered sensor field."""

    entries: np.ndarray
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __matmul__(self, other):
        return self.entries @ other


def sample_state(medium: MediumSpec, state_index: int, seed: int) -> ScatteringState:
    """Particles on the regular medium lattice with i.i.d. uniform potentials.

    The random stream is keyed on ``(seed, state_index)`` so states can be
    drawn independently and in any order.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(state_index)]))
    positions = medium_grid(medium)
    tau = rng.uniform(medium.tau_min, medium.tau_max, size=len(positions))
    if medium.jitter > 0:
        cell = np.array([medium.extent_x / medium.gx, medium.depth / medium.gy,
                         medium.extent_z / medium.gz])
        positions = positions + rng.uniform(-0.5, 0.5, size=positions.shape) * medium.jitter * cell
    return ScatteringState(positions, tau.astype(np.complex128), int(state_index), int(seed))


def _factor(state: ScatteringState, k: float):
    a = kernels.foldy_lax_operator(
        np.ascontiguousarray(state.positions, dtype=np.float64),
        np.ascontiguousarray(state.potentials, dtype=np.complex128),
        float(k), num_threads(),
    )
    anorm = np.abs(a).sum(axis=0).max()
    try:
        lu, piv = sla.lu_factor(a, overwrite_a=True, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise NumericalFailure(f"Foldy-Lax factorisation failed: {exc}") from None
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > RCOND_MIN:
        raise SingularSystemError(f"Foldy-Lax system is numerically singular (rcond={rcond:.3e})")
    return lu, piv


def solve_exciting_fields(state: ScatteringState, incident_at_particles, k: float) -> np.ndarray:
    """Exciting field E from (Id - G_pp diag(tau)) E = psi_inc.

    ``incident_at_particles`` may be a vector or a matrix of right-hand sides
    (one column per incident field); one factorisation serves all of them.
    """
    inc = np.asarray(incident_at_particles, dtype=np.complex128)
    if inc.shape[0] != len(state):
        raise ShapeMismatch(f"incident field has {inc.shape[0]} samples, state has {len(state)} particles")
    if len(state) == 0:
        return inc.copy()
    lu, piv = _factor(state, k)
    return sla.lu_solve((lu, piv), inc, check_finite=False)


def scattering_matrix(state: ScatteringState, scene: Scene) -> ScatteringMatrix:
    """K = G_out diag(tau) (Id - G_pp diag(tau))^-1 G_in, scattered field only."""
    k = scene.k
    holo = sample_plane(scene.hologram)
    sens = sample_plane(scene.sensor)
    g_in = propagation_matrix(holo, state.positions, k)
    exciting = solve_exciting_fields(state, g_in, k)
    del g_in
    exciting *= state.potentials[:, None]
    g_out = propagation_matrix(state.positions, sens, k)
    entries = g_out @ exciting
    if not np.isfinite(entries).all():
        raise NumericalFailure("scattering matrix has non-finite entries")
    return ScatteringMatrix(entries, provenance=f"state:{state.state_index}",
                            meta={"state_index": state.state_index, "seed": state.seed})
