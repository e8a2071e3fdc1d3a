"""Pure numpy kernels. Same signatures as the compiled ``_ckernels``."""
import numpy as np

_FOUR_PI = 4.0 * np.pi
_ROW_BLOCK = 256


def green_matrix(src, obs, k, num_threads=1):
    src = np.ascontiguousarray(src, dtype=np.float64)
    obs = np.ascontiguousarray(obs, dtype=np.float64)
    out = np.empty((obs.shape[0], src.shape[0]), dtype=np.complex128)
    # row blocks bound the (rows, cols, 3) temporary
    with np.errstate(divide="ignore", invalid="ignore"):
        for r0 in range(0, obs.shape[0], _ROW_BLOCK):
            diff = obs[r0:r0 + _ROW_BLOCK, None, :] - src[None, :, :]
            d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            out[r0:r0 + _ROW_BLOCK] = np.exp(1j * k * d) / (_FOUR_PI * d)
    return out


def foldy_lax_operator(points, tau, k, num_threads=1):
    """Id - G_pp diag(tau) with the self-interaction term removed."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.complex128)
    a = green_matrix(points, points, k)
    np.fill_diagonal(a, 0.0)
    a *= -tau[None, :]
    a[np.diag_indices_from(a)] = 1.0
    return a
