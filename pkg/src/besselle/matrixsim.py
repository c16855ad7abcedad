"""LUE eigenvalue evolution: the matrix route to the Dyson Bessel process.

A(t) is an N x (N+alpha) matrix of independent complex Brownian entries (real
and imaginary parts each of variance t), built by cumulative Gaussian
increments so multi-time correlations are faithful.  Y(t) are the eigenvalues
of A(t)A(t)*; the hard-edge window is L_i^N(t) = 4N * Y_i(1 + t/(4N)).
"""

from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, maybe_njit
from .bridge import LineEnsemble

# cyclic Jacobi handles small matrices exactly per the documented tolerance;
# larger matrices fall back to LAPACK for speed (identical spectra, checked
# in tests)
JACOBI_MAX_N = 24


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class LuePath:
    N: int
    alpha: int
    times: np.ndarray
    eigenvalues: np.ndarray  # (len(times), N), ascending per row
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))
        if self.eigenvalues.shape != (len(self.times), self.N):
            raise ValueError("eigenvalues must have shape (len(times), N)")
        if np.any(self.eigenvalues < -1e-10):
            raise ValueError("eigenvalues must be >= 0 (PSD matrix)")
        if np.any(np.diff(self.eigenvalues, axis=1) < 0.0):
            raise ValueError("eigenvalues must be sorted ascending")


@maybe_njit(cache=True)
def _jacobi_eigvals(A, tol, max_sweeps):
    n = A.shape[0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += abs(A[i, j]) ** 2
    fro = np.sqrt(fro)
    thresh = tol * fro if fro > 0.0 else tol
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * abs(A[p, q]) ** 2
        if np.sqrt(off) < thresh:
            out = np.empty(n)
            for i in range(n):
                out[i] = A[i, i].real
            return np.sort(out)
        for p in range(n):
            for q in range(p + 1, n):
                z = A[p, q]
                r = abs(z)
                if r < 1e-300:
                    continue
                e = z / r  # phase e^{i phi}
                a = A[p, p].real
                b = A[q, q].real
                tau = (b - a) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ec = np.conj(e)
                # columns: A <- A G with G = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                for i in range(n):
                    aip = A[i, p]
                    aiq = A[i, q]
                    A[i, p] = c * aip - s * ec * aiq
                    A[i, q] = s * aip + c * ec * aiq
                # rows: A <- G^dagger A
                for i in range(n):
                    api = A[p, i]
                    aqi = A[q, i]
                    A[p, i] = c * api - s * e * aqi
                    A[q, i] = s * api + c * e * aqi
                A[p, q] = 0.0
                A[q, p] = 0.0
    return np.full(n, np.nan)


def hermitian_eigenvalues(matrix, tol=1e-12, max_sweeps=60):
    """Eigenvalues of a complex Hermitian matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm drops below tol * ||M||_F.
    """
    M = np.asarray(matrix, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.linalg.norm(M)))
    if np.max(np.abs(M - M.conj().T)) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian to 1e-12")
    vals = _jacobi_eigvals(M.copy(), float(tol), int(max_sweeps))
    if np.any(np.isnan(vals)):
        raise EigenError(
            f"Jacobi sweep limit reached; ||M||_F = {np.linalg.norm(M):.3e}, "
            f"cond estimate = {np.linalg.cond(M):.3e}"
        )
    return vals


def sample_lue_path(N, alpha, times, seed, method="auto"):
    """One LUE eigenvalue path observed at the given increasing times."""
    if alpha != int(alpha) or alpha < 0:
        raise ValueError("alpha must be a nonnegative integer")
    alpha = int(alpha)
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0.0) or np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be positive and increasing")
    if method == "auto":
        method = "jacobi" if N <= JACOBI_MAX_N else "lapack"
    rng = np.random.default_rng(seed)
    A = np.zeros((N, N + alpha), dtype=np.complex128)
    prev_t = 0.0
    eigs = np.empty((len(times), N))
    for m, t in enumerate(times):
        sd = np.sqrt(t - prev_t)
        A += sd * (rng.standard_normal(A.shape) + 1j * rng.standard_normal(A.shape))
        prev_t = t
        M = A @ A.conj().T
        if method == "jacobi":
            eigs[m] = hermitian_eigenvalues(M)
        else:
            eigs[m] = np.linalg.eigvalsh(M)
    eigs[eigs < 0.0] = np.maximum(eigs[eigs < 0.0], -1e-10)
    return LuePath(N, alpha, times, eigs, seed)


def hard_edge_times(N, t_grid):
    """Matrix observation times carrying the hard-edge window t_grid."""
    return 1.0 + np.asarray(t_grid, dtype=float) / (4.0 * N)


def hard_edge_scale(path, t_grid):
    """L_i^N(t) = 4N * Y_i(1 + t/(4N)) as a LineEnsemble over t_grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    expected = hard_edge_times(path.N, t_grid)
    if len(t_grid) != len(path.times) or np.any(
        np.abs(path.times - expected) > 1e-12 * np.maximum(1.0, np.abs(expected))
    ):
        raise ValueError("path times do not match 1 + t/(4N) for the given t_grid")
    return LineEnsemble(path.N, t_grid, 4.0 * path.N * path.eigenvalues.T)
