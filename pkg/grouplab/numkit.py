"""Dense numerical kernels with explicit accuracy contracts.

Everything here works in float64. Functions are pure; callers may run them
from any number of workers.
"""
import logging

import numpy as np
import scipy.linalg

from .errors import (
    NotPositiveDefiniteError,
    NotSymmetricError,
    ShapeError,
    ZeroGradientError,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-8
POLAR_TOL = 1e-8
POLAR_MAX_ITER = 50


def derive_rng(master_seed: int, run_id: int = 0) -> np.random.Generator:
    """Independent RNG stream for one run of a sweep"""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(run_id)]))


def _asymmetry(A: np.ndarray) -> float:
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    return float(np.abs(A - A.T).max(initial=0.0)) / scale


def solve_spd(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve AX = B for symmetric positive-definite A by Cholesky"""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != B.shape[0]:
        raise ShapeError(f"solve_spd: A {A.shape} incompatible with B {B.shape}")
    if _asymmetry(A) > SYMMETRY_TOL:
        raise NotSymmetricError("solve_spd: A is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"solve_spd: Cholesky failed ({exc})") from exc
    return scipy.linalg.cho_solve(factor, B)


def _orthonormality_error(X: np.ndarray) -> float:
    gram = X.T @ X
    return float(np.linalg.norm(gram - np.eye(gram.shape[0])))


def polar_factor(G: np.ndarray) -> np.ndarray:
    """Orthonormal polar factor UVᵀ of G.

    Newton-Schulz iteration on the Frobenius-normalized input, stopped once
    ‖XᵀX − I‖_F ≤ 1e-8 and polished with one extra step. Falls back to an SVD
    when the cap is hit (rank-deficient or badly conditioned input).
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2:
        raise ShapeError(f"polar_factor expects a matrix, got shape {G.shape}")
    norm = np.linalg.norm(G)
    if norm == 0.0:
        raise ZeroGradientError("polar_factor of an all-zero matrix")

    # Iterate on the tall orientation so XᵀX is the small Gram
    wide = G.shape[0] < G.shape[1]
    X = (G.T if wide else G) / norm
    eye = np.eye(X.shape[1])
    converged = False
    for _ in range(POLAR_MAX_ITER):
        X = X @ (1.5 * eye - 0.5 * (X.T @ X))
        if _orthonormality_error(X) <= POLAR_TOL:
            X = X @ (1.5 * eye - 0.5 * (X.T @ X))
            converged = True
            break

    if not converged:
        logger.debug("Newton-Schulz did not converge; using SVD polar factor")
        U, _, Vt = scipy.linalg.svd(G.T if wide else G, full_matrices=False)
        X = U @ Vt
    return X.T if wide else X


def sym_eigvals(H: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending"""
    H = np.asarray(H, dtype=np.float64)
    if H.size == 0:
        return np.zeros(0)
    return scipy.linalg.eigvalsh(0.5 * (H + H.T))


def sym_eig_extremes(H: np.ndarray) -> tuple[float, float]:
    """(λ_min, λ_max) of a symmetric matrix"""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ShapeError(f"sym_eig_extremes expects a square matrix, got {H.shape}")
    if H.shape[0] == 0:
        return 0.0, 0.0
    scale = max(1.0, float(np.linalg.norm(H, 2)))
    if float(np.abs(H - H.T).max()) > 1e-6 * scale:
        raise NotSymmetricError("sym_eig_extremes: H is not symmetric")
    Hs = 0.5 * (H + H.T)
    n = Hs.shape[0]
    lo = scipy.linalg.eigh(Hs, eigvals_only=True, subset_by_index=[0, 0])
    hi = scipy.linalg.eigh(Hs, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return float(lo[0]), float(hi[0])


def power_spectrum(u: np.ndarray) -> np.ndarray:
    """Per-frequency power of u with cos/sin masses combined.

    Length ⌊M/2⌋ + 1; sums to ‖u − mean(u)‖².
    """
    u = np.asarray(u, dtype=np.float64)
    M = u.shape[0]
    if M < 1:
        raise ShapeError("power_spectrum needs at least one sample")
    spectrum = np.abs(np.fft.rfft(u - u.mean())) ** 2 / M
    # Bins other than DC and Nyquist stand for a conjugate pair
    upper = M // 2 if M % 2 == 0 else M // 2 + 1
    spectrum[1:upper] *= 2.0
    spectrum[0] = 0.0
    return spectrum


def diag_err(A: np.ndarray) -> float:
    """‖A − Diag(A)‖_F / ‖A‖_F (NaN for a zero matrix)"""
    A = np.asarray(A)
    total = np.linalg.norm(A)
    if total == 0.0:
        return float("nan")
    off = A - np.diag(np.diag(A))
    return float(np.linalg.norm(off) / total)


def frobenius_cosine(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius cosine similarity (NaN if either side is zero)"""
    na, nb = np.linalg.norm(A), np.linalg.norm(B)
    if na == 0.0 or nb == 0.0:
        return float("nan")
    return float(np.real(np.vdot(A, B)) / (na * nb))
