"""Dense matrix utilities shared by the rest of the package."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


def _check_square(S: np.ndarray, name: str = "S") -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError(f"{name} has non-finite entries")
    return S


def sym(S: np.ndarray) -> np.ndarray:
    S = _check_square(S)
    return 0.5 * (S + S.T)


def skew(S: np.ndarray) -> np.ndarray:
    S = _check_square(S)
    return 0.5 * (S - S.T)


def _sym(S):
    # unchecked variant for hot paths
    return 0.5 * (S + S.T)


def _skew(S):
    return 0.5 * (S - S.T)


@dataclass(frozen=True)
class SymEigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        Q = self.eigenvectors
        return (Q * self.eigenvalues) @ Q.T


def sym_eig(S: np.ndarray, rtol: float = 1e-12) -> SymEigResult:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    S = _check_square(S)
    scale = max(np.linalg.norm(S), 1.0)
    if np.linalg.norm(S - S.T) > rtol * scale:
        raise ValueError("sym_eig requires a symmetric matrix")
    w, Q = np.linalg.eigh(_sym(S))
    return SymEigResult(w, Q)


# Pade coefficients b_0..b_13 for the [13/13] approximant.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def mat_exp(S: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a degree-13 Pade approximant.

    The argument is scaled by 2**-s so that its 1-norm is below theta_13
    (Higham 2005), the rational approximant is evaluated and then squared
    s times.
    """
    S = _check_square(S)
    n = S.shape[0]
    ident = np.eye(n)
    norm1 = np.linalg.norm(S, 1)
    if norm1 == 0.0:
        return ident
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
    T = S / (2.0 ** s)

    b = _PADE13
    T2 = T @ T
    T4 = T2 @ T2
    T6 = T4 @ T2
    U = T @ (T6 @ (b[13] * T6 + b[11] * T4 + b[9] * T2)
             + b[7] * T6 + b[5] * T4 + b[3] * T2 + b[1] * ident)
    V = (T6 @ (b[12] * T6 + b[10] * T4 + b[8] * T2)
         + b[6] * T6 + b[4] * T4 + b[2] * T2 + b[0] * ident)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def solve_lyapunov(S: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Solve ``S U + U S = R`` for symmetric positive-definite ``S``.

    S is diagonalised once, after which the equation decouples entrywise.
    """
    S = _check_square(S, "S")
    R = _check_square(R, "R")
    if S.shape != R.shape:
        raise ValueError(f"shape mismatch: S{S.shape} vs R{R.shape}")
    lam, Q = np.linalg.eigh(_sym(S))
    if lam[0] <= 0.0:
        raise DomainError(
            f"Lyapunov operator requires SPD S; smallest eigenvalue is {lam[0]:.3e}")
    Rt = Q.T @ R @ Q
    U = Q @ (Rt / (lam[:, None] + lam[None, :])) @ Q.T
    return _sym(U) if np.allclose(R, R.T, rtol=0, atol=1e-14 * max(1.0, np.abs(R).max())) else U


def random_orthogonal(n: int, seed: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factor of a Gaussian matrix."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def random_spd(n: int, seed: int) -> np.ndarray:
    """Well-conditioned random SPD matrix with spectral norm one."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    M = B.T @ B + n * np.eye(n)
    M = _sym(M)
    return M / np.linalg.eigvalsh(M)[-1]


def child_seed(seed: int, k: int) -> int:
    """Deterministic independent sub-seed for the k-th consumer of ``seed``."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, k]).generate_state(1)[0])
