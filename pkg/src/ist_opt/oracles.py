"""Brute-force and finite-difference reference computations.

Nothing in here is used by the solvers.  Each function recomputes a quantity
from its definition (assembled matrices, dense solves, central differences)
so the analytic formulas in :mod:`ist_opt.manifold` and
:mod:`ist_opt.geometry` can be checked against something independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import EuclideanDerivatives
from .kernels import _sym
from .manifold import (
    ManifoldSpec,
    PointWorkspace,
    gradient_lyapunov,
    metric_matrix_at,
    project_lyapunov,
)

FD_STEP = 1e-5


class StepTooLargeError(ValueError):
    pass


class SingularComplementError(np.linalg.LinAlgError):
    pass


# --- X_perp and the unsimplified inverse formulas -------------------------------

@dataclass(frozen=True)
class NullComplement:
    Xperp: np.ndarray


def null_complement(W: PointWorkspace) -> NullComplement:
    """Orthonormal basis of the orthogonal complement of range(X), from the SVD of X."""
    X = W.X
    n, p = X.shape
    U, _, _ = np.linalg.svd(X, full_matrices=True)
    return NullComplement(U[:, p:].copy())


def check_identity_eq(W: PointWorkspace, Xperp: np.ndarray) -> float:
    """Frobenius residual of ``X J X^T A + A^-1 Xp (Xp^T A^-1 Xp)^-1 Xp^T = I``."""
    spec = W.spec
    Ainv = spec.Ainv
    mid = Xperp.T @ Ainv @ Xperp
    if mid.size and np.linalg.cond(mid) > 1e12:
        raise SingularComplementError("X_perp^T A^-1 X_perp is numerically singular")
    lhs = W.XJ @ W.AX.T
    if mid.size:
        lhs = lhs + Ainv @ Xperp @ np.linalg.solve(mid, Xperp.T)
    return float(np.linalg.norm(lhs - np.eye(spec.n)))


def inverse_via_complement(W: PointWorkspace, Xperp: np.ndarray) -> np.ndarray:
    """Metric inverse written with an explicit null-space complement of X."""
    spec = W.spec
    Ainv, X, rho = spec.Ainv, W.X, spec.rho
    out = rho * X @ X.T
    if Xperp.shape[1] == 0:
        return out
    if spec.metric == "g1":
        return out + Ainv @ Xperp @ np.linalg.solve(Xperp.T @ Xperp, Xperp.T) @ Ainv
    K = np.linalg.solve(Xperp.T @ Ainv @ Xperp, Xperp.T)
    return out + Ainv @ K.T @ (Xperp.T @ Xperp) @ K @ Ainv


# --- finite-difference metric derivatives ----------------------------------------

def _in_open_set(spec: ManifoldSpec, X: np.ndarray) -> bool:
    s1 = np.linalg.svd(X, compute_uv=False)
    s2 = np.linalg.svd(X.T @ spec.A @ X, compute_uv=False)
    return s1[-1] > 1e-8 * s1[0] and s2[-1] > 1e-8 * s2[0]


def fd_dmetric(W: PointWorkspace, zeta: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central difference ``(G(X + h zeta) - G(X - h zeta)) / 2h`` of the assembled metric."""
    if h <= 0:
        raise ValueError("h must be positive")
    spec, X = W.spec, W.X
    Xp, Xm = X + h * zeta, X - h * zeta
    if not (_in_open_set(spec, Xp) and _in_open_set(spec, Xm)):
        raise StepTooLargeError(f"X +- {h} zeta leaves the open set where the metric is defined")
    return (metric_matrix_at(spec, Xp) - metric_matrix_at(spec, Xm)) / (2.0 * h)


class FDBasis:
    """``DG(X)[E_ab]`` by central differences for every unit direction ``E_ab``.

    Stored as an array of shape ``(n, p, n, n)``; contracting it against H
    gives the Riesz representer of ``zeta -> tr(H DG[zeta])`` in coordinates.
    """

    def __init__(self, W: PointWorkspace, h: float = FD_STEP):
        n, p = W.X.shape
        self.W = W
        self.G = metric_matrix_at(W.spec, W.X)
        T = np.empty((n, p, n, n))
        E = np.zeros((n, p))
        for a in range(n):
            for b in range(p):
                E[a, b] = 1.0
                T[a, b] = fd_dmetric(W, E, h)
                E[a, b] = 0.0
        self.T = T

    def adjoint(self, H: np.ndarray) -> np.ndarray:
        theta = np.einsum("abij,ji->ab", self.T, H)
        return np.linalg.solve(self.G, theta)


def fd_adjoint_assembly(W: PointWorkspace, H: np.ndarray, h: float = FD_STEP,
                        basis: FDBasis | None = None) -> np.ndarray:
    """Adjoint ``DG(X)^*[H]`` assembled entrywise from ``tr(H DG[E_ab])``."""
    H = np.asarray(H, dtype=float)
    if np.linalg.norm(H - H.T) > 1e-12 * max(1.0, np.linalg.norm(H)):
        raise ValueError("H must be symmetric")
    basis = basis if basis is not None else FDBasis(W, h)
    return basis.adjoint(H)


def oracle_christoffel(W: PointWorkspace, xi, eta, h: float = FD_STEP, basis: FDBasis | None = None):
    basis = basis if basis is not None else FDBasis(W, h)
    G = basis.G
    first = np.linalg.solve(G, fd_dmetric(W, xi, h) @ eta + fd_dmetric(W, eta, h) @ xi)
    return 0.5 * (first - basis.adjoint(_sym(xi @ eta.T)))


class OracleHessian:
    """Hessian assembled from finite-difference metric derivatives.

    Uses a dense metric matrix, dense solves in place of the closed-form
    inverse, the Lyapunov projection and the Lyapunov gradient.
    """

    def __init__(self, W: PointWorkspace, derivs: EuclideanDerivatives, h: float = FD_STEP):
        self.W = W
        self.h = h
        self.derivs = derivs
        self.basis = FDBasis(W, h)
        G = self.basis.G
        self._Gfun = lambda X: G
        self.Ginv_egrad = np.linalg.solve(G, derivs.egrad)
        self.grad = gradient_lyapunov(W, derivs.egrad, self._Gfun)

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        W, G, h = self.W, self.basis.G, self.h
        J = W.spec.J
        body = (np.linalg.solve(G, -fd_dmetric(W, xi, h) @ self.Ginv_egrad + self.derivs.ehess(xi))
                - xi @ (J @ _sym(W.AX.T @ self.Ginv_egrad))
                + oracle_christoffel(W, xi, self.grad, h, self.basis))
        return project_lyapunov(W, body, self._Gfun)


def oracle_hessian(W: PointWorkspace, derivs: EuclideanDerivatives, xi: np.ndarray,
                   h: float = FD_STEP) -> np.ndarray:
    return OracleHessian(W, derivs, h)(xi)


# --- generalized eigenproblem -----------------------------------------------------

@dataclass(frozen=True)
class GeneralizedEigenpairs:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray


def dense_generalized_eig(M: np.ndarray, A: np.ndarray) -> GeneralizedEigenpairs:
    """All pairs of ``M v = lambda A v`` for SPD M and symmetric invertible A.

    Solved as the definite pencil ``A v = mu M v`` with ``lambda = 1/mu``;
    eigenvalues are returned ordered by increasing ``lambda``.
    """
    mu, V = scipy.linalg.eigh(A, M)
    if np.any(np.abs(mu) < 1e-14 * np.abs(mu).max()):
        raise np.linalg.LinAlgError("pencil breakdown: A is numerically singular")
    lam = 1.0 / mu
    order = np.argsort(lam)
    lam, V = lam[order], V[:, order]
    res = np.linalg.norm(M @ V - (A @ V) * lam, axis=0) / (np.abs(lam) * np.linalg.norm(A, 2) * np.linalg.norm(V, axis=0))
    return GeneralizedEigenpairs(lam, V, res)


def expected_minimizer_eigenvalues(pairs: GeneralizedEigenpairs, p_plus: int, p_minus: int) -> np.ndarray:
    """The p_plus smallest positive and p_minus smallest-magnitude negative eigenvalues."""
    lam = pairs.eigenvalues
    pos = np.sort(lam[lam > 0])[:p_plus]
    neg = -np.sort(-lam[lam < 0])[:p_minus]
    return np.concatenate([pos, neg])


def subspace_angle_to_eigvecs(X: np.ndarray, pairs: GeneralizedEigenpairs, eigenvalues: np.ndarray) -> float:
    """Largest principal angle between range(X) and the eigenvectors nearest to ``eigenvalues``."""
    idx = [int(np.argmin(np.abs(pairs.eigenvalues - lam))) for lam in eigenvalues]
    V = pairs.eigenvectors[:, idx]
    return float(np.max(scipy.linalg.subspace_angles(X, V)))
