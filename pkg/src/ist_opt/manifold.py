"""The indefinite Stiefel manifold {X : X^T A X = J} and its first-order geometry.

Tangent vectors are plain ``n x p`` arrays; every operation that needs a
base point takes the :class:`PointWorkspace` of that point explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .kernels import _skew, _sym, mat_exp, solve_lyapunov, sym_eig

FEASIBILITY_TOL = 1e-10
WORKSPACE_ADMIT_TOL = 1e-8


class InfeasiblePointError(ValueError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"point is off the manifold: ||X^T A X - J||_F = {residual:.3e} > {tol:.1e}")
        self.residual = residual


@dataclass(frozen=True)
class LyapunovMetric:
    """A user supplied metric ``X -> G_X`` (n x n SPD).

    Only projection and gradient are available for such metrics; they go
    through a Lyapunov solve instead of closed forms.
    """

    matrix: Callable[[np.ndarray], np.ndarray]
    name: str = "lyapunov"


Metric = Union[str, LyapunovMetric]
CANONICAL_METRICS = ("g1", "g2")


@dataclass(frozen=True, eq=False)
class ManifoldSpec:
    A: np.ndarray
    J: np.ndarray
    metric: Metric = "g1"
    rho: float = 1.0
    Ainv: np.ndarray = field(init=False, repr=False)
    p_plus: int = field(init=False)
    p_minus: int = field(init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        J = np.array(self.J, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError(f"J must be square, got {J.shape}")
        n, p = A.shape[0], J.shape[0]
        if p > n:
            raise ValueError(f"need p <= n, got p={p}, n={n}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(J))):
            raise ValueError("A and J must be finite")
        if np.linalg.norm(A - A.T) != 0.0:
            raise ValueError("A must be exactly symmetric")
        if np.linalg.norm(J - J.T) != 0.0:
            raise ValueError("J must be exactly symmetric")
        if np.linalg.norm(J @ J - np.eye(p)) > 1e-12:
            raise ValueError("J must satisfy J^2 = I")
        if isinstance(self.metric, str) and self.metric not in CANONICAL_METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {CANONICAL_METRICS}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")

        eig = sym_eig(A)
        lam = eig.eigenvalues
        if np.any(np.abs(lam) < 1e-12 * np.abs(lam).max()):
            raise ValueError("A is numerically singular")
        jl = np.linalg.eigvalsh(J)
        p_plus, p_minus = int(np.sum(jl > 0)), int(np.sum(jl < 0))
        if p_plus > int(np.sum(lam > 0)) or p_minus > int(np.sum(lam < 0)):
            raise ValueError(
                f"inertia mismatch: J has ({p_plus}, {p_minus}) signs, "
                f"A has ({int(np.sum(lam > 0))}, {int(np.sum(lam < 0))})")

        Q = eig.eigenvectors
        A.setflags(write=False)
        J.setflags(write=False)
        Ainv = _sym((Q / lam) @ Q.T)
        Ainv.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "Ainv", Ainv)
        object.__setattr__(self, "p_plus", p_plus)
        object.__setattr__(self, "p_minus", p_minus)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.J.shape[0]

    @property
    def dim(self) -> int:
        """Dimension of the manifold, ``np - p(p+1)/2``."""
        return self.n * self.p - self.p * (self.p + 1) // 2

    @property
    def canonical(self) -> bool:
        return isinstance(self.metric, str)

    def with_metric(self, metric: Metric, rho: float | None = None) -> "ManifoldSpec":
        return ManifoldSpec(self.A, self.J, metric, self.rho if rho is None else rho)


class PointWorkspace:
    """A feasible point together with the matrices every formula reuses.

    ``MX = (X^T X)^-1``, ``PiX = I - X MX X^T``, ``SX = A - AX J X^T A`` and
    ``QX = I - X J X^T A``.
    """

    __slots__ = ("spec", "X", "AX", "MX", "PiX", "SX", "QX", "XJ", "residual")

    def __init__(self, spec: ManifoldSpec, X: np.ndarray, residual: float):
        X = np.array(X, dtype=float)
        X.setflags(write=False)
        A, J = spec.A, spec.J
        AX = A @ X
        MX = np.linalg.inv(X.T @ X)
        MX = _sym(MX)
        XJ = X @ J
        self.spec = spec
        self.X = X
        self.AX = AX
        self.MX = MX
        self.XJ = XJ
        self.PiX = np.eye(spec.n) - X @ MX @ X.T
        self.SX = A - AX @ J @ AX.T
        self.QX = np.eye(spec.n) - XJ @ AX.T
        self.residual = residual
        for name in ("AX", "MX", "XJ", "PiX", "SX", "QX"):
            getattr(self, name).setflags(write=False)

    def __repr__(self):
        return f"PointWorkspace(n={self.spec.n}, p={self.spec.p}, residual={self.residual:.2e})"


def feasibility_residual(spec: ManifoldSpec, X: np.ndarray) -> float:
    X = np.asarray(X, dtype=float)
    if X.shape != (spec.n, spec.p):
        raise ValueError(f"expected X of shape {(spec.n, spec.p)}, got {X.shape}")
    return float(np.linalg.norm(X.T @ spec.A @ X - spec.J))


def make_workspace(spec: ManifoldSpec, X: np.ndarray, tol: float = WORKSPACE_ADMIT_TOL) -> PointWorkspace:
    res = feasibility_residual(spec, X)
    if not res <= tol:
        raise InfeasiblePointError(res, tol)
    return PointWorkspace(spec, X, res)


# --- metrics -----------------------------------------------------------------

def metric_matrix_at(spec: ManifoldSpec, X: np.ndarray, metric: Metric | None = None) -> np.ndarray:
    """Assemble ``G_X`` at any full-rank ``X`` (not necessarily feasible).

    Uses the defining formulas, not the simplified on-manifold ones, so it is
    valid at the perturbed points used by finite-difference checks.
    """
    metric = spec.metric if metric is None else metric
    A, J, rho = spec.A, spec.J, spec.rho
    AX = A @ X
    if isinstance(metric, LyapunovMetric):
        return np.asarray(metric.matrix(X), dtype=float)
    if metric == "g1":
        S = A - AX @ J @ AX.T
        return AX @ AX.T / rho + S @ S
    if metric == "g2":
        return AX @ AX.T / rho + np.eye(spec.n) - X @ np.linalg.solve(X.T @ X, X.T)
    raise ValueError(f"unknown metric {metric!r}")


def metric_matrix(W: PointWorkspace) -> np.ndarray:
    return metric_matrix_at(W.spec, W.X)


def metric_apply(W: PointWorkspace, v: np.ndarray) -> np.ndarray:
    """``G_X v`` for an n-vector or an n x k matrix."""
    spec = W.spec
    if not spec.canonical:
        return metric_matrix(W) @ v
    AXtv = W.AX.T @ v
    out = W.AX @ AXtv / spec.rho
    if spec.metric == "g1":
        out += W.SX @ (W.SX @ v)
    else:
        out += W.PiX @ v
    return out


def metric_inverse_apply(W: PointWorkspace, v: np.ndarray) -> np.ndarray:
    spec = W.spec
    if not spec.canonical:
        raise NotImplementedError(
            f"metric {spec.metric.name!r} has no closed-form inverse; use the Lyapunov path")
    out = spec.rho * (W.X @ (W.X.T @ v))
    if spec.metric == "g1":
        Ainv = spec.Ainv
        out += Ainv @ (W.PiX @ (Ainv @ v))
    else:
        out += W.QX @ (W.QX.T @ v)
    return out


def inner(W: PointWorkspace, xi: np.ndarray, eta: np.ndarray) -> float:
    return float(np.sum(xi * metric_apply(W, eta)))


def norm(W: PointWorkspace, xi: np.ndarray) -> float:
    return float(np.sqrt(max(inner(W, xi, xi), 0.0)))


# --- tangent space -----------------------------------------------------------

def tangency_residual(W: PointWorkspace, xi: np.ndarray) -> float:
    return float(np.linalg.norm(_sym(W.AX.T @ xi)))


def project_closed_form(W: PointWorkspace, Y: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the tangent space for the canonical metrics."""
    return Y - W.XJ @ _sym(W.AX.T @ Y)


def _lyapunov_factor(W: PointWorkspace, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    GinvAX = np.linalg.solve(G, W.AX)
    L = _sym(W.AX.T @ GinvAX)
    return GinvAX, L


def project_lyapunov(W: PointWorkspace, Y: np.ndarray,
                     metric: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Projection for a general metric: ``Y - G^-1 A X U`` where U solves
    ``L U + U L = 2 sym(X^T A Y)`` with ``L = X^T A G^-1 A X``.

    ``metric`` maps X to the n x n metric matrix; defaults to ``W.spec.metric``.
    """
    G = metric(W.X) if metric is not None else metric_matrix(W)
    GinvAX, L = _lyapunov_factor(W, G)
    U = solve_lyapunov(L, 2.0 * _sym(W.AX.T @ Y))
    return Y - GinvAX @ U


def gradient_lyapunov(W: PointWorkspace, egrad: np.ndarray,
                      metric: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Riemannian gradient for a general metric via one Lyapunov solve."""
    G = metric(W.X) if metric is not None else metric_matrix(W)
    Ginv_egrad = np.linalg.solve(G, egrad)
    GinvAX, L = _lyapunov_factor(W, G)
    U = solve_lyapunov(L, 2.0 * _sym(W.AX.T @ Ginv_egrad))
    return Ginv_egrad - GinvAX @ U


def project(W: PointWorkspace, Y: np.ndarray) -> np.ndarray:
    if W.spec.canonical:
        return project_closed_form(W, Y)
    return project_lyapunov(W, Y, W.spec.metric.matrix)


# --- random generation and retraction ----------------------------------------

def random_tangent(W: PointWorkspace, seed: int | np.random.Generator) -> np.ndarray:
    """Unit-norm (under the metric) random tangent vector."""
    rng = np.random.default_rng(seed)
    xi = project(W, rng.standard_normal(W.X.shape))
    return xi / norm(W, xi)


def retract_matrix(W: PointWorkspace, xi: np.ndarray) -> np.ndarray:
    """Matrix-exponential retraction

    ``R_X(xi) = [X xi] exp([[J Om, -J xi^T A xi], [I, J Om]]) [I; 0] exp(-J Om)``
    with ``Om = X^T A xi``.
    """
    spec = W.spec
    p, J = spec.p, spec.J
    JOm = J @ (W.AX.T @ xi)
    block = np.block([[JOm, -J @ (xi.T @ (spec.A @ xi))],
                      [np.eye(p), JOm]])
    E = mat_exp(block)[:, :p]
    Y = W.X @ E[:p] + xi @ E[p:]
    return Y @ mat_exp(-JOm)


def retract(W: PointWorkspace, xi: np.ndarray) -> PointWorkspace:
    Y = retract_matrix(W, xi)
    return PointWorkspace(W.spec, Y, feasibility_residual(W.spec, Y))


def random_point(spec: ManifoldSpec, seed: int) -> PointWorkspace:
    """Random feasible point.

    Columns are drawn from A's eigenvectors (scaled by ``1/sqrt|lambda|``)
    with the sign pattern of J, rotated into J's eigenbasis, and finally moved
    by a random tangent step of length 0.5.
    """
    rng = np.random.default_rng(seed)
    eig = sym_eig(spec.A)
    lam, P = eig.eigenvalues, eig.eigenvectors
    jl, V = np.linalg.eigh(spec.J)
    pos = np.flatnonzero(lam > 0)
    neg = np.flatnonzero(lam < 0)
    pick_pos = list(rng.choice(pos, size=spec.p_plus, replace=False))
    pick_neg = list(rng.choice(neg, size=spec.p_minus, replace=False))
    cols = []
    for s in jl:
        i = pick_pos.pop() if s > 0 else pick_neg.pop()
        cols.append(P[:, i] / np.sqrt(abs(lam[i])))
    X0 = np.column_stack(cols) @ V.T
    W0 = make_workspace(spec, X0)
    xi = random_tangent(W0, rng)
    return retract(W0, 0.5 * xi)
