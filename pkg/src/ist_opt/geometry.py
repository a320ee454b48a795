"""Levi-Civita connection, Riemannian gradient and Hessian for the two canonical metrics.

Everything here assumes ``W.spec.metric`` is ``"g1"`` or ``"g2"``.  The
Christoffel function is available in three forms:

* :func:`christoffel_ambient` -- the Koszul expression built from ``DG`` and ``DG*``;
* :func:`christoffel_unsimplified` -- the same, expanded into the B', C, D, E terms;
* :func:`christoffel_projected` -- the cheap tangent-space form used in the Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import _skew, _sym
from .manifold import (
    ManifoldSpec,
    PointWorkspace,
    metric_inverse_apply,
    project_closed_form,
)


def _require_canonical(spec: ManifoldSpec):
    if not spec.canonical:
        raise NotImplementedError("second-order geometry is only derived for the g1/g2 metrics")


def _project_frame(W: PointWorkspace, K: np.ndarray) -> np.ndarray:
    # P(X K) = X (K - J sym(J K)) since X^T A X = J
    J = W.spec.J
    return W.X @ (K - J @ _sym(J @ K))


# --- metric derivative and adjoint --------------------------------------------

def dmetric_at(spec: ManifoldSpec, X: np.ndarray, zeta: np.ndarray, metric: str | None = None) -> np.ndarray:
    """``DG(X)[zeta]`` at any full-rank X (the formulas are valid off the manifold)."""
    metric = spec.metric if metric is None else metric
    A, J, rho = spec.A, spec.J, spec.rho
    out = (2.0 / rho) * (A @ _sym(X @ zeta.T) @ A)
    if metric == "g1":
        AX = A @ X
        S = A - AX @ J @ AX.T
        out -= 4.0 * _sym(A @ _sym(X @ J @ zeta.T) @ A @ S)
    elif metric == "g2":
        M = np.linalg.inv(X.T @ X)
        XM = X @ M
        out -= 2.0 * _sym(XM @ zeta.T)
        out += 2.0 * XM @ _sym(zeta.T @ X) @ XM.T
    else:
        raise NotImplementedError(f"no metric derivative for {metric!r}")
    return out


def dmetric(W: PointWorkspace, zeta: np.ndarray) -> np.ndarray:
    spec = W.spec
    _require_canonical(spec)
    A, rho = spec.A, spec.rho
    out = (2.0 / rho) * (A @ _sym(W.X @ zeta.T) @ A)
    if spec.metric == "g1":
        out -= 4.0 * _sym(A @ _sym(W.XJ @ zeta.T) @ A @ W.SX)
    else:
        XM = W.X @ W.MX
        out -= 2.0 * _sym(XM @ zeta.T)
        out += 2.0 * XM @ _sym(zeta.T @ W.X) @ XM.T
    return out


def dmetric_adjoint(W: PointWorkspace, H: np.ndarray) -> np.ndarray:
    """Adjoint of ``DG(X)`` w.r.t. the metric on R^{n x p} and the trace pairing on Sym(n)."""
    spec = W.spec
    _require_canonical(spec)
    H = np.asarray(H, dtype=float)
    if np.linalg.norm(H - H.T) > 1e-12 * max(1.0, np.linalg.norm(H)):
        raise ValueError("dmetric_adjoint requires a symmetric argument")
    A, rho = spec.A, spec.rho
    AX = W.AX
    K = (2.0 / rho) * (A @ (H @ AX))
    if spec.metric == "g1":
        K -= 4.0 * _sym(A @ W.SX @ H @ A) @ W.XJ
    else:
        XM = W.X @ W.MX
        K -= 2.0 * H @ XM
        K += 2.0 * XM @ (W.X.T @ H @ XM)
    return metric_inverse_apply(W, K)


def christoffel_ambient(W: PointWorkspace, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Christoffel function of the ambient metric from Koszul's formula."""
    first = metric_inverse_apply(W, dmetric(W, xi) @ eta + dmetric(W, eta) @ xi)
    return 0.5 * (first - dmetric_adjoint(W, _sym(xi @ eta.T)))


# --- Christoffel terms ----------------------------------------------------------

@dataclass(frozen=True)
class ChristoffelTerms:
    Bprime: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    symPi: np.ndarray
    OmegaXi: np.ndarray
    OmegaEta: np.ndarray


def bprime_term(W: PointWorkspace, xi, eta):
    A = W.spec.A
    return (_sym(W.X @ xi.T) @ A @ eta + _sym(W.X @ eta.T) @ A @ xi
            - _sym(xi @ eta.T) @ W.AX)


def c_term(W: PointWorkspace, xi, eta):
    A, S, XJ = W.spec.A, W.SX, W.XJ
    return (_sym(A @ _sym(XJ @ xi.T) @ A @ S) @ eta
            + _sym(A @ _sym(XJ @ eta.T) @ A @ S) @ xi
            - _sym(A @ S @ _sym(xi @ eta.T) @ A) @ XJ)


def d_term_direct(W: PointWorkspace, xi, eta):
    XM = W.X @ W.MX
    return _sym(XM @ xi.T) @ eta + _sym(XM @ eta.T) @ xi - _sym(xi @ eta.T) @ XM


def d_term(W: PointWorkspace, xi, eta):
    """O(np^2) rearrangement of :func:`d_term_direct`."""
    X, M = W.X, W.MX
    return (X @ (M @ _sym(xi.T @ eta)) + xi @ _skew(M @ (X.T @ eta))
            + eta @ _skew(M @ (X.T @ xi)))


def e_term(W: PointWorkspace, xi, eta):
    X, M = W.X, W.MX
    Xtxi, Xteta = X.T @ xi, X.T @ eta
    return (_sym(Xtxi.T) @ M @ Xteta + _sym(Xteta.T) @ M @ Xtxi
            - X.T @ _sym(xi @ eta.T) @ X @ M)


def christoffel_terms(W: PointWorkspace, xi: np.ndarray, eta: np.ndarray) -> ChristoffelTerms:
    Om_xi = W.AX.T @ xi
    Om_eta = W.AX.T @ eta
    return ChristoffelTerms(
        Bprime=bprime_term(W, xi, eta),
        B=xi @ Om_eta + eta @ Om_xi,
        C=c_term(W, xi, eta),
        D=d_term(W, xi, eta),
        E=e_term(W, xi, eta),
        symPi=_sym(xi.T @ (W.PiX @ eta)),
        OmegaXi=Om_xi,
        OmegaEta=Om_eta,
    )


def christoffel_unsimplified(W: PointWorkspace, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Ambient Christoffel function written through B', C (g1) or B', D, E (g2)."""
    spec = W.spec
    _require_canonical(spec)
    A, rho = spec.A, spec.rho
    Bp = bprime_term(W, xi, eta)
    if spec.metric == "g1":
        K = A @ Bp / rho - 2.0 * c_term(W, xi, eta)
    else:
        K = (A @ Bp / rho - d_term_direct(W, xi, eta)
             + W.X @ W.MX @ e_term(W, xi, eta))
    return metric_inverse_apply(W, K)


def christoffel_simplified(W: PointWorkspace, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Ambient Christoffel function for tangent inputs after the B' -> B reduction."""
    spec = W.spec
    _require_canonical(spec)
    A, Ainv, rho, X = spec.A, spec.Ainv, spec.rho, W.X
    T = christoffel_terms(W, xi, eta)
    OmOm = _sym(T.OmegaXi @ T.OmegaEta)
    tail = W.XJ @ _sym(xi.T @ A @ eta)
    if spec.metric == "g1":
        return (Ainv @ (W.PiX @ (T.B / rho - 2.0 * Ainv @ T.C))
                + 2.0 * X @ (-rho * X.T @ T.C + OmOm) + tail)
    S = W.SX
    return (Ainv @ (S @ (S @ T.B / rho - T.D + W.AX @ spec.J @ T.symPi))
            + X @ (-rho * T.symPi + 2.0 * OmOm) + tail)


def _projected_from_terms(W: PointWorkspace, T: ChristoffelTerms) -> np.ndarray:
    spec = W.spec
    Ainv, rho, X = spec.Ainv, spec.rho, W.X
    OmOm = _sym(T.OmegaXi @ T.OmegaEta)
    if spec.metric == "g1":
        head = Ainv @ (W.PiX @ (T.B / rho - 2.0 * (Ainv @ T.C)))
        return head + 2.0 * _project_frame(W, -rho * (X.T @ T.C) + OmOm)
    S = W.SX
    head = Ainv @ (S @ (S @ T.B / rho - T.D + W.AX @ (spec.J @ T.symPi)))
    return head + _project_frame(W, -rho * T.symPi + 2.0 * OmOm)


def christoffel_projected(W: PointWorkspace, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Tangent projection of the Christoffel function for tangent ``xi``, ``eta``."""
    _require_canonical(W.spec)
    return _projected_from_terms(W, christoffel_terms(W, xi, eta))


# --- gradient and Hessian ---------------------------------------------------------

@dataclass(frozen=True)
class EuclideanDerivatives:
    """Euclidean gradient of the extension at X and its Hessian action."""

    egrad: np.ndarray
    ehess: Callable[[np.ndarray], np.ndarray]


def riemannian_gradient(W: PointWorkspace, egrad: np.ndarray) -> np.ndarray:
    spec = W.spec
    if not spec.canonical:
        from .manifold import gradient_lyapunov
        return gradient_lyapunov(W, egrad, spec.metric.matrix)
    # X^T A G^-1 K = rho J X^T K on the manifold
    return metric_inverse_apply(W, egrad) - spec.rho * W.XJ @ _sym(spec.J @ (W.X.T @ egrad))


class HessianOperator:
    """``xi -> Hess f(X)[xi]`` at a fixed point.

    The gradient and the other xi-independent pieces are computed once, so a
    single instance can be applied repeatedly inside the inner CG loop.  The
    instance holds no mutable state and may be shared between threads.
    """

    def __init__(self, W: PointWorkspace, derivs: EuclideanDerivatives):
        _require_canonical(W.spec)
        spec = W.spec
        self.W = W
        self.derivs = derivs
        self.egrad = np.asarray(derivs.egrad, dtype=float)
        self.grad = riemannian_gradient(W, self.egrad)
        self.Ginv_egrad = metric_inverse_apply(W, self.egrad)
        self._grad_AX = W.AX.T @ self.grad
        self._grad_PiX = W.PiX @ self.grad
        self._sym_JXtg = _sym(spec.J @ (W.X.T @ self.egrad))

    def _weingarten_like(self, xi):
        # -G^-1 DG[xi] G^-1 egrad + G^-1 ehess[xi] - rho xi J sym(J X^T egrad)
        W = self.W
        spec = W.spec
        return (metric_inverse_apply(W, -(dmetric(W, xi) @ self.Ginv_egrad) + self.derivs.ehess(xi))
                - spec.rho * xi @ (spec.J @ self._sym_JXtg))

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        W = self.W
        spec = W.spec
        Ainv, rho, X = spec.Ainv, spec.rho, W.X
        eta = self.grad
        Om_xi = W.AX.T @ xi
        B = xi @ self._grad_AX + eta @ Om_xi
        OmOm = _sym(Om_xi @ self._grad_AX)
        if spec.metric == "g1":
            C = c_term(W, xi, eta)
            head = Ainv @ (W.PiX @ (B / rho - 2.0 * (Ainv @ C)))
            inner_arg = 2.0 * X @ (-rho * (X.T @ C) + OmOm)
        else:
            S = W.SX
            D = d_term(W, xi, eta)
            symPi = _sym(xi.T @ self._grad_PiX)
            head = Ainv @ (S @ (S @ B / rho - D + W.AX @ (spec.J @ symPi)))
            inner_arg = X @ (-rho * symPi + 2.0 * OmOm)
        return head + project_closed_form(W, inner_arg + self._weingarten_like(xi))

    def general(self, xi: np.ndarray) -> np.ndarray:
        """Same operator assembled from the ambient Koszul Christoffel function."""
        W = self.W
        spec = W.spec
        Xt_A_Ginv_g = W.AX.T @ self.Ginv_egrad
        body = (metric_inverse_apply(W, -(dmetric(W, xi) @ self.Ginv_egrad) + self.derivs.ehess(xi))
                - xi @ (spec.J @ _sym(Xt_A_Ginv_g))
                + christoffel_ambient(W, xi, self.grad))
        return project_closed_form(W, body)


def riemannian_hessian_apply(W: PointWorkspace, derivs: EuclideanDerivatives, xi: np.ndarray) -> np.ndarray:
    return HessianOperator(W, derivs)(xi)
