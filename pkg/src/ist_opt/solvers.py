"""Steepest descent, nonlinear CG, Newton with inner linear CG, and the CG->Newton hybrid."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .geometry import EuclideanDerivatives, HessianOperator, riemannian_gradient
from .manifold import (
    FEASIBILITY_TOL,
    ManifoldSpec,
    PointWorkspace,
    feasibility_residual,
    inner,
    norm,
    project,
    retract,
    retract_matrix,
)

log = logging.getLogger(__name__)

METHODS = ("sd", "cg", "newton", "hybrid")


class Status(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INNER_FAILURE = "inner_failure"


class LineSearchError(RuntimeError):
    """No acceptable step was found by backtracking."""


@dataclass(frozen=True)
class Problem:
    """``min f(X)`` over the manifold described by ``spec``.

    ``egrad(X)`` and ``ehess(X, xi)`` are the Euclidean gradient and Hessian
    action of a smooth extension of f to full-rank n x p matrices.
    """

    spec: ManifoldSpec
    objective: Callable[[np.ndarray], float]
    egrad: Callable[[np.ndarray], np.ndarray]
    ehess: Callable[[np.ndarray, np.ndarray], np.ndarray]
    check: bool = True

    def __post_init__(self):
        if self.check:
            err = egrad_consistency(self)
            if err > 1e-6:
                raise ValueError(f"egrad disagrees with finite differences of the objective (rel. err {err:.2e})")

    def derivatives(self, X: np.ndarray) -> EuclideanDerivatives:
        return EuclideanDerivatives(self.egrad(X), lambda xi: self.ehess(X, xi))

    def with_spec(self, spec: ManifoldSpec) -> "Problem":
        return replace(self, spec=spec, check=False)


def egrad_consistency(problem: Problem, seed: int = 0, h: float = 1e-6) -> float:
    """Relative gap between ``<egrad, V>`` and a central difference of f along V."""
    rng = np.random.default_rng(seed)
    shape = (problem.spec.n, problem.spec.p)
    X = rng.standard_normal(shape)
    V = rng.standard_normal(shape)
    fd = (problem.objective(X + h * V) - problem.objective(X - h * V)) / (2 * h)
    an = float(np.sum(problem.egrad(X) * V))
    return abs(fd - an) / max(1.0, abs(an))


@dataclass(frozen=True)
class SolverConfig:
    method: str = "hybrid"
    outer_tol: float = 1e-10
    max_outer: int = 500
    inner_tol: float = 1e-10
    max_inner: int | None = None
    switch_tol: float = 1e-6
    step0: float = 1.0
    contraction: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 50

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        for name in ("outer_tol", "inner_tol", "step0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.switch_tol >= 0:
            raise ValueError("switch_tol must be nonnegative")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise ValueError("sufficient_decrease must lie in (0, 1)")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")

    def inner_cap(self, spec: ManifoldSpec) -> int:
        return self.max_inner if self.max_inner is not None else 2 * spec.dim


@dataclass
class IterationRecord:
    iter: int
    phase: str
    f: float
    gradnorm: float
    step: float
    inner_iters: int
    time_ms: float
    feasibility: float
    inner_residual: float = math.nan
    negative_curvature: bool = False
    restarted: bool = False


@dataclass
class SolverTrace:
    records: list[IterationRecord] = field(default_factory=list)
    status: Status = Status.MAX_ITER
    point: PointWorkspace | None = None
    switch_iter: int | None = None
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def gradnorms(self) -> np.ndarray:
        return np.array([r.gradnorm for r in self.records])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.f for r in self.records])

    def phase_iterations(self, phase: str) -> int:
        """Number of steps taken in ``phase`` (a step is credited to the row it produced)."""
        return sum(1 for r in self.records[1:] if r.phase == phase)


# --- line search -------------------------------------------------------------------

def armijo_linesearch(problem: Problem, W: PointWorkspace, direction: np.ndarray,
                      cfg: SolverConfig, f0: float | None = None,
                      grad: np.ndarray | None = None,
                      t_init: float | None = None) -> tuple[float, PointWorkspace]:
    """Backtracking from ``t_init`` (default ``cfg.step0``) until
    ``f(R_X(t d)) <= f(X) + c t <grad f, d>``.

    If the very first trial is accepted the step is doubled for as long as the
    sufficient-decrease condition keeps holding and f keeps going down, so a
    poor initial guess cannot pin the iteration to tiny steps.
    """
    if f0 is None:
        f0 = problem.objective(W.X)
    if grad is None:
        grad = riemannian_gradient(W, problem.egrad(W.X))
    slope = inner(W, grad, direction)
    if not slope < 0:
        raise ValueError(f"not a descent direction: <grad f, d> = {slope:.3e}")
    c = cfg.sufficient_decrease
    t = cfg.step0 if t_init is None or not (t_init > 0 and math.isfinite(t_init)) else t_init

    def accept(step):
        Wn = _trial_point(W, step * direction)
        if Wn is None:
            return None, math.inf
        fn = problem.objective(Wn.X)
        return (Wn, fn) if fn <= f0 + c * step * slope else (None, fn)

    Wn, fn = accept(t)
    if Wn is not None:
        for _ in range(cfg.max_backtracks):
            W2, f2 = accept(2.0 * t)
            if W2 is None or not f2 < fn:
                break
            t, Wn, fn = 2.0 * t, W2, f2
        return t, Wn
    for _ in range(cfg.max_backtracks):
        t *= cfg.contraction
        Wn, fn = accept(t)
        if Wn is not None:
            return t, Wn
    raise LineSearchError(f"Armijo backtracking failed after {cfg.max_backtracks} contractions")


def _trial_point(W: PointWorkspace, xi: np.ndarray) -> PointWorkspace | None:
    # overlong trial steps can overflow the exponentials; such trials count as rejected
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            Y = retract_matrix(W, xi)
            if not np.all(np.isfinite(Y)):
                return None
            res = feasibility_residual(W.spec, Y)
            if not res <= FEASIBILITY_TOL:
                return None
            return PointWorkspace(W.spec, Y, res)
        except np.linalg.LinAlgError:
            return None


# --- inner CG for Newton's equation -----------------------------------------------------

@dataclass
class NewtonStep:
    xi: np.ndarray
    inner_iters: int
    residual: float
    converged: bool
    negative_curvature: bool = False


def newton_direction(problem: Problem | None, W: PointWorkspace, derivs: EuclideanDerivatives,
                     cfg: SolverConfig, hess: Callable[[np.ndarray], np.ndarray] | None = None,
                     grad: np.ndarray | None = None) -> NewtonStep:
    """Solve ``Hess f(X)[xi] = -grad f(X)`` by linear CG in the tangent space.

    Inner products are the Riemannian metric at X.  The loop follows the
    classical recurrences starting from ``xi_0 = 0``; the final residual is
    recomputed with a fresh Hessian application and the iteration resumes
    from the current iterate if recursion drift left it above tolerance.
    Nonpositive curvature stops the loop early and returns the current
    iterate, or ``-grad`` if no step has been taken yet.
    """
    if hess is None:
        op = HessianOperator(W, derivs)
        hess, grad = op, op.grad
    elif grad is None:
        grad = riemannian_gradient(W, derivs.egrad)
    cap = cfg.inner_cap(W.spec)
    tol = cfg.inner_tol

    xi = np.zeros_like(grad)
    r = grad.copy()
    rr = inner(W, r, r)
    used = 0
    while True:
        d = -r
        while math.sqrt(max(rr, 0.0)) >= tol and used < cap:
            Hd = hess(d)
            dHd = inner(W, d, Hd)
            if dHd <= 0:
                if used == 0:
                    xi = -grad
                res = norm(W, hess(xi) + grad)
                return NewtonStep(xi, used, res, False, negative_curvature=True)
            t = rr / dHd
            xi = xi + t * d
            r = r + t * Hd
            rr_new = inner(W, r, r)
            d = -r + (rr_new / rr) * d
            rr = rr_new
            used += 1
        # recheck against a direct Hessian application
        r = hess(xi) + grad
        rr = inner(W, r, r)
        res = math.sqrt(max(rr, 0.0))
        if res < tol or used >= cap:
            return NewtonStep(xi, used, res, res < tol)


# --- drivers -----------------------------------------------------------------------------

class _State:
    __slots__ = ("W", "f", "egrad", "grad", "gnorm")

    def __init__(self, problem: Problem, W: PointWorkspace):
        self.W = W
        self.f = float(problem.objective(W.X))
        self.egrad = problem.egrad(W.X)
        self.grad = riemannian_gradient(W, self.egrad)
        self.gnorm = norm(W, self.grad)


def _run(problem: Problem, x0: PointWorkspace, cfg: SolverConfig, method: str) -> SolverTrace:
    t_start = time.perf_counter()
    trace = SolverTrace()
    switch_tol = {"sd": 0.0, "cg": 0.0, "newton": math.inf, "hybrid": cfg.switch_tol}[method]
    first_order = "sd" if method == "sd" else "cg"

    def phase_for(s: _State, current: str | None) -> str:
        if current == "newton" or s.gnorm < switch_tol:
            return "newton"
        return first_order

    state = _State(problem, x0)
    phase = phase_for(state, None)
    if phase == "newton":
        trace.switch_iter = 0
    trace.records.append(IterationRecord(0, phase, state.f, state.gnorm, 0.0, 0, 0.0, state.W.residual))
    direction = None
    f_prev = None

    k = 0
    while True:
        if state.gnorm < cfg.outer_tol:
            trace.status = Status.CONVERGED
            break
        if k >= cfg.max_outer:
            trace.status = Status.MAX_ITER
            break
        W = state.W
        rec_extra = {}
        if phase == "newton":
            derivs = EuclideanDerivatives(state.egrad, lambda xi, X=W.X: problem.ehess(X, xi))
            op = HessianOperator(W, derivs)
            step = newton_direction(problem, W, derivs, cfg, hess=op, grad=state.grad)
            if step.negative_curvature:
                log.warning("negative curvature in inner CG at outer iteration %d", k)
            Wn = retract(W, step.xi)
            t = 1.0
            rec_extra = dict(inner_iters=step.inner_iters, inner_residual=step.residual,
                             negative_curvature=step.negative_curvature)
        else:
            restarted = False
            if direction is None:
                direction = -state.grad
            elif inner(W, direction, state.grad) >= 0:
                direction = -state.grad
                restarted = True
            t_init = None
            if f_prev is not None:
                # previous decrease predicts the next one
                t_init = 2.0 * (state.f - f_prev) / inner(W, state.grad, direction)
            try:
                t, Wn = armijo_linesearch(problem, W, direction, cfg, state.f, state.grad, t_init)
            except LineSearchError as exc:
                trace.status = Status.INNER_FAILURE
                trace.message = str(exc)
                break
            rec_extra = dict(inner_iters=0, restarted=restarted)

        new = _State(problem, Wn)
        if phase == first_order == "cg":
            direction = _hs_direction(state, new, direction)
        elif phase == "sd":
            direction = None
        k += 1
        next_phase = phase_for(new, phase)
        if next_phase == "newton" and phase != "newton":
            trace.switch_iter = k
        trace.records.append(IterationRecord(
            k, phase, new.f, new.gnorm, t,
            time_ms=1e3 * (time.perf_counter() - t_start),
            feasibility=new.W.residual, **rec_extra))
        f_prev = state.f
        state, phase = new, next_phase

    trace.point = state.W
    return trace


def _hs_direction(old: _State, new: _State, d_old: np.ndarray) -> np.ndarray:
    """Hestenes-Stiefel update with projection standing in for vector transport."""
    Wn = new.W
    d_t = project(Wn, d_old)
    y = new.grad - project(Wn, old.grad)
    denom = inner(Wn, d_t, y)
    beta = inner(Wn, new.grad, y) / denom if denom != 0 else 0.0
    if not math.isfinite(beta):
        beta = 0.0
    return -new.grad + beta * d_t


def steepest_descent(problem: Problem, x0: PointWorkspace, cfg: SolverConfig) -> SolverTrace:
    return _run(problem, x0, cfg, "sd")


def nonlinear_cg(problem: Problem, x0: PointWorkspace, cfg: SolverConfig) -> SolverTrace:
    return _run(problem, x0, cfg, "cg")


def newton_method(problem: Problem, x0: PointWorkspace, cfg: SolverConfig) -> SolverTrace:
    """Newton iteration ``X_{k+1} = R_{X_k}(xi_k)`` with unit steps."""
    return _run(problem, x0, cfg, "newton")


def hybrid(problem: Problem, x0: PointWorkspace, cfg: SolverConfig) -> SolverTrace:
    """Nonlinear CG until ``||grad f|| < switch_tol``, then Newton."""
    return _run(problem, x0, cfg, "hybrid")


def solve(problem: Problem, x0: PointWorkspace, cfg: SolverConfig) -> SolverTrace:
    return _run(problem, x0, cfg, cfg.method)
