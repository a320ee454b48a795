"""Riemannian optimization on the indefinite Stiefel manifold ``{X : X^T A X = J}``."""

from .geometry import (
    EuclideanDerivatives,
    HessianOperator,
    christoffel_ambient,
    christoffel_projected,
    dmetric,
    dmetric_adjoint,
    riemannian_gradient,
    riemannian_hessian_apply,
)
from .kernels import DomainError, mat_exp, skew, solve_lyapunov, sym, sym_eig
from .manifold import (
    InfeasiblePointError,
    LyapunovMetric,
    ManifoldSpec,
    PointWorkspace,
    inner,
    make_workspace,
    metric_apply,
    metric_inverse_apply,
    norm,
    project,
    random_point,
    random_tangent,
    retract,
)
from .solvers import Problem, SolverConfig, SolverTrace, Status, solve

__version__ = "0.1.0"

__all__ = [
    "DomainError", "EuclideanDerivatives", "HessianOperator", "InfeasiblePointError",
    "LyapunovMetric", "ManifoldSpec", "PointWorkspace", "Problem", "SolverConfig",
    "SolverTrace", "Status", "christoffel_ambient", "christoffel_projected", "dmetric",
    "dmetric_adjoint", "inner", "make_workspace", "mat_exp", "metric_apply",
    "metric_inverse_apply", "norm", "project", "random_point", "random_tangent", "retract",
    "riemannian_gradient", "riemannian_hessian_apply", "skew", "solve", "solve_lyapunov",
    "sym", "sym_eig",
]
