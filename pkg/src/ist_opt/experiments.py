"""Generalized-eigenvalue benchmark: problem generation, runs, CSV logs and SVG plots."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .kernels import _skew, child_seed, random_orthogonal, random_spd
from .manifold import ManifoldSpec, PointWorkspace, random_point
from .solvers import METHODS, Problem, SolverConfig, SolverTrace, Status, solve

CSV_COLUMNS = ("iter", "phase", "f", "gradnorm", "step", "inner_iters", "time_ms")
SWEEP_METRICS = ("g1", "g2")
SWEEP_RHOS = (0.5, 1.0, 2.0)
SWEEP_METHODS = ("sd", "cg", "hybrid")

EXIT_CODES = {Status.CONVERGED: 0, Status.MAX_ITER: 2, Status.INNER_FAILURE: 3}


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 10
    p: int = 4
    p_plus: int = 2
    seed: int = 42
    metric: str = "g1"
    rho: float = 1.0
    method: str = "hybrid"
    outer_tol: float = 1e-10
    inner_tol: float = 1e-10
    switch_tol: float = 1e-6
    max_outer: int = 500
    max_inner: int | None = None
    out_dir: str = "out"
    record_time: bool = False

    def __post_init__(self):
        if not 1 <= self.p <= self.n:
            raise ValueError(f"need 1 <= p <= n, got p={self.p}, n={self.n}")
        if not 0 <= self.p_plus <= self.p:
            raise ValueError(f"need 0 <= p_plus <= p, got {self.p_plus}")
        n_pos = (self.n + 1) // 2
        if self.p_plus > n_pos or self.p_minus > self.n - n_pos:
            raise ValueError("J's inertia exceeds that of the generated A")
        if self.metric not in SWEEP_METRICS:
            raise ValueError(f"metric must be one of {SWEEP_METRICS}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @property
    def p_minus(self) -> int:
        return self.p - self.p_plus

    def solver_config(self) -> SolverConfig:
        return SolverConfig(method=self.method, outer_tol=self.outer_tol, max_outer=self.max_outer,
                            inner_tol=self.inner_tol, max_inner=self.max_inner,
                            switch_tol=self.switch_tol)

    @property
    def stem(self) -> str:
        return f"{self.metric}_rho{self.rho:g}_{self.method}"


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    spec: ManifoldSpec
    M: np.ndarray
    problem: Problem
    x0: PointWorkspace
    eigenvalues_A: np.ndarray


def trace_objective(spec: ManifoldSpec, M: np.ndarray) -> Problem:
    """``f(X) = tr(X^T M X)`` with egrad ``2 M X`` and ehess ``2 M xi``."""
    M = np.asarray(M, dtype=float)
    if M.shape != (spec.n, spec.n):
        raise ValueError(f"M must be {spec.n} x {spec.n}")
    if np.linalg.norm(M - M.T) > 1e-14 * max(1.0, np.linalg.norm(M)):
        raise ValueError("M must be symmetric")

    def objective(X):
        return float(np.sum(X * (M @ X)))

    def egrad(X):
        return 2.0 * (M @ X)

    def ehess(X, xi):
        return 2.0 * (M @ xi)

    return Problem(spec, objective, egrad, ehess)


def benchmark_spectrum(n: int) -> np.ndarray:
    """``1, ..., ceil(n/2), -1, ..., -floor(n/2)``; for n = 10 this is +-1..+-5."""
    k = (n + 1) // 2
    return np.concatenate([np.arange(1, k + 1), -np.arange(1, n - k + 1)]).astype(float)


def build_benchmark(cfg: ExperimentConfig) -> BenchmarkProblem:
    n, p = cfg.n, cfg.p
    P = random_orthogonal(n, child_seed(cfg.seed, 0))
    lam = benchmark_spectrum(n)
    A = (P * lam) @ P.T
    A = 0.5 * (A + A.T)
    J = np.diag(np.concatenate([np.ones(cfg.p_plus), -np.ones(cfg.p_minus)]))
    spec = ManifoldSpec(A, J, cfg.metric, cfg.rho)
    M = random_spd(n, child_seed(cfg.seed, 1))
    x0 = random_point(spec, child_seed(cfg.seed, 2))
    return BenchmarkProblem(spec, M, trace_objective(spec, M), x0, lam)


def stationarity_check(problem_or_M, X: np.ndarray, A: np.ndarray | None = None,
                       J: np.ndarray | None = None) -> tuple[float, float]:
    """``(||M X - A X J X^T M X||_F, ||skew(J X^T M X)||_F)``.

    Accepts a :class:`BenchmarkProblem` or explicit ``M, X, A, J``.
    """
    if isinstance(problem_or_M, BenchmarkProblem):
        M, A, J = problem_or_M.M, problem_or_M.spec.A, problem_or_M.spec.J
    else:
        M = problem_or_M
    MX = M @ X
    Wm = J @ (X.T @ MX)
    return float(np.linalg.norm(MX - A @ X @ Wm)), float(np.linalg.norm(_skew(Wm)))


# --- CSV ------------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trace_to_csv(trace: SolverTrace, record_time: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in trace.records:
        w.writerow([r.iter, r.phase, _fmt(r.f), _fmt(r.gradnorm), _fmt(r.step), r.inner_iters,
                    _fmt(r.time_ms if record_time else 0.0)])
    return buf.getvalue()


@dataclass
class ConvergenceRecord:
    label: str
    rows: list[dict] = field(default_factory=list)

    @property
    def iters(self) -> list[int]:
        return [int(r["iter"]) for r in self.rows]

    @property
    def gradnorms(self) -> list[float]:
        return [float(r["gradnorm"]) for r in self.rows]

    @classmethod
    def from_trace(cls, label: str, trace: SolverTrace) -> "ConvergenceRecord":
        return cls.from_csv(label, trace_to_csv(trace))

    @classmethod
    def from_csv(cls, label: str, text: str) -> "ConvergenceRecord":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return cls(label, list(reader))

    @classmethod
    def read(cls, path: str | os.PathLike) -> "ConvergenceRecord":
        path = Path(path)
        return cls.from_csv(path.stem, path.read_text(encoding="utf-8"))


@dataclass
class RunResult:
    config: ExperimentConfig
    benchmark: BenchmarkProblem
    trace: SolverTrace
    csv_path: Path

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.trace.status]


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run one configuration and write ``<out_dir>/<metric>_rho<rho>_<method>.csv``."""
    bench = build_benchmark(cfg)
    trace = solve(bench.problem, bench.x0, cfg.solver_config())
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.stem}.csv"
    path.write_text(trace_to_csv(trace, cfg.record_time), encoding="utf-8")
    return RunResult(cfg, bench, trace, path)


def run_sweep(base: ExperimentConfig, metrics: Sequence[str] = SWEEP_METRICS,
              rhos: Sequence[float] = SWEEP_RHOS,
              methods: Sequence[str] = SWEEP_METHODS) -> list[RunResult]:
    """Every (metric, rho, method) cell, one CSV each, plus one SVG per (metric, rho)."""
    results = []
    for metric in metrics:
        for rho in rhos:
            cell = []
            for method in methods:
                res = run_experiment(replace(base, metric=metric, rho=rho, method=method))
                cell.append(res)
            emit_plot([ConvergenceRecord.from_trace(r.config.method, r.trace) for r in cell],
                      Path(base.out_dir) / f"{metric}_rho{rho:g}.svg",
                      title=f"metric {metric}, rho = {rho:g}")
            results.extend(cell)
    return results


# --- config files -----------------------------------------------------------------------

_CONFIG_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys map to underscores."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        key = {"pplus": "p_plus", "out": "out_dir"}.get(key, key)
        if key not in _CONFIG_TYPES:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _coerce(key: str, value: str):
    kind = _CONFIG_TYPES[key]
    if kind in ("int", "int | None"):
        if value.lower() in ("none", ""):
            return None
        return int(value)
    if kind == "float":
        return float(value)
    if kind == "bool":
        return value.lower() in ("1", "true", "yes", "on")
    return value


def load_config(path: str | os.PathLike) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


# --- SVG plot -------------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def emit_plot(records: Sequence[ConvergenceRecord], path: str | os.PathLike, title: str = "") -> Path:
    """Gradient norm against iteration on a log10 axis, one polyline per record."""
    if not records:
        raise ValueError("emit_plot needs at least one record")
    width, height = 640, 420
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom

    series = []
    for rec in records:
        pts = [(i, math.log10(g)) for i, g in zip(rec.iters, rec.gradnorms) if g > 0]
        series.append((rec.label, pts))
    xs = [x for _, pts in series for x, _ in pts] or [0]
    ys = [y for _, pts in series for _, y in pts] or [0.0]
    xmax = max(max(xs), 1)
    ylo, yhi = math.floor(min(ys)), math.ceil(max(ys))
    if yhi == ylo:
        yhi += 1

    def sx(x):
        return left + pw * x / xmax

    def sy(y):
        return top + ph * (yhi - y) / (yhi - ylo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle">{_esc(title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    step = max(1, (yhi - ylo) // 8)
    for y in range(ylo, yhi + 1, step):
        out.append(f'<line x1="{left}" y1="{sy(y):.2f}" x2="{left + pw}" y2="{sy(y):.2f}" '
                   f'stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{sy(y) + 4:.2f}" text-anchor="end">1e{y}</text>')
    for x in (0, xmax):
        out.append(f'<text x="{sx(x):.2f}" y="{top + ph + 18}" text-anchor="middle">{x}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">iteration</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">gradient norm</text>')
    for k, (label, pts) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        last = f' data-last="{pts[-1][1]:.6g}"' if pts else ""
        out.append(f'<polyline class="series" data-label="{_esc(label)}"{last} fill="none" '
                   f'stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 18 * k
        out.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 36}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{left + pw + 42}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def records_from_dir(directory: str | os.PathLike) -> list[ConvergenceRecord]:
    return [ConvergenceRecord.read(p) for p in sorted(Path(directory).glob("*.csv"))]


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
