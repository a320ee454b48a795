import numpy as np
import pytest

from ist_opt.experiments import ExperimentConfig, build_benchmark
from ist_opt.manifold import ManifoldSpec, random_point

METRICS = ("g1", "g2")
RHOS = (0.5, 1.0, 2.0)


def rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def bench(metric="g1", rho=1.0, seed=42):
    return build_benchmark(ExperimentConfig(metric=metric, rho=rho, seed=seed))


def stiefel_spec(n=6, p=3, metric="g1", rho=1.0):
    return ManifoldSpec(np.eye(n), np.eye(p), metric, rho)


@pytest.fixture(params=[(m, r) for m in METRICS for r in RHOS], ids=lambda mr: f"{mr[0]}-rho{mr[1]:g}")
def spec(request):
    metric, rho = request.param
    return bench(metric, rho).spec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def point(spec):
    return random_point(spec, 7)


ACCEPTANCE_LINES = []


def report(number, name, ok, detail=""):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
