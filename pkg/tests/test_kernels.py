import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ist_opt.kernels import (
    DomainError, child_seed, mat_exp, random_orthogonal, random_spd, skew, solve_lyapunov, sym, sym_eig,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def square(n):
    return arrays(np.float64, (n, n), elements=finite)


def test_sym_skew_small_cases():
    S = np.array([[0.0, 2.0], [0.0, 0.0]])
    assert np.array_equal(sym(S), [[0, 1], [1, 0]])
    assert np.array_equal(skew(S), [[0, 1], [-1, 0]])
    assert np.array_equal(sym(np.eye(3)), np.eye(3))
    assert np.array_equal(skew(np.eye(3) + np.ones((3, 3))), np.zeros((3, 3)))


def test_sym_skew_match_direct(rng):
    S = rng.standard_normal((5, 5))
    assert np.array_equal(sym(S), (S + S.T) / 2)
    assert np.array_equal(skew(S), (S - S.T) / 2)


@pytest.mark.parametrize("f", [sym, skew])
def test_rejects_non_square(f):
    with pytest.raises(ValueError):
        f(np.zeros((2, 3)))


@given(st.integers(1, 6).flatmap(square))
def test_sym_plus_skew_recovers_s(S):
    # exact up to the rounding of the halving sums, one ulp per entry
    bound = np.spacing(np.abs(S) + np.abs(S.T))
    assert np.all(np.abs(sym(S) + skew(S) - S) <= bound)
    if np.array_equal(S, S.T):
        assert np.array_equal(sym(S) + skew(S), S)


def test_sym_eig_cases(rng):
    r = sym_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(r.eigenvalues, [1, 2, 3])
    assert np.allclose(sym_eig(np.eye(4)).eigenvalues, 1)
    B = rng.standard_normal((10, 10))
    S = B + B.T
    r = sym_eig(S)
    assert np.linalg.norm(r.reconstruct() - S) / np.linalg.norm(S) < 1e-12
    assert np.linalg.norm(r.eigenvectors.T @ r.eigenvectors - np.eye(10)) < 1e-12


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(ValueError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_mat_exp_cases(rng):
    assert np.array_equal(mat_exp(np.zeros((3, 3))), np.eye(3))
    a = np.array([0.3, -2.0, 4.0])
    assert np.allclose(mat_exp(np.diag(a)), np.diag(np.exp(a)), rtol=1e-14)
    B = rng.standard_normal((6, 6))
    E = mat_exp(B - B.T)
    assert np.linalg.norm(E.T @ E - np.eye(6)) < 1e-12


@pytest.mark.parametrize("scale", [1e-3, 0.5, 3.0, 40.0])
def test_mat_exp_against_scipy(rng, scale):
    S = scale * rng.standard_normal((8, 8))
    ref = scipy.linalg.expm(S)
    assert np.linalg.norm(mat_exp(S) - ref) / np.linalg.norm(ref) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.01, 5.0))
def test_mat_exp_inverse(n, seed, size):
    S = np.random.default_rng(seed).standard_normal((n, n))
    S *= size / np.linalg.norm(S)
    assert np.linalg.norm(mat_exp(S) @ mat_exp(-S) - np.eye(n)) < 1e-10


def test_lyapunov_identity_and_diagonal(rng):
    R = rng.standard_normal((4, 4))
    R = R + R.T
    assert np.allclose(solve_lyapunov(np.eye(4), R), R / 2, atol=1e-15)
    s = np.array([1.0, 2.0, 5.0, 0.1])
    U = solve_lyapunov(np.diag(s), R)
    assert np.allclose(U, R / (s[:, None] + s[None, :]), rtol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 4, 8])
def test_lyapunov_random_residual(p):
    rng = np.random.default_rng(p)
    for _ in range(250):
        B = rng.standard_normal((p, p))
        S = B @ B.T + 0.1 * np.eye(p)
        R = rng.standard_normal((p, p))
        R = R + R.T
        U = solve_lyapunov(S, R)
        assert np.array_equal(U, U.T)
        assert np.linalg.norm(S @ U + U @ S - R) <= 1e-12 * max(1.0, np.linalg.norm(R)) * np.linalg.cond(S)


def test_lyapunov_not_spd_names_eigenvalue():
    with pytest.raises(DomainError, match="-1"):
        solve_lyapunov(np.diag([2.0, -1.0]), np.eye(2))


def test_random_orthogonal():
    assert abs(abs(random_orthogonal(1, 3)[0, 0]) - 1) < 1e-15
    Q = random_orthogonal(10, 5)
    assert np.linalg.norm(Q.T @ Q - np.eye(10)) < 1e-12
    assert np.array_equal(Q, random_orthogonal(10, 5))
    assert not np.array_equal(Q, random_orthogonal(10, 6))


def test_random_spd():
    assert random_spd(1, 0)[0, 0] > 0
    for n in (2, 5, 10):
        M = random_spd(n, n)
        assert np.array_equal(M, M.T)
        assert sym_eig(M).eigenvalues.min() > 0
        assert np.array_equal(M, random_spd(n, n))


def test_child_seed_distinct():
    assert len({child_seed(42, k) for k in range(5)}) == 5
    assert child_seed(42, 1) == child_seed(42, 1)
