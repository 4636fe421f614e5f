import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastcq.fracdiff import (KL, KU, Grid1D, SubdiffusionProblem, _band_matrix, build_system, delta_nu,
                             delta_xx, gaussian_problem, run_simulation)
from fastcq.oblivious import EngineConfig
from fastcq.stepgen import get_method

METHODS = ["be", "bdf2", "radau3", "radau5"]


def dense(ab, n):
    A = np.zeros((n, n), dtype=ab.dtype)
    for j in range(n):
        for i in range(max(0, j - KU), min(n, j + KL + 1)):
            A[i, j] = ab[KL + KU + i - j, j]
    return A


def laplacian_dirichlet(M, dx):
    n = 2 * M + 1
    D = np.zeros((n, n))
    for i in range(1, n - 1):
        D[i, i - 1:i + 2] = np.array([1.0, -2.0, 1.0]) / dx**2
    return D


# ---------------------------------------------------------------- space discretization
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_stencils_on_polynomials(c0, c1):
    grid = Grid1D(2.0, 20)
    x = grid.x
    np.testing.assert_allclose(delta_xx(c0 + c1 * x, grid.dx), 0, atol=1e-9)
    np.testing.assert_allclose(delta_xx(x**2, grid.dx), 2, rtol=1e-10)
    np.testing.assert_allclose(delta_nu(np.full_like(x, c0), grid.dx), 0, atol=0)
    # outward normal differences of x are -1 on the left and +1 on the right
    np.testing.assert_allclose(delta_nu(x, grid.dx), [-1, 1], rtol=1e-12)


def test_stencils_broadcast_over_stages():
    grid = Grid1D(1.0, 5)
    U = np.stack([grid.x**2, grid.x**3])
    assert delta_xx(U, grid.dx).shape == (2, 9)
    assert delta_nu(U, grid.dx).shape == (2, 2)


def test_grid():
    g = Grid1D(5.0, 450)
    assert g.size == 901 and g.x.shape == (901,)
    assert g.x[0] == -5.0 and g.x[-1] == 5.0 and g.x[450] == 0.0
    with pytest.raises(ValueError):
        Grid1D(5.0, 2)
    with pytest.raises(ValueError):
        Grid1D(0.0, 10)


def test_band_structure():
    M, dx, c, cb = 6, 0.1, 0.3, 0.7
    n = 2 * M + 1
    A = dense(_band_matrix(M, dx, c, cb, "transparent"), n)
    for i in range(1, n - 1):
        np.testing.assert_allclose(A[i, i - 1:i + 2], [-c / dx**2, 1 + 2 * c / dx**2, -c / dx**2])
        assert np.count_nonzero(A[i]) == 3
    s = cb / (2 * dx)
    np.testing.assert_allclose(A[0, :3], [s, 1, -s])
    np.testing.assert_allclose(A[-1, -3:], [-s, 1, s])
    assert np.count_nonzero(A[0]) == 3 and np.count_nonzero(A[-1]) == 3
    D = dense(_band_matrix(M, dx, c, cb, "dirichlet"), n)
    np.testing.assert_array_equal(D[0], np.eye(n)[0])
    with pytest.raises(ValueError):
        _band_matrix(M, dx, c, cb, "periodic")


def test_rk_system_is_diagonalized():
    p = gaussian_problem(M=20)
    sys = build_system(p, get_method("radau5"), 0.05)
    assert len(sys.factors) == 3 and sys.omega0.dtype.kind == "c"
    np.testing.assert_allclose(sys.V @ sys.Vinv, np.eye(3), atol=1e-12)


def test_problem_validation():
    grid = Grid1D(5.0, 10)
    with pytest.raises(ValueError):
        SubdiffusionProblem(2.0, lambda x: x, grid)
    with pytest.raises(ValueError):
        SubdiffusionProblem(0.5, lambda x: x, grid, g=lambda x, t: np.ones_like(x))
    SubdiffusionProblem(0.5, lambda x: x, grid, g=lambda x, t: t * x)
    with pytest.raises(ValueError):
        run_simulation(gaussian_problem(M=10), get_method("be"), 0.1, 2, mode="slow")


# ---------------------------------------------------------------- solutions
@pytest.mark.parametrize("name", METHODS)
def test_zero_data_gives_zero(name):
    p = SubdiffusionProblem(2 / 3, lambda x: np.zeros_like(x), Grid1D(5.0, 30))
    r = run_simulation(p, get_method(name), 0.05, 20)
    assert np.all(r.u == 0)


@pytest.mark.parametrize("name", METHODS)
def test_symmetry_and_fast_vs_direct(name):
    p, m = gaussian_problem(M=50), get_method(name)
    fast = run_simulation(p, m, 0.02, 150, config=EngineConfig(B=5, K=15))
    direct = run_simulation(p, m, 0.02, 150, mode="direct")
    assert np.max(np.abs(fast.u - fast.u[::-1])) <= 1e-12
    assert np.max(np.abs(fast.u - direct.u)) <= 1e-6
    assert 0 < fast.u.max() < 1


def test_snapshots():
    r = run_simulation(gaussian_problem(M=20), get_method("radau3"), 0.05, 10, snapshot_every=4)
    assert sorted(r.snapshots) == [0, 4, 8]
    np.testing.assert_array_equal(r.snapshots[0], np.exp(-r.x**2))
    r = run_simulation(gaussian_problem(M=20), get_method("be"), 0.05, 10, snapshot_every=5)
    np.testing.assert_array_equal(r.snapshots[10], r.u)


def test_heat_equation_backward_euler():
    # alpha = 1: u - u0 = int u_xx + g; the weights of 1/s are all h, so the
    # sum includes j = 0 and the first step carries an extra h D u0
    M, a, h, N = 60, 5.0, 0.01, 120
    dx = a / M
    x = np.arange(-M, M + 1) * dx
    g = lambda x, t: t * np.exp(-((x - 1) ** 2))  # noqa: E731
    p = SubdiffusionProblem(1.0, lambda x: np.exp(-x**2), Grid1D(a, M), g=g)
    r = run_simulation(p, get_method("be"), h, N, mode="direct", boundary="dirichlet")

    D = laplacian_dirichlet(M, dx)
    A = np.eye(2 * M + 1) - h * D
    u = np.exp(-x**2)
    u[0] = u[-1] = 0
    for n in range(1, N + 1):
        b = u + (g(x, n * h) - g(x, (n - 1) * h))
        if n == 1:
            b += h * D @ u
        b[0] = b[-1] = 0
        u = np.linalg.solve(A, b)
    assert np.max(np.abs(u - r.u)) <= 1e-12


@pytest.mark.parametrize("name", ["radau3", "radau5"])
def test_heat_equation_radau(name):
    # alpha = 1 reduces the Runge-Kutta scheme to Radau IIA for u' = D u
    M, a, h, N = 40, 5.0, 0.02, 60
    dx = a / M
    x = np.arange(-M, M + 1) * dx
    m = get_method(name)
    p = SubdiffusionProblem(1.0, lambda x: np.exp(-x**2), Grid1D(a, M))
    r = run_simulation(p, m, h, N, mode="direct", boundary="dirichlet")

    n, s = 2 * M + 1, m.stages
    D = laplacian_dirichlet(M, dx)
    big = np.eye(s * n) - h * np.kron(m.matrix_A, D)
    for i in range(s):
        big[i * n] = 0
        big[i * n, i * n] = 1
        big[i * n + n - 1] = 0
        big[i * n + n - 1, i * n + n - 1] = 1
    u = np.exp(-x**2)
    u[0] = u[-1] = 0
    for _ in range(N):
        b = np.tile(u, s)
        b[::n] = 0
        b[n - 1::n] = 0
        u = np.linalg.solve(big, b)[-n:]
    assert np.max(np.abs(u - r.u)) <= 1e-12


def test_transparent_boundary_vs_wide_domain():
    dx, h, N = 0.05, 0.02, 100
    m = get_method("radau3")
    small = run_simulation(gaussian_problem(a=5.0, M=100), m, h, N)
    wall = run_simulation(gaussian_problem(a=5.0, M=100), m, h, N, boundary="dirichlet")
    wide = run_simulation(gaussian_problem(a=20.0, M=400), m, h, N, boundary="dirichlet")
    ref = wide.u[300:501]
    assert np.max(np.abs(small.u - ref)) <= 1e-5
    assert np.max(np.abs(wall.u - ref)) >= 1e-2


def test_fast_memory_report():
    r = run_simulation(gaussian_problem(M=30), get_method("bdf2"), 0.05, 200)
    per_point = r.histories.memory_per_point(61)
    assert 0 < per_point < 200
