"""Fractional subdiffusion on the line, truncated with transparent boundaries.

u(x,t) - u0(x) = (f_alpha * u_xx)(x,t) + g(x,t),  f_beta(t) = t^(beta-1)/Gamma(beta),

on [-a, a] with the boundary relation u(+-a) = -(f_{alpha/2} * d_nu u)(+-a).
Space: unknowns at x_l = l dx, l = -M..M. The interior equations hold for
|l| <= M-1; the two boundary relations are imposed at l = +-(M-1) with the
central normal difference (u_{+-M} - u_{+-(M-2)}) / (2 dx) and stored in the
rows of u_{+-M}, which keeps the matrix banded with two sub- and two
super-diagonals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lapack

from .cqweights import weights_circle
from .kernels import PowerKernel
from .oblivious import ConvolutionEngine, EngineConfig

KL = KU = 2


@dataclass(frozen=True)
class Grid1D:
    a: float
    M: int

    def __post_init__(self):
        if self.M < 3 or not self.a > 0:
            raise ValueError("need M >= 3 and a > 0")

    @property
    def dx(self) -> float:
        return self.a / self.M

    @property
    def x(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1) * self.dx

    @property
    def size(self) -> int:
        return 2 * self.M + 1


@dataclass
class SubdiffusionProblem:
    alpha: float
    u0: Callable
    grid: Grid1D
    g: Callable | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if self.g is not None:
            g0 = np.asarray(self.g(self.grid.x, 0.0))
            if np.max(np.abs(g0)) > 0:
                raise ValueError("the inhomogeneity must vanish at t = 0")

    def inhomogeneity(self, t):
        if self.g is None:
            return 0.0
        return self.g(self.grid.x[1:-1], t)


def gaussian_problem(alpha: float = 2 / 3, a: float = 5.0, M: int = 100) -> SubdiffusionProblem:
    """u0 = exp(-x^2), no inhomogeneity."""
    return SubdiffusionProblem(alpha=alpha, u0=lambda x: np.exp(-x**2), grid=Grid1D(a, M))


def delta_xx(u, dx):
    """(u_{l-1} - 2 u_l + u_{l+1}) / dx^2 for l = -(M-1)..M-1 (last axis)."""
    return (u[..., :-2] - 2 * u[..., 1:-1] + u[..., 2:]) / dx**2


def delta_nu(u, dx):
    """Outward differences at l = -(M-1) and l = M-1, stacked on the last axis."""
    minus = (u[..., 0] - u[..., 2]) / (2 * dx)
    plus = (u[..., -1] - u[..., -3]) / (2 * dx)
    return np.stack([minus, plus], axis=-1)


def _band_matrix(M, dx, c_int, c_bnd, boundary):
    """LAPACK band storage of the step matrix for weights c_int, c_bnd."""
    n = 2 * M + 1
    dtype = np.result_type(c_int, c_bnd, float)
    ab = np.zeros((2 * KL + KU + 1, n), dtype=dtype)

    def put(i, j, v):
        ab[KL + KU + i - j, j] = v

    for i in range(1, n - 1):
        put(i, i - 1, -c_int / dx**2)
        put(i, i, 1 + 2 * c_int / dx**2)
        put(i, i + 1, -c_int / dx**2)
    if boundary == "transparent":
        s = c_bnd / (2 * dx)
        put(0, 0, s)
        put(0, 1, 1.0)
        put(0, 2, -s)
        put(n - 1, n - 1, s)
        put(n - 1, n - 2, 1.0)
        put(n - 1, n - 3, -s)
    elif boundary == "dirichlet":
        put(0, 0, 1.0)
        put(n - 1, n - 1, 1.0)
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    return ab


class _BandedLU:
    def __init__(self, ab):
        self.complex = np.iscomplexobj(ab)
        trf, self._trs = (lapack.zgbtrf, lapack.zgbtrs) if self.complex else (lapack.dgbtrf, lapack.dgbtrs)
        self.lu, self.piv, info = trf(ab, KL, KU)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded factorization failed (info={info})")

    def solve(self, b):
        x, info = self._trs(self.lu, KL, KU, b, self.piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed (info={info})")
        return x


@dataclass
class StepSystem:
    """Factorized step matrices in the (possibly diagonalized) stage basis."""

    method: object
    h: float
    boundary: str
    omega0: np.ndarray  # first weight per decoupled stage, alpha kernel
    omega0_half: np.ndarray  # same for the alpha/2 kernel
    factors: list
    V: np.ndarray | None = None
    Vinv: np.ndarray | None = None


def build_system(problem: SubdiffusionProblem, method, h: float, boundary: str = "transparent") -> StepSystem:
    """Factorize the implicit part of one step.

    For Runge-Kutta methods W_0 = F(A^{-1}/h) is diagonalized with the
    eigenvectors of A, which decouples the stages into m complex solves.
    """
    grid = problem.grid
    Fa = PowerKernel(problem.alpha)
    Fb = PowerKernel(problem.alpha / 2)
    if method.stages == 1:
        w = np.array([Fa(np.array([1.0 / h]))[0].real])
        wb = np.array([Fb(np.array([1.0 / h]))[0].real])
        V = Vinv = None
    else:
        lam, V, Vinv = method.eigen
        w = Fa(1.0 / (h * lam.astype(complex)))
        wb = Fb(1.0 / (h * lam.astype(complex)))
    factors = [_BandedLU(_band_matrix(grid.M, grid.dx, w[i], wb[i], boundary)) for i in range(len(w))]
    return StepSystem(method, h, boundary, w, wb, factors, V, Vinv)


class _DirectHistories:
    """Quadratic-cost histories with stored data; the oracle for the engines."""

    def __init__(self, problem, method, h, N):
        self.Wa = weights_circle(PowerKernel(problem.alpha), method, h, N + 1).matrices.real
        self.Wb = weights_circle(PowerKernel(problem.alpha / 2), method, h, N + 1).matrices.real
        self.shape = (method.stages, 2 * problem.grid.M - 1)
        self.gi, self.gb = [], []

    def get(self):
        n = len(self.gi)
        if n == 0:
            return np.zeros(self.shape), np.zeros((self.shape[0], 2))
        Gi, Gb = np.array(self.gi), np.array(self.gb)  # (n, m, 2M-1), (n, m, 2)
        Hi = np.einsum("kab,kbx->ax", self.Wa[n:0:-1], Gi)
        Hb = np.einsum("kab,kbx->ax", self.Wb[n:0:-1], Gb)
        return Hi, Hb

    def push(self, gi, gb):
        self.gi.append(gi)
        self.gb.append(gb)


class _FastHistories:
    """One vector engine for the interior, two scalar engines for the boundaries."""

    def __init__(self, problem, method, h, N, config):
        M = problem.grid.M
        self.m = method.stages
        self.interior = ConvolutionEngine(PowerKernel(problem.alpha), method, h, N + 1, config,
                                          data_shape=(2 * M - 1,), stages=True)
        self.bounds = [ConvolutionEngine(PowerKernel(problem.alpha / 2), method, h, N + 1, config, stages=True)
                       for _ in range(2)]

    def get(self):
        if self.m == 1:
            Hi = self.interior.history()[None]
            Hb = np.array([[e.history() for e in self.bounds]])
        else:
            Hi = self.interior.history(stages=True)
            Hb = np.stack([e.history(stages=True) for e in self.bounds], axis=-1)
        return Hi, Hb

    def push(self, gi, gb):
        if self.m == 1:
            self.interior.push(gi[0])
            for k, e in enumerate(self.bounds):
                e.push(gb[0, k])
        else:
            self.interior.push(gi)
            for k, e in enumerate(self.bounds):
                e.push(gb[:, k])

    def memory_per_point(self, npoints):
        stored = self.interior.memory_report().stored_scalars
        stored += sum(e.memory_report().stored_scalars for e in self.bounds)
        return stored / npoints


@dataclass
class SimulationResult:
    t: float
    u: np.ndarray
    x: np.ndarray
    snapshots: dict = field(default_factory=dict)
    histories: object = None


def advance_step(problem, system: StepSystem, histories, u0, t_stages):
    """One time step; returns the new values (m, 2M+1), one row per stage.

    For multistep methods m = 1 and the row is u^n at t_stages[0].
    """
    grid = problem.grid
    Hi, Hb = histories.get()  # (m, 2M-1), (m, 2)
    m = Hi.shape[0]
    rhs = np.empty((m, grid.size))
    for i in range(m):
        rhs[i, 1:-1] = u0[1:-1] + Hi[i] + problem.inhomogeneity(t_stages[i])
        if system.boundary == "transparent":
            rhs[i, 0], rhs[i, -1] = -Hb[i, 0], -Hb[i, 1]
        else:
            rhs[i, 0] = rhs[i, -1] = 0.0
    if system.V is None:
        U = system.factors[0].solve(rhs[0])[None]
    else:
        R = system.Vinv @ rhs
        Ut = np.stack([system.factors[i].solve(R[i]) for i in range(m)])
        U = (system.V @ Ut).real
    histories.push(delta_xx(U, grid.dx), delta_nu(U, grid.dx))
    return U


def run_simulation(problem: SubdiffusionProblem, method, h: float, N: int, mode: str = "fast",
                   config: EngineConfig | None = None, boundary: str = "transparent",
                   snapshot_every: int | None = None) -> SimulationResult:
    """Advance N steps of size h from u0; returns the solution at t = N h."""
    grid = problem.grid
    system = build_system(problem, method, h, boundary)
    if mode == "fast":
        hist = _FastHistories(problem, method, h, N, config or EngineConfig())
    elif mode == "direct":
        hist = _DirectHistories(problem, method, h, N)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    u0 = np.asarray(problem.u0(grid.x), dtype=float)
    if boundary == "dirichlet":
        u0 = u0.copy()
        u0[0] = u0[-1] = 0.0
    snaps = {0: u0.copy()} if snapshot_every else {}
    c = method.nodes_c
    u = u0
    if method.stages == 1:
        # the sums include the initial values at j = 0
        hist.push(delta_xx(u0, grid.dx)[None], delta_nu(u0, grid.dx)[None])
        for n in range(1, N + 1):
            u = advance_step(problem, system, hist, u0, [n * h])[0]
            if snapshot_every and n % snapshot_every == 0:
                snaps[n] = u.copy()
    else:
        for n in range(N):
            U = advance_step(problem, system, hist, u0, n * h + c * h)
            u = U[-1]
            if snapshot_every and (n + 1) % snapshot_every == 0:
                snaps[n + 1] = u.copy()
    return SimulationResult(t=N * h, u=u, x=grid.x, snapshots=snaps, histories=hist)
