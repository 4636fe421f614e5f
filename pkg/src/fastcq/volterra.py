"""Nonlinear Volterra integral equations of convolution type.

Solves u(t) = a(t) + int_0^t f(t - s) g(s, u(s)) ds, where f is known
through its Laplace transform F. Multistep methods work on the grid t_n;
Runge-Kutta methods carry the stage values v_n with u_{n+1} = v_{n,m}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cqweights import weights_circle
from .kernels import PowerKernel
from .oblivious import ConvolutionEngine, EngineConfig

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    pass


@dataclass
class VolterraProblem:
    """u = a + f * g(., u) with kernel transform ``kernel``.

    ``g_u`` is the partial derivative of g with respect to u.
    """

    forcing: Callable
    g: Callable
    g_u: Callable
    kernel: object
    T: float


def cubic_sine_problem(T: float = 60.0) -> VolterraProblem:
    """u(t) = -int_0^t (u(s) - sin s)^3 / sqrt(pi (t - s)) ds."""
    return VolterraProblem(
        forcing=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        g=lambda t, u: -((u - np.sin(t)) ** 3),
        g_u=lambda t, u: -3.0 * (u - np.sin(t)) ** 2,
        kernel=PowerKernel(0.5),
        T=T,
    )


@dataclass
class VolterraSolution:
    t: np.ndarray
    u: np.ndarray
    stages: np.ndarray | None = None
    newton_iterations: list = field(default_factory=list)
    engine: object = None


def newton_solve(residual, jacobian, x0, tol: float = 1e-12, max_iter: int = 50):
    """Newton iteration; returns (x, iterations) for the first iterate with |r| <= tol.

    Works for scalars and vectors (max norm). Raises NewtonError when
    ``max_iter`` is exceeded or the Jacobian is singular.
    """
    x = np.array(x0, dtype=float)
    scalar = x.ndim == 0
    for it in range(max_iter + 1):
        r = np.asarray(residual(x), dtype=float)
        if not np.all(np.isfinite(r)):
            raise NewtonError(f"non-finite residual at iteration {it}")
        if np.max(np.abs(r)) <= tol:
            return (float(x) if scalar else x), it
        if it == max_iter:
            break
        J = np.asarray(jacobian(x), dtype=float)
        try:
            if scalar:
                if J == 0:
                    raise np.linalg.LinAlgError("zero derivative")
                dx = r / J
            else:
                dx = np.linalg.solve(J, r)
        except np.linalg.LinAlgError as exc:
            raise NewtonError(f"singular Jacobian at iteration {it}") from exc
        x = x - dx
    raise NewtonError(f"no convergence in {max_iter} iterations (|r| = {np.max(np.abs(r)):.3e})")


def _check_finite(name, value, n):
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"{name} not finite at step {n}")


class _DirectHistory:
    """sum_{j<n} W_{n-j} g_j with all weights stored (quadratic cost)."""

    def __init__(self, kernel, method, h, N):
        W = weights_circle(kernel, method, h, N).matrices
        self.W = W.real
        self.g = []

    def history(self):
        n = len(self.g)
        if n == 0:
            return np.zeros(self.W.shape[1])
        G = np.array(self.g)
        return np.einsum("kab,kb->a", self.W[n:0:-1], G)

    def push(self, g):
        self.g.append(np.asarray(g, dtype=float).reshape(-1))


class _FastHistory:
    def __init__(self, kernel, method, h, N, config):
        self.engine = ConvolutionEngine(kernel, method, h, N, config, stages=True)
        self.m = method.stages

    def history(self):
        if self.m == 1:
            return np.atleast_1d(self.engine.history())
        return self.engine.history(stages=True)

    def push(self, g):
        self.engine.push(g if self.m > 1 else g[0])


def solve_volterra(problem: VolterraProblem, method, h: float, N: int, mode: str = "fast",
                   config: EngineConfig | None = None, tol: float = 1e-12, max_iter: int = 50
                   ) -> VolterraSolution:
    """Solve on t_n = n h, n = 0..N.

    ``mode='direct'`` stores all weights and sums the history directly;
    ``mode='fast'`` uses the oblivious engine. In both modes only the W_0
    block enters the Newton solve; the history is fixed during the iteration.
    u_0 = a(0).
    """
    if N < 1 or not h > 0:
        raise ValueError("need N >= 1 and h > 0")
    if mode == "direct":
        hist = _DirectHistory(problem.kernel, method, h, N)
        W0 = hist.W[0]
    elif mode == "fast":
        hist = _FastHistory(problem.kernel, method, h, N, config or EngineConfig())
        W0 = hist.engine.weights.matrices[0].real
    else:
        raise ValueError(f"unknown mode {mode!r}")

    m = method.stages
    c = method.nodes_c
    t = np.arange(N + 1) * h
    u = np.empty(N + 1)
    u[0] = float(problem.forcing(0.0))
    stages = np.empty((N, m)) if m > 1 else None
    iters = []

    if m == 1:
        g0 = problem.g(0.0, u[0])
        _check_finite("g", g0, 0)
        hist.push(np.array([g0]))
        w0 = W0[0, 0]
        for n in range(1, N + 1):
            tn = t[n]
            rhs = problem.forcing(tn) + hist.history()[0]
            try:
                un, it = newton_solve(lambda x: x - rhs - w0 * problem.g(tn, x),
                                      lambda x: 1.0 - w0 * problem.g_u(tn, x), u[n - 1], tol, max_iter)
            except NewtonError as exc:
                raise NewtonError(f"step {n}: {exc}") from exc
            gn = problem.g(tn, un)
            _check_finite("g", gn, n)
            u[n] = un
            iters.append(it)
            if n < N:
                hist.push(np.array([gn]))
    else:
        v = np.full(m, u[0])
        eye = np.eye(m)
        for n in range(N):
            ts = t[n] + c * h
            rhs = problem.forcing(ts) + hist.history()
            try:
                v, it = newton_solve(lambda x: x - rhs - W0 @ problem.g(ts, x),
                                     lambda x: eye - W0 * problem.g_u(ts, x)[None, :], v, tol, max_iter)
            except NewtonError as exc:
                raise NewtonError(f"step {n}: {exc}") from exc
            G = problem.g(ts, v)
            _check_finite("g", G, n)
            stages[n] = v
            u[n + 1] = v[-1]
            iters.append(it)
            if n < N - 1:
                hist.push(G)
    engine = getattr(hist, "engine", None)
    return VolterraSolution(t=t, u=u, stages=stages, newton_iterations=iters, engine=engine)
