"""Time discretizations underlying convolution quadrature.

Two families are supported: backward differences (backward Euler and BDF2),
described by their generating polynomial delta(zeta), and stiffly accurate
Runge-Kutta methods (Radau IIA with 1, 2 or 3 stages).

Both expose ``components(z)``, which writes the coefficient sequence
e_n(z) of (delta(zeta) - z)^{-1} (row vector for Runge-Kutta) as a short sum
of geometric sequences::

    e_n(z) = sum_i r_i(z)**n * q_i(z)

The fast convolution bank is built on exactly this representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BDF2_DEGENERACY = 1e-12


@dataclass(frozen=True)
class MultistepMethod:
    name: str
    order_p: int
    # coefficients of delta(zeta) in powers of (1 - zeta), starting at the first power
    delta_coeffs: tuple

    stages = 1
    is_rk = False

    @property
    def nodes_c(self) -> np.ndarray:
        return np.zeros(1)

    @property
    def n_components(self) -> int:
        return len(self.delta_coeffs)

    def symbol(self, zeta):
        """delta(zeta) as an array of 1x1 matrices."""
        d = generating_delta(self, zeta)
        return np.asarray(d)[..., None, None]

    def components(self, z):
        """Return (r, q, lift) with shapes (..., C), (..., C, 1), (..., C, 1)."""
        z = np.asarray(z, dtype=complex)
        if self.name == "BackwardEuler":
            r = 1.0 / (1.0 - z)
            rr = r[..., None]
            qq = r[..., None, None]
        else:
            r1, r2, q1, q2 = bdf2_components(z)
            rr = np.stack([r1, r2], axis=-1)
            qq = np.stack([q1, q2], axis=-1)[..., None]
        return rr, qq, np.ones_like(qq)


BACKWARD_EULER = MultistepMethod("BackwardEuler", 1, (1.0,))
BDF2 = MultistepMethod("BDF2", 2, (1.0, 0.5))


@dataclass(frozen=True, eq=False)
class RungeKuttaTableau:
    """Stiffly accurate implicit Runge-Kutta method (A, b, c)."""

    name: str
    matrix_A: np.ndarray
    weights_b: np.ndarray
    nodes_c: np.ndarray
    order_p: int
    stage_order_q: int
    _eig: tuple = field(init=False, repr=False)

    is_rk = True
    n_components = 1

    def __post_init__(self):
        A = np.asarray(self.matrix_A, dtype=float)
        b = np.asarray(self.weights_b, dtype=float)
        c = np.asarray(self.nodes_c, dtype=float)
        object.__setattr__(self, "matrix_A", A)
        object.__setattr__(self, "weights_b", b)
        object.__setattr__(self, "nodes_c", c)
        m = len(b)
        if A.shape != (m, m) or c.shape != (m,):
            raise ValueError("inconsistent tableau shapes")
        if not np.allclose(A[-1], b, rtol=0, atol=1e-14) or abs(c[-1] - 1) > 1e-14:
            raise ValueError("tableau is not stiffly accurate")
        lam, V = np.linalg.eig(A)
        if np.any(lam.real <= 0):
            raise ValueError("Runge-Kutta matrix has an eigenvalue with non-positive real part")
        object.__setattr__(self, "_eig", (lam, V, np.linalg.inv(V)))
        y = np.concatenate([np.linspace(-50, 50, 201), [-1e4, 1e4]])
        r, _ = stability_and_weight(self, 1j * y)
        if np.max(np.abs(r)) > 1 + 1e-12:
            raise ValueError("tableau fails the A-stability spot check")

    @property
    def stages(self) -> int:
        return len(self.weights_b)

    @property
    def eigen(self):
        """Eigen-decomposition (values, V, V^{-1}) of the Runge-Kutta matrix."""
        return self._eig

    def symbol(self, zeta):
        return rk_delta_matrix(self, zeta)

    def components(self, z):
        z = np.asarray(z, dtype=complex)
        m = self.stages
        M = np.eye(m) - z[..., None, None] * self.matrix_A
        res = np.linalg.solve(M, np.ones(z.shape + (m,), dtype=complex)[..., None])[..., 0]
        r, q = stability_and_weight(self, z)
        lift = res / r[..., None]
        return r[..., None], q[..., None, :], lift[..., None, :]


def radau_iia(stages: int) -> RungeKuttaTableau:
    """Radau IIA collocation method with 1, 2 or 3 stages (orders 1, 3, 5)."""
    if stages == 1:
        return RungeKuttaTableau("RadauIIA1", [[1.0]], [1.0], [1.0], 1, 1)
    if stages == 2:
        A = [[5 / 12, -1 / 12], [3 / 4, 1 / 4]]
        return RungeKuttaTableau("RadauIIA3", A, [3 / 4, 1 / 4], [1 / 3, 1.0], 3, 2)
    if stages == 3:
        s6 = np.sqrt(6.0)
        A = [
            [(88 - 7 * s6) / 360, (296 - 169 * s6) / 1800, (-2 + 3 * s6) / 225],
            [(296 + 169 * s6) / 1800, (88 + 7 * s6) / 360, (-2 - 3 * s6) / 225],
            [(16 - s6) / 36, (16 + s6) / 36, 1 / 9],
        ]
        b = [(16 - s6) / 36, (16 + s6) / 36, 1 / 9]
        c = [(4 - s6) / 10, (4 + s6) / 10, 1.0]
        return RungeKuttaTableau("RadauIIA5", A, b, c, 5, 3)
    raise ValueError("Radau IIA is provided for 1, 2 or 3 stages")


METHOD_NAMES = ("be", "bdf2", "radau1", "radau3", "radau5")


def get_method(name: str):
    """Look up a method by its CLI name."""
    key = name.lower()
    if key == "be":
        return BACKWARD_EULER
    if key == "bdf2":
        return BDF2
    if key in ("radau1", "radau3", "radau5"):
        return radau_iia({"radau1": 1, "radau3": 2, "radau5": 3}[key])
    raise ValueError(f"unknown method {name!r}; expected one of {', '.join(METHOD_NAMES)}")


def generating_delta(method: MultistepMethod, zeta):
    w = 1.0 - np.asarray(zeta, dtype=complex)
    out = np.zeros_like(w)
    for k, a in enumerate(method.delta_coeffs, start=1):
        out = out + a * w**k
    return out if out.ndim else complex(out)


def rk_delta_matrix(tableau: RungeKuttaTableau, zeta):
    """Delta(zeta) = (A + zeta/(1-zeta) 1 b^T)^{-1}, vectorized over zeta."""
    zeta = np.asarray(zeta, dtype=complex)
    A, b = tableau.matrix_A, tableau.weights_b
    m = len(b)
    outer = np.outer(np.ones(m), b)
    M = A + (zeta / (1.0 - zeta))[..., None, None] * outer
    if np.any(np.abs(np.linalg.det(M)) < 1e-300):
        raise np.linalg.LinAlgError("degenerate tableau/zeta combination")
    return np.linalg.inv(M)


def stability_and_weight(tableau: RungeKuttaTableau, z):
    """Stability function r(z) and row vector q(z) = b^T (I - zA)^{-1}."""
    z = np.asarray(z, dtype=complex)
    A, b = tableau.matrix_A, tableau.weights_b
    m = len(b)
    M = np.eye(m) - z[..., None, None] * A
    # q^T solves (I - zA)^T q^T = b
    q = np.linalg.solve(np.swapaxes(M, -1, -2), np.broadcast_to(b, z.shape + (m,))[..., None])[..., 0]
    if not np.all(np.isfinite(q)):
        raise np.linalg.LinAlgError("I - zA is singular")
    r = 1.0 + z * q.sum(axis=-1)
    return r, q


def bdf2_components(z):
    """Roots and prefactors with e_n(z) = q1 r1^n + q2 r2^n for BDF2."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(1 + 2 * z) <= BDF2_DEGENERACY):
        raise ValueError("BDF2 double root: |1 + 2z| too small")
    w = np.sqrt(1 + 2 * z)
    r1 = 1.0 / (2.0 - w)
    r2 = 1.0 / (2.0 + w)
    return r1, r2, r1 / w, -r2 / w


def en_multistep(method: MultistepMethod, n, z):
    """Coefficient of zeta^n in (delta(zeta) - z)^{-1}."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("n must be non-negative")
    z = np.asarray(z, dtype=complex)
    if method.name == "BackwardEuler":
        if np.any(z == 1):
            raise ZeroDivisionError("backward Euler pole at z = 1")
        out = (1.0 - z) ** (-n - 1)
    else:
        r1, r2, q1, q2 = bdf2_components(z)
        out = q1 * r1**n + q2 * r2**n
    return out if np.ndim(out) else complex(out)


def rk_en(tableau: RungeKuttaTableau, n: int, z):
    """Row e_n(z) and matrix E_n(z) of (Delta(zeta) - zI)^{-1} = sum E_n zeta^n."""
    if n < 0:
        raise ValueError("n must be non-negative")
    z = complex(z)
    A, b = tableau.matrix_A, tableau.weights_b
    m = len(b)
    M = np.eye(m) - z * A
    Minv = np.linalg.inv(M)
    if n == 0:
        E = A @ Minv
    else:
        r, _ = stability_and_weight(tableau, z)
        E = complex(r) ** (n - 1) * np.outer(Minv @ np.ones(m), b @ Minv)
    return E[-1].copy(), E


def linear_ivp_step(method, lam: complex, h: float, state, g_stages):
    """One step of y' = lam*y + g with the given method.

    Runge-Kutta: ``state`` is y_n and ``g_stages`` holds g(t_n + c_i h); the
    stage system (I - h lam A) Y = y_n 1 + h A G is solved and Y_m returned.

    Multistep: ``g_stages`` is g(t_{n+1}). Backward Euler takes ``state = y_n``;
    BDF2 takes ``state = (y_n, y_{n-1})`` and falls back to a backward Euler
    step when y_{n-1} is None. Returns ``(new_state, y_{n+1})``.
    """
    z = h * lam
    if getattr(method, "is_rk", False):
        A = method.matrix_A
        m = method.stages
        G = np.asarray(g_stages, dtype=complex).reshape(m, -1)
        y = np.asarray(state, dtype=complex)
        rhs = np.ones((m, 1)) * y.reshape(1, -1) + h * (A @ G)
        Y = np.linalg.solve(np.eye(m) - z * A, rhs)
        y_new = Y[-1].reshape(y.shape)
        return y_new, y_new
    g = np.asarray(g_stages, dtype=complex)
    if method.name == "BackwardEuler":
        if 1 - z == 0:
            raise ZeroDivisionError("singular backward Euler step")
        y_new = (np.asarray(state) + h * g) / (1 - z)
        return y_new, y_new
    y_n, y_prev = state
    if y_prev is None:
        y_new = (np.asarray(y_n) + h * g) / (1 - z)
    else:
        y_new = (2 * np.asarray(y_n) - 0.5 * np.asarray(y_prev) + h * g) / (1.5 - z)
    return (y_new, y_n), y_new
