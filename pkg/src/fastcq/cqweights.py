"""Convolution quadrature weights and the quadratic-cost reference convolution."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .contours import PROFILES, QuadratureRule, interval_params

log = logging.getLogger(__name__)

EIGVEC_COND_LIMIT = 1e8


@dataclass
class WeightSequence:
    """Weights for lags 0..N0.

    ``matrices`` has shape (N0+1, m, m); m = 1 for multistep methods. The
    quadrature weights proper are the last rows, see ``omega``.
    """

    h: float
    method: str
    matrices: np.ndarray
    ncirc: int = 0
    rotated: bool = False

    @property
    def stages(self) -> int:
        return self.matrices.shape[-1]

    @property
    def omega(self) -> np.ndarray:
        last = self.matrices[:, -1, :]
        return last[:, 0] if self.stages == 1 else last

    def __len__(self):
        return self.matrices.shape[0]


def default_ncirc(n0: int) -> int:
    return max(128, 8 * n0)


def default_rho(ncirc: int, n0: int) -> float:
    # aliasing ~ rho^ncirc against roundoff ~ eps * rho^-n0
    return np.finfo(float).eps ** (1.0 / (ncirc + n0))


def _transfer_values(kernel, method, h, zeta):
    """F(delta(zeta)/h) for every zeta, as (len(zeta), m, m) matrices."""
    S = method.symbol(zeta) / h
    m = S.shape[-1]
    if m == 1:
        return kernel(S[:, 0, 0])[:, None, None], False
    lam, V = np.linalg.eig(S)
    Vinv = np.linalg.inv(V)
    cond = np.linalg.norm(V, axis=(-2, -1)) * np.linalg.norm(Vinv, axis=(-2, -1))
    vals = (V * kernel(lam)[:, None, :]) @ Vinv
    return vals, bool(np.any(cond > EIGVEC_COND_LIMIT))


def weights_circle(kernel, method, h: float, n0: int, rho: float | None = None,
                   ncirc: int | None = None) -> WeightSequence:
    """First n0+1 weights from the trapezoidal rule on the circle |zeta| = rho.

    The trapezoidal sum over the ``ncirc`` circle nodes is a discrete Fourier
    transform and is evaluated with the FFT.
    """
    ncirc = default_ncirc(n0) if ncirc is None else ncirc
    if ncirc < 4 * n0:
        raise ValueError("ncirc must be at least 4*n0")
    rho = default_rho(ncirc, n0) if rho is None else rho
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    l = np.arange(ncirc)
    shift = 0.0
    vals, bad = _transfer_values(kernel, method, h, rho * np.exp(2j * np.pi * l / ncirc))
    if bad:
        log.warning("ill-conditioned eigenvectors on the circle; using the half-shifted grid")
        shift = 0.5
        vals, bad = _transfer_values(kernel, method, h, rho * np.exp(2j * np.pi * (l + shift) / ncirc))
        if bad:
            raise np.linalg.LinAlgError("matrix transfer function not diagonalizable on either grid")
    n = np.arange(n0 + 1)
    coef = np.fft.fft(vals, axis=0)[: n0 + 1] / ncirc
    scale = rho ** (-n.astype(float)) * np.exp(-2j * np.pi * shift * n / ncirc)
    mats = coef * scale[:, None, None]
    return WeightSequence(h=h, method=method.name, matrices=_maybe_real(mats), ncirc=ncirc,
                          rotated=shift != 0)


def _maybe_real(a, tol=1e-10):
    if np.max(np.abs(a.imag), initial=0.0) <= tol * max(np.max(np.abs(a)), 1e-300):
        return a.real.copy()
    return a


def weights_contour(kernel, method, h: float, n, rule: QuadratureRule):
    """Weights from the contour rule: h * sum_k w_k e_n(h lam_k) F(lam_k).

    ``n`` may be an array; the result has shape n.shape (multistep) or
    n.shape + (m,) (Runge-Kutta, last row of W_n).
    """
    n = np.asarray(n)
    lam = rule.nodes
    r, q, _ = method.components(h * lam)  # (K, C), (K, C, m)
    coef = h * rule.weights * kernel(lam)  # (K,)
    nn = n.reshape(-1, 1, 1).astype(float)
    powers = r[None, :, :] ** nn  # (len(n), K, C)
    out = np.einsum("k,nkc,kcm->nm", coef, powers, q)
    out = out.reshape(n.shape + (method.stages,))
    return out[..., 0] if method.stages == 1 else out


def contour_errors(kernel, method, h: float, n_max: int, kind: str = "talbot", profile: str = "accurate",
                   B: int | None = None, K: int | None = None, n_min: int | None = None,
                   ncirc: int | None = None, ell_max: int | None = None, reference=None):
    """Relative error of the contour weights against the circle reference.

    Lag n is approximated on every level 2 <= ell <= ell_max whose interval
    [B^(ell-1), 2 B^ell) contains it; the worst of these is reported. For
    Runge-Kutta methods the error is measured on the weight row in the max
    norm. ``reference`` may hold precomputed circle weights for lags 0..n_max.

    Returns
    -------
    n : ndarray
        Lags n_min..n_max (default n_min = B).
    err : ndarray
    """
    B = PROFILES[profile][0] if B is None else B
    n_min = B if n_min is None else n_min
    if n_min < B or n_max < n_min:
        raise ValueError("need B <= n_min <= n_max")
    if reference is not None:
        ref = np.asarray(reference)
        if len(ref) <= n_max:
            raise ValueError("reference is shorter than n_max + 1")
    else:
        if ncirc is None:
            ncirc = default_ncirc(n_max)
        ref = weights_circle(kernel, method, h, n_max, ncirc=ncirc).omega
    n_all = np.arange(n_min, n_max + 1)
    err = np.zeros(len(n_all))
    ell = 2
    while B ** (ell - 1) <= n_max and (ell_max is None or ell <= ell_max):
        lo, hi = max(B ** (ell - 1), n_min), min(2 * B**ell, n_max + 1)
        if lo < hi:
            n = np.arange(lo, hi)
            rule = interval_params(ell, B, h, kind=kind, profile=profile, K=K,
                                   vertex_c=kernel.vertex_c).rule()
            approx = weights_contour(kernel, method, h, n, rule)
            exact = ref[n]
            if exact.ndim > 1:
                rel = np.max(np.abs(approx - exact), axis=1) / np.max(np.abs(exact), axis=1)
            else:
                rel = np.abs(approx - exact) / np.abs(exact)
            err[n - n_min] = np.maximum(err[n - n_min], rel)
        ell += 1
    return n_all, err


def window_sum(weights_rev, g_block):
    """sum_j W[j] . g[j] over a block; the shared inner kernel of the direct paths."""
    return np.tensordot(weights_rev, g_block, axes=(list(range(weights_rev.ndim)),
                                                     list(range(weights_rev.ndim))))


def convolve_direct(weights: WeightSequence, g) -> np.ndarray:
    """Quadratic-cost discrete convolution u[n] = sum_{j<=n} omega_{n-j} g_j.

    ``g`` has shape (N+1,) or (N+1, d) for multistep methods and (N+1, m) or
    (N+1, m, d) for Runge-Kutta methods (stage values). Entry n of the result
    is the sum up to j = n, i.e. the value after feeding g_n.
    """
    g = np.asarray(g)
    m = weights.stages
    N1 = g.shape[0]
    if N1 > len(weights):
        raise ValueError(f"need weights for lags 0..{N1 - 1}, have {len(weights)}")
    if m > 1 and (g.ndim < 2 or g.shape[1] != m):
        raise ValueError("Runge-Kutta data must carry one value per stage")
    om = weights.omega
    if m == 1:
        om = om[:, None]
        g = g[:, None] if g.ndim == 1 else g[:, None, :]
    out_shape = (N1,) + g.shape[2:]
    dtype = np.result_type(om, g)
    u = np.zeros(out_shape, dtype=dtype)
    for n in range(N1):
        u[n] = window_sum(om[n::-1], g[: n + 1])
    return u
