"""Trapezoidal quadrature on Talbot contours, hyperbolas and circles.

A rule approximates ``(1/(2 pi i)) * integral over Gamma of phi(lam) d lam``
by ``sum_k w_k phi(lam_k)``, with Gamma traversed upward (increasing
imaginary part) for the Talbot and hyperbola families.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROFILES = {"fast": (10, 10), "accurate": (5, 15)}

# per-kind shape parameters, mu = scale / T_ell
TALBOT_SCALE = 8.0
TALBOT_SKEW = 0.6
HYPERBOLA_ALPHA = 1.0
HYPERBOLA_FAST = (3.5, 0.45)
HYPERBOLA_ACCURATE = (9.0, 0.25)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must have the same length")

    def __len__(self):
        return len(self.nodes)

    def apply(self, phi):
        """Apply the rule to a vectorized integrand phi(lam)."""
        return np.sum(self.weights * phi(self.nodes))

    def upper_half(self):
        """Nodes k = 0..K with multiplicities (1, 2, ..., 2) for real integrands.

        Valid for conjugate-symmetric rules ordered k = -K..K.
        """
        K = len(self.nodes) // 2
        mult = np.full(K + 1, 2.0)
        mult[0] = 1.0
        return self.nodes[K:], self.weights[K:], mult


@dataclass(frozen=True)
class ContourSpec:
    kind: str
    K: int
    mu: float = 1.0
    talbot_skew: float = TALBOT_SKEW
    sigma: float = 0.0
    alpha: float = HYPERBOLA_ALPHA
    tau: float = 0.64
    rho: float = 0.5

    def rule(self) -> QuadratureRule:
        if self.kind == "talbot":
            return talbot_rule(self.mu, self.talbot_skew, self.sigma, self.K)
        if self.kind == "hyperbola":
            return hyperbola_rule(self.mu, self.alpha, self.tau, self.K, sigma=self.sigma)
        if self.kind == "circle":
            return circle_rule(self.rho, self.K)
        raise ValueError(f"unknown contour kind {self.kind!r}")


def _check_branch_cut(nodes):
    on_cut = (np.abs(nodes.imag) == 0) & (nodes.real <= 0)
    if np.any(on_cut):
        raise ValueError("contour node on the negative real axis")


def talbot_rule(mu: float, talbot_skew: float, sigma: float, K: int) -> QuadratureRule:
    """Talbot contour sigma + mu*(theta*cot(theta) + i*skew*theta), theta_k = k*pi/(K+1)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if not talbot_skew > 0:
        raise ValueError("talbot_skew must be positive")
    k = np.arange(-K, K + 1)
    theta = k * np.pi / (K + 1)
    nodes = np.empty(2 * K + 1, dtype=complex)
    deriv = np.empty(2 * K + 1, dtype=complex)
    nz = k != 0
    th = theta[nz]
    cot = np.cos(th) / np.sin(th)
    nodes[nz] = sigma + mu * (th * cot + 1j * talbot_skew * th)
    deriv[nz] = mu * (cot - th / np.sin(th) ** 2 + 1j * talbot_skew)
    # theta -> 0 limits of theta*cot(theta) and its derivative
    nodes[K] = sigma + mu
    deriv[K] = 1j * mu * talbot_skew
    weights = -1j * deriv / (2 * (K + 1))
    _check_branch_cut(nodes)
    return QuadratureRule(nodes, weights)


def hyperbola_rule(mu: float, alpha: float, tau: float, K: int, sigma: float = 0.0) -> QuadratureRule:
    """Hyperbola sigma + mu*(1 - sin(alpha + i*theta)), theta_k = k*tau."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not 0 < alpha < np.pi / 2:
        raise ValueError("alpha must lie in (0, pi/2)")
    theta = np.arange(-K, K + 1) * tau
    nodes = sigma + mu * (1 - np.sin(alpha + 1j * theta))
    deriv = -1j * mu * np.cos(alpha + 1j * theta)
    weights = 1j * tau * deriv / (2 * np.pi)
    _check_branch_cut(nodes)
    return QuadratureRule(nodes, weights)


def circle_rule(rho: float, count: int) -> QuadratureRule:
    """Counter-clockwise circle |zeta| = rho with ``count`` equispaced nodes."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    zeta = rho * np.exp(2j * np.pi * np.arange(count) / count)
    return QuadratureRule(zeta, zeta / count)


def interval_end(ell: int, B: int, h: float) -> float:
    """Right end-point T_ell = 2 B^ell h of the interval [B^(ell-1) h, 2 B^ell h)."""
    return 2.0 * B**ell * h


def interval_params(ell: int, B: int, h: float, kind: str = "talbot", profile: str = "accurate",
                    K: int | None = None, vertex_c: float = 0.0) -> ContourSpec:
    """Contour parameters for the lags of level ``ell``.

    ``profile`` fixes K (fast: 10, accurate: 15) unless ``K`` is given; for
    the hyperbola a different K rescales the step tau by sqrt(K_profile / K).
    The contour scale follows the right end-point of the interval.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    T = interval_end(ell, B, h)
    K0 = PROFILES[profile][1]
    K = K0 if K is None else K
    sigma = 0.0 if vertex_c == 0 else vertex_c + 1.0 / T
    if kind == "talbot":
        return ContourSpec("talbot", K, mu=TALBOT_SCALE / T, talbot_skew=TALBOT_SKEW, sigma=sigma)
    if kind == "hyperbola":
        scale, tau = HYPERBOLA_FAST if profile == "fast" else HYPERBOLA_ACCURATE
        # step ~ K^{-1/2} balances discretization against truncation
        tau = tau * np.sqrt(K0 / K)
        return ContourSpec("hyperbola", K, mu=scale / T, alpha=HYPERBOLA_ALPHA, tau=tau, sigma=sigma)
    raise ValueError(f"unknown contour kind {kind!r}")
