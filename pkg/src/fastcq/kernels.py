"""Sectorial Laplace transforms and the built-in power kernels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SectorialTransform:
    """A scalar Laplace transform F(s) together with its sector data.

    F is assumed analytic in ``|arg(s - vertex_c)| < pi - angle_phi`` and
    bounded there by ``bound_M * |s|**(-exponent_nu)``. The declaration is
    trusted; ``verify_sector`` is an offline spot check.

    ``evaluate`` must accept numpy arrays of complex numbers.
    """

    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    vertex_c: float = 0.0
    angle_phi: float = 0.1
    bound_M: float = 1.0
    exponent_nu: float = 1.0
    name: str = "F"

    def __post_init__(self):
        if not self.exponent_nu > 0:
            raise ValueError("exponent_nu must be positive")
        if not 0 < self.angle_phi < np.pi / 2:
            raise ValueError("angle_phi must lie in (0, pi/2)")
        if not self.bound_M > 0:
            raise ValueError("bound_M must be positive")

    def __call__(self, s):
        return self.evaluate(np.asarray(s, dtype=complex))


class PowerKernel(SectorialTransform):
    """F(s) = s**(-beta) on the principal branch, f(t) = t**(beta-1)/Gamma(beta)."""

    def __init__(self, beta: float, angle_phi: float = 0.1):
        beta = float(beta)
        if not beta > 0:
            raise ValueError("beta must be positive")
        object.__setattr__(self, "beta", beta)
        super().__init__(
            evaluate=lambda s: np.exp(-beta * np.log(s)),
            vertex_c=0.0,
            angle_phi=angle_phi,
            bound_M=1.0,
            exponent_nu=beta,
            name=f"pow:{beta:g}",
        )

    def __repr__(self):
        return f"PowerKernel(beta={self.beta!r})"

    def __eq__(self, other):
        return isinstance(other, PowerKernel) and other.beta == self.beta

    def __hash__(self):
        return hash(("pow", self.beta))


def eval_transform(kernel: SectorialTransform, s):
    """Evaluate F(s). Non-finite values mean s hit a singularity."""
    val = kernel(s)
    if not np.all(np.isfinite(val)):
        raise FloatingPointError(f"{kernel.name}: non-finite transform value (singularity?)")
    return val if np.ndim(val) else complex(val)


@dataclass
class SectorReport:
    passed: bool
    worst_ratio: float
    samples: int


def verify_sector(kernel: SectorialTransform, samples: int = 1000, seed: int = 0) -> SectorReport:
    """Sample the declared sector and check ``|F(s)| |s|^nu <= M``.

    Points are drawn with log-uniform modulus in [1, 1e6] and uniform
    argument strictly inside the sector about ``vertex_c``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    half = np.pi - kernel.angle_phi
    arg = rng.uniform(-half, half, samples)
    mod = 10.0 ** rng.uniform(0.0, 6.0, samples)
    s = kernel.vertex_c + mod * np.exp(1j * arg)
    ratio = np.abs(kernel(s)) * np.abs(s) ** kernel.exponent_nu / kernel.bound_M
    worst = float(np.max(ratio))
    return SectorReport(passed=bool(worst <= 1.0 + 1e-12), worst_ratio=worst, samples=samples)


def parse_kernel(text: str) -> SectorialTransform:
    """Parse the CLI kernel syntax ``pow:<beta>``."""
    kind, _, arg = text.partition(":")
    if kind != "pow" or not arg:
        raise ValueError(f"unknown kernel spec {text!r}; expected pow:<beta>")
    return PowerKernel(beta=float(arg))
