"""Relative error of the contour weights per lag, for each contour and profile.

Writes results/contour_<kind>_<profile>_<method>.csv with columns n,rel_err.
"""

from dataclasses import dataclass

from _common import open_csv, parse_config

from fastcq.cqweights import contour_errors, weights_circle
from fastcq.kernels import PowerKernel
from fastcq.stepgen import get_method


@dataclass
class Config:
    beta: float = 0.5
    h: float = 0.1
    methods: tuple = ("be", "bdf2", "radau3", "radau5")
    n_min: int = 21
    ell_max: int = 5
    outdir: str = "results"


def main(cfg: Config):
    kernel = PowerKernel(cfg.beta)
    for name in cfg.methods:
        method = get_method(name)
        for profile, B in (("accurate", 5), ("fast", 10)):
            n_max = 2 * B**cfg.ell_max - 1
            ref = weights_circle(kernel, method, cfg.h, n_max).omega
            for kind in ("talbot", "hyperbola"):
                n, err = contour_errors(kernel, method, cfg.h, n_max, kind=kind, profile=profile, B=B,
                                        n_min=cfg.n_min, ell_max=cfg.ell_max, reference=ref)
                f, w = open_csv(cfg.outdir, f"contour_{kind}_{profile}_{name}.csv")
                with f:
                    w.comment(f"beta={cfg.beta} h={cfg.h} B={B}")
                    w.header("n", "rel_err")
                    for k, e in zip(n, err):
                        w.row(int(k), e)
                print(f"{kind:9s} {profile:8s} {name:6s} max {err.max():.2e}")


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
