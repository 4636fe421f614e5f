"""Fractional subdiffusion of exp(-x^2) with transparent boundaries: errors at t = T versus h.

The default is the desk-scale grid M = 100; ``--M 450 --h-ref 0.0002`` with
smaller step sizes gives the full-size run (slow). Writes
results/subdiffusion_M<M>.csv with columns method,h,abs_err_at_t and the
reference profile results/subdiffusion_ref_M<M>.csv.
"""

from dataclasses import dataclass

import numpy as np
from _common import open_csv, parse_config

from fastcq.cli import write_xu
from fastcq.fracdiff import gaussian_problem, run_simulation
from fastcq.oblivious import EngineConfig
from fastcq.stepgen import get_method


@dataclass
class Config:
    alpha: float = 2 / 3
    a: float = 5.0
    M: int = 100
    T: float = 2.0
    h_ref: float = 5e-4
    K_ref: int = 40
    hs: tuple = (0.04, 0.02, 0.01, 0.005)
    methods: tuple = ("be", "bdf2", "radau3", "radau5")
    B: int = 5
    K: int = 15
    outdir: str = "results"


def main(cfg: Config):
    problem = gaussian_problem(cfg.alpha, cfg.a, cfg.M)
    ref = run_simulation(problem, get_method("radau5"), cfg.h_ref, round(cfg.T / cfg.h_ref),
                         config=EngineConfig(B=cfg.B, K=cfg.K_ref))
    f, w = open_csv(cfg.outdir, f"subdiffusion_M{cfg.M}.csv")
    write_xu(f"{cfg.outdir}/subdiffusion_ref_M{cfg.M}.csv", ref.x, ref.u)
    with f:
        w.comment(f"alpha={cfg.alpha} a={cfg.a} M={cfg.M} t={cfg.T} B={cfg.B} K={cfg.K}")
        w.header("method", "h", "abs_err_at_t")
        for name in cfg.methods:
            for h in cfg.hs:
                u = run_simulation(problem, get_method(name), h, round(cfg.T / h),
                                   config=EngineConfig(B=cfg.B, K=cfg.K)).u
                err = np.max(np.abs(u - ref.u))
                w.row(name, h, err)
                print(f"{name:6s} h={h:<7g} err={err:.3e}")


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
