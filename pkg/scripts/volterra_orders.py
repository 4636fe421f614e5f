"""Convergence of the Volterra solvers at t = T against a fine reference of the same method.

Writes results/volterra_orders.csv with columns method,h,error,order.
"""

from dataclasses import dataclass

import numpy as np
from _common import open_csv, parse_config

from fastcq.oblivious import EngineConfig
from fastcq.stepgen import get_method
from fastcq.volterra import cubic_sine_problem, solve_volterra


@dataclass
class Config:
    T: float = 60.0
    h_ref: float = 0.001
    hs: tuple = (0.2, 0.1, 0.05, 0.025)
    methods: tuple = ("be", "bdf2", "radau3", "radau5")
    B: int = 5
    K: int = 30
    contour: str = "talbot"
    outdir: str = "results"


def main(cfg: Config):
    problem = cubic_sine_problem(cfg.T)
    engine = EngineConfig(B=cfg.B, K=cfg.K, contour=cfg.contour)
    f, w = open_csv(cfg.outdir, "volterra_orders.csv")
    with f:
        w.comment(f"T={cfg.T} h_ref={cfg.h_ref} B={cfg.B} K={cfg.K} contour={cfg.contour}")
        w.header("method", "h", "error", "order")
        for name in cfg.methods:
            method = get_method(name)
            ref = solve_volterra(problem, method, cfg.h_ref, round(cfg.T / cfg.h_ref), config=engine).u[-1]
            prev = None
            for h in cfg.hs:
                err = abs(solve_volterra(problem, method, h, round(cfg.T / h), config=engine).u[-1] - ref)
                order = np.log(prev[1] / err) / np.log(prev[0] / h) if prev else float("nan")
                w.row(name, h, err, order)
                print(f"{name:6s} h={h:<7g} err={err:.3e} order={order:.2f}")
                prev = (h, err)


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
