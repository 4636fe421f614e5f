"""Wall time, multiplication count and stored entries of the fast scalar convolution.

Writes results/work_memory_<method>.csv with columns N,seconds,kernel_evals,cmults,stored_scalars.
"""

from dataclasses import dataclass

from _common import open_csv, parse_config

from fastcq.cli import run_bench
from fastcq.kernels import PowerKernel
from fastcq.oblivious import EngineConfig
from fastcq.stepgen import get_method


@dataclass
class Config:
    method: str = "be"
    beta: float = 0.5
    h: float = 1e-3
    n_min: int = 1000
    n_max: int = 256000
    B: int = 5
    K: int = 15
    outdir: str = "results"


def main(cfg: Config):
    sizes = []
    N = cfg.n_min
    while N <= cfg.n_max:
        sizes.append(N)
        N *= 2
    f, w = open_csv(cfg.outdir, f"work_memory_{cfg.method}.csv")
    with f:
        w.comment("stored_scalars is the peak over the run")
        w.header("N", "seconds", "kernel_evals", "cmults", "stored_scalars")
        prev = None
        for row in run_bench(PowerKernel(cfg.beta), get_method(cfg.method), cfg.h, sizes,
                             EngineConfig(B=cfg.B, K=cfg.K)):
            w.row(*row)
            f.flush()
            ratio = f"  time x{row[1] / prev[1]:.2f}" if prev else ""
            print(f"N={row[0]:>8d} {row[1]:8.2f}s cmults={row[3]:>11d} stored={row[4]}{ratio}")
            prev = row


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
