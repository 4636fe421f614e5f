"""Command-line front end: CSV data for weights, contour errors, convolutions,
Volterra and subdiffusion runs, and work/memory counters.

Exit status: 0 on success, 2 on usage errors, 1 on numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .cqweights import contour_errors, convolve_direct, weights_circle
from .fracdiff import Grid1D, SubdiffusionProblem, run_simulation
from .kernels import parse_kernel
from .oblivious import EngineConfig, fast_convolve
from .stepgen import METHOD_NAMES, get_method
from .volterra import NewtonError, cubic_sine_problem, solve_volterra

log = logging.getLogger("fastcq")

FORCINGS = {
    "one": lambda t: np.ones_like(t),
    "sin": np.sin,
    "texp": lambda t: t * np.exp(-t),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    return f"{float(x):.17g}"


class CsvWriter:
    def __init__(self, stream):
        self.stream = stream

    def comment(self, text):
        self.stream.write(f"# {text}\n")

    def header(self, *cols):
        self.stream.write(",".join(cols) + "\n")

    def row(self, *vals):
        self.stream.write(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer))
                                                                   else fmt(v)) for v in vals) + "\n")


def write_xu(path, x, u):
    with open(path, "w") as f:
        w = CsvWriter(f)
        w.header("x", "u")
        for xi, ui in zip(x, u):
            w.row(xi, ui)


def read_csv(path):
    """Read a CSV written by this tool into {column: array}."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise UsageError(f"{path}: no data")
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return {c: data[:, i] for i, c in enumerate(cols)}


# ---------------------------------------------------------------------- arguments
def _engine_args(p, B=True):
    if B:
        p.add_argument("--B", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--contour", choices=("talbot", "hyperbola"), default="hyperbola")
    p.add_argument("--profile", choices=("fast", "accurate"), default="accurate")


def _common(p):
    p.add_argument("--config", default=None, help="key=value file; flags override it")
    p.add_argument("--out", default=None, help="output file (default: standard output)")


def build_parser():
    parser = _Parser(prog="fastcq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("weights", help="convolution quadrature weights from the circle rule")
    p.add_argument("--kernel", default="pow:0.5")
    p.add_argument("--method", choices=METHOD_NAMES, default="be")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--n", type=int, default=10, help="largest index")
    p.add_argument("--ncirc", type=int, default=None)
    _common(p)

    p = sub.add_parser("contour-error", help="relative error of the contour weights per lag")
    p.add_argument("--kernel", default="pow:0.5")
    p.add_argument("--method", choices=METHOD_NAMES, default="be")
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--Nmax", type=int, default=20000)
    p.add_argument("--Nmin", type=int, default=None)
    _engine_args(p)
    p.set_defaults(contour="talbot")
    _common(p)

    p = sub.add_parser("convolve", help="fast convolution of a test forcing")
    p.add_argument("--kernel", default="pow:0.5")
    p.add_argument("--method", choices=METHOD_NAMES, default="be")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--g", choices=tuple(FORCINGS), default="one")
    p.add_argument("--check", action="store_true", help="compare with the direct convolution")
    _engine_args(p)
    _common(p)

    p = sub.add_parser("volterra", help="u(t) = -int_0^t (u(s) - sin s)^3 / sqrt(pi (t-s)) ds")
    p.add_argument("--method", choices=METHOD_NAMES, default="be")
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--N", type=int, default=600)
    p.add_argument("--mode", choices=("direct", "fast"), default="fast")
    p.add_argument("--ref", default=None, help="reference CSV n,t,u (linearly interpolated in t)")
    _engine_args(p)
    _common(p)

    p = sub.add_parser("fracdiff", help="subdiffusion of exp(-x^2) with transparent boundaries")
    p.add_argument("--alpha", type=float, default=2 / 3)
    p.add_argument("--a", type=float, default=5.0)
    p.add_argument("--M", type=int, default=100)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--method", choices=METHOD_NAMES, default="be")
    p.add_argument("--mode", choices=("direct", "fast"), default="fast")
    p.add_argument("--boundary", choices=("transparent", "dirichlet"), default="transparent")
    p.add_argument("--snapshot-every", type=int, default=None)
    p.add_argument("--snapshot-dir", default=".", help="directory for snapshot CSV files")
    p.add_argument("--ref", default=None, help="reference CSV x,u at the final time")
    _engine_args(p)
    _common(p)

    p = sub.add_parser("bench", help="time and counters of scalar convolutions over a ladder of N")
    p.add_argument("--kernel", default="pow:0.5")
    p.add_argument("--method", choices=METHOD_NAMES, default="be")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--Nmin", type=int, default=1000)
    p.add_argument("--Nmax", type=int, default=64000)
    p.add_argument("--factor", type=int, default=2)
    _engine_args(p)
    _common(p)
    return parser


def _read_config(path):
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for k, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{k}: expected key=value")
        out[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("missing subcommand")
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        conf = _read_config(args.config)
        for key in conf:
            if key not in known or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r}")
        # command-line flags win: re-parse with the file values as defaults
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
        for key in conf:
            action, val = known[key], getattr(args, key)
            if action.nargs == 0 and isinstance(val, str):  # store_true flags
                setattr(args, key, val.lower() in ("1", "true", "yes", "on"))
            elif action.choices is not None and val not in action.choices:
                raise UsageError(f"config {key}: invalid choice {val!r}")
    return args


def _config(args):
    return EngineConfig(B=getattr(args, "B", None), K=args.K, contour=args.contour, profile=args.profile)


def _positive(**vals):
    for name, v in vals.items():
        if v is None or not v > 0:
            raise UsageError(f"--{name} must be positive")


# ---------------------------------------------------------------------- commands
def cmd_weights(args, out):
    _positive(h=args.h)
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    ws = weights_circle(parse_kernel(args.kernel), get_method(args.method), args.h, args.n, ncirc=args.ncirc)
    om = ws.omega
    if om.ndim == 1:
        out.header("n", "omega")
        for n, w in enumerate(om):
            out.row(n, w.real)
    else:
        out.header("n", *[f"omega_{i + 1}" for i in range(om.shape[1])])
        for n, w in enumerate(om):
            out.row(n, *w.real)


def cmd_contour_error(args, out):
    _positive(h=args.h)
    n, err = contour_errors(parse_kernel(args.kernel), get_method(args.method), args.h, args.Nmax,
                            kind=args.contour, profile=args.profile, B=args.B, K=args.K, n_min=args.Nmin)
    out.comment(f"contour={args.contour} profile={args.profile} kernel={args.kernel} method={args.method}")
    out.header("n", "rel_err")
    for k, e in zip(n, err):
        out.row(int(k), e)


def _forcing_samples(name, method, h, N):
    t = np.arange(N + 1) * h
    if method.stages > 1:
        t = t[:N, None] + h * method.nodes_c[None, :]
    return FORCINGS[name](t)


def cmd_convolve(args, out):
    _positive(h=args.h, N=args.N)
    kernel, method = parse_kernel(args.kernel), get_method(args.method)
    g = _forcing_samples(args.g, method, args.h, args.N)
    u, eng = fast_convolve(kernel, method, args.h, g, _config(args))
    if method.stages > 1:
        u = np.concatenate([[0.0], u])  # entry j of the RK output is u_{j+1}
    if args.check:
        ud = convolve_direct(weights_circle(kernel, method, args.h, args.N), g).real
        if method.stages > 1:
            ud = np.concatenate([[0.0], ud])
    rep = eng.memory_report()
    out.comment(f"kernel_evals={eng.kernel_evals}, cmults={eng.cmults}, stored={rep.stored_scalars}")
    out.comment(f"peak_stored={rep.peak_per_unknown:g}, levels={rep.levels}, B={eng.B}, K={eng.K}")
    if args.check:
        out.header("n", "t", "u_fast", "u_direct", "abs_err")
        for n in range(args.N + 1):
            out.row(n, n * args.h, u[n], ud[n], abs(u[n] - ud[n]))
    else:
        out.header("n", "t", "u_fast")
        for n in range(args.N + 1):
            out.row(n, n * args.h, u[n])


def cmd_volterra(args, out):
    _positive(h=args.h, N=args.N)
    sol = solve_volterra(cubic_sine_problem(T=args.N * args.h), get_method(args.method), args.h, args.N,
                         mode=args.mode, config=_config(args))
    if sol.engine is not None:
        rep = sol.engine.memory_report()
        out.comment(f"kernel_evals={sol.engine.kernel_evals}, cmults={sol.engine.cmults}, "
                    f"stored={rep.stored_scalars}")
    if args.ref:
        ref = read_csv(args.ref)
        if "t" not in ref or "u" not in ref:
            raise UsageError("reference file needs columns t and u")
        if sol.t[-1] > ref["t"][-1] * (1 + 1e-12):
            raise UsageError("reference does not cover the time interval")
        uref = np.interp(sol.t, ref["t"], ref["u"])
        out.header("n", "t", "u", "abs_err")
        for n in range(len(sol.t)):
            out.row(n, sol.t[n], sol.u[n], abs(sol.u[n] - uref[n]))
    else:
        out.header("n", "t", "u")
        for n in range(len(sol.t)):
            out.row(n, sol.t[n], sol.u[n])


def cmd_fracdiff(args, out):
    _positive(h=args.h, N=args.N, a=args.a)
    if args.M < 3:
        raise UsageError("--M must be >= 3")
    if args.snapshot_every is not None and args.snapshot_every < 1:
        raise UsageError("--snapshot-every must be >= 1")
    try:
        problem = SubdiffusionProblem(alpha=args.alpha, u0=lambda x: np.exp(-x**2), grid=Grid1D(args.a, args.M))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = run_simulation(problem, get_method(args.method), args.h, args.N, mode=args.mode,
                         config=_config(args), boundary=args.boundary, snapshot_every=args.snapshot_every)
    if args.snapshot_every:
        d = Path(args.snapshot_dir)
        d.mkdir(parents=True, exist_ok=True)
        for n, u in sorted(res.snapshots.items()):
            write_xu(d / f"snapshot_{args.method}_{n:07d}.csv", res.x, u)
    if args.ref:
        ref = read_csv(args.ref)
        if len(ref.get("u", ())) != len(res.u) or np.max(np.abs(ref["x"] - res.x)) > 1e-12:
            raise UsageError("reference grid does not match")
        out.comment(f"t={fmt(res.t)}")
        out.header("h", "method", "abs_err_at_t")
        out.row(args.h, args.method, np.max(np.abs(res.u - ref["u"])))
    else:
        out.comment(f"t={fmt(res.t)}")
        out.header("x", "u")
        for xi, ui in zip(res.x, res.u):
            out.row(xi, ui)


def run_bench(kernel, method, h, sizes, config):
    """Yield (N, seconds, kernel_evals, cmults, stored) for scalar convolutions of sin."""
    for N in sizes:
        t = np.arange(N + 1) * h
        g = np.sin(t) if method.stages == 1 else np.sin(t[:N, None] + h * method.nodes_c[None, :])
        t0 = time.perf_counter()
        _, eng = fast_convolve(kernel, method, h, g, config)
        sec = time.perf_counter() - t0
        rep = eng.memory_report()
        yield N, sec, eng.kernel_evals, eng.cmults, int(round(rep.peak_per_unknown))


def cmd_bench(args, out):
    _positive(h=args.h, Nmin=args.Nmin)
    if args.factor < 2 or args.Nmax < args.Nmin:
        raise UsageError("need --factor >= 2 and --Nmax >= --Nmin")
    sizes = []
    N = args.Nmin
    while N <= args.Nmax:
        sizes.append(N)
        N *= args.factor
    out.comment("stored_scalars is the peak over the run")
    out.header("N", "seconds", "kernel_evals", "cmults", "stored_scalars")
    for row in run_bench(parse_kernel(args.kernel), get_method(args.method), args.h, sizes, _config(args)):
        out.row(*row)
        out.stream.flush()


COMMANDS = {
    "weights": cmd_weights,
    "contour-error": cmd_contour_error,
    "convolve": cmd_convolve,
    "volterra": cmd_volterra,
    "fracdiff": cmd_fracdiff,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=os.environ.get("CQ_LOGLEVEL", "WARNING"), format="%(levelname)s %(message)s")
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"fastcq: error: {exc}", file=sys.stderr)
        return 2
    stream = open(args.out, "w") if args.out else sys.stdout
    try:
        COMMANDS[args.command](args, CsvWriter(stream))
    except UsageError as exc:
        print(f"fastcq {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (NewtonError, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        print(f"fastcq {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # bad parameter values (kernel syntax, ranges) surface from the library
        print(f"fastcq {args.command}: error: {exc}", file=sys.stderr)
        return 2
    finally:
        if args.out:
            stream.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
