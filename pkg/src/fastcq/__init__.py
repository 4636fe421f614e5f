"""Fast and oblivious convolution quadrature."""

import os as _os

# CQ_THREADS caps the BLAS thread pools; it must be set before numpy loads
_threads = _os.environ.get("CQ_THREADS")
if _threads is not None and _threads.strip().isdigit():
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, str(max(1, int(_threads))))

from .contours import ContourSpec, QuadratureRule, hyperbola_rule, interval_params, talbot_rule  # noqa: E402
from .cqweights import WeightSequence, contour_errors, convolve_direct, weights_circle, weights_contour  # noqa: E402
from .fracdiff import Grid1D, SubdiffusionProblem, gaussian_problem, run_simulation  # noqa: E402
from .kernels import PowerKernel, SectorialTransform, parse_kernel  # noqa: E402
from .oblivious import ConvolutionEngine, EngineConfig, Schedule, fast_convolve, schedule_step  # noqa: E402
from .stepgen import get_method, radau_iia  # noqa: E402
from .volterra import VolterraProblem, cubic_sine_problem, newton_solve, solve_volterra  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "ContourSpec", "QuadratureRule", "hyperbola_rule", "interval_params", "talbot_rule",
    "WeightSequence", "contour_errors", "convolve_direct", "weights_circle", "weights_contour",
    "Grid1D", "SubdiffusionProblem", "gaussian_problem", "run_simulation",
    "PowerKernel", "SectorialTransform", "parse_kernel",
    "ConvolutionEngine", "EngineConfig", "Schedule", "fast_convolve", "schedule_step",
    "get_method", "radau_iia",
    "VolterraProblem", "cubic_sine_problem", "newton_solve", "solve_volterra",
]
