"""Neural-network PIDE solver for European put options under the
variance-gamma jump model, with FFT and Monte-Carlo reference pricers.

Environment variables (read at import time, before numpy is loaded):

* ``PIDENN_NUM_THREADS`` -- caps BLAS/numba thread pools (sets
  ``OMP_NUM_THREADS`` etc. if they are not already set).  Use for
  deterministic CI runs.
* ``PIDENN_NO_NUMBA`` -- set to ``1`` to select the pure-numpy kernel
  fallbacks instead of the numba-compiled hot loops.
"""

import os as _os

_cap = _os.environ.get("PIDENN_NUM_THREADS")
if _cap:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "NUMBA_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _cap)

__version__ = "0.1.0"

from .vg import VgParams, LevySplit
from .quadrature import QuadGrid, build_grid, outer_integral
from .network import Mlp, MlpConfig, init, forward, save_checkpoint, load_checkpoint
from .autodiff import Jet, ParamGrad, jet_forward, loss_param_gradient
from .residuals import Sample, DomainBox, LossBreakdown, PideProblem, total_loss
from .sampling import SampleBox, SampleSet, sobol_sequence, make_samples
from .oracle import FftConfig, vg_charfn, fft_put_price, mc_put_price, bms_put_price
from .greeks import GreekPoint, greeks, export_curves

__all__ = [
    "VgParams", "LevySplit",
    "QuadGrid", "build_grid", "outer_integral",
    "Mlp", "MlpConfig", "init", "forward", "save_checkpoint", "load_checkpoint",
    "Jet", "ParamGrad", "jet_forward", "loss_param_gradient",
    "Sample", "DomainBox", "LossBreakdown", "PideProblem", "total_loss",
    "SampleBox", "SampleSet", "sobol_sequence", "make_samples",
    "FftConfig", "vg_charfn", "fft_put_price", "mc_put_price", "bms_put_price",
    "GreekPoint", "greeks", "export_curves",
]
