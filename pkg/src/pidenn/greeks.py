"""Price sensitivities from a trained net and from the reference pricer.

In log-price coordinates (x = ln S, tau = time to maturity) the spot
sensitivities of the price surface w are

    delta = w_x / S,
    gamma = (w_xx - w_x) / S^2,
    theta = -w_tau,

so one jet evaluation yields price and all three.  Reference values come
from central differences of the FFT pricer.  For true put surfaces
delta lies in [-1, 0] and gamma is non-negative; network outputs are
reported as-is (training artifacts may violate the bounds slightly).
"""

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Jet, jet_forward
from .network import Mlp
from .oracle import FftConfig, PutSlice
from .residuals import net_inputs
from .vg import VgParams

CURVES_FORMAT = "pidenn-curves-v1"
CURVES_COLUMNS = (
    "S",
    "price_net", "price_fft",
    "delta_net", "delta_fft",
    "gamma_net", "gamma_fft",
    "theta_net", "theta_fft",
)


@dataclass(frozen=True)
class GreekPoint:
    S: float
    price: float
    delta: float
    gamma: float
    theta: float


def greeks_from_jet(jet: Jet, S: float) -> GreekPoint:
    return GreekPoint(
        S=S,
        price=jet.value,
        delta=jet.dx / S,
        gamma=(jet.dxx - jet.dx) / S**2,
        theta=-jet.dtau,
    )


def net_point_input(net: Mlp, x: float, tau: float, p: VgParams) -> np.ndarray:
    """One network input row for any of the supported input layouts."""
    return net_inputs(
        np.array([x]), np.array([tau]),
        np.array([p.sigma]), np.array([p.nu]), np.array([p.theta]),
        np.array([p.r]), np.array([p.q]),
        net.config.input_dim,
    )[0]


def greeks(net: Mlp, S: float, tau: float, p: VgParams) -> GreekPoint:
    """Price, delta, gamma, theta of the net at spot S."""
    if S <= 0.0:
        raise ValueError("spot must be positive")
    jet = jet_forward(net, net_point_input(net, math.log(S), tau, p))
    return greeks_from_jet(jet, S)


def fft_greek_curves(S, K: float, tau: float, p: VgParams,
                     cfg: FftConfig = FftConfig(),
                     rel_spot_step: float = 1e-3, tau_step: float = 1e-3):
    """(price, delta, gamma, theta) arrays from finite differences of the
    FFT pricer, one transform per maturity."""
    S = np.asarray(S, dtype=np.float64)
    h = rel_spot_step * S
    slice0 = PutSlice(K, tau, p, cfg)
    price = slice0.put(S)
    up, dn = slice0.put(S + h), slice0.put(S - h)
    delta = (up - dn) / (2.0 * h)
    gamma = (up - 2.0 * price + dn) / h**2
    ht = min(tau_step, 0.5 * tau)
    p_up = PutSlice(K, tau + ht, p, cfg).put(S)
    p_dn = PutSlice(K, tau - ht, p, cfg).put(S)
    theta = -(p_up - p_dn) / (2.0 * ht)
    return price, delta, gamma, theta


def export_curves(net: Mlp, p: VgParams, tau: float, S_grid, out_path,
                  strike: float = 200.0, cfg: FftConfig = FftConfig()):
    """Write the price/delta/gamma/theta comparison CSV (net vs FFT).

    Format: one version comment line, a header row, then 9 columns per
    CURVES_COLUMNS.
    """
    S_grid = np.asarray(S_grid, dtype=np.float64)
    net_vals = np.empty((S_grid.shape[0], 4))
    for i, S in enumerate(S_grid):
        gp = greeks(net, float(S), tau, p)
        net_vals[i] = (gp.price, gp.delta, gp.gamma, gp.theta)
    price_f, delta_f, gamma_f, theta_f = fft_greek_curves(S_grid, strike, tau, p, cfg)
    with open(out_path, "w", newline="") as fh:
        fh.write(f"# {CURVES_FORMAT}\n")
        fh.write(",".join(CURVES_COLUMNS) + "\n")
        for i, S in enumerate(S_grid):
            row = (
                S,
                net_vals[i, 0], price_f[i],
                net_vals[i, 1], delta_f[i],
                net_vals[i, 2], gamma_f[i],
                net_vals[i, 3], theta_f[i],
            )
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
    return out_path
