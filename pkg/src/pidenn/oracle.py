"""Reference pricers, independent of the network: damped-transform FFT
inversion, Monte Carlo by gamma subordination, and the Black-Merton-
Scholes closed form.  Used for metrics and validation only, never inside
the training loss.

The FFT route follows Carr-Madan: with phi the characteristic function of
the terminal log price, the damped call transform

    psi(v) = e^{-r tau} phi(v - (alpha + 1) i)
             / (alpha^2 + alpha - v^2 + i (2 alpha + 1) v)

is inverted over a log-strike grid centered at ln K (Simpson-weighted,
radix-2 FFT from `fourier`), cubically interpolated at the queried
log-strike, and puts follow from put-call parity.  Prices at many spots
reuse a single transform through the spot-strike homogeneity
V(a S, a K) = a V(S, K).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .fourier import fft
from .rng import STREAM_MC
from .vg import VgParams, lambdas, martingale_drift


@dataclass(frozen=True)
class FftConfig:
    """Transform-inversion settings.

    n: grid size (power of two); eta: integration step in frequency;
    alpha: damping factor.  The induced log-strike spacing is
    2 pi / (n eta).
    """

    n: int = 1 << 14
    eta: float = 0.25
    alpha: float = 1.5

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError("grid size must be a power of two (at least 8)")
        if self.eta <= 0.0 or self.alpha <= 0.0:
            raise ValueError("eta and alpha must be positive")

    @property
    def log_strike_spacing(self) -> float:
        return 2.0 * math.pi / (self.n * self.eta)


def vg_charfn(u, t: float, p: VgParams):
    """Characteristic function of the variance-gamma increment X(t):
    (1 - i u theta nu + sigma^2 nu u^2 / 2)^(-t/nu), principal branch."""
    u = np.asarray(u, dtype=np.complex128)
    base = 1.0 - 1j * u * p.theta * p.nu + 0.5 * p.sigma**2 * p.nu * u**2
    on_cut = (base.real <= 0.0) & (np.abs(base.imag) < 1e-14)
    if np.any(on_cut):
        raise ValueError("characteristic-function base hit the branch cut")
    out = base ** (-t / p.nu)
    return complex(out) if out.ndim == 0 else out


def _check_moment(p: VgParams, alpha: float) -> None:
    lam_p, _ = lambdas(p)
    if lam_p <= 1.0 + alpha:
        raise ValueError(
            f"damping alpha={alpha} violates the moment condition: requires "
            f"lambda_p > 1 + alpha, got lambda_p = {lam_p:.6g}"
        )


def _interp_cubic(grid_start: float, spacing: float, values: np.ndarray, xq: np.ndarray):
    """4-point Lagrange interpolation on a uniform grid."""
    n = values.shape[0]
    j = np.floor((xq - grid_start) / spacing).astype(np.int64)
    j = np.clip(j, 1, n - 3)
    out = np.zeros_like(xq)
    nodes = [grid_start + (j + o) * spacing for o in (-1, 0, 1, 2)]
    for i in range(4):
        li = np.ones_like(xq)
        for m in range(4):
            if m != i:
                li *= (xq - nodes[m]) / (nodes[i] - nodes[m])
        out += values[j + (i - 1)] * li
    return out


class PutSlice:
    """One inverted transform: put/call prices for any spot at a fixed
    strike, maturity and parameter set."""

    def __init__(self, strike: float, tau: float, p: VgParams, cfg: FftConfig = FftConfig()):
        if strike <= 0.0 or tau <= 0.0:
            raise ValueError("strike and tau must be positive")
        _check_moment(p, cfg.alpha)
        self.strike = float(strike)
        self.tau = float(tau)
        self.params = p
        self.cfg = cfg
        n, eta, alpha = cfg.n, cfg.eta, cfg.alpha
        drift = math.log(strike) + (p.r - p.q + martingale_drift(p)) * tau
        v = eta * np.arange(n)
        u = v - (alpha + 1.0) * 1j
        phi = np.exp(1j * u * drift) * vg_charfn(u, tau, p)
        psi = math.exp(-p.r * tau) * phi / (alpha**2 + alpha - v**2 + 1j * (2 * alpha + 1) * v)
        lam = cfg.log_strike_spacing
        self._k0 = math.log(strike) - n * lam / 2.0
        self._lam = lam
        simpson = (3.0 + (-1.0) ** (np.arange(n) + 1)) / 3.0
        simpson[0] = 1.0 / 3.0
        z = fft(np.exp(-1j * self._k0 * v) * psi * eta * simpson)
        k_grid = self._k0 + lam * np.arange(n)
        # calls on spot = strike across the log-strike grid
        self._calls = np.exp(-alpha * k_grid) / math.pi * z.real

    def call(self, spot):
        """Call prices at the slice strike for spot values via homogeneity."""
        spot = np.asarray(spot, dtype=np.float64)
        if np.any(spot <= 0.0):
            raise ValueError("spot must be positive")
        k_query = 2.0 * math.log(self.strike) - np.log(spot)
        base = _interp_cubic(self._k0, self._lam, self._calls, np.atleast_1d(k_query))
        out = (spot / self.strike) * base.reshape(np.shape(k_query))
        return float(out) if out.ndim == 0 else out

    def put(self, spot):
        """Put prices, floored at the no-arbitrage bounds."""
        spot = np.asarray(spot, dtype=np.float64)
        p = self.params
        raw = (
            self.call(spot)
            - spot * math.exp(-p.q * self.tau)
            + self.strike * math.exp(-p.r * self.tau)
        )
        lb = self.strike * math.exp(-p.r * self.tau) - spot * math.exp(-p.q * self.tau)
        out = np.maximum(np.asarray(raw), np.maximum(lb, 0.0))
        return float(out) if out.ndim == 0 else out


def fft_put_price(S: float, K: float, tau: float, p: VgParams, cfg: FftConfig = FftConfig()) -> float:
    """European put by transform inversion (see PutSlice)."""
    return float(PutSlice(K, tau, p, cfg).put(S))


def fft_call_price(S: float, K: float, tau: float, p: VgParams, cfg: FftConfig = FftConfig()) -> float:
    return float(PutSlice(K, tau, p, cfg).call(S))


def fft_put_prices(S, K: float, tau: float, p: VgParams, cfg: FftConfig = FftConfig()) -> np.ndarray:
    """Puts for an array of spots from one inverted transform."""
    return PutSlice(K, tau, p, cfg).put(np.asarray(S, dtype=np.float64))


def _mc_terminal(S, tau, p: VgParams, n_paths, seed):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), STREAM_MC]))
    g = rng.gamma(tau / p.nu, p.nu, n_paths)
    z = rng.standard_normal(n_paths)
    x = p.theta * g + p.sigma * np.sqrt(g) * z
    return S * np.exp((p.r - p.q + martingale_drift(p)) * tau + x)


def mc_put_price(S, K, tau, p: VgParams, n_paths: int = 10**6, seed: int = 0):
    """(price, standard error) by simulating the gamma-subordinated
    terminal price.  A given seed fixes the draws, so calls and puts priced
    with the same seed share common random numbers."""
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    pay = np.exp(-p.r * tau) * np.maximum(K - _mc_terminal(S, tau, p, n_paths, seed), 0.0)
    return float(pay.mean()), float(pay.std(ddof=1) / math.sqrt(n_paths))


def mc_call_price(S, K, tau, p: VgParams, n_paths: int = 10**6, seed: int = 0):
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    pay = np.exp(-p.r * tau) * np.maximum(_mc_terminal(S, tau, p, n_paths, seed) - K, 0.0)
    return float(pay.mean()), float(pay.std(ddof=1) / math.sqrt(n_paths))


def bms_put_price(S, K, tau, sigma: float, r: float, q: float):
    """Black-Merton-Scholes closed-form put (the nu -> 0, theta -> 0
    diffusion limit)."""
    S = np.asarray(S, dtype=np.float64)
    if np.any(S <= 0.0) or K <= 0.0 or tau <= 0.0:
        raise ValueError("spot, strike and tau must be positive")
    if sigma <= 0.0:
        out = np.maximum(K * np.exp(-r * tau) - S * np.exp(-q * tau), 0.0)
        return float(out) if out.ndim == 0 else out
    srt = sigma * math.sqrt(tau)
    d1 = (np.log(S / K) + (r - q + 0.5 * sigma**2) * tau) / srt
    d2 = d1 - srt
    out = K * math.exp(-r * tau) * ndtr(-d2) - S * np.exp(-q * tau) * ndtr(-d1)
    return float(out) if out.ndim == 0 else out
