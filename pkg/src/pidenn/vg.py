"""Variance-gamma model quantities.

The VG process is Brownian motion with drift theta and volatility sigma,
time-changed by a gamma clock with variance rate nu.  Its jump density is
two-sided exponential over |y|:

    k(y) = exp(-lambda_p * y) / (nu * y)      for y > 0,
    k(y) = exp(-lambda_n * |y|) / (nu * |y|)  for y < 0,

with

    lambda_p = sqrt(theta^2/sigma^4 + 2/(sigma^2 nu)) - theta/sigma^2,
    lambda_n = sqrt(theta^2/sigma^4 + 2/(sigma^2 nu)) + theta/sigma^2.

The no-arbitrage (martingale) drift is
omega = ln(1 - sigma^2 nu / 2 - theta nu) / nu.

Splitting the pricing-equation jump integral at a small radius eps needs
two more quantities:

* sigma2_eps  = integral of y^2 k(y) over |y| <= eps (closed form here;
  the integrand has an elementary antiderivative),
* omega_eps   = integral of (1 - e^y) k(y) over |y| > eps, which has no
  elementary closed form and is computed by a refining composite
  trapezoid on a log-spaced grid with the tail cut where the integrand
  drops below 1e-12.

All functions are pure; the `*_arrays` variants broadcast over numpy
arrays of parameters and back the per-sample precomputation in training.
"""

from dataclasses import dataclass

import numpy as np

_TAIL_CUT = np.log(1e12)          # e^{-decay*y} < 1e-12 beyond y = _TAIL_CUT/decay
_REFINE_RTOL = 1e-9
_MAX_NODES = 1 << 17


def lambda_arrays(sigma, nu, theta):
    """Tail-decay rates (lambda_p, lambda_n) for raw parameter arrays."""
    sigma = np.asarray(sigma, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(sigma <= 0.0) or np.any(nu <= 0.0):
        raise ValueError("sigma and nu must be positive")
    root = np.sqrt(theta**2 / sigma**4 + 2.0 / (sigma**2 * nu))
    return root - theta / sigma**2, root + theta / sigma**2


@dataclass(frozen=True)
class VgParams:
    """Model/market parameter tuple (sigma, nu, theta, r, q).

    sigma: Brownian volatility (per sqrt-year), nu: gamma variance rate
    (years), theta: subordinated drift (per year), r: risk-free rate,
    q: dividend yield (both per year).
    """

    sigma: float
    nu: float
    theta: float
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not (self.sigma > 0.0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.nu > 0.0):
            raise ValueError(f"nu must be positive, got {self.nu}")
        arg = 1.0 - self.sigma**2 * self.nu / 2.0 - self.theta * self.nu
        # arg > 0 is simultaneously the martingale-drift domain and
        # lambda_p > 1 (they coincide: arg = sigma^2 nu / 2 * (lambda_p - 1)(lambda_n + 1)).
        if not (arg > 0.0):
            raise ValueError(
                "invalid VG parameters: 1 - sigma^2*nu/2 - theta*nu must be "
                f"positive (got {arg}); the martingale drift is undefined and "
                "the positive jump tail is too heavy (lambda_p <= 1)"
            )


def lambdas(p: VgParams):
    """(lambda_p, lambda_n) as floats."""
    lp, ln_ = lambda_arrays(p.sigma, p.nu, p.theta)
    return float(lp), float(ln_)


def levy_density(y, p: VgParams):
    """Jump density k(y); y may be a scalar or an array, y != 0."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y == 0.0):
        raise ValueError("levy density has a non-integrable pole at y = 0")
    lp, ln_ = lambdas(p)
    lam = np.where(y > 0.0, lp, ln_)
    out = np.exp(-lam * np.abs(y)) / (p.nu * np.abs(y))
    return float(out) if out.ndim == 0 else out


def levy_density_arrays(y, sigma, nu, theta):
    """k(y_j) for a node vector y (J,) and parameter arrays (n,) -> (n, J)."""
    y = np.asarray(y, dtype=np.float64)
    lp, ln_ = lambda_arrays(sigma, nu, theta)
    lam = np.where(y > 0.0, lp[:, None], ln_[:, None])
    return np.exp(-lam * np.abs(y)) / (np.asarray(nu)[:, None] * np.abs(y))


def martingale_drift(p: VgParams) -> float:
    """omega such that E[S(t)] = S(0) exp((r - q) t)."""
    arg = 1.0 - p.sigma**2 * p.nu / 2.0 - p.theta * p.nu
    if not (arg > 0.0):
        raise ValueError("martingale drift undefined: log argument <= 0")
    return float(np.log(arg) / p.nu)


def sigma2_eps_arrays(sigma, nu, theta, eps):
    """Small-jump second moment, closed form.

    integral of y^2 k(y) over |y| <= eps reduces to
    (1/nu) * sum over both tails of (1 - e^{-lam eps}(1 + lam eps)) / lam^2.
    """
    if not np.all(np.asarray(eps) > 0.0):
        raise ValueError("eps must be positive")
    lp, ln_ = lambda_arrays(sigma, nu, theta)
    nu = np.asarray(nu, dtype=np.float64)

    def side(lam):
        return (1.0 - np.exp(-lam * eps) * (1.0 + lam * eps)) / lam**2

    return (side(lp) + side(ln_)) / nu


def sigma2_eps(p: VgParams, eps: float) -> float:
    return float(sigma2_eps_arrays(p.sigma, p.nu, p.theta, eps))


def omega_eps_arrays(sigma, nu, theta, eps, chunk=4096):
    """Large-jump drift correction integral of (1 - e^y) k(y) over |y| > eps.

    Substituting y = e^t turns both tails into the smooth integrand

        G(t) = (e^{-lp y} - e^{-(lp-1) y} + e^{-ln y} - e^{-(ln+1) y}) / nu

    on t in [ln eps, ln y_max], which a composite trapezoid handles well;
    the node count doubles until two successive estimates agree to
    1e-9 relative.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    nu = np.atleast_1d(np.asarray(nu, dtype=np.float64))
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    sigma, nu, theta = np.broadcast_arrays(sigma, nu, theta)
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    lp, ln_ = lambda_arrays(sigma, nu, theta)
    if np.any(lp <= 1.0):
        raise ValueError("omega_eps diverges: lambda_p must exceed 1")

    out = np.empty(sigma.shape[0])
    for lo in range(0, sigma.shape[0], chunk):
        sl = slice(lo, lo + chunk)
        out[sl] = _omega_eps_chunk(lp[sl], ln_[sl], nu[sl], eps)
    return out


def _omega_eps_chunk(lp, ln_, nu, eps):
    decay = np.minimum(lp - 1.0, ln_)
    y_max = eps + _TAIL_CUT / float(decay.min())
    t_lo, t_hi = np.log(eps), np.log(y_max)

    def estimate(m):
        t = np.linspace(t_lo, t_hi, m)
        y = np.exp(t)
        g = (
            np.exp(-lp[:, None] * y)
            - np.exp(-(lp[:, None] - 1.0) * y)
            + np.exp(-ln_[:, None] * y)
            - np.exp(-(ln_[:, None] + 1.0) * y)
        ) / nu[:, None]
        return np.trapezoid(g, t, axis=1)

    m = 1025
    prev = estimate(m)
    while m < _MAX_NODES:
        m = 2 * m - 1
        cur = estimate(m)
        scale = np.maximum(np.abs(cur), 1e-30)
        if np.max(np.abs(cur - prev) / scale) < _REFINE_RTOL:
            return cur
        prev = cur
    return prev


def omega_eps(p: VgParams, eps: float) -> float:
    return float(omega_eps_arrays(p.sigma, p.nu, p.theta, eps)[0])


@dataclass(frozen=True)
class LevySplit:
    """The eps-split coefficients entering the transformed pricing equation."""

    eps: float
    sigma2_eps: float
    omega_eps: float

    def __post_init__(self):
        if not (self.eps > 0.0 and self.sigma2_eps > 0.0):
            raise ValueError("eps and sigma2_eps must be positive")
        if not (np.isfinite(self.sigma2_eps) and np.isfinite(self.omega_eps)):
            raise ValueError("split coefficients must be finite")

    @classmethod
    def for_params(cls, p: VgParams, eps: float) -> "LevySplit":
        return cls(eps=eps, sigma2_eps=sigma2_eps(p, eps), omega_eps=omega_eps(p, eps))
