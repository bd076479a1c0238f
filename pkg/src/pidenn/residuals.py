"""Pricing-equation residuals and the training loss.

Per sample (x, tau, xi) the loss bundles four squared residuals:

* the transformed pricing equation with the jump integral split at eps,

      1/2 sigma2(eps) w_xx + sum_j (w(x+y_j) - w(x)) k(y_j) q_j
      - w_tau + (r - q + omega(eps) - 1/2 sigma2(eps)) w_x - r w,

* the initial condition  w(x, 0) = (K - e^x)^+,
* the lower boundary     w(x_min, tau) = K e^{-r tau} - e^{x_min - q tau}
  (or its Neumann variant w_xx - w_x = 0 at both edges),
* the upper boundary     w(x_max, tau) = 0.

The boundary and initial terms reuse the sample's own tau and xi, so each
sample contributes one number to each of the four components; the batch
loss is the mean of the per-sample sums.  `PideProblem.loss_and_grad`
additionally seeds the reverse sweep with the analytic derivative of the
loss with respect to every network evaluation, including the shifted
values inside the integral (a `fixed_integral` flag detaches those,
reproducing the cheaper explicit-in-the-integral training variant).

A diffusion-only variant (`equation="bms"`) drops the integral and solves
the Black-Merton-Scholes equation with the same boundary bundle.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff, vg
from .autodiff import Jet
from .network import Mlp
from .quadrature import QuadGrid, build_grid, outer_integral
from .vg import LevySplit, VgParams

EPS_DEFAULT = 0.01


@dataclass(frozen=True)
class Sample:
    """One collocation point: log-price, time to maturity, parameters."""

    x: float
    tau: float
    params: VgParams

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class DomainBox:
    """Boundary locations and the strike the solution is priced at."""

    x_min: float = 0.0                  # ln(1)
    x_max: float = float(np.log(10000.0))
    strike: float = 200.0

    def __post_init__(self):
        if not self.x_min < np.log(self.strike) < self.x_max:
            raise ValueError("need x_min < ln(strike) < x_max")


@dataclass
class LossBreakdown:
    """Per-sample squared residuals of the four loss terms."""

    pide_sq: np.ndarray
    init_sq: np.ndarray
    lower_sq: np.ndarray
    upper_sq: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.pide_sq + self.init_sq + self.lower_sq + self.upper_sq


def payoff(x, strike: float, kind: str = "put"):
    """Terminal payoff in log-price; the call variant is provided but the
    solver is exercised on puts only."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "put":
        out = np.maximum(strike - np.exp(x), 0.0)
    elif kind == "call":
        out = np.maximum(np.exp(x) - strike, 0.0)
    else:
        raise ValueError(f"unknown payoff kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def initial_residual(w_at_tau0, x, strike: float):
    """w(x, 0) minus the put payoff."""
    return w_at_tau0 - payoff(x, strike)


def lower_boundary_target(tau, r, q, box: DomainBox):
    return box.strike * np.exp(-np.asarray(r) * tau) - np.exp(box.x_min - np.asarray(q) * tau)


def dirichlet_residuals(w_lower, w_upper, tau, params: VgParams, box: DomainBox):
    """(lower, upper) value-matching residuals at the domain edges."""
    lower = w_lower - lower_boundary_target(tau, params.r, params.q, box)
    return lower, w_upper


def neumann_residuals(jet_lower: Jet, jet_upper: Jet):
    """(lower, upper) derivative-matching residuals w_xx - w_x."""
    return jet_lower.dxx - jet_lower.dx, jet_upper.dxx - jet_upper.dx


def pide_residual(s: Sample, jet: Jet, shifted_w, split: LevySplit, grid: QuadGrid) -> float:
    """Equation residual at one sample from its jet and shifted values."""
    if split.eps != grid.eps:
        raise ValueError(f"split radius {split.eps} does not match grid radius {grid.eps}")
    p = s.params
    outer = outer_integral(shifted_w, jet.value, grid, p)
    half_s2 = 0.5 * split.sigma2_eps
    return (
        half_s2 * jet.dxx
        + outer
        - jet.dtau
        + (p.r - p.q + split.omega_eps - half_s2) * jet.dx
        - p.r * jet.value
    )


def bms_residual(s: Sample, jet: Jet) -> float:
    """Diffusion-equation residual (no jump integral); uses sigma, r, q only."""
    p = s.params
    half_s2 = 0.5 * p.sigma**2
    return -jet.dtau + half_s2 * jet.dxx + (p.r - p.q - half_s2) * jet.dx - p.r * jet.value


# ---------------------------------------------------------------------------
# batched loss
# ---------------------------------------------------------------------------

def net_inputs(x, tau, sigma, nu, theta, r, q, input_dim: int) -> np.ndarray:
    """Stack sample coordinates into network input rows.

    Column layouts: 7 -> (x, tau, sigma, nu, theta, r, q);
    5 -> (x, tau, sigma, r, q) for the diffusion-only equation;
    2 -> (x, tau) when the parameters are held fixed.
    """
    cols = {
        7: (x, tau, sigma, nu, theta, r, q),
        5: (x, tau, sigma, r, q),
        2: (x, tau),
    }
    if input_dim not in cols:
        raise ValueError(f"unsupported input_dim {input_dim}; use 2, 5 or 7")
    return np.ascontiguousarray(np.column_stack(cols[input_dim]))


@dataclass
class PreparedBatch:
    """Samples with every per-sample constant the loss needs precomputed."""

    x: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    nu: np.ndarray
    theta: np.ndarray
    r: np.ndarray
    q: np.ndarray
    X: np.ndarray            # (n, d) network inputs at (x, tau)
    payoff: np.ndarray
    lower_target: np.ndarray
    sig2: Optional[np.ndarray]      # sigma2(eps), vg equation only
    omeps: Optional[np.ndarray]     # omega(eps)
    kw: Optional[np.ndarray]        # k(y_j) * weight_j, (n, J)
    kwsum: Optional[np.ndarray]

    def __len__(self):
        return self.x.shape[0]

    def take(self, idx) -> "PreparedBatch":
        pick = lambda a: None if a is None else a[idx]
        return PreparedBatch(**{k: pick(getattr(self, k)) for k in self.__dataclass_fields__})


@dataclass(frozen=True)
class PideProblem:
    """Loss assembly: domain, quadrature grid, and training variant flags."""

    box: DomainBox
    grid: QuadGrid
    eps: float = EPS_DEFAULT
    boundary: str = "dirichlet"        # or "neumann"
    fixed_integral: bool = False
    equation: str = "vg"               # or "bms"

    def __post_init__(self):
        if self.boundary not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary variant {self.boundary!r}")
        if self.equation not in ("vg", "bms"):
            raise ValueError(f"unknown equation {self.equation!r}")
        if self.equation == "vg" and self.grid.eps != self.eps:
            raise ValueError("quadrature grid radius must match the split radius")

    def prepare(self, samples, input_dim: int) -> PreparedBatch:
        """Precompute the per-sample constants (pure functions of xi)."""
        arr = np.asarray(getattr(samples, "data", samples), dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 7:
            raise ValueError("expected samples with columns (x, tau, sigma, nu, theta, r, q)")
        x, tau, sigma, nu, theta, r, q = (np.ascontiguousarray(c) for c in arr.T)
        X = net_inputs(x, tau, sigma, nu, theta, r, q, input_dim)
        pay = payoff(x, self.box.strike)
        lower = lower_boundary_target(tau, r, q, self.box)
        sig2 = omeps = kw = kwsum = None
        if self.equation == "vg":
            # identical parameter rows share one quadrature evaluation
            key = np.column_stack((sigma, nu, theta))
            uniq, inverse = np.unique(key, axis=0, return_inverse=True)
            sig2 = vg.sigma2_eps_arrays(uniq[:, 0], uniq[:, 1], uniq[:, 2], self.eps)[inverse]
            omeps = vg.omega_eps_arrays(uniq[:, 0], uniq[:, 1], uniq[:, 2], self.eps)[inverse]
            kw = vg.levy_density_arrays(self.grid.nodes, sigma, nu, theta) * self.grid.weights
            kwsum = kw.sum(axis=1)
        return PreparedBatch(
            x=x, tau=tau, sigma=sigma, nu=nu, theta=theta, r=r, q=q,
            X=X, payoff=pay, lower_target=lower,
            sig2=sig2, omeps=omeps, kw=kw, kwsum=kwsum,
        )

    # -- residual evaluation -------------------------------------------------

    def _shift_inputs(self, b: PreparedBatch) -> np.ndarray:
        J = len(self.grid)
        Xs = np.repeat(b.X, J, axis=0)
        Xs[:, autodiff.X_COL] = (b.x[:, None] + self.grid.nodes[None, :]).ravel()
        return Xs

    def _value_rows(self, b: PreparedBatch):
        """Initial and (Dirichlet) boundary evaluation rows."""
        X0 = b.X.copy()
        X0[:, autodiff.TAU_COL] = 0.0
        if self.boundary == "neumann":
            return X0, 1
        Xlo = b.X.copy()
        Xlo[:, autodiff.X_COL] = self.box.x_min
        Xhi = b.X.copy()
        Xhi[:, autodiff.X_COL] = self.box.x_max
        return np.concatenate((X0, Xlo, Xhi), axis=0), 3

    def _residuals(self, b: PreparedBatch, jets, w_shift, w0, wlo, whi, bjets):
        n = len(b)
        if self.equation == "vg":
            outer = (w_shift * b.kw).sum(axis=1) - jets.value * b.kwsum
            half_s2 = 0.5 * b.sig2
            res_pide = (
                half_s2 * jets.dxx
                + outer
                - jets.dtau
                + (b.r - b.q + b.omeps - half_s2) * jets.dx
                - b.r * jets.value
            )
        else:
            half_s2 = 0.5 * b.sigma**2
            res_pide = (
                -jets.dtau
                + half_s2 * jets.dxx
                + (b.r - b.q - half_s2) * jets.dx
                - b.r * jets.value
            )
        res_init = w0 - b.payoff
        if self.boundary == "dirichlet":
            res_lo = wlo - b.lower_target
            res_hi = whi
        else:
            jlo, jhi = bjets
            res_lo = jlo.dxx - jlo.dx
            res_hi = jhi.dxx - jhi.dx
        return res_pide, res_init, res_lo, res_hi

    def _forward(self, net: Mlp, b: PreparedBatch, masks, need_grad: bool = True):
        J = len(self.grid) if self.equation == "vg" else 0
        jets, jet_cache = autodiff.jet_forward_batch(net, b.X, masks)
        if J:
            m_shift = None if masks is None else [np.repeat(m, J, axis=0) for m in masks]
            grad_shift = need_grad and not self.fixed_integral
            w_shift_flat, shift_cache = autodiff.value_forward(
                net, self._shift_inputs(b), m_shift, need_grad=grad_shift)
            w_shift = w_shift_flat.reshape(len(b), J)
        else:
            w_shift, shift_cache = None, None
        rows, blocks = self._value_rows(b)
        m_rows = None if masks is None else [np.concatenate([m] * blocks) for m in masks]
        vals, value_cache = autodiff.value_forward(net, rows, m_rows, need_grad=need_grad)
        n = len(b)
        w0 = vals[:n]
        bjets = None
        if self.boundary == "dirichlet":
            wlo, whi = vals[n:2 * n], vals[2 * n:]
            bjet_caches = None
        else:
            Xlo = b.X.copy()
            Xlo[:, autodiff.X_COL] = self.box.x_min
            Xhi = b.X.copy()
            Xhi[:, autodiff.X_COL] = self.box.x_max
            jlo, clo = autodiff.jet_forward_batch(net, Xlo, masks)
            jhi, chi = autodiff.jet_forward_batch(net, Xhi, masks)
            wlo = whi = None
            bjets = (jlo, jhi)
            bjet_caches = (clo, chi)
        return jets, jet_cache, w_shift, shift_cache, w0, wlo, whi, value_cache, bjets, bjet_caches

    def loss(self, net: Mlp, batch: PreparedBatch, masks=None):
        """(scalar loss, per-sample LossBreakdown); no gradient work."""
        jets, _, w_shift, _, w0, wlo, whi, _, bjets, _ = self._forward(
            net, batch, masks, need_grad=False)
        res = self._residuals(batch, jets, w_shift, w0, wlo, whi, bjets)
        breakdown = LossBreakdown(*(r * r for r in res))
        return float(np.mean(breakdown.total)), breakdown

    def loss_and_grad(self, net: Mlp, batch: PreparedBatch, masks=None):
        """(scalar loss, LossBreakdown, ParamGrad of the batch-mean loss)."""
        (jets, jet_cache, w_shift, shift_cache, w0, wlo, whi,
         value_cache, bjets, bjet_caches) = self._forward(net, batch, masks)
        res_pide, res_init, res_lo, res_hi = self._residuals(
            batch, jets, w_shift, w0, wlo, whi, bjets
        )
        breakdown = LossBreakdown(
            res_pide**2, res_init**2, res_lo**2, res_hi**2
        )
        loss = float(np.mean(breakdown.total))

        n = len(batch)
        c = 2.0 / n
        cr = c * res_pide
        if self.equation == "vg":
            half_s2 = 0.5 * batch.sig2
            vbar = cr * (-batch.kwsum - batch.r)
            dxbar = cr * (batch.r - batch.q + batch.omeps - half_s2)
            dxxbar = cr * half_s2
        else:
            half_s2 = 0.5 * batch.sigma**2
            vbar = cr * (-batch.r)
            dxbar = cr * (batch.r - batch.q - half_s2)
            dxxbar = cr * half_s2
        grads = autodiff.jet_backward(net, jet_cache, vbar, dxbar, dxxbar, -cr)

        if w_shift is not None and not self.fixed_integral:
            ws_bar = (cr[:, None] * batch.kw).ravel()
            grads.add_(autodiff.value_backward(net, shift_cache, ws_bar))

        if self.boundary == "dirichlet":
            v_bar = np.concatenate((c * res_init, c * res_lo, c * res_hi))
        else:
            v_bar = c * res_init
        grads.add_(autodiff.value_backward(net, value_cache, v_bar))

        if self.boundary == "neumann":
            for cache, res in zip(bjet_caches, (res_lo, res_hi)):
                zero = np.zeros(n)
                grads.add_(autodiff.jet_backward(net, cache, zero, -c * res, c * res, zero))
        return loss, breakdown, grads


def total_loss(net: Mlp, samples, problem: PideProblem, masks=None):
    """Spec surface: batch-mean loss and per-sample breakdown for a batch
    of samples (a PreparedBatch, a SampleSet, or a raw (n, 7) array)."""
    batch = samples if isinstance(samples, PreparedBatch) else problem.prepare(samples, net.config.input_dim)
    return problem.loss(net, batch, masks=masks)


def default_problem(**overrides) -> PideProblem:
    kwargs = dict(box=DomainBox(), grid=build_grid(), eps=EPS_DEFAULT)
    kwargs.update(overrides)
    return PideProblem(**kwargs)
