"""Derivatives of the network: input jets and parameter gradients.

Two mechanisms, both exact to rounding:

* forward jet propagation -- alongside each layer's value we carry the
  first derivative in the log-price direction, the pure second derivative
  in that direction, and the first derivative in the maturity direction
  (input columns 0 and 1).  Through a layer with pre-activation
  A = h W^T + b and tangents P, S, Q this reads

      h' = g(A),  p' = g'(A) P,  s' = g''(A) P^2 + g'(A) S,  q' = g'(A) Q;

* a reverse sweep over that augmented forward pass, which yields the
  gradient of any scalar built from (value, d/dx, d2/dx2, d/dtau) with
  respect to every weight and bias.  The adjoint of the activation step
  needs g''' (see the gp_gpp_gppp kernels).

Per-evaluation state lives in explicit cache objects; nothing global, so
independent evaluations can run concurrently.  Gradient accumulation
order is fixed (output layer down to input layer, batch reduced inside
BLAS matrix products), making results reproducible run to run.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .network import Mlp


class Jet(NamedTuple):
    """Value and the input derivatives the pricing equation needs."""

    value: float
    dx: float
    dxx: float
    dtau: float


@dataclass
class ParamGrad:
    """Per-layer gradient tensors, shape-congruent with the network."""

    weights: list
    biases: list

    def add_(self, other: "ParamGrad") -> "ParamGrad":
        for a, b in zip(self.weights, other.weights):
            a += b
        for a, b in zip(self.biases, other.biases):
            a += b
        return self

    def scale_(self, c: float) -> "ParamGrad":
        for a in self.weights:
            a *= c
        for a in self.biases:
            a *= c
        return self

    def ravel(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases])


def zero_grad(net: Mlp) -> ParamGrad:
    return ParamGrad(
        weights=[np.zeros_like(w) for w in net.weights],
        biases=[np.zeros_like(b) for b in net.biases],
    )


def _act_table(kind: str):
    k = kernels
    if kind == "silu":
        return k.silu_g, k.silu_g_gp, k.silu_g_gp_gpp, k.silu_gp_gpp_gppp
    return k.softplus_g, k.softplus_g_gp, k.softplus_g_gp_gpp, k.softplus_gp_gpp_gppp


# ---------------------------------------------------------------------------
# value pass
# ---------------------------------------------------------------------------

@dataclass
class ValueCache:
    inputs: list    # h per layer, inputs[0] = X
    gp: list        # activation slope g'(A) per hidden layer (reverse sweep)
    masks: object


def value_forward(net: Mlp, X: np.ndarray, masks=None, need_grad: bool = True):
    """Values for rows of X -> ((n,), cache for the reverse sweep).

    ``need_grad=False`` skips the activation-slope bookkeeping; the
    returned cache then cannot feed value_backward.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.config.input_dim:
        raise ValueError(f"expected input of shape (n, {net.config.input_dim})")
    g_fn, g_gp_fn = _act_table(net.activation)[:2]
    inputs, gps = [X], []
    h = X
    for layer in range(net.n_layers):
        a = h @ net.weights[layer].T + net.biases[layer]
        if need_grad:
            h, gp = g_gp_fn(a)
            gps.append(gp)
        else:
            h = g_fn(a)
        if masks is not None:
            h = h * masks[layer]
        inputs.append(h)
    vals = (h @ net.weights[-1].T + net.biases[-1])[:, 0]
    return vals, ValueCache(inputs=inputs, gp=gps, masks=masks)


def value_backward(net: Mlp, cache: ValueCache, vbar) -> ParamGrad:
    """Gradient of sum_i vbar_i * value_i with respect to all parameters."""
    if not cache.gp:
        raise ValueError("cache was built with need_grad=False")
    grads = zero_grad(net)
    d = np.asarray(vbar, dtype=np.float64)[:, None]
    grads.weights[-1][:] = d.T @ cache.inputs[-1]
    grads.biases[-1][:] = d.sum(axis=0)
    hbar = d @ net.weights[-1]
    for layer in range(net.n_layers - 1, -1, -1):
        if cache.masks is not None:
            hbar = hbar * cache.masks[layer]
        abar = hbar * cache.gp[layer]
        grads.weights[layer][:] = abar.T @ cache.inputs[layer]
        grads.biases[layer][:] = abar.sum(axis=0)
        if layer:
            hbar = abar @ net.weights[layer]
    return grads


# ---------------------------------------------------------------------------
# jet pass (value + d/dx + d2/dx2 + d/dtau)
# ---------------------------------------------------------------------------

X_COL = 0
TAU_COL = 1


class JetBatch(NamedTuple):
    value: np.ndarray
    dx: np.ndarray
    dxx: np.ndarray
    dtau: np.ndarray


@dataclass
class JetCache:
    inputs: list    # (h, p, s, q) per layer, inputs[0] at the input
    pre: list       # (A, P, S, Q) per hidden layer
    masks: object


def jet_forward_batch(net: Mlp, X: np.ndarray, masks=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.config.input_dim:
        raise ValueError(f"expected input of shape (n, {net.config.input_dim})")
    g_gp_gpp = _act_table(net.activation)[2]
    n = X.shape[0]
    p = np.zeros_like(X)
    p[:, X_COL] = 1.0
    q = np.zeros_like(X)
    q[:, TAU_COL] = 1.0
    s = np.zeros_like(X)
    h = X
    inputs, pre = [(h, p, s, q)], []
    for layer in range(net.n_layers):
        W = net.weights[layer]
        A = h @ W.T + net.biases[layer]
        P = p @ W.T
        S = s @ W.T
        Q = q @ W.T
        pre.append((A, P, S, Q))
        g, gp, gpp = g_gp_gpp(A)
        h, p, s, q = g, gp * P, gpp * P * P + gp * S, gp * Q
        if masks is not None:
            m = masks[layer]
            h, p, s, q = h * m, p * m, s * m, q * m
        inputs.append((h, p, s, q))
    W = net.weights[-1]
    value = (h @ W.T + net.biases[-1])[:, 0]
    dx = (p @ W.T)[:, 0]
    dxx = (s @ W.T)[:, 0]
    dtau = (q @ W.T)[:, 0]
    return JetBatch(value, dx, dxx, dtau), JetCache(inputs=inputs, pre=pre, masks=masks)


def jet_backward(net: Mlp, cache: JetCache, vbar, dxbar, dxxbar, dtaubar) -> ParamGrad:
    """Gradient of sum_i (vbar*value + dxbar*dx + dxxbar*dxx + dtaubar*dtau)_i."""
    gp_gpp_gppp = _act_table(net.activation)[3]
    grads = zero_grad(net)
    hL, pL, sL, qL = cache.inputs[-1]
    db = [np.asarray(v, dtype=np.float64)[:, None] for v in (vbar, dxbar, dxxbar, dtaubar)]
    grads.weights[-1][:] = db[0].T @ hL + db[1].T @ pL + db[2].T @ sL + db[3].T @ qL
    grads.biases[-1][:] = db[0].sum(axis=0)
    W = net.weights[-1]
    hbar, pbar, sbar, qbar = (d @ W for d in db)
    for layer in range(net.n_layers - 1, -1, -1):
        if cache.masks is not None:
            m = cache.masks[layer]
            hbar, pbar, sbar, qbar = hbar * m, pbar * m, sbar * m, qbar * m
        A, P, S, Q = cache.pre[layer]
        gp, gpp, gppp = gp_gpp_gppp(A)
        abar = hbar * gp + pbar * gpp * P + sbar * (gppp * P * P + gpp * S) + qbar * gpp * Q
        pbar_pre = pbar * gp + 2.0 * sbar * gpp * P
        sbar_pre = sbar * gp
        qbar_pre = qbar * gp
        h_in, p_in, s_in, q_in = cache.inputs[layer]
        grads.weights[layer][:] = (
            abar.T @ h_in + pbar_pre.T @ p_in + sbar_pre.T @ s_in + qbar_pre.T @ q_in
        )
        grads.biases[layer][:] = abar.sum(axis=0)
        if layer:
            W = net.weights[layer]
            hbar = abar @ W
            pbar = pbar_pre @ W
            sbar = sbar_pre @ W
            qbar = qbar_pre @ W
    return grads


def jet_forward(net: Mlp, x, masks=None) -> Jet:
    """Jet of the network at one input vector."""
    jb, _ = jet_forward_batch(net, np.asarray(x, dtype=np.float64)[None, :], masks)
    return Jet(float(jb.value[0]), float(jb.dx[0]), float(jb.dxx[0]), float(jb.dtau[0]))


def loss_param_gradient(net: Mlp, batch, problem, masks=None):
    """(batch-mean loss, gradient w.r.t. every parameter).

    ``problem`` assembles the residuals (see residuals.PideProblem); the
    gradient flows through every evaluation the loss touches, including
    the shifted values inside the jump integral unless the problem's
    fixed-integral flag detaches them.
    """
    loss, _, grads = problem.loss_and_grad(net, batch, masks=masks)
    return loss, grads
