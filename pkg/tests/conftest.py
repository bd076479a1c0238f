import numpy as np
import pytest

from pidenn.network import MlpConfig, forward_batch, init
from pidenn.vg import VgParams

FIG6 = VgParams(sigma=0.4, nu=0.4, theta=-0.4, r=0.05, q=0.02)
FIG6_DICT = {"sigma": 0.4, "nu": 0.4, "theta": -0.4, "r": 0.05, "q": 0.02}
STRIKE = 200.0


@pytest.fixture
def fig6():
    return FIG6


def small_net(input_dim=7, layers=2, width=8, activation="silu", seed=0, dropout=0.0):
    cfg = MlpConfig(input_dim=input_dim, hidden_layers=layers, hidden_size=width,
                    activation=activation, dropout_rate=dropout, seed=seed)
    return init(cfg)


def richardson_jet(net, x, h1=2e-2):
    """Finite-difference oracle for (dx, dxx, dtau): central differences at
    three steps with two Richardson levels (truncation O(h^6)), so the jet
    components can be resolved to ~1e-7 relative in float64.  Independent
    of the jet code path."""
    x = np.asarray(x, dtype=np.float64)

    def central(col, h):
        xp, xm = x.copy()[None, :], x.copy()[None, :]
        xp[0, col] += h
        xm[0, col] -= h
        fp = forward_batch(net, xp)[0]
        fm = forward_batch(net, xm)[0]
        f0 = forward_batch(net, x[None, :])[0]
        return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / h**2

    def extrapolate(col):
        d = [central(col, h1 / 2**k) for k in range(3)]
        out = []
        for comp in range(2):
            r1 = (4 * d[1][comp] - d[0][comp]) / 3
            r2 = (4 * d[2][comp] - d[1][comp]) / 3
            out.append((16 * r2 - r1) / 15)
        return out

    dx, dxx = extrapolate(0)
    dtau, _ = extrapolate(1)
    return dx, dxx, dtau


def param_fd_gradient(objective, net, indices, step=1e-6):
    """Central-difference gradient of objective(weights, biases) at the
    given flat parameter indices; step scales with parameter magnitude."""
    out = {}
    for j in indices:
        def perturbed(sign):
            arrs = [w.copy() for w in net.weights] + [b.copy() for b in net.biases]
            k = j
            for a in arrs:
                if k < a.size:
                    h = step * max(1.0, abs(a.ravel()[k]))
                    a.ravel()[k] += sign * h
                    return arrs[:len(net.weights)], arrs[len(net.weights):], h
                k -= a.size
            raise IndexError(j)
        wp, bp, h = perturbed(+1)
        wm, bm, _ = perturbed(-1)
        out[j] = (objective(wp, bp) - objective(wm, bm)) / (2 * h)
    return out


def rel_err(a, b, floor=1e-10):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
