"""Multilayer perceptron: configuration, initialization, evaluation,
checkpoint serialization.

The net maps an input vector (log-price, time to maturity, and optionally
the model/market parameters) to one scalar, through L equally sized hidden
layers with a smooth activation (SiLU or softplus -- both stay smooth and
avoid vanishing gradients, which the second-derivative terms in the loss
require).  Weight layout follows the column convention W @ x + b, so
W[0] is (n, n0), the middle weights are (n, n) and the last is (1, n).
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtri

from . import kernels
from .rng import STREAM_INIT, derive_rng

ACTIVATIONS = ("silu", "softplus")
INIT_SCHEMES = (
    "he_normal",
    "he_uniform",
    "lecun_normal",
    "lecun_uniform",
    "glorot_normal",
    "glorot_uniform",
)

CHECKPOINT_FORMAT = "pidenn-mlp-v1"

# std of a standard normal truncated at +-2, used to renormalize the
# truncated draws back to the target variance
_PHI2 = math.exp(-2.0) / math.sqrt(2.0 * math.pi)
_TRUNC_STD = math.sqrt(1.0 - 4.0 * _PHI2 / math.erf(math.sqrt(2.0)))


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 7
    hidden_layers: int = 3
    hidden_size: int = 200
    activation: str = "silu"
    init_scheme: str = "he_normal"
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.hidden_layers < 1 or self.hidden_size < 1:
            raise ValueError("need at least one hidden layer and one unit")
        if self.input_dim < 2:
            raise ValueError("input must at least carry (log-price, maturity)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")


@dataclass
class Mlp:
    config: MlpConfig
    weights: list
    biases: list

    @property
    def activation(self) -> str:
        return self.config.activation

    @property
    def n_layers(self) -> int:
        return len(self.weights) - 1

    def copy(self) -> "Mlp":
        return Mlp(self.config, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


def _layer_shapes(cfg: MlpConfig):
    dims = [cfg.input_dim] + [cfg.hidden_size] * cfg.hidden_layers + [1]
    return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]


def _draw(rng, shape, scheme):
    n_out, n_in = shape
    family, kind = scheme.rsplit("_", 1)
    var = {"he": 2.0 / n_in, "lecun": 1.0 / n_in, "glorot": 2.0 / (n_in + n_out)}[family]
    if kind == "uniform":
        bound = math.sqrt(3.0 * var)
        return rng.uniform(-bound, bound, size=shape)
    # truncated normal at +-2 sd, renormalized to the target variance
    lo, hi = 0.5 * math.erfc(2.0 / math.sqrt(2.0)), 0.5 * math.erfc(-2.0 / math.sqrt(2.0))
    z = ndtri(rng.uniform(lo, hi, size=shape))
    return z * (math.sqrt(var) / _TRUNC_STD)


def init(cfg: MlpConfig) -> Mlp:
    """Fresh network: weights per the configured scheme, biases zero."""
    rng = derive_rng(cfg.seed, STREAM_INIT)
    weights, biases = [], []
    for shape in _layer_shapes(cfg):
        weights.append(np.ascontiguousarray(_draw(rng, shape, cfg.init_scheme)))
        biases.append(np.zeros(shape[0]))
    return Mlp(config=cfg, weights=weights, biases=biases)


def activation_value_d1_d2(z, kind: str):
    """(g, g', g'') of the activation, elementwise; overflow-safe."""
    if kind == "silu":
        return kernels.silu_g_gp_gpp(z)
    if kind == "softplus":
        return kernels.softplus_g_gp_gpp(z)
    raise ValueError(f"unknown activation {kind!r}")


def _act_g(kind):
    return kernels.silu_g if kind == "silu" else kernels.softplus_g


def forward_batch(net: Mlp, X: np.ndarray, masks=None) -> np.ndarray:
    """Network values for input rows X (n, input_dim) -> (n,).

    ``masks`` (training only) is a per-hidden-layer list of (n, width)
    arrays holding 0 or 1/(1 - dropout_rate); inference passes None.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.config.input_dim:
        raise ValueError(f"expected input of shape (n, {net.config.input_dim})")
    g = _act_g(net.activation)
    h = X
    for layer in range(net.n_layers):
        h = g(h @ net.weights[layer].T + net.biases[layer])
        if masks is not None:
            h = h * masks[layer]
    return (h @ net.weights[-1].T + net.biases[-1])[:, 0]


def forward(net: Mlp, x, masks=None) -> float:
    """Scalar output for one input vector."""
    return float(forward_batch(net, np.asarray(x, dtype=np.float64)[None, :], masks)[0])


def save_checkpoint(net: Mlp, path) -> None:
    """Single-file npz checkpoint: format tag, config JSON, and the
    weight/bias tensors in row-major order (w0..wL, b0..bL).  Round-trips
    bit-exactly."""
    payload = {
        "format": np.array(CHECKPOINT_FORMAT),
        "config": np.array(json.dumps(asdict(net.config))),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path) -> Mlp:
    with np.load(path) as data:
        fmt = str(data["format"])
        if fmt != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {fmt!r}")
        cfg = MlpConfig(**json.loads(str(data["config"])))
        n_layers = cfg.hidden_layers + 1
        weights = [np.ascontiguousarray(data[f"w{i}"]) for i in range(n_layers)]
        biases = [np.ascontiguousarray(data[f"b{i}"]) for i in range(n_layers)]
    net = Mlp(config=cfg, weights=weights, biases=biases)
    for w, shape in zip(net.weights, _layer_shapes(cfg)):
        if w.shape != shape:
            raise ValueError(f"checkpoint weight shape {w.shape} != expected {shape}")
    return net
