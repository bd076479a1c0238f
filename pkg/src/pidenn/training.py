"""First-order training loop: Adam/RMSprop, seeded minibatching, test-set
metrics against the reference pricer, and checkpointing.

Reproducibility contract: everything random derives from the config seed
through the streams in `rng` (shuffle keyed by epoch, dropout keyed by
epoch and step), so two runs with the same config, seed and thread cap
produce identical metrics, and a run resumed from an epoch-boundary
checkpoint continues exactly.  Batches are the permuted sample order cut
into `batch_size` chunks; a trailing partial batch is dropped.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle as oracle_mod
from .network import Mlp, forward_batch, save_checkpoint
from .quadrature import QuadGrid, build_grid
from .residuals import DomainBox, PideProblem, net_inputs
from .rng import STREAM_DROPOUT, STREAM_SHUFFLE, derive_rng
from .sampling import SampleBox, SampleSet, make_samples
from .vg import VgParams


class NumericsError(RuntimeError):
    """Raised when the loss stops being finite; the message names the
    residual component that exploded."""


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3     # not prescribed anywhere; common Adam default
    lr_schedule: str = "constant"   # or "cosine" (decay to zero over the run)
    batch_size: int = 200
    epochs: int = 30
    train_size: int = 50000
    test_size: int = 2000
    seed: int = 0
    boundary: str = "dirichlet"
    fixed_integral: bool = False
    equation: str = "vg"
    total_steps: int | None = None  # overrides epochs: epochs = ceil(total/steps-per-epoch)
    fixed_params: dict | None = None
    adam_betas: tuple = (0.9, 0.999)
    rmsprop_decay: float = 0.9
    opt_eps: float = 1e-8

    def __post_init__(self):
        if self.optimizer not in ("adam", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.train_size < self.batch_size:
            raise ValueError("need train_size >= batch_size >= 1")

    def resolved_epochs(self) -> int:
        if self.total_steps is None:
            return self.epochs
        steps_per_epoch = self.train_size // self.batch_size
        return max(1, math.ceil(self.total_steps / steps_per_epoch))

    def lr_at(self, step: int, total: int) -> float:
        if self.lr_schedule == "cosine" and total > 0:
            return self.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / total))
        return self.learning_rate


@dataclass
class Metrics:
    """Per-epoch history plus the best-test-RMSE point.

    rmse/mae are the values at the best epoch; mae is the maximum absolute
    error over the test set, not the mean.
    """

    loss_history: list = field(default_factory=list)
    rmse_history: list = field(default_factory=list)
    mae_history: list = field(default_factory=list)
    best_epoch: int = -1
    rmse: float = math.inf
    mae: float = math.inf

    def record(self, loss: float, rmse: float, mae: float) -> bool:
        self.loss_history.append(loss)
        self.rmse_history.append(rmse)
        self.mae_history.append(mae)
        if rmse < self.rmse:
            self.best_epoch = len(self.rmse_history) - 1
            self.rmse = rmse
            self.mae = mae
            return True
        return False


def write_metrics_csv(path, metrics: Metrics) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "rmse", "mae"])
        rows = zip(metrics.loss_history, metrics.rmse_history, metrics.mae_history)
        for epoch, (loss, rmse, mae) in enumerate(rows):
            writer.writerow([epoch, repr(loss), repr(rmse), repr(mae)])


# ---------------------------------------------------------------------------
# optimizers (functional: return new parameter and state lists)
# ---------------------------------------------------------------------------

@dataclass
class OptState:
    m: list          # first-moment (adam) -- unused by rmsprop
    v: list          # second-moment
    t: int = 0


def opt_init(params) -> OptState:
    return OptState(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state: OptState, lr: float,
              betas=(0.9, 0.999), eps: float = 1e-8):
    """Standard Adam update with bias correction."""
    b1, b2 = betas
    t = state.t + 1
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, OptState(m=new_m, v=new_v, t=t)


def rmsprop_step(params, grads, state: OptState, lr: float,
                 decay: float = 0.9, eps: float = 1e-8):
    """Standard RMSprop update (running mean of squared gradients)."""
    new_p, new_v = [], []
    for p, g, v in zip(params, grads, state.v):
        v = decay * v + (1.0 - decay) * g * g
        new_p.append(p - lr * g / (np.sqrt(v) + eps))
        new_v.append(v)
    return new_p, OptState(m=state.m, v=new_v, t=state.t + 1)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def oracle_prices(samples: SampleSet, strike: float, equation: str = "vg",
                  fft_cfg: oracle_mod.FftConfig = oracle_mod.FftConfig()) -> np.ndarray:
    """Reference put prices for every sample (FFT for the jump model,
    closed form for the diffusion one)."""
    out = np.empty(len(samples))
    data = samples.data
    for i in range(len(samples)):
        x, tau, sigma, nu, theta, r, q = data[i]
        if equation == "vg":
            p = VgParams(sigma, nu, theta, r, q)
            out[i] = oracle_mod.fft_put_price(math.exp(x), strike, tau, p, fft_cfg)
        else:
            out[i] = oracle_mod.bms_put_price(math.exp(x), strike, tau, sigma, r, q)
    return out


def evaluate(net: Mlp, test_inputs: np.ndarray, prices: np.ndarray) -> Metrics:
    """RMSE and maximum absolute error of the net against reference prices
    (inference mode, no dropout)."""
    if test_inputs.shape[0] != prices.shape[0]:
        raise ValueError("test inputs and oracle prices disagree in length")
    err = forward_batch(net, test_inputs) - prices
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.max(np.abs(err)))
    m = Metrics()
    m.record(math.nan, rmse, mae)
    return m


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _dropout_masks(net: Mlp, n: int, rate: float, rng) -> list | None:
    if rate <= 0.0:
        return None
    keep = 1.0 - rate
    width = net.config.hidden_size
    return [
        (rng.random((n, width)) >= rate).astype(np.float64) / keep
        for _ in range(net.config.hidden_layers)
    ]


def _explain_nonfinite(breakdown) -> str:
    parts = {
        "pide": breakdown.pide_sq,
        "initial": breakdown.init_sq,
        "lower-boundary": breakdown.lower_sq,
        "upper-boundary": breakdown.upper_sq,
    }
    bad = [name for name, arr in parts.items() if not np.all(np.isfinite(arr))]
    means = ", ".join(f"{name}={np.mean(arr):.3g}" for name, arr in parts.items())
    culprit = ", ".join(bad) if bad else "unknown"
    return f"non-finite residual component(s): {culprit} (component means: {means})"


def save_train_state(path, state: OptState, epoch: int) -> None:
    payload = {"t": np.array(state.t), "epoch": np.array(epoch)}
    for i, (m, v) in enumerate(zip(state.m, state.v)):
        payload[f"m{i}"] = m
        payload[f"v{i}"] = v
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_train_state(path):
    with np.load(path) as data:
        n = sum(1 for k in data.files if k.startswith("m"))
        state = OptState(
            m=[data[f"m{i}"] for i in range(n)],
            v=[data[f"v{i}"] for i in range(n)],
            t=int(data["t"]),
        )
        return state, int(data["epoch"])


@dataclass
class TrainData:
    """Everything train() consumes: prepared training batch, test inputs,
    reference prices."""

    prepared: object
    test_inputs: np.ndarray
    test_prices: np.ndarray
    problem: PideProblem


def build_train_data(net: Mlp, cfg: TrainConfig, box: SampleBox,
                     grid: QuadGrid | None = None,
                     domain: DomainBox | None = None,
                     eps: float = 0.01) -> TrainData:
    domain = domain or DomainBox(strike=box.strike)
    grid = grid if grid is not None else build_grid(eps=eps)
    problem = PideProblem(
        box=domain, grid=grid, eps=eps,
        boundary=cfg.boundary, fixed_integral=cfg.fixed_integral, equation=cfg.equation,
    )
    d = net.config.input_dim
    train = make_samples(box, cfg.train_size, "train", skip=1, fixed_params=cfg.fixed_params)
    test = make_samples(box, cfg.test_size, "test", skip=1 + cfg.train_size,
                        fixed_params=cfg.fixed_params)
    prepared = problem.prepare(train, d)
    cols = [test.column(c) for c in ("x", "tau", "sigma", "nu", "theta", "r", "q")]
    test_inputs = net_inputs(*cols, d)
    test_prices = oracle_prices(test, box.strike, cfg.equation)
    return TrainData(prepared=prepared, test_inputs=test_inputs,
                     test_prices=test_prices, problem=problem)


def train(net: Mlp, cfg: TrainConfig, box: SampleBox,
          grid: QuadGrid | None = None, domain: DomainBox | None = None,
          data: TrainData | None = None, out_dir=None,
          start_epoch: int = 0, opt_state: OptState | None = None,
          log=None):
    """Optimize the net on the sampled box; returns (best net, Metrics).

    Checkpoints (best-RMSE and final nets plus optimizer state) land in
    ``out_dir`` when given.  ``start_epoch``/``opt_state`` resume a run at
    an epoch boundary with an identical continuation.
    """
    if data is None:
        data = build_train_data(net, cfg, box, grid=grid, domain=domain)
    prepared, problem = data.prepared, data.problem
    n = len(prepared)
    steps_per_epoch = n // cfg.batch_size
    epochs = cfg.resolved_epochs()
    dropout = net.config.dropout_rate

    params = net.weights + net.biases
    state = opt_state if opt_state is not None else opt_init(params)
    metrics = Metrics()
    best_net = net.copy()

    for epoch in range(start_epoch, epochs):
        perm = derive_rng(cfg.seed, STREAM_SHUFFLE, epoch).permutation(n)
        epoch_losses = np.empty(steps_per_epoch)
        for step in range(steps_per_epoch):
            idx = perm[step * cfg.batch_size:(step + 1) * cfg.batch_size]
            batch = prepared.take(idx)
            masks = _dropout_masks(
                net, cfg.batch_size, dropout,
                derive_rng(cfg.seed, STREAM_DROPOUT, epoch, step),
            )
            loss, breakdown, grads = problem.loss_and_grad(net, batch, masks=masks)
            if not np.isfinite(loss):
                raise NumericsError(
                    f"loss diverged at epoch {epoch} step {step}: "
                    + _explain_nonfinite(breakdown)
                )
            glist = grads.weights + grads.biases
            lr = cfg.lr_at(epoch * steps_per_epoch + step, epochs * steps_per_epoch)
            if cfg.optimizer == "adam":
                params, state = adam_step(params, glist, state, lr,
                                          cfg.adam_betas, cfg.opt_eps)
            else:
                params, state = rmsprop_step(params, glist, state, lr,
                                             cfg.rmsprop_decay, cfg.opt_eps)
            k = len(net.weights)
            net.weights, net.biases = params[:k], params[k:]
            epoch_losses[step] = loss
        ev = evaluate(net, data.test_inputs, data.test_prices)
        improved = metrics.record(float(epoch_losses.mean()), ev.rmse, ev.mae)
        if improved:
            best_net = net.copy()
            if out_dir is not None:
                save_checkpoint(best_net, f"{out_dir}/best.npz")
        if log is not None:
            log(f"epoch {epoch}: loss={epoch_losses.mean():.6g} "
                f"rmse={ev.rmse:.6g} mae={ev.mae:.6g}")
        if out_dir is not None:
            save_checkpoint(net, f"{out_dir}/final.npz")
            save_train_state(f"{out_dir}/train_state.npz", state, epoch + 1)
    if not metrics.rmse_history:
        # zero-epoch run: report the untrained net
        ev = evaluate(net, data.test_inputs, data.test_prices)
        metrics.record(math.nan, ev.rmse, ev.mae)
        if out_dir is not None:
            save_checkpoint(net, f"{out_dir}/best.npz")
            save_checkpoint(net, f"{out_dir}/final.npz")
            save_train_state(f"{out_dir}/train_state.npz", state, start_epoch)
    return best_net, metrics
