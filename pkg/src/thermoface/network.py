"""The perceptual mapping network: forward pass, regularized squared
loss, analytic gradients, and minibatch SGD training.

Architecture: N fully connected hidden layers with tanh units followed
by a purely linear output layer (weight matrix only, no output bias, no
output nonlinearity).  The loss is

    J = (1/M) sum_i ||map(x_i) - t_i||^2
        + (p/N) sum_{k=1..N} (||W_k||_F^2 + ||b_k||^2)

where p is the L2 penalty.  The penalty sum covers the hidden layers
only; the output matrix is not regularized.

Weights start from the Glorot uniform range
U[-sqrt(6)/sqrt(fan_in+fan_out), +...], biases from zero, drawn from the
seeded SplitMix64 stream in layer order (hidden layers first, output
matrix last, each filled row-major).  The same stream then drives the
per-epoch shuffles, so (seed, config, data) fully determines training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, TrainingDivergedError
from .numerics import Rng, gemv, uniform_fill


def tanh_activation(z: np.ndarray) -> np.ndarray:
    """Elementwise (e^{2z}-1)/(e^{2z}+1); saturates to +-1 for large |z|
    without overflow."""
    return np.tanh(z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_ACTIVATIONS = {
    "tanh": (tanh_activation, lambda z, h: 1.0 - h * h),
    "sigmoid": (_sigmoid, lambda z, h: h * (1.0 - h)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, h: (z > 0).astype(np.float64)),
}


@dataclass(frozen=True)
class DpmConfig:
    input_dim: int = 66
    hidden_sizes: tuple[int, ...] = (200, 200)
    l2_penalty: float = 1e-4
    learning_rate: float = 0.003
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 15
    epochs: int = 30
    batch_size: int = 128
    seed: int = 42
    activation: str = "tanh"

    def __post_init__(self):
        if self.input_dim < 1 or any(m < 1 for m in self.hidden_sizes) or not self.hidden_sizes:
            raise ContractViolation("all layer sizes must be >= 1")
        if self.l2_penalty < 0:
            raise ContractViolation("l2_penalty must be >= 0")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ContractViolation("learning_rate, epochs, batch_size must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ContractViolation(f"unknown activation {self.activation!r}")


@dataclass
class DpmModel:
    """Hidden layers as (weights, bias) pairs plus the linear output
    matrix.  Shapes chain input_dim -> hidden sizes -> input_dim."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    w_out: np.ndarray
    seed: int = 0
    activation: str = "tanh"

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w, _ in self.layers)

    def copy(self) -> "DpmModel":
        return DpmModel(
            layers=[(w.copy(), b.copy()) for w, b in self.layers],
            w_out=self.w_out.copy(),
            seed=self.seed,
            activation=self.activation,
        )


@dataclass
class Grads:
    layers: list[tuple[np.ndarray, np.ndarray]]
    w_out: np.ndarray


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    final_loss: float = float("nan")
    epochs_run: int = 0
    seed: int = 0


def init_glorot(config: DpmConfig, rng: Rng | None = None) -> DpmModel:
    """Fresh model with Glorot-uniform weights and zero biases."""
    if rng is None:
        rng = Rng(config.seed)
    sizes = [config.input_dim, *config.hidden_sizes]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0) / np.sqrt(fan_in + fan_out)
        w = uniform_fill(rng, -bound, bound, fan_out, fan_in)
        layers.append((w, np.zeros(fan_out)))
    bound = np.sqrt(6.0) / np.sqrt(sizes[-1] + config.input_dim)
    w_out = uniform_fill(rng, -bound, bound, config.input_dim, sizes[-1])
    return DpmModel(layers=layers, w_out=w_out, seed=config.seed, activation=config.activation)


def forward(model: DpmModel, x: np.ndarray) -> np.ndarray:
    """Map one vector through the network (fixed-order reductions)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise ContractViolation(f"input shape {x.shape} != ({model.input_dim},)")
    g = _ACTIVATIONS[model.activation][0]
    h = x
    for w, b in model.layers:
        h = g(gemv(w, h) + b)
    return gemv(model.w_out, h)


def map_batch(model: DpmModel, rows: np.ndarray) -> np.ndarray:
    """forward() applied to each row, order preserved."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.input_dim:
        raise ContractViolation(f"rows shape {rows.shape} incompatible with d={model.input_dim}")
    return np.stack([forward(model, row) for row in rows])


def _forward_batch(model: DpmModel, x: np.ndarray):
    """Batched forward pass keeping intermediates for backprop."""
    g = _ACTIVATIONS[model.activation][0]
    hs = [x]
    zs = []
    h = x
    for w, b in model.layers:
        z = h @ w.T + b
        h = g(z)
        zs.append(z)
        hs.append(h)
    return zs, hs, h @ model.w_out.T


def _check_batch(model: DpmModel, x: np.ndarray, t: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x.ndim != 2 or t.shape != x.shape or x.shape[1] != model.input_dim:
        raise ContractViolation(f"bad batch shapes {x.shape}, {t.shape}")
    if x.shape[0] < 1:
        raise ContractViolation("empty batch")
    return x, t


def loss(model: DpmModel, x: np.ndarray, t: np.ndarray, l2_penalty: float) -> float:
    """Mean squared mapping error plus the hidden-layer L2 penalty."""
    x, t = _check_batch(model, x, t)
    _, _, out = _forward_batch(model, x)
    diff = out - t
    j = float(np.sum(diff * diff)) / x.shape[0]
    if l2_penalty != 0.0:
        n = len(model.layers)
        reg = sum(float(np.sum(w * w)) + float(np.sum(b * b)) for w, b in model.layers)
        j += l2_penalty / n * reg
    return j


def _loss_and_grads(model: DpmModel, x: np.ndarray, t: np.ndarray, l2_penalty: float):
    # overflow on a diverging run is expected here; the caller's finite
    # check on j turns it into TrainingDivergedError
    with np.errstate(over="ignore", invalid="ignore"):
        m = x.shape[0]
        n = len(model.layers)
        gprime = _ACTIVATIONS[model.activation][1]
        zs, hs, out = _forward_batch(model, x)
        diff = out - t
        j = float(np.sum(diff * diff)) / m
        if l2_penalty != 0.0:
            reg = sum(float(np.sum(w * w)) + float(np.sum(b * b)) for w, b in model.layers)
            j += l2_penalty / n * reg
        d_out = (2.0 / m) * diff
        gw_out = d_out.T @ hs[-1]
        d_h = d_out @ model.w_out
        glayers: list[tuple[np.ndarray, np.ndarray]] = [None] * n  # type: ignore[list-item]
        for k in range(n - 1, -1, -1):
            w, b = model.layers[k]
            d_z = d_h * gprime(zs[k], hs[k + 1])
            gw = d_z.T @ hs[k]
            gb = d_z.sum(axis=0)
            if l2_penalty != 0.0:
                gw = gw + (2.0 * l2_penalty / n) * w
                gb = gb + (2.0 * l2_penalty / n) * b
            glayers[k] = (gw, gb)
            if k > 0:
                d_h = d_z @ w
    return j, Grads(layers=glayers, w_out=gw_out)


def backward(model: DpmModel, x: np.ndarray, t: np.ndarray, l2_penalty: float) -> Grads:
    """Analytic gradients of loss() w.r.t. every parameter.  The output
    matrix carries no penalty term."""
    x, t = _check_batch(model, x, t)
    return _loss_and_grads(model, x, t, l2_penalty)[1]


def sgd_step(model: DpmModel, grads: Grads, lr: float) -> DpmModel:
    """Plain SGD: p <- p - lr * dJ/dp, returned as a new model."""
    if len(grads.layers) != len(model.layers) or grads.w_out.shape != model.w_out.shape:
        raise ContractViolation("gradient set does not match model shapes")
    layers = []
    for (w, b), (gw, gb) in zip(model.layers, grads.layers):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ContractViolation("gradient set does not match model shapes")
        layers.append((w - lr * gw, b - lr * gb))
    return DpmModel(
        layers=layers,
        w_out=model.w_out - lr * grads.w_out,
        seed=model.seed,
        activation=model.activation,
    )


def train(
    config: DpmConfig, inputs: np.ndarray, targets: np.ndarray
) -> tuple[DpmModel, TrainReport]:
    """Minibatch SGD over (input, target) vector pairs.

    Each epoch reshuffles with the seeded stream and walks minibatches
    of ``batch_size`` (the last batch may be short).  The learning rate
    halves every ``lr_decay_every`` epochs.  Raises
    TrainingDivergedError as soon as a batch loss is non-finite.
    """
    inputs = np.ascontiguousarray(inputs, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape != targets.shape:
        raise ContractViolation(f"bad training shapes {inputs.shape}, {targets.shape}")
    if inputs.shape[0] < 1:
        raise ContractViolation("no training pairs")
    if inputs.shape[1] != config.input_dim:
        raise ContractViolation(
            f"pair width {inputs.shape[1]} != configured input_dim {config.input_dim}"
        )
    rng = Rng(config.seed)
    model = init_glorot(config, rng)
    n = inputs.shape[0]
    report = TrainReport(seed=config.seed)
    order = np.arange(n)
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.lr_decay_factor ** (epoch // config.lr_decay_every)
        rng.shuffle(order)
        loss_sum = 0.0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            sel = order[start : start + config.batch_size]
            j, grads = _loss_and_grads(model, inputs[sel], targets[sel], config.l2_penalty)
            if not np.isfinite(j):
                raise TrainingDivergedError(epoch=epoch, batch=bi)
            with np.errstate(over="ignore"):
                model = sgd_step(model, grads, lr)
            loss_sum += j * len(sel)
        report.epoch_losses.append(loss_sum / n)
        report.epochs_run = epoch + 1
    report.final_loss = report.epoch_losses[-1]
    return model, report
