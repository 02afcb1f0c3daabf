"""Deterministic AdamW + OneCycle training loop with early stopping.

The loss is mean squared error on the normalized scale; the monitored
quantity is validation MAPE on de-normalized values, so the early-stopping
signal is the same number the evaluation reports.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import BadConfig, BadStep, EmptySplit, NonFinite
from .metrics import mape
from .series import NormStats, batch_windows, invert_norm


@dataclass
class TrainConfig:
    lr_max: float = 1e-3
    weight_decay: float = 1e-4
    max_epochs: int = 200
    patience: int = 30
    batch_size: int = 64
    seed: int = 42
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    pct_start: float = 0.3
    div: float = 25.0
    final_div: float = 1e4

    def __post_init__(self):
        for name in ("lr_max", "weight_decay", "max_epochs", "patience",
                     "batch_size", "beta1", "beta2", "adam_eps", "pct_start",
                     "div", "final_div"):
            if getattr(self, name) < 0:
                raise BadConfig(f"{name} must be non-negative")
        if self.lr_max <= 0 or self.max_epochs < 1 or self.batch_size < 1:
            raise BadConfig("lr_max, max_epochs, batch_size must be positive")
        if not self.patience < self.max_epochs:
            raise BadConfig("patience must be < max_epochs")
        if not 0.0 < self.pct_start < 1.0:
            raise BadConfig("pct_start must lie in (0, 1)")


class AdamState:
    """First/second moment buffers keyed by parameter identity."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.m: dict[int, np.ndarray] = {}
        self.v: dict[int, np.ndarray] = {}


def adamw_step(params, grads, state: AdamState, step_index: int, lr: float):
    """One decoupled-weight-decay Adam update, in place.

    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
    """
    if step_index < 1:
        raise BadStep(f"step_index must be >= 1, got {step_index}")
    cfg = state.cfg
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** step_index
    bc2 = 1.0 - b2 ** step_index
    for p, g in zip(params, grads):
        if not np.all(np.isfinite(g)):
            raise NonFinite(f"gradient for {getattr(p, 'name', '?')} is not finite")
        key = id(p)
        if key not in state.m:
            state.m[key] = np.zeros_like(p.data)
            state.v[key] = np.zeros_like(p.data)
        m, v = state.m[key], state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= lr * (m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
                        + cfg.weight_decay * p.data)


def onecycle_lr(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Cosine warmup from lr_max/div to lr_max over pct_start of the run,
    then cosine anneal down to lr_max/(div*final_div)."""
    if not 0 <= step < total_steps:
        raise BadStep(f"step {step} outside [0, {total_steps})")
    up = int(round(cfg.pct_start * total_steps))
    start_lr = cfg.lr_max / cfg.div
    floor_lr = cfg.lr_max / (cfg.div * cfg.final_div)
    if step <= up:
        if up == 0:
            return cfg.lr_max
        t = step / up
        return start_lr + (cfg.lr_max - start_lr) * 0.5 * (1.0 - np.cos(np.pi * t))
    last = total_steps - 1
    if last == up:
        return cfg.lr_max
    t = (step - up) / (last - up)
    return floor_lr + (cfg.lr_max - floor_lr) * 0.5 * (1.0 + np.cos(np.pi * t))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_mape: float
    lr: float


@dataclass
class History:
    epochs: list = field(default_factory=list)
    lr_trace: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_mape: float = float("inf")
    stopped_early: bool = False


def _minibatches(n: int, batch_size: int, order: np.ndarray):
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def predict_batches(model, windows, batch_size: int = 256) -> np.ndarray:
    """Normalized predictions over a window list, batched for memory."""
    outs = []
    for i in range(0, len(windows), batch_size):
        batch = batch_windows(windows[i:i + batch_size])
        outs.append(model.forward(batch).data)
    return np.concatenate(outs, axis=0)


def validation_mape(model, windows, stats: NormStats,
                    batch_size: int = 256) -> float:
    pred_n = predict_batches(model, windows, batch_size)
    true_n = np.stack([w.y for w in windows])
    return mape(invert_norm(true_n.ravel(), stats),
                invert_norm(pred_n.ravel(), stats))


def train(model, train_windows, val_windows, cfg: TrainConfig,
          stats: NormStats):
    """Train to convergence or patience; returns (model, history).

    The model is restored to its best-validation parameters before return.
    """
    if not train_windows or not val_windows:
        raise EmptySplit("train and validation splits must be non-empty")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    params = model.parameters()
    state = AdamState(cfg)
    n = len(train_windows)
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.max_epochs * steps_per_epoch

    history = History()
    best_params = [p.data.copy() for p in params]
    since_best = 0
    global_step = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        losses = []
        lr = cfg.lr_max
        for idx in _minibatches(n, cfg.batch_size, order):
            batch = batch_windows([train_windows[i] for i in idx])
            pred = model.forward(batch, train=True, rng=rng)
            loss = ((pred - Tensor(batch.y)) ** 2.0).mean()
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise NonFinite(
                    f"training loss diverged at epoch {epoch}, "
                    f"step {global_step}")
            model.zero_grad()
            loss.backward()
            lr = onecycle_lr(global_step, total_steps, cfg)
            adamw_step(params, [p.grad for p in params], state,
                       global_step + 1, lr)
            history.lr_trace.append(lr)
            global_step += 1
            losses.append(loss_val)

        val = validation_mape(model, val_windows, stats)
        history.epochs.append(EpochRecord(
            epoch=epoch, train_loss=float(np.mean(losses)),
            val_mape=val, lr=lr))
        if val < history.best_val_mape:
            history.best_val_mape = val
            history.best_epoch = epoch
            best_params = [p.data.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                history.stopped_early = True
                break

    for p, best in zip(params, best_params):
        p.data[...] = best
    return model, history
