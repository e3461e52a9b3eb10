"""Huber loss, Adam with freeze masks, the training loop, and two-phase
transfer learning.

Transfer re-targets a trained model: the output layer is re-initialized,
phase 1 trains only that layer at the higher learning rate, phase 2
unfreezes everything and fine-tunes at the reduced rate.  Optimizer
moments start fresh in each phase because their scale is coupled to the
learning rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import WindowedDataset
from .errors import NumericError
from .network import (
    Seq2SeqModel,
    backward_batch,
    copy_model,
    forward_batch,
    init_output_layer,
    param_items,
)
from .numeric import Rng

DEFAULT_PHASE1_LR = 0.001
DEFAULT_PHASE2_LR = 0.0001


@dataclass
class HuberConfig:
    delta: float = 1.0

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError(f"huber delta must be > 0, got {self.delta}")


def huber(pred: np.ndarray, target: np.ndarray, cfg: HuberConfig = HuberConfig()) -> tuple[float, np.ndarray]:
    """Mean-reduced Huber loss and its exact gradient wrt predictions.

    Per element: 0.5 e^2 for |e| <= delta, else delta (|e| - 0.5 delta).
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction/target shape mismatch: {pred.shape} vs {target.shape}")
    err = pred - target
    abs_err = np.abs(err)
    quad = abs_err <= cfg.delta
    per_elem = np.where(quad, 0.5 * err ** 2, cfg.delta * (abs_err - 0.5 * cfg.delta))
    n = err.size
    loss = float(per_elem.sum() / n)
    grad = np.where(quad, err, cfg.delta * np.sign(err)) / n
    return loss, grad


@dataclass
class AdamState:
    """First/second moment trees plus step count; one state per run."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, model: Seq2SeqModel, lr: float) -> "AdamState":
        m = {name: np.zeros_like(arr) for name, arr in param_items(model)}
        v = {name: np.zeros_like(arr) for name, arr in param_items(model)}
        return cls(m=m, v=v, t=0, lr=lr)


def full_mask(model: Seq2SeqModel, trainable: bool = True) -> dict[str, bool]:
    return {name: trainable for name, _ in param_items(model)}


def output_only_mask(model: Seq2SeqModel) -> dict[str, bool]:
    """Freeze everything except the output layer (transfer phase 1)."""
    return {name: name.startswith("out.") for name, _ in param_items(model)}


def adam_step(
    model: Seq2SeqModel,
    grads: dict[str, np.ndarray],
    state: AdamState,
    mask: dict[str, bool] | None = None,
) -> None:
    """Bias-corrected Adam update in place, applied only where the mask is
    true.  Frozen parameters stay bitwise unchanged and their moments are
    not advanced."""
    params = dict(param_items(model))
    if set(grads) != set(params):
        raise ValueError(
            f"gradient tree does not match model parameters: "
            f"{sorted(set(grads) ^ set(params))}"
        )
    if mask is not None and set(mask) != set(params):
        raise ValueError("freeze mask keys do not match model parameters")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        if mask is not None and not mask[name]:
            continue
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g ** 2
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch: int = 32
    lr: float = 0.001
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")


def train(
    model: Seq2SeqModel,
    data: WindowedDataset,
    cfg: TrainConfig,
    loss_cfg: HuberConfig = HuberConfig(),
    mask: dict[str, bool] | None = None,
) -> tuple[Seq2SeqModel, list[float]]:
    """Minibatch Adam on a copy of the model; returns (model, per-epoch loss).

    Deterministic for a fixed seed: the shuffle order comes from the
    toolkit's own stream, batches are visited in order, and gradient
    reduction is a fixed summation.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if cfg.epochs == 0:
        raise ValueError("train requires epochs >= 1")
    mc = model.config
    if data.n_past != mc.n_past or data.n_future != mc.n_future:
        raise ValueError(
            f"dataset windows ({data.n_past}->{data.n_future}) do not match "
            f"model config ({mc.n_past}->{mc.n_future})"
        )
    model = copy_model(model)
    state = AdamState.fresh(model, cfg.lr)
    rng = Rng(cfg.seed)
    history: list[float] = []
    for _ in range(cfg.epochs):
        order = np.arange(len(data))
        if cfg.shuffle:
            rng.shuffle(order)
        total = 0.0
        for k in range(0, len(order), cfg.batch):
            idx = order[k : k + cfg.batch]
            cache = forward_batch(model, data.inputs[idx])
            loss, dpred = huber(cache.preds, data.targets[idx], loss_cfg)
            if not math.isfinite(loss):
                raise NumericError(f"training loss became non-finite at step {state.t + 1}")
            grads = backward_batch(model, cache, dpred)
            adam_step(model, grads, state, mask)
            total += loss * len(idx)
        history.append(total / len(data))
    return model, history


@dataclass
class PhaseLog:
    """What one transfer phase did: its rate, epochs, and loss path."""

    name: str
    lr: float
    epochs: int
    history: list[float] = field(default_factory=list)


@dataclass
class TransferResult:
    model: Seq2SeqModel
    phases: list[PhaseLog]


def transfer(
    source: Seq2SeqModel,
    target_data: WindowedDataset,
    cfg1: TrainConfig,
    cfg2: TrainConfig,
    loss_cfg: HuberConfig = HuberConfig(),
) -> TransferResult:
    """Adapt a source-domain model to target windows in two phases.

    The output layer is replaced (Glorot, seeded by cfg1.seed); phase 1
    trains only it at cfg1.lr, phase 2 fine-tunes everything at cfg2.lr.
    A phase with 0 epochs is skipped.
    """
    mc = source.config
    mismatches = []
    if target_data.n_past != mc.n_past:
        mismatches.append(f"n_past: model {mc.n_past} vs data {target_data.n_past}")
    if target_data.n_future != mc.n_future:
        mismatches.append(f"n_future: model {mc.n_future} vs data {target_data.n_future}")
    if mismatches:
        raise ValueError("transfer config mismatch: " + "; ".join(mismatches))

    model = copy_model(source)
    model.output = init_output_layer(mc, Rng(cfg1.seed))
    phases = []

    if cfg1.epochs > 0:
        model, hist1 = train(model, target_data, cfg1, loss_cfg, mask=output_only_mask(model))
    else:
        hist1 = []
    phases.append(PhaseLog(name="freeze-body", lr=cfg1.lr, epochs=cfg1.epochs, history=hist1))

    if cfg2.epochs > 0:
        model, hist2 = train(model, target_data, cfg2, loss_cfg, mask=None)
    else:
        hist2 = []
    phases.append(PhaseLog(name="fine-tune", lr=cfg2.lr, epochs=cfg2.epochs, history=hist2))

    return TransferResult(model=model, phases=phases)


def gradient_check(
    model: Seq2SeqModel,
    window: np.ndarray,
    targets: np.ndarray,
    epsilon: float,
    samples_per_block: int = 20,
    seed: int = 0,
    loss_cfg: HuberConfig = HuberConfig(),
) -> float:
    """Worst relative error between backprop and central finite differences
    of the Huber loss, over a random parameter sample from every block.

    Relative error is |a - b| / max(|a|, |b|); entries where both sides are
    below 1e-8 (beneath finite-difference resolution) count as exact.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    window = np.asarray(window, dtype=np.float64).reshape(-1)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)

    cache = forward_batch(model, window[None, :])
    _, dpred = huber(cache.preds[0], targets, loss_cfg)
    grads = backward_batch(model, cache, dpred[None, :])

    def loss_at() -> float:
        preds = forward_batch(model, window[None, :]).preds[0]
        value, _ = huber(preds, targets, loss_cfg)
        return value

    rng = Rng(seed)
    worst = 0.0
    for name, arr in param_items(model):
        flat = arr.reshape(-1)
        count = min(samples_per_block, flat.size)
        picked: set[int] = set()
        while len(picked) < count:
            picked.add(int(rng.next_u64() % flat.size))
        chosen = sorted(picked)
        for idx in chosen:
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up = loss_at()
            flat[idx] = orig - epsilon
            down = loss_at()
            flat[idx] = orig
            fd = (up - down) / (2.0 * epsilon)
            bp = grads[name].reshape(-1)[idx]
            scale = max(abs(fd), abs(bp))
            if scale < 1e-8:
                continue
            worst = max(worst, abs(fd - bp) / scale)
    return worst
