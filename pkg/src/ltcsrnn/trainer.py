"""Desk-scale gradient trainer for the ReLU-converted network.

Training runs only in ReLU mode, where the network is an ordinary recurrent
net and gradients are exact away from the ReLU kink.  Plain SGD with a fixed
learning rate, deterministic given the seed.  Spiking-mode accuracy of the
trained weights is reported for information only.
"""
from __future__ import annotations

import copy
import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from .network import Model, forward_batch, predict
from .neurons import LtcTauWeights


class UnsupportedModeError(ValueError):
    """Raised when a gradient-based operation is asked to run in spiking mode."""


class TrainingDivergedError(RuntimeError):
    """Non-finite loss during training; carries the epoch and batch index."""

    def __init__(self, epoch: int, batch: int, loss_value: float):
        super().__init__(f"non-finite loss {loss_value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainConfig:
    learning_rate: float = 0.2
    epochs: int = 6
    batch_size: int = 32
    rng_seed: int = 0
    t_frames: int = 20
    train_split: float = 0.8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.train_split < 1.0:
            raise ValueError("train_split must lie in (0,1)")


@dataclass
class LabeledFrames:
    """Preprocessed dataset: ``data`` is ``(N, T, C, H, W)`` float32, labels int64."""

    data: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray     # rows: true class, columns: predicted


def loss(scores: torch.Tensor, label) -> torch.Tensor:
    """Softmax cross-entropy of class scores.

    Accepts ``(K,)`` scores with an integer label, or ``(B, K)`` with a label
    vector (mean over the batch).
    """
    scores = torch.as_tensor(scores)
    if scores.dim() == 1:
        return torch.logsumexp(scores, dim=0) - scores[int(label)]
    label = torch.as_tensor(label, dtype=torch.long)
    picked = scores.gather(1, label.unsqueeze(1)).squeeze(1)
    return (torch.logsumexp(scores, dim=1) - picked).mean()


def clone_model(model: Model, dtype: torch.dtype | None = None, requires_grad: bool = False) -> Model:
    """Deep copy with every tensor cloned (and optionally cast / made trainable)."""
    def conv(t: torch.Tensor) -> torch.Tensor:
        t = t.detach().clone()
        if dtype is not None:
            t = t.to(dtype)
        return t.requires_grad_(requires_grad)

    layers = []
    for lw in model.layers:
        new = replace(lw, w_in=conv(lw.w_in), w_rec=conv(lw.w_rec), b_in=conv(lw.b_in))
        if lw.tau_weights is not None:
            tw = lw.tau_weights
            new.tau_weights = LtcTauWeights(
                w_tau_m=conv(tw.w_tau_m),
                w_tau_adp=conv(tw.w_tau_adp),
                bias_tau_m=None if tw.bias_tau_m is None else conv(tw.bias_tau_m),
                bias_tau_adp=None if tw.bias_tau_adp is None else conv(tw.bias_tau_adp),
            )
        layers.append(new)
    return Model(
        spec=copy.deepcopy(model.spec),
        layers=layers,
        w_out=conv(model.w_out),
        b_out=conv(model.b_out),
    )


def _trainable_tensors(model: Model) -> list[torch.Tensor]:
    out = []
    for lw in model.layers:
        out += [lw.w_in, lw.w_rec, lw.b_in]
        if lw.tau_weights is not None:
            tw = lw.tau_weights
            out += [tw.w_tau_m, tw.w_tau_adp]
            out += [t for t in (tw.bias_tau_m, tw.bias_tau_adp) if t is not None]
    out += [model.w_out, model.b_out]
    return out


def split_dataset(dataset: LabeledFrames, train_split: float, seed: int) -> tuple[LabeledFrames, LabeledFrames]:
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * train_split))
    tr, va = perm[:n_train], perm[n_train:]
    return (
        LabeledFrames(dataset.data[tr], dataset.labels[tr]),
        LabeledFrames(dataset.data[va], dataset.labels[va]),
    )


def evaluate(model: Model, dataset: LabeledFrames, mode: str = "relu", batch_size: int = 64) -> EvalResult:
    """Accuracy and confusion matrix over a labeled dataset; model is untouched."""
    k = model.spec.num_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            batch = dataset.data[start:start + batch_size]
            scores = forward_batch(model, batch, mode=mode).numpy()
            pred = np.argmax(scores, axis=1)
            for true, p in zip(dataset.labels[start:start + batch_size], pred):
                confusion[true, p] += 1
    total = confusion.sum()
    acc = float(np.trace(confusion)) / total if total else 0.0
    return EvalResult(accuracy=acc, confusion=confusion)


def train(model: Model, dataset: LabeledFrames, config: TrainConfig) -> tuple[Model, list[dict]]:
    """SGD on softmax cross-entropy in ReLU mode; returns the best-validation model.

    Metrics: one dict per epoch with train/val loss and accuracy.  Raises
    :class:`TrainingDivergedError` on a non-finite loss.
    """
    train_set, val_set = split_dataset(dataset, config.train_split, config.rng_seed)
    work = clone_model(model, requires_grad=True)
    params = _trainable_tensors(work)
    best = clone_model(model)
    best_acc = -1.0
    metrics: list[dict] = []
    order_rng = np.random.default_rng(config.rng_seed + 1)

    for epoch in range(config.epochs):
        perm = order_rng.permutation(len(train_set))
        epoch_loss, epoch_correct = 0.0, 0
        for bi, start in enumerate(range(0, len(perm), config.batch_size)):
            idx = perm[start:start + config.batch_size]
            x = torch.from_numpy(train_set.data[idx])
            y = torch.from_numpy(train_set.labels[idx])
            scores = forward_batch(work, x, mode="relu")
            batch_loss = loss(scores, y)
            value = float(batch_loss.detach())
            if not np.isfinite(value):
                raise TrainingDivergedError(epoch, bi, value)
            for p in params:
                if p.grad is not None:
                    p.grad = None
            batch_loss.backward()
            with torch.no_grad():
                for p in params:
                    if p.grad is not None:
                        p -= config.learning_rate * p.grad
            epoch_loss += value * len(idx)
            epoch_correct += int((scores.detach().argmax(dim=1) == y).sum())

        val = evaluate(work, val_set)
        with torch.no_grad():
            val_loss = float(
                loss(forward_batch(work, torch.from_numpy(val_set.data), mode="relu"),
                     torch.from_numpy(val_set.labels))
            ) if len(val_set) else 0.0
        row = {
            "epoch": epoch,
            "train_loss": epoch_loss / max(len(train_set), 1),
            "train_acc": epoch_correct / max(len(train_set), 1),
            "val_loss": val_loss,
            "val_acc": val.accuracy,
        }
        metrics.append(row)
        if val.accuracy > best_acc:
            best_acc = val.accuracy
            best = clone_model(work)
    return best, metrics


def write_metrics_csv(path, metrics: list[dict]) -> None:
    with Path(path).open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
        writer.writeheader()
        writer.writerows(metrics)


def grad_check(model: Model, frames, label: int, mode: str = "relu", step: float = 1e-3, samples_per_tensor: int = 4, seed: int = 0) -> float:
    """Max relative error of backprop gradients vs central finite differences.

    Runs in float64 so the finite-difference quotient is meaningful at the
    1e-3 step size.  Intended for tiny models (a few layers, T <= 5).
    """
    if mode != "relu":
        raise UnsupportedModeError("gradient checking requires relu mode")
    x = torch.as_tensor(np.asarray(frames), dtype=torch.float64)
    if x.dim() == 4:
        x = x.unsqueeze(0)
    work = clone_model(model, dtype=torch.float64, requires_grad=True)
    params = _trainable_tensors(work)
    out = loss(forward_batch(work, x, mode="relu"), torch.tensor([label]))
    out.backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    with torch.no_grad():
        for p in params:
            if p.grad is None:
                continue
            flat = p.view(-1)
            gflat = p.grad.view(-1)
            n = flat.numel()
            picks = rng.choice(n, size=min(samples_per_tensor, n), replace=False)
            for j in picks:
                orig = float(flat[j])
                flat[j] = orig + step
                hi = float(loss(forward_batch(work, x, mode="relu"), torch.tensor([label])))
                flat[j] = orig - step
                lo = float(loss(forward_batch(work, x, mode="relu"), torch.tensor([label])))
                flat[j] = orig
                fd = (hi - lo) / (2.0 * step)
                ad = float(gflat[j])
                denom = max(abs(ad), abs(fd), 1e-6)
                worst = max(worst, abs(ad - fd) / denom)
    return worst
