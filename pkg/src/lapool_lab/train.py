"""Per-graph forward/backward with minibatch gradient accumulation, Adam, and
early stopping on validation loss."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .graph import Graph
from .metrics import metrics
from .model import Model

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 16
    epochs: int = 30
    patience: int = 10
    seed: int = 0
    clip_norm: float | None = 1.0  # rescale each minibatch gradient to at most this global L2 norm

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0 or self.patience < 1:
            raise ValueError("lr, batch_size and patience must be positive, epochs non-negative")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.epochs > 0 and self.patience > self.epochs:
            raise ValueError("patience cannot exceed epochs")


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def graph_loss(model: Model, g: Graph) -> ad.Tensor:
    target = g.label_vector(model.config.n_labels)[None, :]
    return ad.sigmoid_cross_entropy_loss(model(g).logits, target)


def evaluate(model: Model, graphs: list[Graph]) -> dict:
    """Mean loss plus :func:`metrics.metrics` over every (graph, label) pair."""
    if not graphs:
        return {"loss": None, "micro_f1": None, "roc_auc": None, "pr_auc": None, "accuracy": None}
    L = model.config.n_labels
    scores, labels, losses = [], [], []
    for g in graphs:
        out = model(g).logits
        y = g.label_vector(L)
        losses.append(ad.sigmoid_cross_entropy_loss(out, y[None, :]).value[0, 0])
        scores.append(ad.sigmoid(out).value.reshape(-1))
        labels.append(y)
    result = {"loss": float(np.mean(losses))}
    result.update(metrics(np.concatenate(scores), np.concatenate(labels)))
    return result


def train(model: Model, train_set: list[Graph], valid_set: list[Graph], config: TrainConfig, test_set=None) -> dict:
    """Fit ``model`` in place and return a JSON-ready report.

    The parameters with the best validation loss are restored at the end.
    Raises :class:`TrainingDiverged` on a non-finite loss.
    """
    params = model.parameters()
    names = list(model.named_parameters())
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.adam_eps)
    rng = np.random.default_rng(config.seed)

    history = []
    initial_valid = evaluate(model, valid_set)
    best_loss = initial_valid["loss"] if initial_valid["loss"] is not None else np.inf
    best_state = model.state_dict()
    best_epoch = 0
    stale = 0
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            model.zero_grad()
            for idx in batch:
                loss = graph_loss(model, train_set[idx])
                value = loss.value[0, 0]
                if not np.isfinite(value):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, step {step}, graph {int(idx)} (lr={config.lr})"
                    )
                epoch_losses.append(value)
                ad.backward(ad.scalar_multiply(loss, 1.0 / len(batch)))
            grads = [p.grad for p in params]
            bad = [n for n, g in zip(names, grads) if not np.all(np.isfinite(g))]
            if bad:
                raise TrainingDiverged(f"non-finite gradient in {bad[0]} at epoch {epoch}, step {step}")
            if config.clip_norm is not None:
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
                if norm > config.clip_norm:
                    grads = [g * (config.clip_norm / norm) for g in grads]
            opt.step(grads)
            step += 1
        valid = evaluate(model, valid_set)
        row = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses)), "valid": valid}
        history.append(row)
        log.info("epoch %d train_loss %.5f valid_loss %s", epoch, row["train_loss"], valid["loss"])
        vloss = valid["loss"] if valid["loss"] is not None else row["train_loss"]
        if vloss < best_loss:
            best_loss, best_epoch, stale = vloss, epoch, 0
            best_state = model.state_dict()
        else:
            stale += 1
            if stale >= config.patience:
                break
    model.load_state_dict(best_state)

    report = {
        "config": asdict(config),
        "epochs_run": len(history),
        "best_epoch": best_epoch,
        "initial_valid": initial_valid,
        "history": history,
        "final": {"train": evaluate(model, train_set), "valid": evaluate(model, valid_set)},
    }
    if test_set is not None:
        report["final"]["test"] = evaluate(model, test_set)
    return report
