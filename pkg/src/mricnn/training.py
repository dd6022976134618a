"""Model state, the training loop, evaluation and the metrics CSV."""

import copy
import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig
from .dataset import stack_pixels, to_batches
from .errors import ConfigurationError, TrainingError
from .network import Network
from .nn import softmax
from .optim import AdamState, adam_step, softmax_cross_entropy

log = logging.getLogger(__name__)

METRICS_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")
EVAL_BATCH = 64


@dataclass
class TrainState:
    config: ModelConfig
    params: dict
    buffers: dict
    adam: AdamState
    epoch: int = 0
    best_val_acc: float = -1.0
    best: "TrainState | None" = field(default=None, repr=False)

    @property
    def seed(self):
        return self.config.seed

    @property
    def network(self):
        net = getattr(self, "_network", None)
        if net is None:
            net = Network(self.config)
            object.__setattr__(self, "_network", net)
        return net

    def snapshot(self):
        """Deep copy of everything except the best-snapshot reference."""
        return TrainState(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.buffers.items()},
            copy.deepcopy(self.adam),
            self.epoch,
            self.best_val_acc,
        )


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass(frozen=True)
class Evaluation:
    loss: float
    accuracy: float
    confusion: np.ndarray


def build_model(config):
    """Initialise parameters, batch-norm buffers and Adam state from ``config.seed``."""
    net = Network(config)
    params, buffers = net.init_params(config.seed)
    state = TrainState(config, params, buffers, AdamState.for_params(params, lr=config.lr))
    object.__setattr__(state, "_network", net)
    return state


def predict(state, x, batch_size=EVAL_BATCH):
    """Class probabilities for ``x`` of shape ``(N, C, H, W)``, batch norm in inference mode."""
    net = state.network
    out = []
    for start in range(0, len(x), batch_size):
        logits, _ = net.forward(state.params, state.buffers, x[start : start + batch_size], "infer")
        out.append(softmax(logits))
    return np.concatenate(out) if out else np.zeros((0, state.config.num_classes), dtype=net.dtype)


def evaluate(state, samples, batch_size=EVAL_BATCH):
    """Mean cross-entropy, accuracy and confusion matrix (rows = true class)."""
    if not samples:
        raise ConfigurationError("cannot evaluate an empty sample set")
    k = state.config.num_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    total_loss = 0.0
    for x, y in to_batches(samples, batch_size, num_classes=k, dtype=state.network.dtype):
        logits, _ = state.network.forward(state.params, state.buffers, x, "infer")
        loss, probs, _ = softmax_cross_entropy(logits, y)
        total_loss += loss * len(x)
        np.add.at(confusion, (y.argmax(axis=1), probs.argmax(axis=1)), 1)
    n = len(samples)
    return Evaluation(total_loss / n, float(np.trace(confusion)) / n, confusion)


def train_step(state, x, y):
    """One forward/backward/Adam update; returns ``(loss, n_correct)``."""
    net = state.network
    logits, caches = net.forward(state.params, state.buffers, x, "train")
    loss, probs, dlogits = softmax_cross_entropy(logits, y)
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}")
    grads = net.backward(state.params, dlogits, caches)
    adam_step(state.params, grads, state.adam)
    return loss, int((probs.argmax(axis=1) == y.argmax(axis=1)).sum())


def train(state, splits, epochs=20, batch_size=None, on_epoch=None):
    """Train for ``epochs`` more epochs; returns ``(state, metrics)``.

    Each epoch visits the training split once in an order drawn for
    ``(seed, epoch)``, then scores the validation split with batch norm in
    inference mode. Training loss/accuracy are averaged over the epoch's
    batches as they were seen. ``state.best`` holds a copy of the state at
    the epoch with the highest validation accuracy (earliest on ties).
    """
    if not splits.train or not splits.validation:
        raise ConfigurationError("training needs non-empty train and validation splits")
    batch_size = batch_size or state.config.batch_size
    k = state.config.num_classes
    dtype = state.network.dtype
    metrics = []
    for _ in range(epochs):
        epoch = state.epoch + 1
        total_loss = 0.0
        correct = 0
        seen = 0
        for b, (x, y) in enumerate(to_batches(splits.train, batch_size, state.seed, epoch, k, dtype)):
            try:
                loss, hits = train_step(state, x, y)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch} batch {b}: {exc}") from None
            total_loss += loss * len(x)
            correct += hits
            seen += len(x)
        state.epoch = epoch
        val = evaluate(state, splits.validation)
        m = EpochMetrics(epoch, total_loss / seen, correct / seen, val.loss, val.accuracy)
        metrics.append(m)
        log.info(
            "epoch %d train_loss=%.4f train_acc=%.4f val_loss=%.4f val_acc=%.4f",
            epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc,
        )
        if val.accuracy > state.best_val_acc:
            state.best_val_acc = val.accuracy
            state.best = state.snapshot()
        if on_epoch is not None:
            on_epoch(m)
    return state, metrics


def export_metrics(metrics, path):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(METRICS_HEADER) + "\n")
        for m in metrics:
            fh.write(f"{m.epoch},{m.train_loss:.6f},{m.train_acc:.6f},{m.val_loss:.6f},{m.val_acc:.6f}\n")


def read_metrics(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            EpochMetrics(int(r["epoch"]), float(r["train_loss"]), float(r["train_acc"]), float(r["val_loss"]), float(r["val_acc"]))
            for r in reader
        ]


def samples_to_array(samples, dtype=np.float32):
    return stack_pixels(samples, dtype)
