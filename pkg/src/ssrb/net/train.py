"""Adam training loop with validation-based early stopping.

Training regimes mirror the benchmark protocols:

  B - Gaussian-noise synthetic traces spanning a wide SNR range, true labels.
  C - realistic-noise traces labeled by the Bayesian filter (label errors
      propagate into the network, which is the point of the regime).
  D - realistic-noise synthetic traces with true labels.

The regime only gates which label provenance is acceptable; the optimizer
and loss are identical everywhere.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..dataset import LabeledDataset
from ..errors import NonFiniteLossError, ProvenanceMismatchError
from ..traces import Provenance
from .layers import softmax_cross_entropy
from .model import NetConfig, NetModel

REGIME_PROVENANCE = {
    "B": Provenance.TRUE_LABELS,
    "C": Provenance.BAYES_LABELS,
    "D": Provenance.TRUE_LABELS,
}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 12
    patience: int = 3
    val_fraction: float = 0.1
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        if not 0.0 < self.val_fraction <= 0.5:
            raise ValueError(f"val_fraction must lie in (0, 0.5], got {self.val_fraction}")
        for name in ("learning_rate", "beta1", "beta2", "eps", "batch_size",
                     "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class AdamState:
    """First/second moment accumulators with bias correction."""

    def __init__(self, params: list[np.ndarray]):
        self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.t = 0


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    tc: TrainConfig,
) -> None:
    """One bias-corrected Adam update, applied in place.

    The update is a deterministic function of (state, grads); zero gradients
    leave parameters unchanged on the first step.
    """
    state.t += 1
    t = state.t
    b1, b2 = tc.beta1, tc.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g64 = g.astype(np.float64, copy=False)
        m *= b1
        m += (1.0 - b1) * g64
        v *= b2
        v += (1.0 - b2) * g64 * g64
        step = tc.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + tc.eps)
        p -= step.astype(p.dtype)


def batch_loss_and_grads(
    model: NetModel, batch: np.ndarray, onehot: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Cross-entropy loss and parameter gradients for one batch."""
    logits = model.forward_logits(batch, training=True)
    loss, grad = softmax_cross_entropy(logits, onehot.astype(logits.dtype))
    model.backward(grad)
    return loss, model.gradients()


def one_hot(labels: np.ndarray, dtype=np.float32) -> np.ndarray:
    out = np.zeros((labels.shape[0], 2), dtype=dtype)
    out[np.arange(labels.shape[0]), labels.astype(int)] = 1.0
    return out


def _validation_metrics(model: NetModel, x: np.ndarray, y: np.ndarray,
                        batch: int = 1024) -> tuple[float, float]:
    total, correct = 0.0, 0
    for lo in range(0, x.shape[0], batch):
        xb = x[lo : lo + batch]
        logits = model.forward_logits(xb, training=False)
        loss, _ = softmax_cross_entropy(logits, one_hot(y[lo : lo + batch], logits.dtype))
        total += loss * xb.shape[0]
        correct += int((logits.argmax(axis=1) == y[lo : lo + batch]).sum())
    return total / x.shape[0], correct / x.shape[0]


def train(
    dataset: LabeledDataset,
    net: NetConfig,
    tc: TrainConfig,
    regime: str,
) -> NetModel:
    """Train one network and return the best-validation-loss snapshot."""
    if regime not in REGIME_PROVENANCE:
        raise ValueError(f"regime must be one of {sorted(REGIME_PROVENANCE)}, got {regime!r}")
    required = REGIME_PROVENANCE[regime]
    if dataset.provenance != required:
        raise ProvenanceMismatchError(
            f"regime {regime} requires {required.value} labels, "
            f"dataset has {dataset.provenance.value}"
        )
    if net.input_len != dataset.grid.n:
        raise ValueError(
            f"net input length {net.input_len} != dataset trace length {dataset.grid.n}"
        )

    rng = np.random.default_rng(tc.seed)
    model = NetModel.build(net, seed=tc.seed)
    model.bind_rng(rng)

    count = dataset.count
    perm = rng.permutation(count)
    n_val = max(1, int(round(count * tc.val_fraction)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if train_idx.size == 0:
        raise ValueError("dataset too small for the requested validation fraction")
    x_val, y_val = dataset.samples[val_idx], dataset.labels[val_idx]
    x_train, y_train = dataset.samples[train_idx], dataset.labels[train_idx]

    state = AdamState(model.parameters())
    best_loss = np.inf
    best_params = model.copy_parameters()
    best_epoch = 0
    curve = []
    stale = 0
    t0 = time.perf_counter()
    for epoch in range(1, tc.max_epochs + 1):
        order = rng.permutation(train_idx.size)
        epoch_loss, seen = 0.0, 0
        for lo in range(0, order.size, tc.batch_size):
            idx = order[lo : lo + tc.batch_size]
            xb = x_train[idx]
            yb = one_hot(y_train[idx])
            loss, grads = batch_loss_and_grads(model, xb, yb)
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"loss became non-finite at epoch {epoch}, batch offset {lo}",
                    epoch=epoch, batch_offset=lo,
                )
            adam_step(model.parameters(), grads, state, tc)
            epoch_loss += loss * xb.shape[0]
            seen += xb.shape[0]
        val_loss, val_acc = _validation_metrics(model, x_val, y_val)
        curve.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / seen,
                "val_loss": val_loss,
                "val_accuracy": val_acc,
            }
        )
        if tc.verbose:
            print(
                f"epoch {epoch:3d}: train {epoch_loss / seen:.5f}"
                f"  val {val_loss:.5f}  acc {val_acc:.4f}"
            )
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = model.copy_parameters()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= tc.patience:
                break

    model.load_parameters(best_params)
    model.meta.update(
        {
            "regime": regime,
            "seed": int(tc.seed),
            "epochs_run": len(curve),
            "best_epoch": best_epoch,
            "best_val_loss": float(best_loss),
            "training_curve": curve,
            "train_seconds": time.perf_counter() - t0,
            "train_count": int(count),
            "dataset_meta": dict(dataset.meta),
        }
    )
    return model
