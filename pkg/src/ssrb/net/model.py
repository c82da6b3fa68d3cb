"""Network architecture: four conv+pool blocks feeding a small dense head.

The default configuration mirrors the readout classifier: kernel sizes
(101, 51, 25, 10) with filter depths (32, 16, 16, 8), max-pool 3 between
stages, dense sizes (64, 32, 2), ReLU activations and a softmax output
giving (P_down, P_up) per trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatchError
from .layers import (
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool1D,
    ReLU,
    softmax,
)


@dataclass(frozen=True)
class NetConfig:
    input_len: int = 1000
    kernel_sizes: tuple[int, ...] = (101, 51, 25, 10)
    filter_depths: tuple[int, ...] = (32, 16, 16, 8)
    pool_size: int = 3
    dense_sizes: tuple[int, ...] = (64, 32, 2)
    dropout: float = 0.0

    def __post_init__(self):
        if len(self.kernel_sizes) != len(self.filter_depths):
            raise ValueError("kernel_sizes and filter_depths must pair up")
        if any(k < 1 for k in self.kernel_sizes) or any(d < 1 for d in self.filter_depths):
            raise ValueError("kernel sizes and filter depths must be positive")
        if len(self.dense_sizes) < 1 or self.dense_sizes[-1] != 2:
            raise ValueError("dense head must end in 2 output classes")
        self.feature_lengths()  # validates the shape chain

    def feature_lengths(self) -> list[int]:
        """Lengths after each conv and pool stage, starting from input_len.

        Raises ShapeMismatchError when a stage would produce an empty output.
        """
        lengths = [self.input_len]
        length = self.input_len
        for k in self.kernel_sizes:
            length = length - k + 1
            if length < 1:
                raise ShapeMismatchError(
                    f"kernel {k} does not fit length {lengths[-1]} (config {self})"
                )
            lengths.append(length)
            length //= self.pool_size
            if length < 1:
                raise ShapeMismatchError(
                    f"pool {self.pool_size} empties length {lengths[-1]}"
                )
            lengths.append(length)
        return lengths

    @property
    def flat_features(self) -> int:
        return self.feature_lengths()[-1] * self.filter_depths[-1]

    def to_dict(self) -> dict:
        return {
            "input_len": self.input_len,
            "kernel_sizes": list(self.kernel_sizes),
            "filter_depths": list(self.filter_depths),
            "pool_size": self.pool_size,
            "dense_sizes": list(self.dense_sizes),
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(
            input_len=int(d["input_len"]),
            kernel_sizes=tuple(d["kernel_sizes"]),
            filter_depths=tuple(d["filter_depths"]),
            pool_size=int(d["pool_size"]),
            dense_sizes=tuple(d["dense_sizes"]),
            dropout=float(d.get("dropout", 0.0)),
        )


@dataclass
class NetModel:
    config: NetConfig
    layers: list[Layer]
    dtype: np.dtype
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, config: NetConfig, seed: int = 0, dtype=np.float32) -> "NetModel":
        """He-initialized model (fan-in scaling for the ReLU stages, zero biases)."""
        rng = np.random.default_rng(seed)
        dtype = np.dtype(dtype)
        layers: list[Layer] = []
        in_ch = 1
        for k, depth in zip(config.kernel_sizes, config.filter_depths):
            conv = Conv1D(in_ch, depth, k, dtype=dtype)
            conv.init_weights(rng)
            layers.append(conv)
            layers.append(ReLU())
            layers.append(MaxPool1D(config.pool_size))
            in_ch = depth
        layers.append(Flatten())
        in_features = config.flat_features
        for i, size in enumerate(config.dense_sizes):
            dense = Dense(in_features, size, dtype=dtype)
            dense.init_weights(rng)
            layers.append(dense)
            last = i == len(config.dense_sizes) - 1
            if not last:
                layers.append(ReLU())
                if config.dropout > 0.0:
                    layers.append(Dropout(config.dropout))
            in_features = size
        return cls(config=config, layers=layers, dtype=dtype,
                   meta={"init_seed": int(seed)})

    def bind_rng(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rng = rng

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    def _prepare(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.config.input_len:
            raise ShapeMismatchError(
                f"expected traces of length {self.config.input_len}, got {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("input contains non-finite values")
        return x[:, None, :]

    def forward_logits(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        h = self._prepare(x)
        for layer in self.layers:
            h = layer.forward(h, training=training)
        return h

    def forward(self, x: np.ndarray) -> np.ndarray:
        """(P_down, P_up) per trace; rows sum to one."""
        return softmax(self.forward_logits(x, training=False))

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = grad_logits
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def classify(self, x: np.ndarray, batch: int = 1024) -> np.ndarray:
        """Hard labels (UP=1 iff P_up >= P_down), evaluated in batches."""
        x = np.asarray(x)
        if x.ndim == 1:
            x = x[None, :]
        out = np.empty(x.shape[0], dtype=np.uint8)
        for lo in range(0, x.shape[0], batch):
            probs = self.forward(x[lo : lo + batch])
            out[lo : lo + batch] = (probs[:, 1] >= probs[:, 0]).astype(np.uint8)
        return out

    def probabilities(self, x: np.ndarray, batch: int = 1024) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 1:
            x = x[None, :]
        out = np.empty((x.shape[0], 2), dtype=np.float64)
        for lo in range(0, x.shape[0], batch):
            out[lo : lo + batch] = self.forward(x[lo : lo + batch])
        return out

    def copy_parameters(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def load_parameters(self, values: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(params) != len(values):
            raise ShapeMismatchError(
                f"model has {len(params)} parameter tensors, got {len(values)}"
            )
        for p, v in zip(params, values):
            if p.shape != v.shape:
                raise ShapeMismatchError(f"shape {v.shape} != expected {p.shape}")
            p[...] = v.astype(p.dtype)
