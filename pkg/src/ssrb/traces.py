"""Core value types shared across the package.

Traces are uniformly sampled, dimensionless readout signals scaled so the
noiseless low level sits at -1 and the high level at +1.  Time is measured
in units where the default tunnel-in rate is 1 (so the mean peak length is 1
and the default window spans 10 of them).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DOWN = 0
UP = 1

LOW_LEVEL = -1.0
HIGH_LEVEL = 1.0


class Provenance(enum.Enum):
    """How a dataset's labels were obtained."""

    TRUE_LABELS = "TRUE_LABELS"
    BAYES_LABELS = "BAYES_LABELS"


@dataclass(frozen=True)
class TraceGrid:
    """Uniform sampling grid: ``n`` samples at interval ``dt``, window ``n*dt``."""

    dt: float = 0.01
    n: int = 1000

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")

    @property
    def t_total(self) -> float:
        return self.n * self.dt

    def times(self) -> np.ndarray:
        """Sample times ``k*dt`` for k = 0..n-1."""
        return np.arange(self.n) * self.dt

    @property
    def nyquist(self) -> float:
        return 0.5 / self.dt


@dataclass(frozen=True)
class TunnelParams:
    """Tunnel-out rate ``gamma_i`` and tunnel-in rate ``gamma_f`` (1/time)."""

    gamma_i: float = 1.0
    gamma_f: float = 1.0

    def __post_init__(self):
        if not (self.gamma_i > 0 and self.gamma_f > 0):
            raise ValueError(
                f"rates must be positive, got gamma_i={self.gamma_i} gamma_f={self.gamma_f}"
            )

    @property
    def gamma(self) -> float:
        """Rate ratio gamma_f / gamma_i."""
        return self.gamma_f / self.gamma_i

    @property
    def mean_high_time(self) -> float:
        """Mean peak duration <t_f - t_i> = 1/gamma_f."""
        return 1.0 / self.gamma_f


@dataclass(frozen=True)
class LatentEvent:
    """Hidden tunnel event behind one trace.

    DOWN events carry no times.  UP events tunnel out at ``t_i`` and back in
    at ``t_f > t_i``; times past the window end are legal and render clipped.
    """

    label: int
    t_i: float | None = None
    t_f: float | None = None

    def __post_init__(self):
        if self.label not in (UP, DOWN):
            raise ValueError(f"label must be UP(1) or DOWN(0), got {self.label}")
        if self.label == DOWN:
            if self.t_i is not None or self.t_f is not None:
                raise ValueError("DOWN events carry no tunnel times")
        else:
            if self.t_i is None or self.t_f is None:
                raise ValueError("UP events need both t_i and t_f")
            if not (0 <= self.t_i < self.t_f):
                raise ValueError(f"need 0 <= t_i < t_f, got t_i={self.t_i} t_f={self.t_f}")


@dataclass(frozen=True)
class PerturbationSpec:
    """Systematic trace distortion: an additive level offset (both levels shift,
    total amplitude stays 2)."""

    offset: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.offset):
            raise ValueError(f"offset must be finite, got {self.offset}")


@dataclass(frozen=True)
class Trace:
    """A single sampled trace bound to its grid."""

    samples: np.ndarray
    grid: TraceGrid

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.shape[0] != self.grid.n:
            raise ValueError(
                f"trace length {samples.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("trace contains non-finite samples")
        object.__setattr__(self, "samples", samples)
