"""Bayesian inference filter for single-shot readout traces.

The trace is modeled as a three-stage hidden chain: low before tunnel-out
(PRE), high while the dot is empty (HIGH), low again after refill (POST,
absorbing), with Gaussian emissions around the stage level.  Per-step
transition probabilities are p_i = 1-exp(-gamma_i dt) and
p_f = 1-exp(-gamma_f dt); one transition precedes every emission, so a
one-sample trace already mixes (1-p_i) * N(low) + p_i * N(high) under the
UP hypothesis.

``hmm_forward`` runs the scaled forward recursion (log-domain accumulation,
stable for arbitrary trace lengths and log-likelihood ratios).
``exact_marginal_loglik`` brute-forces the same model by enumerating every
grid-aligned (peak start, peak length) cell, including the
tunnel-out-beyond-window cell, and exists purely to validate the recursion.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dataset import LabeledDataset
from .errors import GridMismatchError, LengthMismatchError, TraceTooLongError
from .noise import gaussian_sigma_for_r
from .traces import HIGH_LEVEL, LOW_LEVEL, TraceGrid, TunnelParams

_LOG2PI = math.log(2.0 * math.pi)
_EXACT_MAX_N = 2000
_CHUNK = 4096

VERDICT_HEADER = ("index", "label", "llr", "loglik_up", "loglik_down")


@dataclass(frozen=True)
class BayesModel:
    """Generative parameters assumed by the filter."""

    params: TunnelParams
    grid: TraceGrid
    sigma: float
    low_level: float = LOW_LEVEL
    high_level: float = HIGH_LEVEL
    prior_up: float = 0.5

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if not 0.0 < self.prior_up < 1.0:
            raise ValueError(f"prior_up must lie in (0, 1), got {self.prior_up}")
        if not self.low_level < self.high_level:
            raise ValueError("low_level must be below high_level")

    @classmethod
    def for_snr(
        cls, r: float, params: TunnelParams, grid: TraceGrid, **kwargs
    ) -> "BayesModel":
        """Model whose sigma corresponds to integrated SNR ``r`` under its own
        mean high time 1/gamma_f."""
        sigma = gaussian_sigma_for_r(r, params.mean_high_time, grid.dt)
        return cls(params=params, grid=grid, sigma=sigma, **kwargs)

    @property
    def log_prior_odds(self) -> float:
        return math.log(self.prior_up / (1.0 - self.prior_up))


@dataclass(frozen=True)
class Verdict:
    """Classification of one trace with its evidence."""

    label: int
    llr: float
    loglik_up: float
    loglik_down: float


def _as_batch(trace: np.ndarray, model: BayesModel) -> np.ndarray:
    x = np.asarray(trace, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.grid.n:
        raise GridMismatchError(
            f"trace length {x.shape[-1]} does not match model grid n={model.grid.n}"
        )
    return x


def hmm_forward(trace: np.ndarray, model: BayesModel) -> tuple[float, float]:
    """(loglik_up, loglik_down) for one trace via the forward recursion."""
    lu, ld = hmm_forward_batch(_as_batch(trace, model), model)
    return float(lu[0]), float(ld[0])


def hmm_forward_batch(
    traces: np.ndarray, model: BayesModel
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized forward pass over a (count, n) batch."""
    x = _as_batch(traces, model)
    count, n = x.shape
    dt = model.grid.dt
    p_i = -math.expm1(-model.params.gamma_i * dt)
    p_f = -math.expm1(-model.params.gamma_f * dt)
    q_i, q_f = 1.0 - p_i, 1.0 - p_f
    norm = -0.5 * _LOG2PI - math.log(model.sigma)
    inv2s2 = 0.5 / (model.sigma * model.sigma)

    xt = np.ascontiguousarray(x.T)  # (n, count): contiguous per-step rows
    loglik_down = np.zeros(count)
    loglik_up = np.zeros(count)
    pre = np.ones(count)
    high = np.zeros(count)
    post = np.zeros(count)
    for k in range(n):
        xk = xt[k]
        ll_low = norm - (xk - model.low_level) ** 2 * inv2s2
        ll_high = norm - (xk - model.high_level) ** 2 * inv2s2
        loglik_down += ll_low
        m = np.maximum(ll_low, ll_high)
        e_low = np.exp(ll_low - m)
        e_high = np.exp(ll_high - m)
        pre, high, post = pre * q_i, (pre * p_i + high * q_f), (high * p_f + post)
        pre *= e_low
        high *= e_high
        post *= e_low
        s = pre + high + post
        loglik_up += np.log(s) + m
        pre /= s
        high /= s
        post /= s
    return loglik_up, loglik_down


def exact_marginal_loglik(trace: np.ndarray, model: BayesModel) -> tuple[float, float]:
    """Brute-force marginalization over all grid-aligned peak placements.

    O(n^2) enumeration of (first high sample h, high-sample count m) cells
    with exponential masses, plus the all-low cell for tunnel-out beyond the
    window and the high-through-end cells.  Agrees with ``hmm_forward`` up to
    floating-point roundoff by construction.
    """
    x = _as_batch(trace, model)[0]
    n = x.size
    if n > _EXACT_MAX_N:
        raise TraceTooLongError(f"n={n} exceeds exact-marginal limit {_EXACT_MAX_N}")
    dt = model.grid.dt
    p_i = -math.expm1(-model.params.gamma_i * dt)
    p_f = -math.expm1(-model.params.gamma_f * dt)
    lq_i, lp_i = math.log1p(-p_i), math.log(p_i)
    lq_f, lp_f = math.log1p(-p_f), math.log(p_f)

    norm = -0.5 * _LOG2PI - math.log(model.sigma)
    ll_low = norm - (x - model.low_level) ** 2 * (0.5 / model.sigma**2)
    ll_high = norm - (x - model.high_level) ** 2 * (0.5 / model.sigma**2)
    cum_low = np.concatenate([[0.0], np.cumsum(ll_low)])   # sum over [0, k)
    cum_high = np.concatenate([[0.0], np.cumsum(ll_high)])
    total_low = cum_low[n]

    terms = [n * lq_i + total_low]  # tunnel-out beyond the window
    for h in range(n):
        start = h * lq_i + lp_i + cum_low[h]
        # high from h through the window end
        terms.append(start + (n - 1 - h) * lq_f + (cum_high[n] - cum_high[h]))
        # high for m samples, then low again (refill inside the window)
        m = np.arange(1, n - h)
        if m.size:
            terms.append(
                start
                + (m - 1) * lq_f
                + lp_f
                + (cum_high[h + m] - cum_high[h])
                + (total_low - cum_low[h + m])
            )
    loglik_up = float(logsumexp(np.concatenate([np.atleast_1d(t) for t in terms])))
    return loglik_up, float(total_low)


def classify_bayes(trace: np.ndarray, model: BayesModel) -> Verdict:
    """Threshold the posterior log-odds; ties go to UP (measure zero)."""
    lu, ld = hmm_forward(trace, model)
    llr = lu - ld
    label = 1 if llr + model.log_prior_odds >= 0.0 else 0
    return Verdict(label=label, llr=llr, loglik_up=lu, loglik_down=ld)


def batch_classify(
    dataset: LabeledDataset | np.ndarray,
    model: BayesModel,
    threads: int = 1,
    return_verdicts: bool = False,
):
    """Classify every trace; deterministic output order regardless of threads.

    Returns a (count,) uint8 label array, or (labels, llr, loglik_up,
    loglik_down) arrays when ``return_verdicts`` is set.
    """
    if isinstance(dataset, LabeledDataset):
        if dataset.grid != model.grid:
            raise GridMismatchError(
                f"dataset grid {dataset.grid} != model grid {model.grid}"
            )
        samples = dataset.samples
    else:
        samples = np.asarray(dataset)
    count = samples.shape[0]
    loglik_up = np.empty(count)
    loglik_down = np.empty(count)

    bounds = [(lo, min(lo + _CHUNK, count)) for lo in range(0, count, _CHUNK)]

    def run(b):
        lo, hi = b
        lu, ld = hmm_forward_batch(samples[lo:hi], model)
        loglik_up[lo:hi] = lu
        loglik_down[lo:hi] = ld

    if threads <= 1 or len(bounds) == 1:
        for b in bounds:
            run(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(run, bounds))

    llr = loglik_up - loglik_down
    labels = (llr + model.log_prior_odds >= 0.0).astype(np.uint8)
    if return_verdicts:
        return labels, llr, loglik_up, loglik_down
    return labels


def error_rate(
    predicted: np.ndarray, truth: np.ndarray
) -> tuple[float, float, float]:
    """(eps_up, eps_down, mean_error): eps_down is the fraction of DOWN traces
    labeled UP, eps_up the fraction of UP traces labeled DOWN, and the curves
    use their unweighted mean."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise LengthMismatchError(
            f"{predicted.shape[0]} predictions vs {truth.shape[0]} truth labels"
        )
    up = truth == 1
    down = ~up
    eps_up = float((predicted[up] == 0).mean()) if up.any() else 0.0
    eps_down = float((predicted[down] == 1).mean()) if down.any() else 0.0
    return eps_up, eps_down, 0.5 * (eps_up + eps_down)


def write_verdicts_csv(path, labels, llr, loglik_up, loglik_down) -> None:
    """Export per-trace verdicts as ``index,label,llr,loglik_up,loglik_down``."""
    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VERDICT_HEADER)
        for i in range(len(labels)):
            w.writerow(
                [i, int(labels[i]), f"{llr[i]:.10g}",
                 f"{loglik_up[i]:.10g}", f"{loglik_down[i]:.10g}"]
            )
