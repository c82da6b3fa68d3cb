"""Synthesis of labeled readout traces and recovery of tunnel rates.

An UP trace hides one tunnel cycle: the electron leaves the dot at
``t_i ~ Exp(gamma_i)`` and the dot refills after an additional
``Exp(gamma_f)`` waiting time, producing a current peak at +1 on the -1
baseline over ``[t_i, t_f)``.  DOWN traces stay at the baseline.  Noise and
an optional level offset are added after rendering.

Randomness contract: every trace draws from its own counter-based stream
keyed by (seed, trace index), so generation is bit-reproducible regardless
of chunking or thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .dataset import LabeledDataset
from .errors import FitDivergedError
from .noise import (
    ColoredNoise,
    GaussianNoise,
    NoiseSpec,
    SnrRange,
    colored_noise_amplitudes,
    colored_noise_variance,
    gaussian_sigma_for_r,
    _colored_from_phases,
)
from .traces import (
    DOWN,
    HIGH_LEVEL,
    LOW_LEVEL,
    UP,
    LatentEvent,
    PerturbationSpec,
    Provenance,
    TraceGrid,
    TunnelParams,
)

_MASK64 = (1 << 64) - 1


def trace_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-trace stream: Philox keyed by (seed, trace index)."""
    key = ((int(seed) & _MASK64) << 64) | (int(index) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_tunnel_times(params: TunnelParams, u1: float, u2: float) -> LatentEvent:
    """Inverse-CDF exponential sampling of one UP event from uniforms in (0, 1):
    t_i = -ln(u1)/gamma_i, t_f = t_i - ln(u2)/gamma_f."""
    if not (0.0 < u1 < 1.0 and 0.0 < u2 < 1.0):
        raise ValueError(f"u1, u2 must lie in (0, 1), got {u1}, {u2}")
    t_i = -math.log(u1) / params.gamma_i
    t_f = t_i - math.log(u2) / params.gamma_f
    return LatentEvent(UP, t_i=t_i, t_f=t_f)


def _grid_index(t: float, dt: float, n: int) -> int:
    # Smallest k with k*dt >= t; the tiny relative nudge keeps exact grid
    # hits (t == k*dt) from rounding up a bin in floating point.
    if t <= 0:
        return 0
    k = math.ceil(t / dt - 1e-9)
    return min(max(k, 0), n)


def render_ideal_trace(event: LatentEvent, grid: TraceGrid) -> np.ndarray:
    """Noiseless trace: sample k is +1 iff k*dt lies in [t_i, t_f)."""
    out = np.full(grid.n, LOW_LEVEL)
    if event.label == UP:
        k0 = _grid_index(event.t_i, grid.dt, grid.n)
        k1 = _grid_index(event.t_f, grid.dt, grid.n)
        out[k0:k1] = HIGH_LEVEL
    return out


def peak_occupancy(t: np.ndarray, params: TunnelParams) -> np.ndarray:
    """Probability that the dot is empty (trace is high) at time t for an UP
    event: the exponential tunnel-out convolved with the exponential refill.

    Equals gi/(gi-gf) * (exp(-gf t) - exp(-gi t)), continued analytically to
    t * gi * exp(-gi t) at gi == gf.
    """
    t = np.asarray(t, dtype=np.float64)
    gi, gf = params.gamma_i, params.gamma_f
    if abs(gi - gf) < 1e-12 * max(gi, gf):
        return gi * t * np.exp(-gi * t)
    return gi / (gi - gf) * (np.exp(-gf * t) - np.exp(-gi * t))


def mean_trace_model(
    t: np.ndarray, amp: float, offset: float, gamma_i: float, gamma_f: float
) -> np.ndarray:
    """Two-exponential peak family fitted to mean UP traces:
    amp * (exp(-gamma_f t) - exp(-gamma_i t)) + offset."""
    t = np.asarray(t, dtype=np.float64)
    return amp * (np.exp(-gamma_f * t) - np.exp(-gamma_i * t)) + offset


def two_exp_peak_time(slow: float, fast: float) -> float:
    """Analytic argmax of exp(-slow*t) - exp(-fast*t)."""
    if not 0 < slow < fast:
        raise ValueError("need 0 < slow < fast")
    return math.log(fast / slow) / (fast - slow)


# --------------------------------------------------------------------------
# Dataset synthesis


def synthesize_dataset(
    count: int,
    up_fraction: float,
    params: TunnelParams,
    noise: NoiseSpec,
    grid: TraceGrid,
    seed: int,
    perturb: PerturbationSpec | None = None,
    threads: int = 1,
) -> LabeledDataset:
    """Balanced-by-construction dataset: the first round(count*up_fraction)
    traces are UP, the rest DOWN, labels taken from the generating events."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not 0.0 <= up_fraction <= 1.0:
        raise ValueError(f"up_fraction must lie in [0, 1], got {up_fraction}")
    n_up = int(round(count * up_fraction))
    labels = (np.arange(count) < n_up).astype(np.uint8)
    samples = _synthesize_traces(labels, None, params, noise, grid, seed, perturb, threads)
    meta = _generation_meta(params, noise, grid, seed, perturb)
    meta["up_fraction"] = up_fraction
    return LabeledDataset(samples, labels, grid, Provenance.TRUE_LABELS, meta)


def synthesize_bernoulli_dataset(
    count: int,
    p_up: float,
    params: TunnelParams,
    noise: NoiseSpec,
    grid: TraceGrid,
    seed: int,
    perturb: PerturbationSpec | None = None,
    threads: int = 1,
) -> LabeledDataset:
    """Dataset whose per-trace state is Bernoulli(p_up), as in a Rabi scan."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not 0.0 <= p_up <= 1.0:
        raise ValueError(f"p_up must lie in [0, 1], got {p_up}")
    labels = np.zeros(count, dtype=np.uint8)
    samples = _synthesize_traces(labels, p_up, params, noise, grid, seed, perturb, threads)
    meta = _generation_meta(params, noise, grid, seed, perturb)
    meta["p_up"] = p_up
    return LabeledDataset(samples, labels, grid, Provenance.TRUE_LABELS, meta)


def _generation_meta(params, noise, grid, seed, perturb) -> dict:
    noise_meta = noise.describe()
    if isinstance(noise, ColoredNoise):
        # matched-filter hook: the best Gaussian stand-in for this spectrum
        noise_meta["sigma_equiv"] = math.sqrt(colored_noise_variance(noise.psd, grid))
    return {
        "gamma_i": params.gamma_i,
        "gamma_f": params.gamma_f,
        "noise": noise_meta,
        "dt": grid.dt,
        "n": grid.n,
        "seed": int(seed),
        "offset": perturb.offset if perturb is not None else 0.0,
    }


def _synthesize_traces(
    labels: np.ndarray,
    p_up: float | None,
    params: TunnelParams,
    noise: NoiseSpec,
    grid: TraceGrid,
    seed: int,
    perturb: PerturbationSpec | None,
    threads: int,
) -> np.ndarray:
    count, n, dt = labels.shape[0], grid.n, grid.dt
    offset = perturb.offset if perturb is not None else 0.0
    tau = params.mean_high_time
    amps = colored_noise_amplitudes(noise.psd, grid) if isinstance(noise, ColoredNoise) else None
    n_bins = n // 2 + 1
    samples = np.empty((count, n), dtype=np.float32)

    def fill(lo: int, hi: int) -> None:
        buf = np.empty(n, dtype=np.float64)
        for i in range(lo, hi):
            rng = trace_rng(seed, i)
            if isinstance(noise, SnrRange):
                r_i = rng.uniform(noise.lo, noise.hi)
                sigma = gaussian_sigma_for_r(r_i, tau, dt)
            elif isinstance(noise, GaussianNoise):
                sigma = noise.sigma
            else:
                sigma = None
            if p_up is not None:
                labels[i] = UP if rng.random() < p_up else DOWN
            buf[:] = LOW_LEVEL
            if labels[i] == UP:
                u1 = 1.0 - rng.random()
                u2 = 1.0 - rng.random()
                t_i = -math.log(u1) / params.gamma_i
                t_f = t_i - math.log(u2) / params.gamma_f
                buf[_grid_index(t_i, dt, n) : _grid_index(t_f, dt, n)] = HIGH_LEVEL
            if sigma is not None:
                buf += rng.standard_normal(n) * sigma
            else:
                phases = rng.uniform(0.0, 2.0 * np.pi, n_bins)
                buf += _colored_from_phases(amps, phases, n)
            if offset != 0.0:
                buf += offset
            samples[i] = buf

    if threads <= 1 or count < 2 * threads:
        fill(0, count)
    else:
        step = -(-count // threads)
        bounds = [(lo, min(lo + step, count)) for lo in range(0, count, step)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(lambda b: fill(*b), bounds))
    return samples


# --------------------------------------------------------------------------
# Mean-trace fit


@dataclass(frozen=True)
class MeanTraceFit:
    """Tunnel rates recovered from the sample-wise mean of UP traces."""

    gamma_i: float
    gamma_f: float
    gamma_i_err: float
    gamma_f_err: float
    amp: float
    offset: float
    residual_rms: float

    @property
    def gamma(self) -> float:
        return self.gamma_f / self.gamma_i


def fit_mean_trace(up_samples: np.ndarray, grid: TraceGrid) -> MeanTraceFit:
    """Least-squares fit of the two-exponential peak family to the mean trace.

    The fitted family is the mean readout peak amp*(exp(-gamma_f t) -
    exp(-gamma_i t)) + offset; the faster rate is reported as the tunnel-out
    rate gamma_i, the slower as the refill rate gamma_f (the standard regime
    where the peak rises quickly and decays slowly; for gamma_f > gamma_i the
    two labels are not identifiable from the trace shape alone and swap).
    """
    up_samples = np.asarray(up_samples, dtype=np.float64)
    if up_samples.ndim != 2 or up_samples.shape[0] < 1:
        raise ValueError("need a non-empty (count, n) array of UP traces")
    if up_samples.shape[1] != grid.n:
        raise ValueError(f"trace length {up_samples.shape[1]} != grid n {grid.n}")
    t = grid.times()
    y = up_samples.mean(axis=0)

    # Coarse (slow, fast) grid with linear amp/offset solves, then LM refine.
    rates = np.geomspace(0.2 / grid.t_total, 0.5 / grid.dt, 25)
    best = None
    for i_slow in range(rates.size - 1):
        for i_fast in range(i_slow + 1, rates.size):
            basis = np.exp(-rates[i_slow] * t) - np.exp(-rates[i_fast] * t)
            a = np.column_stack([basis, np.ones_like(t)])
            coef, res, _, _ = np.linalg.lstsq(a, y, rcond=None)
            cost = res[0] if res.size else float(np.sum((a @ coef - y) ** 2))
            if best is None or cost < best[0]:
                best = (cost, coef[0], coef[1], rates[i_slow], rates[i_fast])
    _, a0, b0, slow0, fast0 = best

    def residuals(x):
        amp, off, gf, gi = x
        return mean_trace_model(t, amp, off, gi, gf) - y

    try:
        sol = least_squares(residuals, x0=[a0, b0, slow0, fast0], method="lm", max_nfev=2000)
    except Exception as exc:
        raise FitDivergedError(f"mean-trace fit failed: {exc}") from exc
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitDivergedError(f"mean-trace fit did not converge: {sol.message}")
    amp, off, gf, gi = sol.x
    errs = _stderr_from_jacobian(sol.jac, sol.fun)
    gf_err, gi_err = errs[2], errs[3]
    if abs(gi) < abs(gf):
        gi, gf = gf, gi
        gi_err, gf_err = gf_err, gi_err
        amp = -amp
    return MeanTraceFit(
        gamma_i=float(gi),
        gamma_f=float(gf),
        gamma_i_err=float(gi_err),
        gamma_f_err=float(gf_err),
        amp=float(amp),
        offset=float(off),
        residual_rms=float(np.sqrt(np.mean(sol.fun**2))),
    )


def _stderr_from_jacobian(jac: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    """Parameter standard errors from the least-squares Jacobian."""
    m, p = jac.shape
    dof = max(m - p, 1)
    s2 = float(residuals @ residuals) / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
        var = np.clip(np.diag(cov), 0.0, None)
    except np.linalg.LinAlgError:
        var = np.full(p, np.nan)
    return np.sqrt(var)
