"""Benchmark harness: error sweeps, Rabi-visibility comparison, timing.

Every sweep point synthesizes a fresh balanced test set from a seed derived
deterministically from (global seed, point coordinates), so the nominal
point (offset 0, gamma 1, same r) is bit-identical across the three sweep
kinds and across thread counts.  All rates come with Wilson confidence
intervals, which is what every acceptance comparison uses.
"""

from __future__ import annotations

import csv
import hashlib
import math
import platform
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .bayes import BayesModel, batch_classify, error_rate
from .dataset import LabeledDataset
from .errors import (
    AmbiguousFrequencyError,
    FitDivergedError,
    GridMismatchError,
    ProbabilityRangeError,
)
from .net.model import NetModel
from .noise import (
    ColoredNoise,
    GaussianNoise,
    NoiseSpec,
    SnrRange,
    colored_noise_variance,
    gaussian_sigma_for_r,
)
from .synth import synthesize_bernoulli_dataset, synthesize_dataset
from .traces import PerturbationSpec, TraceGrid, TunnelParams

SWEEP_HEADER = ("axis", "method", "eps_up", "eps_down", "mean_error", "ci_low", "ci_high")
RABI_HEADER = ("t", "method", "p_up", "dp_vs_baseline")


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from heterogeneous point coordinates."""
    canon = "|".join(
        f"{p:.12g}" if isinstance(p, float) else str(p) for p in parts
    )
    digest = hashlib.blake2b(canon.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 95%)."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def rescale_trace(raw: np.ndarray, peak_height: float) -> np.ndarray:
    """Median-based preprocessing of raw current traces.

    The lower level is estimated by the per-trace median and mapped to -1;
    the known peak height maps the high level to +1.  When more than half of
    a trace sits on the high level the median estimates the wrong baseline
    and the output shifts accordingly; this failure mode is intentional and
    part of the robustness benchmark.
    """
    if peak_height <= 0:
        raise ValueError(f"peak_height must be positive, got {peak_height}")
    raw = np.asarray(raw, dtype=np.float64)
    med = np.median(raw, axis=-1, keepdims=True)
    return 2.0 * (raw - med) / peak_height - 1.0


# --------------------------------------------------------------------------
# Classification methods


class Method:
    """A named classifier evaluated on labeled datasets."""

    name: str

    def predict(self, dataset: LabeledDataset) -> np.ndarray:
        raise NotImplementedError


class BayesMethod(Method):
    """Filter with a frozen model (e.g. sigma fixed to an assumed SNR)."""

    def __init__(self, model: BayesModel, name: str = "bayes", threads: int = 1):
        self.model = model
        self.name = name
        self.threads = threads

    def predict(self, dataset):
        if dataset.grid != self.model.grid:
            raise GridMismatchError("dataset grid differs from the filter's grid")
        return batch_classify(dataset, self.model, threads=self.threads)


class MatchedBayesMethod(Method):
    """Filter rebuilt per dataset from its generation metadata: rates, levels
    and noise scale all match the generator (the optimality reference).

    Colored-noise datasets get the variance-matched Gaussian approximation;
    per-trace SNR ranges have no single matched sigma and are rejected.
    """

    def __init__(self, name: str = "bayes-matched", prior_up: float = 0.5,
                 threads: int = 1):
        self.name = name
        self.prior_up = prior_up
        self.threads = threads

    def model_for(self, dataset: LabeledDataset) -> BayesModel:
        meta = dataset.meta
        try:
            params = TunnelParams(meta["gamma_i"], meta["gamma_f"])
            noise = meta["noise"]
            kind = noise["kind"]
        except KeyError as exc:
            raise ValueError(f"dataset metadata lacks generation info: {exc}") from None
        if kind == "gaussian":
            sigma = noise["sigma"]
        elif kind == "colored":
            sigma = noise["sigma_equiv"]
        else:
            raise ValueError(f"matched filter undefined for noise kind {kind!r}")
        return BayesModel(
            params=params, grid=dataset.grid, sigma=sigma, prior_up=self.prior_up
        )

    def predict(self, dataset):
        return batch_classify(dataset, self.model_for(dataset), threads=self.threads)


class NetMethod(Method):
    def __init__(self, model: NetModel, name: str = "net"):
        self.model = model
        self.name = name

    def predict(self, dataset):
        if dataset.grid.n != self.model.config.input_len:
            raise GridMismatchError(
                f"net expects length {self.model.config.input_len}, "
                f"dataset has {dataset.grid.n}"
            )
        return self.model.classify(dataset.samples)


class TruthMethod(Method):
    """Perfect classifier: returns the generating labels (upper bound)."""

    def __init__(self, name: str = "truth"):
        self.name = name

    def predict(self, dataset):
        return dataset.labels.copy()


class ErrorChannelMethod(Method):
    """Truth labels passed through an asymmetric binary error channel:
    UP flips DOWN with probability eps_up, DOWN flips UP with eps_down.

    Draws advance an internal stream, so successive datasets (e.g. Rabi time
    points) get independent flips; rebuild the method to replay a run.
    """

    def __init__(self, eps_up: float, eps_down: float, seed: int, name: str = "channel"):
        if not (0 <= eps_up <= 1 and 0 <= eps_down <= 1):
            raise ValueError("error rates must lie in [0, 1]")
        self.eps_up = eps_up
        self.eps_down = eps_down
        self.name = name
        self._rng = np.random.default_rng(seed)

    def predict(self, dataset):
        u = self._rng.random(dataset.count)
        labels = dataset.labels.copy()
        up = labels == 1
        labels[up & (u < self.eps_up)] = 0
        labels[~up & (u < self.eps_down)] = 1
        return labels


# --------------------------------------------------------------------------
# Error sweeps


@dataclass(frozen=True)
class SweepRow:
    axis: float
    method: str
    eps_up: float
    eps_down: float
    mean_error: float
    ci_low: float
    ci_high: float
    n_up: int
    n_down: int


@dataclass
class SweepResult:
    axis_name: str
    rows: list[SweepRow]
    config: dict = field(default_factory=dict)

    def get(self, method: str, axis: float) -> SweepRow:
        for row in self.rows:
            if row.method == method and math.isclose(row.axis, axis):
                return row
        raise KeyError(f"no row for method={method!r} axis={axis}")

    def methods(self) -> list[str]:
        seen = dict.fromkeys(r.method for r in self.rows)
        return list(seen)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_HEADER)
            for r in self.rows:
                w.writerow(
                    [f"{r.axis:.10g}", r.method, f"{r.eps_up:.10g}",
                     f"{r.eps_down:.10g}", f"{r.mean_error:.10g}",
                     f"{r.ci_low:.10g}", f"{r.ci_high:.10g}"]
                )


def _evaluate_point(
    methods, dataset: LabeledDataset, axis_value: float, rows: list[SweepRow]
) -> None:
    truth = dataset.labels
    n_up = int((truth == 1).sum())
    n_down = int((truth == 0).sum())
    for method in methods:
        pred = method.predict(dataset)
        eps_up, eps_down, mean = error_rate(pred, truth)
        if n_up == n_down:
            wrong = int((pred != truth).sum())
            lo, hi = wilson_interval(wrong, dataset.count)
        else:
            lo_u, hi_u = wilson_interval(int(round(eps_up * n_up)), n_up)
            lo_d, hi_d = wilson_interval(int(round(eps_down * n_down)), n_down)
            half = 0.5 * math.hypot((hi_u - lo_u) / 2, (hi_d - lo_d) / 2)
            lo, hi = max(0.0, mean - half), min(1.0, mean + half)
        rows.append(
            SweepRow(axis_value, method.name, eps_up, eps_down, mean, lo, hi,
                     n_up, n_down)
        )


def _point_dataset(
    r: float,
    params: TunnelParams,
    grid: TraceGrid,
    test_size: int,
    seed: int,
    threads: int,
) -> LabeledDataset:
    sigma = gaussian_sigma_for_r(r, params.mean_high_time, grid.dt)
    point_seed = derive_seed(
        seed, "sweep", float(r), params.gamma_i, params.gamma_f, 0.0, test_size
    )
    return synthesize_dataset(
        test_size, 0.5, params, GaussianNoise(sigma), grid, point_seed, threads=threads
    )


def sweep_error_vs_r(
    methods,
    r_values,
    test_size: int,
    params: TunnelParams,
    grid: TraceGrid,
    seed: int,
    threads: int = 1,
    progress=None,
) -> SweepResult:
    """Per-method error rates on fresh balanced Gaussian test sets at each r."""
    rows: list[SweepRow] = []
    for r in r_values:
        ds = _point_dataset(float(r), params, grid, test_size, seed, threads)
        _evaluate_point(methods, ds, float(r), rows)
        if progress:
            progress(f"r={r:g} done")
    config = {
        "sweep": "r", "r_values": [float(r) for r in r_values],
        "test_size": test_size, "gamma_i": params.gamma_i,
        "gamma_f": params.gamma_f, "seed": seed,
        "methods": [m.name for m in methods],
    }
    return SweepResult("r", rows, config)


def sweep_offset(
    methods,
    offsets,
    r: float,
    test_size: int,
    params: TunnelParams,
    grid: TraceGrid,
    seed: int,
    threads: int = 1,
    progress=None,
) -> SweepResult:
    """One base test set at the given r, shifted by each offset before
    classification.  Filters keep their fixed levels; networks see the
    shifted traces directly."""
    base = _point_dataset(float(r), params, grid, test_size, seed, threads)
    rows: list[SweepRow] = []
    for off in offsets:
        off = float(off)
        if not -2.0 < off < 2.0:
            raise ValueError(f"offset must lie in (-2, 2), got {off}")
        if off == 0.0:
            ds = base
        else:
            ds = LabeledDataset(
                base.samples + np.float32(off), base.labels, base.grid,
                base.provenance, {**base.meta, "offset": off},
            )
        _evaluate_point(methods, ds, off, rows)
        if progress:
            progress(f"offset={off:g} done")
    config = {
        "sweep": "offset", "offsets": [float(o) for o in offsets], "r": float(r),
        "test_size": test_size, "gamma_i": params.gamma_i,
        "gamma_f": params.gamma_f, "seed": seed,
        "methods": [m.name for m in methods],
    }
    return SweepResult("offset", rows, config)


def sweep_gamma(
    methods,
    gammas,
    r: float,
    test_size: int,
    params: TunnelParams,
    grid: TraceGrid,
    seed: int,
    threads: int = 1,
    progress=None,
) -> SweepResult:
    """Vary the rate ratio gamma = gamma_f/gamma_i with gamma_i fixed; the
    noise is recalibrated to the same integrated SNR r at each point (the
    mean high time changes with gamma_f)."""
    rows: list[SweepRow] = []
    for g in gammas:
        g = float(g)
        if g <= 0:
            raise ValueError(f"gamma must be positive, got {g}")
        point_params = TunnelParams(params.gamma_i, g * params.gamma_i)
        ds = _point_dataset(float(r), point_params, grid, test_size, seed, threads)
        _evaluate_point(methods, ds, g, rows)
        if progress:
            progress(f"gamma={g:g} done")
    config = {
        "sweep": "gamma", "gammas": [float(g) for g in gammas], "r": float(r),
        "test_size": test_size, "gamma_i": params.gamma_i, "seed": seed,
        "methods": [m.name for m in methods],
    }
    return SweepResult("gamma", rows, config)


# --------------------------------------------------------------------------
# Rabi benchmark


@dataclass(frozen=True)
class RabiParams:
    """Damped Rabi oscillation P(up)(t) = V/2 exp(-t/T_R) cos(2 pi nu t) + P0."""

    visibility: float
    frequency: float
    decay_time: float
    offset: float
    drive_times: tuple[float, ...]

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")
        if self.frequency <= 0 or self.decay_time <= 0:
            raise ValueError("frequency and decay_time must be positive")
        if len(self.drive_times) < 1:
            raise ValueError("need at least one drive time")
        p = self.p_up(np.asarray(self.drive_times))
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ProbabilityRangeError(
                f"P(up) leaves [0, 1] (range [{p.min():.3f}, {p.max():.3f}])"
            )

    def p_up(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return (
            0.5 * self.visibility * np.exp(-t / self.decay_time)
            * np.cos(2.0 * np.pi * self.frequency * t)
            + self.offset
        )

    @classmethod
    def default_scan(cls, visibility: float = 0.8, frequency: float = 0.4,
                     decay_time: float = 8.0, offset: float = 0.5,
                     t_max: float = 10.0, points: int = 50) -> "RabiParams":
        times = tuple(np.linspace(0.0, t_max, points))
        return cls(visibility, frequency, decay_time, offset, times)


@dataclass(frozen=True)
class ReadoutConfig:
    """How each Rabi data point's traces are synthesized and read out."""

    params: TunnelParams
    noise: NoiseSpec
    grid: TraceGrid
    perturb: PerturbationSpec | None = None


@dataclass
class RabiDataset:
    params: RabiParams
    datasets: list[LabeledDataset]

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.params.drive_times)


def gen_rabi_dataset(
    rp: RabiParams,
    traces_per_point: int,
    readout: ReadoutConfig,
    seed: int,
    threads: int = 1,
) -> RabiDataset:
    """Bernoulli(P(up)(t)) state per trace at each drive time, then a full
    synthetic readout trace per state."""
    datasets = []
    for j, t in enumerate(rp.drive_times):
        p = float(rp.p_up(np.asarray([t]))[0])
        ds = synthesize_bernoulli_dataset(
            traces_per_point, p, readout.params, readout.noise, readout.grid,
            derive_seed(seed, "rabi", j, float(t)), perturb=readout.perturb,
            threads=threads,
        )
        ds.meta["drive_time"] = float(t)
        datasets.append(ds)
    return RabiDataset(rp, datasets)


@dataclass(frozen=True)
class RabiFit:
    visibility: float
    frequency: float
    decay_time: float
    offset: float
    visibility_err: float
    frequency_err: float
    decay_time_err: float
    offset_err: float
    residual_rms: float

    def to_dict(self) -> dict:
        return {
            "visibility": self.visibility,
            "frequency": self.frequency,
            "decay_time": self.decay_time,
            "offset": self.offset,
            "visibility_err": self.visibility_err,
            "frequency_err": self.frequency_err,
            "decay_time_err": self.decay_time_err,
            "offset_err": self.offset_err,
            "residual_rms": self.residual_rms,
        }


def fit_rabi(times: np.ndarray, p_hat: np.ndarray) -> RabiFit:
    """Damped-cosine least squares with periodogram frequency seeding.

    The periodogram of the mean-subtracted data seeds the frequency (keeping
    the optimizer out of the zero-frequency basin); parameter standard errors
    come from the Jacobian at the solution.
    """
    times = np.asarray(times, dtype=np.float64)
    p_hat = np.asarray(p_hat, dtype=np.float64)
    if times.shape != p_hat.shape or times.ndim != 1:
        raise ValueError("times and p_hat must be matching 1-D arrays")
    npts = times.size
    if npts < 8:
        raise ValueError(f"need at least 8 points, got {npts}")
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise ValueError("times must be strictly increasing")
    if steps.max() - steps.min() > 1e-6 * steps.mean():
        raise ValueError("periodogram seeding requires a uniform time grid")

    y = p_hat - p_hat.mean()
    power = np.abs(np.fft.rfft(y)) ** 2
    if power.size < 3:
        raise AmbiguousFrequencyError("too few frequency bins")
    interior = power[1:]
    k_star = int(np.argmax(interior)) + 1
    if power[k_star] < 2.0 * np.median(interior):
        raise AmbiguousFrequencyError(
            "periodogram peak below twice the median power; no oscillation found"
        )
    freqs = np.fft.rfftfreq(npts, d=float(steps.mean()))
    nu0 = float(freqs[k_star])
    v0 = min(1.0, 4.0 * math.sqrt(float(power[k_star])) / npts)
    x0 = [v0, nu0, times[-1] - times[0], float(p_hat.mean())]

    def residuals(x):
        v, nu, t_r, p0 = x
        return (
            0.5 * v * np.exp(-times / t_r) * np.cos(2 * np.pi * nu * times) + p0 - p_hat
        )

    try:
        sol = least_squares(residuals, x0=x0, method="lm", max_nfev=5000)
    except Exception as exc:
        raise FitDivergedError(f"Rabi fit failed: {exc}") from exc
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitDivergedError(f"Rabi fit did not converge: {sol.message}")
    v, nu, t_r, p0 = sol.x
    if v < 0:  # cos phase ambiguity: fold the sign into the convention V >= 0
        v = -v
    errs = _fit_stderr(sol.jac, sol.fun)
    return RabiFit(
        visibility=float(v), frequency=float(abs(nu)), decay_time=float(t_r),
        offset=float(p0), visibility_err=float(errs[0]), frequency_err=float(errs[1]),
        decay_time_err=float(errs[2]), offset_err=float(errs[3]),
        residual_rms=float(np.sqrt(np.mean(sol.fun**2))),
    )


def _fit_stderr(jac: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    m, p = jac.shape
    dof = max(m - p, 1)
    s2 = float(residuals @ residuals) / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        return np.full(p, np.nan)


def attenuated_visibility(v_true: float, eps_up: float, eps_down: float) -> float:
    """Visibility after an asymmetric error channel:
    P_meas = P (1 - eps_up) + (1 - P) eps_down scales the amplitude by
    (1 - eps_up - eps_down)."""
    return v_true * (1.0 - eps_up - eps_down)


def apply_error_channel_expectation(
    p: np.ndarray, eps_up: float, eps_down: float
) -> np.ndarray:
    """Exact expectation of the measured P(up) under the error channel."""
    p = np.asarray(p, dtype=np.float64)
    return p * (1.0 - eps_up) + (1.0 - p) * eps_down


@dataclass
class RabiComparison:
    times: np.ndarray
    p_hat: dict[str, np.ndarray]
    fits: dict[str, RabiFit]
    baseline: str | None
    config: dict = field(default_factory=dict)

    def delta_p(self, method: str) -> np.ndarray:
        if self.baseline is None:
            raise ValueError("no baseline method present")
        return self.p_hat[method] - self.p_hat[self.baseline]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RABI_HEADER)
            for name, curve in self.p_hat.items():
                base = self.p_hat[self.baseline] if self.baseline else np.full_like(curve, np.nan)
                for t, p, b in zip(self.times, curve, base):
                    dp = p - b
                    w.writerow([f"{t:.10g}", name, f"{p:.10g}",
                                "" if np.isnan(dp) else f"{dp:.10g}"])

    def fits_dict(self) -> dict:
        return {name: fit.to_dict() for name, fit in self.fits.items()}


def compare_rabi(
    methods,
    rabi: RabiDataset,
    baseline: str | None = None,
    median_rescale: bool = False,
    peak_height: float = 2.0,
) -> RabiComparison:
    """Classify the same Rabi datasets with every method, fit each visibility,
    and report difference curves against the Bayes baseline.

    ``median_rescale`` reproduces the raw-data preprocessing: each trace is
    re-leveled using its median before classification (with its documented
    failure on mostly-high traces).
    """
    names = [m.name for m in methods]
    if baseline is None:
        baseline = next((n for n in names if "bayes" in n), None)
    elif baseline not in names:
        raise ValueError(f"baseline {baseline!r} not among methods {names}")
    datasets = rabi.datasets
    if median_rescale:
        datasets = [
            LabeledDataset(
                rescale_trace(ds.samples, peak_height).astype(np.float32),
                ds.labels, ds.grid, ds.provenance,
                {**ds.meta, "median_rescaled": True},
            )
            for ds in datasets
        ]
    p_hat = {}
    fits = {}
    times = rabi.times
    for method in methods:
        curve = np.array([float(method.predict(ds).mean()) for ds in datasets])
        p_hat[method.name] = curve
        fits[method.name] = fit_rabi(times, curve)
    config = {
        "methods": names, "baseline": baseline,
        "traces_per_point": datasets[0].count, "points": len(datasets),
        "median_rescale": median_rescale,
        "rabi": {
            "visibility": rabi.params.visibility,
            "frequency": rabi.params.frequency,
            "decay_time": rabi.params.decay_time,
            "offset": rabi.params.offset,
        },
    }
    return RabiComparison(times, p_hat, fits, baseline, config)


# --------------------------------------------------------------------------
# Timing


@dataclass(frozen=True)
class LatencyStats:
    method: str
    reps: int
    batch: int
    median_us: float
    p95_us: float
    mean_us: float

    def to_dict(self) -> dict:
        return {
            "method": self.method, "reps": self.reps, "batch": self.batch,
            "median_us": self.median_us, "p95_us": self.p95_us,
            "mean_us": self.mean_us,
        }

    @property
    def empty(self) -> bool:
        return self.reps == 0


def time_classifiers(
    methods, dataset: LabeledDataset, repetitions: int, warmup: int = 2
) -> dict[str, LatencyStats]:
    """Wall-clock per-trace latency over whole-batch classification runs.

    Warm-up runs are excluded.  With repetitions=0 the stats come back empty
    (reps=0declared, NaN latencies) rather than raising.  Absolute numbers
    are machine-specific and reported for context only.
    """
    out = {}
    for method in methods:
        for _ in range(warmup):
            method.predict(dataset)
        per_trace_us = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            method.predict(dataset)
            per_trace_us.append((time.perf_counter() - t0) / dataset.count * 1e6)
        if per_trace_us:
            arr = np.asarray(per_trace_us)
            stats = LatencyStats(
                method.name, repetitions, dataset.count,
                float(np.median(arr)), float(np.percentile(arr, 95)),
                float(arr.mean()),
            )
        else:
            stats = LatencyStats(method.name, 0, dataset.count,
                                 float("nan"), float("nan"), float("nan"))
        out[method.name] = stats
    return out


def environment_info() -> dict:
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "processor": platform.processor() or platform.machine(),
    }
