"""Noise models: white Gaussian noise calibrated to a target SNR, and
colored noise synthesized from a one-sided power spectral density.

The SNR convention is the power signal-to-noise ratio integrated over the
mean high-signal time tau = <t_f - t_i>, normalized to be dimensionless:

    1/r = (1/tau^2) * int_0^tau int_0^tau <dPsi(t) dPsi(t')> dt dt'

For white noise with per-sample standard deviation sigma on a grid with
sample interval dt this reduces to r = tau / (sigma^2 * dt).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NonMonotoneFrequencyError,
    ParseError,
    PsdRangeError,
    WindowTooShortError,
)
from .traces import TraceGrid

PSD_HEADER = ("freq_hz", "psd")


@dataclass(frozen=True)
class PsdTable:
    """One-sided power spectral density tabulated at strictly increasing
    frequencies.  Densities are in signal-units^2 per Hz."""

    freq: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        freq = np.asarray(self.freq, dtype=np.float64)
        density = np.asarray(self.density, dtype=np.float64)
        if freq.ndim != 1 or freq.shape != density.shape or freq.size < 1:
            raise ValueError("freq and density must be equal-length 1-D arrays")
        if freq[0] < 0 or np.any(np.diff(freq) <= 0):
            raise NonMonotoneFrequencyError(
                "frequencies must be strictly increasing and non-negative"
            )
        if not np.all(np.isfinite(density)) or np.any(density < 0):
            raise ValueError("densities must be finite and >= 0")
        if not np.all(np.isfinite(freq)):
            raise ValueError("frequencies must be finite")
        object.__setattr__(self, "freq", freq)
        object.__setattr__(self, "density", density)

    def interpolate(self, f: np.ndarray) -> np.ndarray:
        """Linear interpolation onto frequencies ``f`` (must lie inside the table)."""
        f = np.asarray(f, dtype=np.float64)
        lo, hi = self.freq[0], self.freq[-1]
        eps = 1e-9
        if f.size and (f.min() < lo * (1 - eps) - eps or f.max() > hi * (1 + eps)):
            raise PsdRangeError(
                f"PSD covers [{lo:g}, {hi:g}] Hz but [{f.min():g}, {f.max():g}] Hz requested"
            )
        return np.interp(f, self.freq, self.density)

    def total_power(self, f_max: float) -> float:
        """Integral of the PSD from its lowest tabulated frequency up to ``f_max``
        (trapezoid on the union of table points and ``f_max``)."""
        f = self.freq[self.freq <= f_max]
        if f.size == 0 or f_max > self.freq[-1]:
            raise PsdRangeError(f"f_max={f_max:g} outside tabulated range")
        s = self.interpolate(f)
        if f[-1] < f_max:
            f = np.append(f, f_max)
            s = np.append(s, self.interpolate(f_max))
        return float(np.trapezoid(s, f))


def model_psd(
    white: float = 0.0,
    pink: float = 0.0,
    lorentz_amp: float = 0.0,
    lorentz_fc: float = 1.0,
    f_min: float = 1e-3,
    f_max: float = 1e2,
    points: int = 257,
) -> PsdTable:
    """Stand-in setup spectrum: S(f) = white + pink/f + lorentz_amp/(1+(f/f_c)^2),
    tabulated on a log-spaced grid.  All amplitudes must be >= 0."""
    for name, v in (("white", white), ("pink", pink), ("lorentz_amp", lorentz_amp),
                    ("lorentz_fc", lorentz_fc)):
        if v < 0 or not math.isfinite(v):
            raise ValueError(f"{name} must be >= 0 and finite, got {v}")
    if not (0 < f_min < f_max):
        raise ValueError(f"need 0 < f_min < f_max, got {f_min}, {f_max}")
    f = np.logspace(np.log10(f_min), np.log10(f_max), points)
    s = white + pink / f + lorentz_amp / (1.0 + (f / lorentz_fc) ** 2)
    return PsdTable(f, s)


def load_psd(path) -> PsdTable:
    """Read a PSD from CSV with header ``freq_hz,psd`` (decimal point, LF)."""
    freqs: list[float] = []
    dens: list[float] = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty PSD file", line=1) from None
        if [h.strip().lower() for h in header] != list(PSD_HEADER):
            raise ParseError(
                f"expected header {','.join(PSD_HEADER)!r}, got {','.join(header)!r}",
                line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", line=lineno)
            try:
                freqs.append(float(row[0]))
                dens.append(float(row[1]))
            except ValueError as exc:
                raise ParseError(f"bad number: {exc}", line=lineno) from None
    if not freqs:
        raise ParseError("PSD file has no data rows", line=2)
    return PsdTable(np.array(freqs), np.array(dens))


def save_psd(table: PsdTable, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(PSD_HEADER) + "\n")
        for f, s in zip(table.freq, table.density):
            fh.write(f"{f:.12g},{s:.12g}\n")


# --------------------------------------------------------------------------
# Noise specifications


@dataclass(frozen=True)
class GaussianNoise:
    """White Gaussian noise with fixed per-sample standard deviation."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    def describe(self) -> dict:
        return {"kind": "gaussian", "sigma": self.sigma}


@dataclass(frozen=True)
class SnrRange:
    """White Gaussian noise with a per-trace SNR drawn uniformly from [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0 < self.lo <= self.hi):
            raise ValueError(f"need 0 < lo <= hi, got [{self.lo}, {self.hi}]")

    def describe(self) -> dict:
        return {"kind": "snr_range", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class ColoredNoise:
    """Noise synthesized from a one-sided PSD by randomizing spectral phases."""

    psd: PsdTable

    def describe(self) -> dict:
        return {"kind": "colored", "psd_points": int(self.psd.freq.size)}


NoiseSpec = GaussianNoise | SnrRange | ColoredNoise


def gaussian_sigma_for_r(r: float, tau: float, dt: float) -> float:
    """Per-sample sigma of white noise whose integrated SNR over a window of
    length ``tau`` equals ``r``:  sigma = sqrt(tau / (r * dt))."""
    if not (r > 0 and tau > 0 and dt > 0):
        raise ValueError(f"r, tau, dt must be positive, got {r}, {tau}, {dt}")
    return math.sqrt(tau / (r * dt))


def measure_r(noise: np.ndarray, tau: float, dt: float) -> float:
    """Estimate the integrated SNR from independent noise realizations.

    ``noise`` is a (realizations, samples) array of signal deviations.  The
    double autocovariance integral over [0, tau] equals the variance of the
    windowed integral, so r_hat = tau^2 / Var(dt * sum of the first tau/dt
    samples).  Returns ``inf`` for identically zero noise.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim != 2:
        raise ValueError("noise must be a 2-D (realizations, samples) array")
    if noise.shape[0] < 100:
        raise ValueError(f"need at least 100 realizations, got {noise.shape[0]}")
    m = int(round(tau / dt))
    if m < 1:
        raise ValueError(f"window tau={tau} shorter than one sample dt={dt}")
    if noise.shape[1] < m:
        raise WindowTooShortError(
            f"realizations have {noise.shape[1]} samples but tau/dt={m} are needed"
        )
    integrals = noise[:, :m].sum(axis=1) * dt
    var = float(np.var(integrals, ddof=1))
    if var == 0.0:
        return math.inf
    return tau * tau / var


# --------------------------------------------------------------------------
# Colored-noise synthesis


def colored_noise_amplitudes(psd: PsdTable, grid: TraceGrid) -> np.ndarray:
    """rfft-bin amplitudes |X_k| = sqrt(S(f_k) * n / (2 dt)) for spectral
    synthesis on ``grid``.  The DC bin is zero (noise is zero-mean).

    Raises PsdRangeError when the table does not cover the grid's bin range
    (first nonzero bin up to Nyquist).
    """
    n, dt = grid.n, grid.dt
    f = np.fft.rfftfreq(n, d=dt)
    amps = np.zeros(f.size)
    amps[1:] = np.sqrt(psd.interpolate(f[1:]) * n / (2.0 * dt))
    return amps


def colored_noise_variance(psd: PsdTable, grid: TraceGrid) -> float:
    """Exact per-sample variance (averaged over the window) of noise
    synthesized from ``psd`` on ``grid`` - the discrete counterpart of the
    PSD integral up to Nyquist."""
    amps = colored_noise_amplitudes(psd, grid)
    n = grid.n
    if n % 2 == 0:
        s = 2.0 * np.sum(amps[1:-1] ** 2) + amps[-1] ** 2
    else:
        s = 2.0 * np.sum(amps[1:] ** 2)
    return float(s) / (n * n)


def synth_colored_noise(
    psd: PsdTable, grid: TraceGrid, phases: np.ndarray
) -> np.ndarray:
    """One noise realization from a PSD and explicit per-bin phases.

    ``phases`` holds uniform(0, 2pi) values, one per rfft bin (n//2 + 1).
    Bin amplitudes are deterministic, so the rectangular periodogram of the
    output reproduces the interpolated PSD exactly at interior bins.
    """
    amps = colored_noise_amplitudes(psd, grid)
    return _colored_from_phases(amps, np.asarray(phases, dtype=np.float64), grid.n)


def _colored_from_phases(amps: np.ndarray, phases: np.ndarray, n: int) -> np.ndarray:
    if phases.shape != amps.shape:
        raise ValueError(f"need {amps.shape[0]} phases, got {phases.shape}")
    spec = amps * np.exp(1j * phases)
    spec[0] = 0.0
    if n % 2 == 0:
        # Nyquist bin must be real; keep |X| fixed and take a random sign.
        spec[-1] = amps[-1] * np.where(np.cos(phases[-1]) >= 0.0, 1.0, -1.0)
    return np.fft.irfft(spec, n)


def draw_colored_noise(
    psd: PsdTable, grid: TraceGrid, rng: np.random.Generator
) -> np.ndarray:
    """Convenience wrapper drawing the phases from ``rng``."""
    phases = rng.uniform(0.0, 2.0 * np.pi, grid.n // 2 + 1)
    return synth_colored_noise(psd, grid, phases)
