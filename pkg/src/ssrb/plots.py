"""Figure rendering for benchmark results.

Thin matplotlib wrappers used by the CLI report path; they draw from the
same result objects that back the CSV output, so figures and delimited
files always agree.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import RabiComparison, SweepResult
from .noise import PsdTable

_AXIS_LABELS = {
    "r": "SNR r",
    "offset": "level offset",
    "gamma": r"rate ratio $\Gamma$",
}


def plot_sweep(result: SweepResult, path, logy: bool = True) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in result.methods():
        rows = sorted(
            (r for r in result.rows if r.method == name), key=lambda r: r.axis
        )
        axis = np.array([r.axis for r in rows])
        err = np.array([r.mean_error for r in rows])
        lo = np.array([r.ci_low for r in rows])
        hi = np.array([r.ci_high for r in rows])
        ax.errorbar(axis, err, yerr=[err - lo, hi - err], marker="o",
                    capsize=3, label=name)
    if result.axis_name == "r":
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(_AXIS_LABELS.get(result.axis_name, result.axis_name))
    ax.set_ylabel("mean classification error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rabi(result: RabiComparison, path) -> None:
    fig, (ax_p, ax_d) = plt.subplots(
        2, 1, figsize=(6.0, 6.0), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]},
    )
    for name, curve in result.p_hat.items():
        fit = result.fits[name]
        ax_p.plot(result.times, curve, "o", ms=3, label=f"{name} (V={fit.visibility:.3f})")
        t_fine = np.linspace(result.times[0], result.times[-1], 400)
        model = (
            0.5 * fit.visibility * np.exp(-t_fine / fit.decay_time)
            * np.cos(2 * np.pi * fit.frequency * t_fine) + fit.offset
        )
        ax_p.plot(t_fine, model, "-", lw=1, alpha=0.7)
    ax_p.set_ylabel(r"$P(\uparrow)$")
    ax_p.legend(fontsize=8)
    ax_p.grid(alpha=0.3)
    if result.baseline is not None:
        for name in result.p_hat:
            if name == result.baseline:
                continue
            ax_d.plot(result.times, result.delta_p(name), "o-", ms=3, label=name)
        ax_d.axhline(0.0, color="k", lw=0.8)
        ax_d.set_ylabel(rf"$\Delta P$ vs {result.baseline}")
        ax_d.legend(fontsize=8)
        ax_d.grid(alpha=0.3)
    ax_d.set_xlabel("drive time")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_psd(table: PsdTable, path) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.loglog(table.freq, table.density)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel(r"PSD ($\Psi^2$/Hz)")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_traces(samples: np.ndarray, dt: float, path, max_traces: int = 4) -> None:
    samples = np.atleast_2d(samples)[:max_traces]
    t = np.arange(samples.shape[1]) * dt
    fig, ax = plt.subplots(figsize=(6.0, 3.0))
    for i, tr in enumerate(samples):
        ax.plot(t, tr + 3.0 * i, lw=0.6)
    ax.set_xlabel("time")
    ax.set_ylabel(r"$\Psi$ (offset per trace)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
