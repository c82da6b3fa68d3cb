"""Single-shot spin readout benchmark.

Synthesizes spin-readout current traces (Poisson tunnel events plus white or
PSD-shaped noise calibrated to a target SNR), classifies them with a Bayesian
hidden-Markov filter and a trainable 1-D convolutional network, and runs the
error / robustness / visibility / latency benchmarks.
"""

from .bayes import (
    BayesModel,
    Verdict,
    batch_classify,
    classify_bayes,
    error_rate,
    exact_marginal_loglik,
    hmm_forward,
    hmm_forward_batch,
    write_verdicts_csv,
)
from .dataset import LabeledDataset, load_dataset, save_dataset
from .errors import SsrbError
from .harness import (
    BayesMethod,
    ErrorChannelMethod,
    LatencyStats,
    MatchedBayesMethod,
    Method,
    NetMethod,
    RabiComparison,
    RabiDataset,
    RabiFit,
    RabiParams,
    ReadoutConfig,
    SweepResult,
    TruthMethod,
    attenuated_visibility,
    compare_rabi,
    fit_rabi,
    gen_rabi_dataset,
    rescale_trace,
    sweep_error_vs_r,
    sweep_gamma,
    sweep_offset,
    time_classifiers,
    wilson_interval,
)
from .net import NetConfig, NetModel, TrainConfig, load_model, save_model, train
from .noise import (
    ColoredNoise,
    GaussianNoise,
    PsdTable,
    SnrRange,
    colored_noise_variance,
    gaussian_sigma_for_r,
    load_psd,
    measure_r,
    model_psd,
    save_psd,
    synth_colored_noise,
)
from .synth import (
    MeanTraceFit,
    fit_mean_trace,
    peak_occupancy,
    render_ideal_trace,
    sample_tunnel_times,
    synthesize_bernoulli_dataset,
    synthesize_dataset,
    trace_rng,
)
from .traces import (
    DOWN,
    UP,
    LatentEvent,
    PerturbationSpec,
    Provenance,
    Trace,
    TraceGrid,
    TunnelParams,
)

__version__ = "0.1.0"
