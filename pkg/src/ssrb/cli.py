"""Command-line driver.

One executable with subcommands covering the full pipeline:

    synth         synthesize a labeled dataset file (.ssrd)
    psd-model     tabulate the model PSD to CSV
    train         train a network on a dataset (regimes B/C/D)
    classify      per-trace verdict CSV from a filter or a model file
    fit-mean      recover tunnel rates from the mean UP trace
    sweep-r       error vs SNR sweep
    sweep-offset  error vs level-offset sweep
    sweep-gamma   error vs rate-ratio sweep
    rabi          Rabi visibility comparison
    time          per-trace latency of the classifiers

Configuration comes from built-in defaults, an optional JSON config file,
repeatable ``--set section.key=value`` overrides and dedicated flags, in
that order.  Unknown keys are rejected by name.  ``--dry-run`` prints the
resolved configuration and exits.  Exit codes: 0 success, 1 usage/config
error, 2 runtime failure (with a JSON error object on stderr).
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import net as netmod
from .bayes import BayesModel, batch_classify, write_verdicts_csv
from .dataset import load_dataset, save_dataset
from .errors import ConfigError, SsrbError
from .harness import (
    BayesMethod,
    MatchedBayesMethod,
    NetMethod,
    RabiParams,
    ReadoutConfig,
    TruthMethod,
    compare_rabi,
    environment_info,
    gen_rabi_dataset,
    sweep_error_vs_r,
    sweep_gamma,
    sweep_offset,
    time_classifiers,
)
from .noise import ColoredNoise, GaussianNoise, SnrRange, load_psd, model_psd, save_psd
from .synth import fit_mean_trace, synthesize_dataset
from .traces import PerturbationSpec, TraceGrid, TunnelParams

DEFAULTS = {
    "seed": 12345,
    "threads": 1,
    "grid": {"dt": 0.01, "n": 1000},
    "tunnel": {"gamma_i": 1.0, "gamma_f": 1.0},
    "noise": {
        "kind": "gaussian",      # gaussian | snr-range | colored
        "r": 200.0,              # SNR for kind=gaussian (unless sigma given)
        "sigma": 0.0,            # direct sigma for kind=gaussian (0 = use r)
        "r_lo": 1.0,             # kind=snr-range
        "r_hi": 400.0,
        "psd_file": "",          # kind=colored; empty = built-in model PSD
    },
    "perturbation": {"offset": 0.0},
    "psd": {
        "white": 0.005,
        "pink": 0.002,
        "lorentz_amp": 2.0,
        "lorentz_fc": 0.1,
        "f_min": 1e-3,
        "f_max": 1e2,
        "points": 257,
    },
    "training": {
        "learning_rate": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "batch_size": 128,
        "max_epochs": 12,
        "patience": 3,
        "val_fraction": 0.1,
        "dropout": 0.0,
    },
    "sweep": {
        "test_size": 20000,
        "r_values": [1.0, 10.0, 25.0, 100.0, 200.0, 400.0],
        "offsets": [-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75],
        "gammas": [0.05, 0.25, 1.0, 2.0, 4.0],
        "r_offset": 200.0,
        "r_gamma": 25.0,
        "bayes_fixed_r": 200.0,
    },
    "rabi": {
        "visibility": 0.8,
        "frequency": 0.4,
        "decay_time": 8.0,
        "p0": 0.5,
        "t_max": 10.0,
        "points": 50,
        "traces_per_point": 250,
        "median_rescale": True,
    },
}


# --------------------------------------------------------------------------
# Configuration plumbing


def _merge_config(base: dict, override: dict, path: str = "") -> None:
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}", key=here)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {here!r} must be a section", key=here)
            _merge_config(base[key], value, here)
        else:
            base[key] = value


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set needs key=value, got {assignment!r}", key=assignment)
    key, _, raw = assignment.partition("=")
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config section {part!r} in {key!r}", key=key)
        node = node[part]
    leaf = parts[-1]
    if leaf not in node:
        raise ConfigError(f"unknown config key {key!r}", key=key)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings allowed
    if isinstance(node[leaf], dict):
        raise ConfigError(f"config key {key!r} is a section, not a value", key=key)
    node[leaf] = value


def resolve_config(args) -> dict:
    """Defaults < config file < --set overrides < dedicated flags; the seed
    additionally falls back to the SSRB_SEED environment variable when no
    other source names one."""
    cfg = copy.deepcopy(DEFAULTS)
    seed_given = False
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}")
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"config file {args.config} must hold a JSON object")
        _merge_config(cfg, file_cfg)
        seed_given = "seed" in file_cfg
    for assignment in args.set or []:
        _apply_set(cfg, assignment)
        seed_given = seed_given or assignment.startswith("seed=")
    if args.seed is not None:
        cfg["seed"] = args.seed
        seed_given = True
    if not seed_given and (env_seed := os.environ.get("SSRB_SEED")) is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"SSRB_SEED must be an integer, got {env_seed!r}")
    if args.threads is not None:
        cfg["threads"] = args.threads
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        raise ConfigError("threads must be a positive integer", key="threads")
    cfg["seed"] = int(cfg["seed"])
    return cfg


def _grid(cfg) -> TraceGrid:
    return TraceGrid(dt=float(cfg["grid"]["dt"]), n=int(cfg["grid"]["n"]))


def _tunnel(cfg) -> TunnelParams:
    return TunnelParams(
        gamma_i=float(cfg["tunnel"]["gamma_i"]),
        gamma_f=float(cfg["tunnel"]["gamma_f"]),
    )


def _model_psd_from_cfg(cfg):
    p = cfg["psd"]
    return model_psd(
        white=float(p["white"]), pink=float(p["pink"]),
        lorentz_amp=float(p["lorentz_amp"]), lorentz_fc=float(p["lorentz_fc"]),
        f_min=float(p["f_min"]), f_max=float(p["f_max"]), points=int(p["points"]),
    )


def _noise_spec(cfg, grid: TraceGrid, params: TunnelParams):
    noise = cfg["noise"]
    kind = noise["kind"]
    if kind == "gaussian":
        sigma = float(noise["sigma"])
        if sigma <= 0.0:
            from .noise import gaussian_sigma_for_r

            sigma = gaussian_sigma_for_r(
                float(noise["r"]), params.mean_high_time, grid.dt
            )
        return GaussianNoise(sigma)
    if kind == "snr-range":
        return SnrRange(float(noise["r_lo"]), float(noise["r_hi"]))
    if kind == "colored":
        psd_file = noise["psd_file"]
        psd = load_psd(psd_file) if psd_file else _model_psd_from_cfg(cfg)
        return ColoredNoise(psd)
    raise ConfigError(f"unknown noise kind {kind!r}", key="noise.kind")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path: Path, command: str, cfg: dict, outputs: list,
                    inputs: list = ()) -> None:
    manifest = {
        "command": command,
        "config": cfg,
        "environment": environment_info(),
        "inputs": {str(p): _sha256(p) for p in inputs if Path(p).exists()},
        "outputs": {str(p): _sha256(p) for p in outputs if Path(p).exists()},
    }
    path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print(f"manifest: {path}")


def _dry_run(cfg: dict, extra: dict | None = None) -> int:
    resolved = dict(cfg)
    if extra:
        resolved = {**resolved, "command_args": extra}
    print(json.dumps(resolved, indent=2, sort_keys=True))
    return 0


def _build_methods(tokens: list[str], net_map: dict[str, str], cfg, grid, params,
                   threads: int):
    methods = []
    for token in tokens:
        if token == "bayes":
            methods.append(MatchedBayesMethod(name="bayes", threads=threads))
        elif token == "bayes-fixed":
            model = BayesModel.for_snr(
                float(cfg["sweep"]["bayes_fixed_r"]), params, grid
            )
            methods.append(BayesMethod(model, name="bayes-fixed", threads=threads))
        elif token == "truth":
            methods.append(TruthMethod())
        elif token in net_map:
            methods.append(NetMethod(netmod.load_model(net_map[token]), name=token))
        elif token.endswith(".ssnn") and Path(token).exists():
            methods.append(NetMethod(netmod.load_model(token), name=Path(token).stem))
        else:
            raise ConfigError(
                f"unknown method {token!r}: use bayes, bayes-fixed, truth, "
                f"an .ssnn path, or map it with --net {token}=model.ssnn",
                key="methods",
            )
    return methods


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma-separated float list, got {text!r}")


# --------------------------------------------------------------------------
# Subcommand handlers


def cmd_synth(args) -> int:
    cfg = resolve_config(args)
    grid = _grid(cfg)
    params = _tunnel(cfg)
    if args.r is not None:
        cfg["noise"]["kind"] = "gaussian"
        cfg["noise"]["r"] = args.r
        cfg["noise"]["sigma"] = 0.0
    if args.sigma is not None:
        cfg["noise"]["kind"] = "gaussian"
        cfg["noise"]["sigma"] = args.sigma
    if args.r_range is not None:
        lo, *rest = _parse_floats(args.r_range, "--r-range")
        if len(rest) != 1:
            raise ConfigError("--r-range expects LO,HI")
        cfg["noise"]["kind"] = "snr-range"
        cfg["noise"]["r_lo"], cfg["noise"]["r_hi"] = lo, rest[0]
    if args.psd is not None:
        cfg["noise"]["kind"] = "colored"
        cfg["noise"]["psd_file"] = args.psd
    if args.offset is not None:
        cfg["perturbation"]["offset"] = args.offset
    if args.dry_run:
        return _dry_run(cfg, {"count": args.count, "up_fraction": args.up_fraction,
                              "out": args.out})
    noise = _noise_spec(cfg, grid, params)
    perturb = PerturbationSpec(float(cfg["perturbation"]["offset"]))
    ds = synthesize_dataset(
        args.count, args.up_fraction, params, noise, grid, int(cfg["seed"]),
        perturb=perturb, threads=int(cfg["threads"]),
    )
    save_dataset(ds, args.out)
    print(f"wrote {args.count} traces ({int(ds.labels.sum())} up) to {args.out}")
    _write_manifest(Path(args.out), "synth", cfg, [args.out])
    return 0


def cmd_psd_model(args) -> int:
    cfg = resolve_config(args)
    for flag in ("white", "pink", "lorentz_amp", "lorentz_fc"):
        value = getattr(args, flag)
        if value is not None:
            cfg["psd"][flag] = value
    if args.dry_run:
        return _dry_run(cfg, {"out": args.out})
    table = _model_psd_from_cfg(cfg)
    save_psd(table, args.out)
    print(f"wrote {table.freq.size}-point PSD table to {args.out}")
    if args.plot:
        from .plots import plot_psd

        fig_path = Path(args.out).with_suffix(".png")
        plot_psd(table, fig_path)
        print(f"figure: {fig_path}")
    _write_manifest(Path(args.out), "psd-model", cfg, [args.out])
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    t = cfg["training"]
    if args.epochs is not None:
        t["max_epochs"] = args.epochs
    if args.batch_size is not None:
        t["batch_size"] = args.batch_size
    if args.learning_rate is not None:
        t["learning_rate"] = args.learning_rate
    if args.dry_run:
        return _dry_run(cfg, {"regime": args.regime, "data": args.data,
                              "out": args.out})
    dataset = load_dataset(args.data)
    net_config = netmod.NetConfig(input_len=dataset.grid.n, dropout=float(t["dropout"]))
    tc = netmod.TrainConfig(
        learning_rate=float(t["learning_rate"]), beta1=float(t["beta1"]),
        beta2=float(t["beta2"]), eps=float(t["eps"]),
        batch_size=int(t["batch_size"]), max_epochs=int(t["max_epochs"]),
        patience=int(t["patience"]), val_fraction=float(t["val_fraction"]),
        seed=int(cfg["seed"]), verbose=True,
    )
    print(f"training regime {args.regime} on {dataset.count} traces")
    model = netmod.train(dataset, net_config, tc, args.regime)
    netmod.save_model(model, args.out)
    curve = model.meta["training_curve"]
    print(
        f"best epoch {model.meta['best_epoch']}/{len(curve)}, "
        f"val loss {model.meta['best_val_loss']:.5f}; wrote {args.out}"
    )
    _write_manifest(Path(args.out), "train", cfg, [args.out], inputs=[args.data])
    return 0


def cmd_classify(args) -> int:
    cfg = resolve_config(args)
    if args.dry_run:
        return _dry_run(cfg, {"data": args.data, "model": args.model,
                              "bayes": args.bayes, "out": args.out})
    dataset = load_dataset(args.data)
    if (args.model is None) == (not args.bayes):
        raise ConfigError("classify needs exactly one of --model PATH or --bayes")
    if args.model:
        model = netmod.load_model(args.model)
        probs = model.probabilities(dataset.samples)
        log_p = np.log(np.clip(probs, 1e-300, None))
        labels = (probs[:, 1] >= probs[:, 0]).astype(np.uint8)
        write_verdicts_csv(args.out, labels, log_p[:, 1] - log_p[:, 0],
                           log_p[:, 1], log_p[:, 0])
    else:
        params = _tunnel(cfg)
        if args.matched:
            method = MatchedBayesMethod(threads=int(cfg["threads"]))
            bm = method.model_for(dataset)
        else:
            bm = BayesModel.for_snr(
                args.bayes_r if args.bayes_r is not None else float(cfg["noise"]["r"]),
                params, dataset.grid,
            )
        labels, llr, lu, ld = batch_classify(
            dataset, bm, threads=int(cfg["threads"]), return_verdicts=True
        )
        write_verdicts_csv(args.out, labels, llr, lu, ld)
    print(f"classified {dataset.count} traces -> {args.out}")
    _write_manifest(Path(args.out), "classify", cfg, [args.out], inputs=[args.data])
    return 0


def cmd_fit_mean(args) -> int:
    cfg = resolve_config(args)
    if args.dry_run:
        return _dry_run(cfg, {"data": args.data, "out": args.out})
    dataset = load_dataset(args.data)
    up = dataset.samples[dataset.labels == 1]
    if up.shape[0] == 0:
        raise ConfigError(f"dataset {args.data} holds no UP traces to fit")
    fit = fit_mean_trace(up, dataset.grid)
    result = {
        "gamma_i": fit.gamma_i, "gamma_i_err": fit.gamma_i_err,
        "gamma_f": fit.gamma_f, "gamma_f_err": fit.gamma_f_err,
        "amp": fit.amp, "offset": fit.offset, "residual_rms": fit.residual_rms,
        "up_traces": int(up.shape[0]),
    }
    with open(args.out, "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
    print(
        f"gamma_i = {fit.gamma_i:.4f} +- {fit.gamma_i_err:.4f}, "
        f"gamma_f = {fit.gamma_f:.4f} +- {fit.gamma_f_err:.4f} -> {args.out}"
    )
    _write_manifest(Path(args.out), "fit-mean", cfg, [args.out], inputs=[args.data])
    return 0


def _run_sweep(args, kind: str) -> int:
    cfg = resolve_config(args)
    sweep_cfg = cfg["sweep"]
    if args.test_size is not None:
        sweep_cfg["test_size"] = args.test_size
    tokens = [t.strip() for t in args.methods.split(",") if t.strip()]
    net_map = dict(kv.split("=", 1) for kv in (args.net or []))
    if args.dry_run:
        return _dry_run(cfg, {"sweep": kind, "methods": tokens, "net": net_map,
                              "out": args.out})
    grid = _grid(cfg)
    params = _tunnel(cfg)
    threads = int(cfg["threads"])
    methods = _build_methods(tokens, net_map, cfg, grid, params, threads)
    seed = int(cfg["seed"])
    size = int(sweep_cfg["test_size"])
    progress = lambda msg: print(f"  {msg}")
    if kind == "r":
        values = _parse_floats(args.r, "--r") if args.r else sweep_cfg["r_values"]
        result = sweep_error_vs_r(methods, values, size, params, grid, seed,
                                  threads=threads, progress=progress)
    elif kind == "offset":
        values = (_parse_floats(args.offsets, "--offsets")
                  if args.offsets else sweep_cfg["offsets"])
        r = args.r if args.r is not None else float(sweep_cfg["r_offset"])
        result = sweep_offset(methods, values, r, size, params, grid, seed,
                              threads=threads, progress=progress)
    else:
        values = (_parse_floats(args.gammas, "--gammas")
                  if args.gammas else sweep_cfg["gammas"])
        r = args.r if args.r is not None else float(sweep_cfg["r_gamma"])
        result = sweep_gamma(methods, values, r, size, params, grid, seed,
                             threads=threads, progress=progress)
    result.to_csv(args.out)
    print(f"wrote {len(result.rows)} sweep rows to {args.out}")
    outputs = [args.out]
    if not args.no_plot:
        from .plots import plot_sweep

        fig_path = Path(args.out).with_suffix(".png")
        plot_sweep(result, fig_path)
        outputs.append(fig_path)
        print(f"figure: {fig_path}")
    _write_manifest(Path(args.out), f"sweep-{kind}", cfg, outputs,
                    inputs=list(net_map.values()))
    return 0


def cmd_rabi(args) -> int:
    cfg = resolve_config(args)
    rc = cfg["rabi"]
    if args.traces_per_point is not None:
        rc["traces_per_point"] = args.traces_per_point
    if args.points is not None:
        rc["points"] = args.points
    tokens = [t.strip() for t in args.methods.split(",") if t.strip()]
    net_map = dict(kv.split("=", 1) for kv in (args.net or []))
    if args.dry_run:
        return _dry_run(cfg, {"methods": tokens, "net": net_map, "out": args.out})
    grid = _grid(cfg)
    params = _tunnel(cfg)
    threads = int(cfg["threads"])
    methods = _build_methods(tokens, net_map, cfg, grid, params, threads)
    rp = RabiParams.default_scan(
        visibility=float(rc["visibility"]), frequency=float(rc["frequency"]),
        decay_time=float(rc["decay_time"]), offset=float(rc["p0"]),
        t_max=float(rc["t_max"]), points=int(rc["points"]),
    )
    noise = _noise_spec(cfg, grid, params)
    readout = ReadoutConfig(params, noise, grid,
                            PerturbationSpec(float(cfg["perturbation"]["offset"])))
    print(f"synthesizing {rc['points']} x {rc['traces_per_point']} Rabi traces")
    rabi = gen_rabi_dataset(rp, int(rc["traces_per_point"]), readout,
                            int(cfg["seed"]), threads=threads)
    result = compare_rabi(methods, rabi, median_rescale=bool(rc["median_rescale"]))
    result.to_csv(args.out)
    fits_path = Path(args.out).with_suffix(".fits.json")
    with open(fits_path, "w") as fh:
        json.dump(result.fits_dict(), fh, indent=2, sort_keys=True)
    for name, fit in result.fits.items():
        print(f"  {name}: V = {fit.visibility:.4f} +- {fit.visibility_err:.4f}")
    outputs = [args.out, fits_path]
    if not args.no_plot:
        from .plots import plot_rabi

        fig_path = Path(args.out).with_suffix(".png")
        plot_rabi(result, fig_path)
        outputs.append(fig_path)
        print(f"figure: {fig_path}")
    _write_manifest(Path(args.out), "rabi", cfg, outputs,
                    inputs=list(net_map.values()))
    return 0


def cmd_time(args) -> int:
    cfg = resolve_config(args)
    tokens = [t.strip() for t in args.methods.split(",") if t.strip()]
    net_map = dict(kv.split("=", 1) for kv in (args.net or []))
    if args.dry_run:
        return _dry_run(cfg, {"methods": tokens, "net": net_map,
                              "batch": args.batch, "reps": args.reps,
                              "out": args.out})
    grid = _grid(cfg)
    params = _tunnel(cfg)
    # timing runs stay single-worker to avoid contention noise
    methods = _build_methods(tokens, net_map, cfg, grid, params, threads=1)
    noise = _noise_spec(cfg, grid, params)
    ds = synthesize_dataset(args.batch, 0.5, params, noise, grid, int(cfg["seed"]))
    stats = time_classifiers(methods, ds, args.reps, warmup=args.warmup)
    payload = {
        "environment": environment_info(),
        "batch": args.batch,
        "repetitions": args.reps,
        "stats": {name: s.to_dict() for name, s in stats.items()},
        "reference": "reported for context: the readout study quotes ~50 us "
                     "per trace for the network and ~200 us for the filter "
                     "on an i9-9900K; absolute numbers are machine-specific",
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    for name, s in stats.items():
        print(f"  {name}: median {s.median_us:.1f} us/trace, p95 {s.p95_us:.1f}")
    _write_manifest(Path(args.out), "time", cfg, [args.out],
                    inputs=list(net_map.values()))
    return 0


# --------------------------------------------------------------------------
# Parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config value (dotted key), repeatable")
    p.add_argument("--seed", type=int, help="global seed (falls back to "
                   "config, then SSRB_SEED, then default)")
    p.add_argument("--threads", type=int, help="worker cap for parallel stages")
    p.add_argument("--dry-run", action="store_true",
                   help="print the resolved config and exit")


def _add_methods(p) -> None:
    p.add_argument("--methods", default="bayes",
                   help="comma list: bayes, bayes-fixed, truth, net aliases")
    p.add_argument("--net", action="append", metavar="NAME=PATH",
                   help="map a method alias to a .ssnn model file, repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssrb", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a labeled dataset")
    _add_common(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--up-fraction", type=float, default=0.5)
    p.add_argument("--r", type=float, help="Gaussian noise at this SNR")
    p.add_argument("--sigma", type=float, help="Gaussian noise with this sigma")
    p.add_argument("--r-range", metavar="LO,HI",
                   help="per-trace SNR uniform in [LO, HI]")
    p.add_argument("--psd", help="colored noise from this PSD CSV")
    p.add_argument("--offset", type=float, help="additive level offset")
    p.add_argument("--out", required=True, help="output .ssrd path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("psd-model", help="tabulate the model PSD")
    _add_common(p)
    p.add_argument("--white", type=float)
    p.add_argument("--pink", type=float)
    p.add_argument("--lorentz-amp", dest="lorentz_amp", type=float)
    p.add_argument("--lorentz-fc", dest="lorentz_fc", type=float)
    p.add_argument("--plot", action="store_true")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_psd_model)

    p = sub.add_parser("train", help="train a network")
    _add_common(p)
    p.add_argument("--regime", required=True, choices=["B", "C", "D"])
    p.add_argument("--data", required=True, help="training .ssrd file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--out", required=True, help="output .ssnn path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="write per-trace verdicts")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", help="classify with this .ssnn model")
    p.add_argument("--bayes", action="store_true", help="classify with the filter")
    p.add_argument("--bayes-r", type=float, help="fixed filter SNR")
    p.add_argument("--matched", action="store_true",
                   help="filter matched to the dataset's generation metadata")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fit-mean", help="recover rates from the mean UP trace")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_fit_mean)

    p = sub.add_parser("sweep-r", help="error vs SNR")
    _add_common(p)
    _add_methods(p)
    p.add_argument("--r", help="comma list of SNR values")
    p.add_argument("--test-size", type=int)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=lambda a: _run_sweep(a, "r"))

    p = sub.add_parser("sweep-offset", help="error vs level offset")
    _add_common(p)
    _add_methods(p)
    p.add_argument("--offsets", help="comma list of offsets")
    p.add_argument("--r", type=float, help="fixed SNR of the test set")
    p.add_argument("--test-size", type=int)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=lambda a: _run_sweep(a, "offset"))

    p = sub.add_parser("sweep-gamma", help="error vs rate ratio")
    _add_common(p)
    _add_methods(p)
    p.add_argument("--gammas", help="comma list of rate ratios")
    p.add_argument("--r", type=float, help="fixed SNR of the test sets")
    p.add_argument("--test-size", type=int)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=lambda a: _run_sweep(a, "gamma"))

    p = sub.add_parser("rabi", help="Rabi visibility comparison")
    _add_common(p)
    _add_methods(p)
    p.add_argument("--traces-per-point", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_rabi)

    p = sub.add_parser("time", help="per-trace latency comparison")
    _add_common(p)
    _add_methods(p)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_time)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"ssrb: {exc}", file=sys.stderr)
        return 1
    except SsrbError as exc:
        json.dump(exc.to_json_dict(), sys.stderr)
        sys.stderr.write("\n")
        return 2
    except OSError as exc:
        json.dump({"error": "IO", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
