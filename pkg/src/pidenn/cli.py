"""Command-line entry point.

Subcommands: train, eval, sweep, price, export-curves, oracle-price.
Runs are driven by JSON config files (documented in the README; unknown
keys are rejected and the resolved config is echoed into the output
directory).  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 I/O error.
"""

import argparse
import copy
import csv
import json
import math
import os
import sys

import numpy as np

from .greeks import export_curves, greeks
from .network import MlpConfig, init, load_checkpoint
from .oracle import fft_put_price, mc_put_price
from .quadrature import build_grid
from .residuals import DomainBox
from .sampling import CSV_COLUMNS, SampleBox, SampleSet
from .training import (NumericsError, TrainConfig, build_train_data,
                       evaluate, oracle_prices, train, write_metrics_csv)
from .vg import VgParams

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_IO = 4

PRESETS = {
    "fig6": {"sigma": 0.4, "nu": 0.4, "theta": -0.4, "r": 0.05, "q": 0.02, "tau": 1.0},
    "fig7": {"sigma": 0.4, "nu": 0.4, "theta": -0.4, "r": 0.05, "q": 0.02, "tau": 3.0},
}


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "output_dir": None,
    "seed": 0,
    "network": {
        "input_dim": 7,
        "hidden_layers": 3,
        "hidden_size": 200,
        "activation": "silu",
        "init_scheme": "he_normal",
        "dropout_rate": 0.0,
    },
    "training": {
        "optimizer": "adam",
        "learning_rate": 1e-3,
        "lr_schedule": "constant",
        "batch_size": 200,
        "epochs": 30,
        "train_size": 50000,
        "test_size": 2000,
        "boundary": "dirichlet",
        "fixed_integral": False,
        "equation": "vg",
        "total_steps": None,
    },
    "sampling": {
        "strike": 200.0,
        "x_min_price": 1.0,
        "x_max_price": 10000.0,
        "fixed_params": None,
    },
    "quadrature": {
        "eps": 0.01,
        "fine_grid": False,
    },
}


def _merge_section(name, defaults, given):
    if given is None:
        return dict(defaults)
    if not isinstance(given, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {sorted(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


def resolve_config(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    cfg = {
        "schema_version": SCHEMA_VERSION,
        "output_dir": raw.get("output_dir"),
        "seed": raw.get("seed", 0),
    }
    for section in ("network", "training", "sampling", "quadrature"):
        cfg[section] = _merge_section(section, _DEFAULTS[section], raw.get(section))
    return cfg


def load_config(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return resolve_config(raw)


def _build_run(cfg: dict):
    net_cfg = MlpConfig(seed=cfg["seed"], **cfg["network"])
    fixed = cfg["sampling"]["fixed_params"]
    if net_cfg.input_dim != 7 and fixed is None:
        raise ConfigError("input_dim < 7 requires sampling.fixed_params")
    train_cfg = TrainConfig(seed=cfg["seed"], fixed_params=fixed, **cfg["training"])
    box = SampleBox(strike=cfg["sampling"]["strike"])
    domain = DomainBox(
        x_min=math.log(cfg["sampling"]["x_min_price"]),
        x_max=math.log(cfg["sampling"]["x_max_price"]),
        strike=cfg["sampling"]["strike"],
    )
    grid = build_grid(fine=cfg["quadrature"]["fine_grid"], eps=cfg["quadrature"]["eps"])
    return net_cfg, train_cfg, box, domain, grid


def _echo_config(cfg: dict, out_dir: str) -> None:
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.output_dir or cfg["output_dir"]
    if not out_dir:
        raise ConfigError("no output_dir given (config key or --output-dir)")
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(cfg, out_dir)
    net_cfg, train_cfg, box, domain, grid = _build_run(cfg)
    net = init(net_cfg)
    log = (lambda msg: print(msg, flush=True)) if args.verbose else None
    best, metrics = train(net, train_cfg, box, grid=grid, domain=domain,
                          out_dir=out_dir, log=log)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), metrics)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "epochs_run": len(metrics.loss_history),
        "best_epoch": metrics.best_epoch,
        "rmse": metrics.rmse,
        "mae": metrics.mae,
        "final_rmse": metrics.rmse_history[-1],
        "final_mae": metrics.mae_history[-1],
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"rmse={metrics.rmse:.6g} mae={metrics.mae:.6g} best_epoch={metrics.best_epoch}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    net = load_checkpoint(args.checkpoint)
    net_cfg, train_cfg, box, domain, grid = _build_run(cfg)
    data = build_train_data(net, train_cfg, box, grid=grid, domain=domain)
    m = evaluate(net, data.test_inputs, data.test_prices)
    print(f"rmse={m.rmse:.6g} mae={m.mae:.6g} n_test={len(data.test_prices)}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"rmse": m.rmse, "mae": m.mae, "n_test": int(len(data.test_prices))}, fh)
            fh.write("\n")
    return EXIT_OK


def _vg_from_args(args) -> VgParams:
    return VgParams(sigma=args.sigma, nu=args.nu, theta=args.theta, r=args.r, q=args.q)


def cmd_price(args) -> int:
    net = load_checkpoint(args.checkpoint)
    p = _vg_from_args(args)
    gp = greeks(net, args.spot, args.tau, p)
    line = f"price={gp.price:.6f}"
    if args.oracle:
        ref = fft_put_price(args.spot, args.strike, args.tau, p)
        line += f" fft={ref:.6f} abs_diff={abs(gp.price - ref):.6f}"
    print(line)
    return EXIT_OK


def cmd_oracle_price(args) -> int:
    if args.csv:
        samples = SampleSet.from_csv(args.csv)
        prices = oracle_prices(samples, args.strike, "vg")
        out = args.out or (args.csv + ".priced.csv")
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(CSV_COLUMNS) + ["price"])
            for row, price in zip(samples.data, prices):
                writer.writerow([f"{v:.17g}" for v in row] + [f"{price:.12g}"])
        print(f"wrote {len(samples)} prices to {out}")
        return EXIT_OK
    p = _vg_from_args(args)
    price = fft_put_price(args.spot, args.strike, args.tau, p)
    line = f"fft={price:.6f}"
    if args.mc_paths:
        mc, se = mc_put_price(args.spot, args.strike, args.tau, p,
                              n_paths=args.mc_paths, seed=args.seed)
        line += f" mc={mc:.6f} mc_se={se:.6f}"
    print(line)
    return EXIT_OK


SWEEP_COLUMNS = (
    "label", "activation", "hidden_layers", "hidden_size", "dropout_rate",
    "optimizer", "learning_rate", "epochs", "train_size", "rmse", "mae", "status",
)


def _merged_run_config(base: dict, overrides: dict) -> dict:
    merged = copy.deepcopy(base)
    unknown = set(overrides) - {"label", "network", "training", "sampling", "quadrature", "seed"}
    if unknown:
        raise ConfigError(f"unknown key(s) in sweep run: {sorted(unknown)}")
    for section in ("network", "training", "sampling", "quadrature"):
        if section in overrides:
            merged.setdefault(section, {})
            merged[section] = {**merged.get(section, {}), **overrides[section]}
    if "seed" in overrides:
        merged["seed"] = overrides["seed"]
    return merged


def cmd_sweep(args) -> int:
    if not os.path.exists(args.config):
        raise ConfigError(f"sweep config file not found: {args.config}")
    with open(args.config) as fh:
        try:
            sweep = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"sweep config {args.config} is not valid JSON: {exc}") from exc
    unknown = set(sweep) - {"schema_version", "output_dir", "base", "runs"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s) in sweep config: {sorted(unknown)}")
    out_dir = args.output_dir or sweep.get("output_dir")
    if not out_dir:
        raise ConfigError("no output_dir given (sweep config key or --output-dir)")
    os.makedirs(out_dir, exist_ok=True)
    base = sweep.get("base", {})
    runs = sweep.get("runs", [])
    table_path = args.out or os.path.join(out_dir, "sweep.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for i, overrides in enumerate(runs):
            label = overrides.get("label", f"run{i}")
            status, rmse, mae = "ok", "", ""
            cfg = None
            try:
                cfg = resolve_config(_merged_run_config(base, overrides))
                run_dir = os.path.join(out_dir, label)
                os.makedirs(run_dir, exist_ok=True)
                _echo_config(cfg, run_dir)
                net_cfg, train_cfg, box, domain, grid = _build_run(cfg)
                net = init(net_cfg)
                _, metrics = train(net, train_cfg, box, grid=grid, domain=domain,
                                   out_dir=run_dir)
                write_metrics_csv(os.path.join(run_dir, "metrics.csv"), metrics)
                rmse, mae = repr(metrics.rmse), repr(metrics.mae)
            except Exception as exc:  # record and continue with the next run
                status = f"error: {exc}"
            net_sec = (cfg or {}).get("network", {})
            trn_sec = (cfg or {}).get("training", {})
            writer.writerow([
                label,
                net_sec.get("activation", ""), net_sec.get("hidden_layers", ""),
                net_sec.get("hidden_size", ""), net_sec.get("dropout_rate", ""),
                trn_sec.get("optimizer", ""), trn_sec.get("learning_rate", ""),
                trn_sec.get("epochs", ""), trn_sec.get("train_size", ""),
                rmse, mae, status,
            ])
            fh.flush()
            print(f"{label}: rmse={rmse or 'n/a'} mae={mae or 'n/a'} status={status}")
    print(f"sweep table written to {table_path}")
    return EXIT_OK


def cmd_export_curves(args) -> int:
    net = load_checkpoint(args.checkpoint)
    if args.preset not in PRESETS:
        raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
    settings = dict(PRESETS[args.preset])
    for key in ("sigma", "nu", "theta", "r", "q", "tau"):
        val = getattr(args, key)
        if val is not None:
            settings[key] = val
    p = VgParams(settings["sigma"], settings["nu"], settings["theta"],
                 settings["r"], settings["q"])
    K = args.strike
    S_grid = np.linspace(K / 2.0, 2.0 * K, args.points)
    export_curves(net, p, settings["tau"], S_grid, args.out, strike=K)
    print(f"curves written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pidenn",
        description="Unsupervised neural pricing of European puts under the "
                    "variance-gamma jump model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a network from a JSON config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--output-dir", default=None)
    p_train.add_argument("--verbose", action="store_true")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint against the reference pricer")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(fn=cmd_eval)

    p_price = sub.add_parser("price", help="price one point with a trained checkpoint")
    p_price.add_argument("--checkpoint", required=True)
    p_price.add_argument("--spot", type=float, required=True)
    p_price.add_argument("--strike", type=float, default=200.0)
    p_price.add_argument("--tau", type=float, required=True)
    p_price.add_argument("--sigma", type=float, required=True)
    p_price.add_argument("--nu", type=float, required=True)
    p_price.add_argument("--theta", type=float, required=True)
    p_price.add_argument("--r", type=float, required=True)
    p_price.add_argument("--q", type=float, required=True)
    p_price.add_argument("--oracle", action="store_true",
                         help="also print the FFT price and absolute difference")
    p_price.set_defaults(fn=cmd_price)

    p_oracle = sub.add_parser("oracle-price", help="reference FFT/Monte-Carlo pricing")
    p_oracle.add_argument("--csv", default=None,
                          help="price a CSV of samples (columns x,tau,sigma,nu,theta,r,q)")
    p_oracle.add_argument("--out", default=None)
    p_oracle.add_argument("--spot", type=float, default=200.0)
    p_oracle.add_argument("--strike", type=float, default=200.0)
    p_oracle.add_argument("--tau", type=float, default=1.0)
    p_oracle.add_argument("--sigma", type=float, default=0.4)
    p_oracle.add_argument("--nu", type=float, default=0.4)
    p_oracle.add_argument("--theta", type=float, default=-0.4)
    p_oracle.add_argument("--r", type=float, default=0.05)
    p_oracle.add_argument("--q", type=float, default=0.02)
    p_oracle.add_argument("--mc-paths", type=int, default=0)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.set_defaults(fn=cmd_oracle_price)

    p_sweep = sub.add_parser("sweep", help="train a list of configs, emit a metrics table")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--output-dir", default=None)
    p_sweep.add_argument("--out", default=None, help="sweep table CSV path")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_curves = sub.add_parser("export-curves",
                              help="price/delta/gamma/theta curves, net vs FFT")
    p_curves.add_argument("--checkpoint", required=True)
    p_curves.add_argument("--out", required=True)
    p_curves.add_argument("--preset", default="fig6")
    p_curves.add_argument("--points", type=int, default=101)
    p_curves.add_argument("--strike", type=float, default=200.0)
    for key in ("sigma", "nu", "theta", "r", "q", "tau"):
        p_curves.add_argument(f"--{key}", type=float, default=None,
                              help="override the preset value")
    p_curves.set_defaults(fn=cmd_export_curves)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
