"""Command-line entry point: ``csure {gen-data,simulate,fit,train,eval}``.

Every run writes ``run.json`` into ``--outdir`` with the resolved settings.
Exit codes: 0 ok, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import harness
from ._backend import BACKEND
from .classifier.data import (
    SIGNAL_LENGTH, SNR_GRID, DatasetFormatError, generate_psk_dataset, read_dataset_csv, write_dataset_csv,
)
from .classifier.layers import UnfittedPrototypesError
from .classifier.model import (
    PrototypeClassifier, TrainConfig, TrainingDivergedError, evaluate, train, write_metrics_csv,
)
from .shrinkage import SampleSummary, csure_arrays, fit_sure

log = logging.getLogger("csure")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated number list, got {text!r}") from None


def read_config_file(path) -> dict:
    """``key = value`` lines; blank lines and ``#`` comments ignored."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _coerce(field: dataclasses.Field, text: str):
    default = field.default
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if field.name == "mu_probes":
        vals = _float_list(text)
        if len(vals) % 2:
            raise ValueError("mu_probes needs (log_r, theta) pairs")
        return tuple(zip(vals[0::2], vals[1::2]))
    if field.name == "lambda_range":
        return _float_list(text)
    if isinstance(default, tuple):
        return _int_list(text)
    return text


def experiment_config(file_values: dict, overrides: dict) -> harness.ExperimentConfig:
    fields = {f.name: f for f in dataclasses.fields(harness.ExperimentConfig)}
    unknown = sorted(set(file_values) - set(fields))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    kw = {}
    for key, text in file_values.items():
        try:
            kw[key] = _coerce(fields[key], text)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key}: {exc}") from None
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return harness.ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def write_run_json(outdir, command: str, settings: dict, results: dict | None = None) -> None:
    doc = {"command": command, "settings": settings}
    if results is not None:
        doc["results"] = results
    with open(os.path.join(outdir, "run.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    if args.classes < 2:
        raise UsageError("--classes must be >= 2")
    if args.per_class < 1:
        raise UsageError("--per-class must be >= 1")
    out = args.out or os.path.join(args.outdir, "data.csv")
    ds = generate_psk_dataset(args.classes, args.per_class, args.snr, args.seed, length=args.length,
                              sps=args.sps, amp_jitter=args.amp_jitter)
    write_dataset_csv(ds, out)
    settings = {"classes": args.classes, "per_class": args.per_class, "snr": list(args.snr),
                "seed": args.seed, "length": args.length, "sps": args.sps,
                "amp_jitter": args.amp_jitter, "out": out}
    write_run_json(args.outdir, "gen-data", settings, {"rows": len(ds)})
    print(f"wrote {len(ds)} signals to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {"p_grid": args.p_grid, "trials": args.trials, "theorem2_p_grid": args.theorem2_p_grid,
                 "theorem2_trials": args.theorem2_trials, "N": args.N, "v": args.v, "seed": args.seed,
                 "inner": args.inner, "workers": args.workers, "K": args.K}
    cfg = experiment_config(file_values, overrides)
    t1 = harness.run_theorem1(cfg)
    path1 = os.path.join(args.outdir, "theorem1.csv")
    harness.emit_csv(t1, path1)
    s1 = harness.theorem1_summary(t1)
    print(f"theorem1: median sup gap {[round(x, 4) for x in s1['median_gap']]} spearman {s1['spearman']:.3f}")
    cfg2 = cfg.for_theorem2()
    t2 = harness.run_theorem2(cfg2)
    path2 = os.path.join(args.outdir, "theorem2.csv")
    harness.emit_csv(t2, path2)
    s2 = harness.theorem2_summary(t2)
    for p, row in s2.items():
        print(f"theorem2: p={p} risk sure {row['mean_risk_sure']:.4f} mle {row['mean_risk_mle']:.4f} "
              f"dominance {row['dominance_fraction']:.3f}")
    write_run_json(args.outdir, "simulate", cfg.to_dict(),
                   {"theorem1": s1, "theorem2": {str(k): v for k, v in s2.items()}})
    return EXIT_OK


def cmd_fit(args) -> int:
    """Treat each row of a dataset CSV as one observation of a p-vector."""
    ds = read_dataset_csv(args.data)
    summary = SampleSummary.from_samples(ds.log_r, ds.theta)
    fit = fit_sure(summary, args.v, args.K, warn=False)
    w = np.full(args.K, 1.0 / args.K)
    mu_u = np.array([m.log_r for m in fit.mu_hat])
    mu_t = np.array([m.theta for m in fit.mu_hat])
    est_u, est_t = csure_arrays(summary.xbar_u, summary.xbar_t, w, mu_u, mu_t, fit.lambda_hat, args.v)
    out = os.path.join(args.outdir, "fit.json")
    doc = {"fit": fit.to_dict(), "n_samples": summary.n_samples, "dim": summary.dim,
           "estimate": {"log_r": est_u.tolist(), "theta": est_t.tolist()}}
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_run_json(args.outdir, "fit", {"data": args.data, "v": args.v, "K": args.K})
    c = fit.components[0]
    print(f"mu_hat=({c.mu_hat.log_r:.6g}, {c.mu_hat.theta:.6g}) lambda_hat={c.lambda_hat:.6g}")
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    try:
        return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, v=args.v, K=args.K,
                           channels=args.channels, window=args.window, stride=args.stride,
                           momentum=args.momentum, combine=args.combine, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_splits(data, test_data, test_frac, seed, n_classes=None):
    ds = read_dataset_csv(data, n_classes)
    if test_data:
        return ds, read_dataset_csv(test_data, ds.n_classes)
    if test_frac <= 0:
        return ds, None
    return ds.split(test_frac, seed)


def cmd_train(args) -> int:
    cfg = _train_config(args)
    tr, te = _load_splits(args.data, args.test_data, args.test_frac, args.seed)

    def progress(row):
        log.info("epoch %d loss %.4f train %.4f test %.4f", row.epoch, row.loss, row.train_acc, row.test_acc)

    try:
        model, history = train(tr, te, cfg, progress)
    except TrainingDivergedError as exc:
        write_run_json(args.outdir, "train", {"config": dataclasses.asdict(cfg)},
                       {"diverged_epoch": exc.epoch})
        raise
    metrics = os.path.join(args.outdir, "metrics.csv")
    ckpt = os.path.join(args.outdir, "model.json")
    write_metrics_csv(history, metrics)
    model.save(ckpt)
    last = history[-1]
    settings = {"config": dataclasses.asdict(cfg), "data": args.data, "test_data": args.test_data,
                "test_frac": args.test_frac, "backend": BACKEND}
    write_run_json(args.outdir, "train", settings,
                   {"mode": model.mode, "train_acc": last.train_acc, "test_acc": last.test_acc})
    print(f"mode={model.mode} train_acc={last.train_acc:.4f} test_acc={last.test_acc:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = PrototypeClassifier.load(args.model)
    tr, te = _load_splits(args.data, None, args.test_frac if args.split != "all" else 0.0,
                          model.config.seed if args.split_seed is None else args.split_seed, model.n_classes)
    ds = {"all": tr, "train": tr, "test": te}[args.split]
    if ds is None:
        raise UsageError("--split test needs --test-frac > 0")
    rep = evaluate(model, ds)
    out = os.path.join(args.outdir, "eval.json")
    with open(out, "w") as fh:
        json.dump(rep.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_run_json(args.outdir, "eval", {"model": args.model, "data": args.data, "split": args.split,
                                          "test_frac": args.test_frac, "split_seed": args.split_seed},
                   {"accuracy": rep.accuracy})
    print(f"accuracy={rep.accuracy:.17g}")
    for s, (acc, n) in sorted(rep.per_snr.items()):
        print(f"  snr {s:+g} dB: {acc:.4f} ({n})")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csure", description="C-SURE shrinkage on the complex plane")
    ap.add_argument("--outdir", default=".", help="directory for artifacts and run.json")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic PSK dataset CSV")
    g.add_argument("--classes", type=int, default=4)
    g.add_argument("--per-class", type=int, default=40)
    g.add_argument("--snr", type=_float_list, default=tuple(float(s) for s in SNR_GRID),
                   help="comma-separated SNR values in dB (assigned round-robin)")
    g.add_argument("--length", type=int, default=SIGNAL_LENGTH)
    g.add_argument("--sps", type=int, default=8, help="samples per symbol")
    g.add_argument("--amp-jitter", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="CSV path (default OUTDIR/data.csv)")
    g.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("simulate", help="Monte Carlo dominance experiments")
    s.add_argument("--config", help="key = value file; flags override its keys")
    s.add_argument("--p-grid", type=_int_list)
    s.add_argument("--trials", type=int)
    s.add_argument("--theorem2-p-grid", type=_int_list)
    s.add_argument("--theorem2-trials", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--v", type=float)
    s.add_argument("--K", type=int)
    s.add_argument("--inner", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit SURE to the rows of a dataset CSV")
    f.add_argument("--data", required=True)
    f.add_argument("--v", type=float, default=1.0)
    f.add_argument("--K", type=int, default=1)
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("train", help="train the prototype classifier")
    t.add_argument("--data", required=True)
    t.add_argument("--test-data")
    t.add_argument("--test-frac", type=float, default=0.25, help="held-out fraction when --test-data is absent")
    t.add_argument("--v", type=float, default=1.0, help="data variance; 0 gives the MLE prototypes")
    t.add_argument("--epochs", type=int, default=120)
    t.add_argument("--batch-size", type=int, default=400)
    t.add_argument("--lr", type=float, default=0.03)
    t.add_argument("--K", type=int, default=2)
    t.add_argument("--channels", type=int, default=8)
    t.add_argument("--window", type=int, default=5)
    t.add_argument("--stride", type=int, default=2)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--combine", choices=("algebra", "literal"), default="algebra")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", choices=("all", "train", "test"), default="all",
                   help="re-derive the training split used by `train`")
    e.add_argument("--test-frac", type=float, default=0.25)
    e.add_argument("--split-seed", type=int, help="defaults to the checkpoint's seed")
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        os.makedirs(args.outdir, exist_ok=True)
        return args.func(args)
    except (UsageError, UnfittedPrototypesError) as exc:
        print(f"csure: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetFormatError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"csure: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, FloatingPointError) as exc:
        print(f"csure: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"csure: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
