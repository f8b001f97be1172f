"""Command-line experiment runner.

Subcommands: gen-data, transform, train, evaluate, resources. Every
subcommand returns exit code 0 on success and 2 with a one-line message on
bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import datasets, metrics, resources, transforms
from .training import (
    ConfigError,
    TrainConfig,
    TrainingAborted,
    atomic_write,
    generate_samples,
    prepare_data,
    train,
)

log = logging.getLogger("qgenbench")

SPEC_FIELDS = {"output_dir", "repeats", "save_samples", "save_params", "save_histograms", "sweep", "n_output_samples"}
SPEC_DEFAULTS = {
    "output_dir": "runs",
    "repeats": 5,
    "save_samples": True,
    "save_params": True,
    "save_histograms": False,
    "sweep": None,
    "n_output_samples": None,
}


class CliError(Exception):
    pass


def _write_csv(points: np.ndarray, path: Path) -> None:
    buf = io.StringIO()
    datasets.save_csv(points, buf)
    atomic_write(path, buf.getvalue())


def _write_json(obj, path: Path) -> None:
    atomic_write(path, json.dumps(obj, indent=1, sort_keys=True) + "\n")


# -- gen-data ------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    if args.name == "stocks":
        raw = datasets.load_stocks(args.csv or datasets.bundled_stock_csvs()[: args.dim])
    else:
        raw = datasets.generate(args.name, args.dim, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(raw.points, out)
    meta = {"name": raw.name, "dim": raw.dim, "n": raw.n, "seed": raw.seed, "metadata": raw.metadata}
    _write_json(meta, out.with_suffix(".meta.json"))
    print(f"wrote {raw.n} points of dimension {raw.dim} to {out}")
    return 0


# -- transform -----------------------------------------------------------------

def cmd_transform(args) -> int:
    points = datasets.load_csv(args.data)
    if args.inverse:
        if not args.model:
            raise CliError("--inverse needs --model")
        model = transforms.TransformModel.from_dict(json.loads(Path(args.model).read_text()))
        result = transforms.inverse(model, points)
    else:
        if args.model and Path(args.model).exists() and not args.refit:
            model = transforms.TransformModel.from_dict(json.loads(Path(args.model).read_text()))
        else:
            model = transforms.fit(args.kind, points)
            if args.model:
                atomic_write(Path(args.model), model.to_json())
        result = transforms.forward(model, points)
    _write_csv(result, Path(args.out))
    print(f"wrote {len(result)} transformed points to {args.out}")
    return 0


# -- train ---------------------------------------------------------------------

def load_spec(path) -> tuple[dict, TrainConfig]:
    path = Path(path)
    if not path.exists():
        raise CliError(f"no such file: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise CliError(f"{path}: spec must be a JSON object")
    spec = dict(SPEC_DEFAULTS)
    spec.update({k: raw[k] for k in SPEC_FIELDS if k in raw})
    train_fields = {k: v for k, v in raw.items() if k not in SPEC_FIELDS}
    problems = []
    if not isinstance(spec["repeats"], int) or spec["repeats"] < 1:
        problems.append("repeats must be a positive integer")
    known = {f.name for f in fields(TrainConfig)}
    sweep = spec["sweep"] or {}
    if not isinstance(sweep, dict) or any(k not in known or not isinstance(v, list) or not v for k, v in sweep.items()):
        problems.append("sweep must map TrainConfig fields to non-empty lists")
    try:
        config = TrainConfig.from_dict(train_fields)
    except ConfigError as exc:
        problems.append(str(exc).removeprefix("invalid config: "))
        config = None
    if problems:
        raise CliError("invalid spec: " + "; ".join(problems))
    return spec, config


def _sweep_points(sweep: dict | None):
    if not sweep:
        yield "", {}
        return
    keys = sorted(sweep)
    for values in itertools.product(*(sweep[k] for k in keys)):
        point = dict(zip(keys, values))
        yield "_".join(f"{k}={v}" for k, v in point.items()), point


def run_experiment(spec: dict, config: TrainConfig, out_dir: Path) -> list[dict]:
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved_spec = dict(spec, output_dir=str(out_dir), **config.resolved().to_dict())
    _write_json(resolved_spec, out_dir / "config.json")
    summaries = []
    for label, point in _sweep_points(spec["sweep"]):
        cfg = TrainConfig.from_dict(dict(config.to_dict(), **point)).resolved()
        run_dir = out_dir / label if label else out_dir
        data = prepare_data(cfg)
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_json(data.model.to_dict(), run_dir / "transform.json")
        if spec["save_histograms"]:
            data.target.to_csv(run_dir / "target_histogram.csv")
        per_seed = []
        for i in range(spec["repeats"]):
            seed = cfg.seed + i
            seed_cfg = TrainConfig.from_dict(dict(cfg.to_dict(), seed=seed))
            seed_dir = run_dir / f"seed_{seed}"
            try:
                trace = train(seed_cfg, data)
            except TrainingAborted as exc:
                exc.trace.write(seed_dir)
                log.error("seed %d aborted: %s", seed, exc)
                per_seed.append({"seed": seed, "best_kl": None, "aborted": str(exc)})
                continue
            trace.write(seed_dir)
            if spec["save_samples"]:
                n_out = spec["n_output_samples"] or data.raw.n
                unit = generate_samples(seed_cfg, trace, n_out, seed)
                _write_csv(unit, seed_dir / "samples_unit.csv")
                _write_csv(transforms.inverse(data.model, unit), seed_dir / "samples.csv")
            if spec["save_params"]:
                _write_json({"params": trace.best_params}, seed_dir / "params.json")
            per_seed.append({"seed": seed, "best_kl": trace.best_kl, "best_epoch": trace.best_epoch, "flags": trace.flags})
            log.info("%s seed %d: best KL %.4f", label or "run", seed, trace.best_kl)
        kls = np.array([s["best_kl"] for s in per_seed if s["best_kl"] is not None], dtype=float)
        summary = {
            "sweep_point": point,
            "per_seed": per_seed,
            "mean_best_kl": float(kls.mean()) if kls.size else None,
            "std_best_kl": float(kls.std()) if kls.size else None,
            "median_best_kl": float(np.median(kls)) if kls.size else None,
        }
        _write_json(summary, run_dir / "summary.json")
        summaries.append(summary)
    return summaries


def cmd_train(args) -> int:
    spec, config = load_spec(args.spec)
    if args.repeats is not None:
        spec["repeats"] = args.repeats
    out_dir = Path(args.out or spec["output_dir"])
    for summary in run_experiment(spec, config, out_dir):
        label = " ".join(f"{k}={v}" for k, v in summary["sweep_point"].items()) or "run"
        print(f"{label}: mean best KL {summary['mean_best_kl']} (std {summary['std_best_kl']})")
    return 0


# -- evaluate ------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    samples = datasets.load_csv(args.samples)
    reference = datasets.load_csv(args.reference)
    if samples.shape[1] != reference.shape[1]:
        raise CliError(f"dimension mismatch: samples have {samples.shape[1]}, reference {reference.shape[1]}")
    if args.transform:
        model = transforms.TransformModel.from_dict(json.loads(Path(args.transform).read_text()))
        samples, reference = transforms.forward(model, samples), transforms.forward(model, reference)
    q = metrics.histogram(reference, args.r)
    p = metrics.histogram(samples, args.r)
    report = {
        "kl": metrics.kl_divergence(q, p, args.epsilon),
        "r": args.r,
        "epsilon": args.epsilon,
        "dim": int(samples.shape[1]),
        "n_samples": int(len(samples)),
        "n_reference": int(len(reference)),
    }
    text = json.dumps(report, indent=1)
    if args.out:
        atomic_write(Path(args.out), text + "\n")
    print(text)
    return 0


# -- resources -----------------------------------------------------------------

def cmd_resources(args) -> int:
    rows = []
    for kind in args.kinds:
        for d in range(args.d_min, args.d_max + 1):
            if kind == "continuous":
                rows.append(resources.estimate(kind, d, 1, args.n_blocks_cont, args.n_shots))
            else:
                for r in range(args.r_min, args.r_max + 1):
                    rows.append(resources.estimate(kind, d, r, args.n_blocks_disc, 1))
    buf = io.StringIO()
    names = [f.name for f in fields(resources.ResourceEstimate)]
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_dict())
    crossover = {
        "crossover_r": resources.runtime_crossover_r(args.n_shots, args.n_blocks_cont, args.n_blocks_disc),
        "n_shots": args.n_shots,
        "n_blocks_cont": args.n_blocks_cont,
        "n_blocks_disc": args.n_blocks_disc,
        "runtime_unit": resources.RUNTIME_UNIT,
    }
    if args.out:
        out = Path(args.out)
        atomic_write(out, buf.getvalue())
        _write_json(crossover, out.with_suffix(".crossover.json"))
    else:
        sys.stdout.write(buf.getvalue())
    print(f"crossover_r={crossover['crossover_r']} (runtime in {resources.RUNTIME_UNIT})", file=sys.stderr)
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgenbench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset or load stock returns")
    p.add_argument("--name", required=True, choices=["mg", "x", "o", "stocks"], help="dataset family")
    p.add_argument("--dim", type=int, default=2, help="dimension (2 or 3)")
    p.add_argument("--n", type=int, default=None, help="number of points (default 50000 in 2D, 100000 in 3D)")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--csv", action="append", help="price CSV with date,close columns (repeat per stock)")
    p.add_argument("--out", default="data.csv", help="output CSV; metadata goes next to it as .meta.json")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("transform", help="fit and apply min-max or PIT, or invert a fitted transform")
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--kind", choices=transforms.KINDS, default=transforms.PIT, help="transform to fit")
    p.add_argument("--model", help="transform model JSON (written after fitting, read if it exists)")
    p.add_argument("--refit", action="store_true", help="refit even if --model exists")
    p.add_argument("--inverse", action="store_true", help="map [0,1]^d points back to data space")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("train", help="run an experiment spec (JSON) over its seeds")
    p.add_argument("spec", help="experiment spec JSON: TrainConfig fields plus output_dir, repeats, sweep, ...")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--repeats", type=int, help="override the number of seeds")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="KL divergence of a sample file against a reference file")
    p.add_argument("--samples", required=True, help="model samples CSV")
    p.add_argument("--reference", required=True, help="reference (training) data CSV")
    p.add_argument("--r", type=int, default=4, help="bins per dimension are 2^r")
    p.add_argument("--transform", help="transform model JSON applied to both files first")
    p.add_argument("--epsilon", type=float, default=metrics.DEFAULT_EPSILON, help="model-side smoothing")
    p.add_argument("--out", help="write the JSON report here as well")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("resources", help="resource estimates per generated sample as CSV")
    p.add_argument("--kinds", nargs="+", default=["continuous", "standard", "copula"],
                   choices=["continuous", "standard", "copula"], help="architectures")
    p.add_argument("--d-min", type=int, default=1, help="smallest dimension")
    p.add_argument("--d-max", type=int, default=5, help="largest dimension")
    p.add_argument("--r-min", type=int, default=2, help="smallest qubits per dimension (discrete)")
    p.add_argument("--r-max", type=int, default=300, help="largest qubits per dimension (discrete)")
    p.add_argument("--n-blocks-cont", type=int, default=8, help="blocks of the continuous circuit")
    p.add_argument("--n-blocks-disc", type=int, default=3, help="blocks of the discrete circuits")
    p.add_argument("--n-shots", type=int, default=100, help="shots per continuous sample")
    p.add_argument("--out", help="CSV path (default stdout); crossover summary goes to .crossover.json")
    p.set_defaults(func=cmd_resources)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliError, ConfigError, datasets.DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
