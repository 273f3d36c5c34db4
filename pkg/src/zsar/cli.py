"""Command-line entry point: fit weight maps, evaluate recognition regimes
over many splits, and generate synthetic datasets.

Exit codes: 0 on success, 2 on input or configuration errors, 3 on numerical
failures. Pass --json-errors for a machine-readable error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data as data_io
from .data import ConfigError, Dataset, LoadError, SyntheticWorldSpec, generate_synthetic
from .em import EmConfig
from .gaussians import fit_mle, standard_normal
from .linalg import KernelSpec, SingularPencilError, median_bandwidth
from .metrics import SplitRecord, make_report, report_to_json
from .pipelines import (DataValidationError, cross_validate, derived_seed, run_few_shot,
                        run_gzsl, run_inductive, run_transductive)
from .regression import HyperParams, fit_param_map, fit_param_map_linear, system_residuals

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_TAG_TRUE_MAP = 777

DEFAULTS = {
    "kernel": "auto",
    "bandwidth": None,
    "lambda_mu": 0.1,
    "lambda_1": 0.01,
    "lambda_sigma": 0.1,
    "lambda_2": 0.01,
    "em_max_iters": 100,
    "em_rel_tol": 1e-6,
    "n_splits": 30,
    "seed": 0,
    "synth_count": 200,
    "classifier_lambda": 1.0,
    "mode": "transductive",
    "shots": [2, 3, 4, 5],
    "jobs": 1,
    "standardize": False,
    "cv_trials": 5,
}

_REGIMES = ("zsl", "zsl-transductive", "gzsl", "few-shot")


def _resolve_config(args) -> dict:
    """Defaults, overridden by the --config JSON file, overridden by flags."""
    cfg = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from exc
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if isinstance(cfg["shots"], str):
        try:
            cfg["shots"] = [int(v) for v in cfg["shots"].split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"cannot parse shots list {cfg['shots']!r}") from exc
    if not cfg["shots"]:
        raise ConfigError("shots list must be non-empty")
    return cfg


def _resolve_kernel(cfg: dict, attributes) -> KernelSpec:
    kind = cfg["kernel"]
    if kind == "linear":
        return KernelSpec("linear")
    if kind in ("rbf", "auto"):
        bandwidth = cfg["bandwidth"]
        if bandwidth is None:
            bandwidth = median_bandwidth(attributes)
        return KernelSpec("rbf", float(bandwidth))
    raise ConfigError(f"unknown kernel {kind!r}, expected rbf, linear, or auto")


def _load_dataset(args, cfg) -> Dataset:
    for name in ("features", "labels", "attributes"):
        value = getattr(args, name)
        if value is None:
            raise ConfigError(f"--{name} is required")
        if not Path(value).exists():
            raise ConfigError(f"--{name} file does not exist: {value}")
    return data_io.load_dataset(args.features, args.labels, args.attributes,
                                standardize=bool(cfg["standardize"]))


def _kernel_json(kernel: KernelSpec | None):
    if kernel is None:
        return None
    return {"kind": kernel.kind,
            "bandwidth": None if kernel.bandwidth is None else float(kernel.bandwidth)}


def _hyper_json(hyper: HyperParams) -> dict:
    return {"lambda_mu": hyper.lambda_mu, "lambda_1": hyper.lambda_1,
            "lambda_sigma": hyper.lambda_sigma, "lambda_2": hyper.lambda_2}


def _cmd_fit(args) -> int:
    cfg = _resolve_config(args)
    dataset = _load_dataset(args, cfg)
    empty = np.flatnonzero(dataset.class_counts() == 0).tolist()
    if empty:
        raise DataValidationError(f"classes with no examples: {empty}")
    gaussians = [fit_mle(dataset.features[dataset.labels == c])
                 for c in range(dataset.n_classes)]
    hyper = HyperParams(cfg["lambda_mu"], cfg["lambda_1"],
                        cfg["lambda_sigma"], cfg["lambda_2"])
    if args.linear_map:
        param_map = fit_param_map_linear(gaussians, dataset.attributes, hyper)
    else:
        kernel = _resolve_kernel(cfg, dataset.attributes)
        param_map = fit_param_map(gaussians, dataset.attributes, kernel, hyper)
    data_io.save_param_map(args.out, param_map)
    res_mu, res_sigma = system_residuals(param_map, gaussians)
    summary = {
        "residuals": {"mean_system": res_mu, "logvar_system": res_sigma},
        "hyper": _hyper_json(hyper),
        "kernel": _kernel_json(param_map.kernel),
        "dims": {"classes": dataset.n_classes, "feature_dim": dataset.feature_dim,
                 "attr_dim": dataset.attr_dim},
        "standardize": bool(cfg["standardize"]),
    }
    summary_path = args.summary or f"{args.out}.summary.json"
    Path(summary_path).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _eval_one_split(args, cfg, dataset, splits, kernel, hyper, em_cfg, index) -> SplitRecord:
    split = splits[index]
    split_seed = int(cfg["seed"]) + index
    if args.regime == "zsl":
        report = run_inductive(dataset, split, kernel, hyper, split_id=index)
    elif args.regime == "zsl-transductive":
        report = run_transductive(dataset, split, kernel, hyper, em_cfg, split_id=index)
    elif args.regime == "gzsl":
        report = run_gzsl(dataset, split, kernel, hyper, int(cfg["synth_count"]),
                          float(cfg["classifier_lambda"]), split_seed, cfg["mode"],
                          em_cfg, split_id=index)
    elif args.regime == "few-shot":
        metrics = {}
        for shots in cfg["shots"]:
            sub = run_few_shot(dataset, split, kernel, hyper, int(shots), split_seed)
            metrics[f"unseen_acc_{int(shots)}shot"] = sub.per_split[0].metrics["unseen_acc"]
        return SplitRecord(index, metrics)
    else:
        raise ConfigError(f"unknown regime {args.regime!r}")
    return report.per_split[0]


def _write_per_split_csv(path, report) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split_id", "metric", "value"])
        for rec in report.per_split:
            for key in sorted(rec.metrics):
                writer.writerow([rec.split_id, key, repr(rec.metrics[key])])
            if rec.em_iterations is not None:
                writer.writerow([rec.split_id, "em_iterations", rec.em_iterations])


def _cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    dataset = _load_dataset(args, cfg)
    if args.splits:
        if not Path(args.splits).exists():
            raise ConfigError(f"--splits file does not exist: {args.splits}")
        splits = data_io.load_splits(args.splits)
        splits_echo = {"source": str(args.splits)}
    else:
        if args.n_seen is None:
            raise ConfigError("--n-seen is required when --splits is not given")
        splits = data_io.generate_splits(dataset.n_classes, args.n_seen,
                                         int(cfg["n_splits"]), int(cfg["seed"]))
        splits_echo = {"source": "generated", "n_seen": args.n_seen,
                       "n_splits": int(cfg["n_splits"])}
    kernel = _resolve_kernel(cfg, dataset.attributes)
    hyper = HyperParams(cfg["lambda_mu"], cfg["lambda_1"],
                        cfg["lambda_sigma"], cfg["lambda_2"])
    cv_echo = None
    if args.cv_grid:
        try:
            raw_grid = json.loads(Path(args.cv_grid).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read grid file {args.cv_grid}: {exc}") from exc
        grid = [HyperParams(**entry) for entry in raw_grid]
        hyper = cross_validate(dataset, splits[0], kernel, grid,
                               int(cfg["cv_trials"]), int(cfg["seed"]))
        cv_echo = {"grid_size": len(grid), "trials": int(cfg["cv_trials"])}
    em_cfg = EmConfig(int(cfg["em_max_iters"]), float(cfg["em_rel_tol"]))

    indices = range(len(splits))
    if int(cfg["jobs"]) > 1:
        with ThreadPoolExecutor(max_workers=int(cfg["jobs"])) as pool:
            records = list(pool.map(
                lambda i: _eval_one_split(args, cfg, dataset, splits, kernel, hyper,
                                          em_cfg, i), indices))
    else:
        records = [_eval_one_split(args, cfg, dataset, splits, kernel, hyper, em_cfg, i)
                   for i in indices]

    config_echo = {
        "regime": args.regime,
        "kernel": _kernel_json(kernel),
        "hyper": _hyper_json(hyper),
        "em": {"max_iters": em_cfg.max_iters, "rel_tol": em_cfg.rel_tol,
               "variance_floor": em_cfg.variance_floor},
        "synth_count": int(cfg["synth_count"]),
        "classifier_lambda": float(cfg["classifier_lambda"]),
        "mode": cfg["mode"],
        "shots": [int(s) for s in cfg["shots"]],
        "seed": int(cfg["seed"]),
        "splits": splits_echo,
        "standardize": bool(cfg["standardize"]),
        "paths": {"features": str(args.features), "labels": str(args.labels),
                  "attributes": str(args.attributes)},
        "cv": cv_echo,
    }
    report = make_report(records, config_echo, int(cfg["seed"]))
    out = Path(args.out)
    out.write_text(report_to_json(report))
    csv_path = Path(args.per_split_csv) if args.per_split_csv \
        else out.with_suffix(".per_split.csv")
    _write_per_split_csv(csv_path, report)
    return EXIT_OK


def _world_spec_from_json(raw: dict) -> SyntheticWorldSpec:
    known = {"n_classes", "dim_d", "dim_k", "noise_scale", "examples_per_class",
             "attribute_scheme", "seed", "w_true", "w_scale"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown synthetic-spec keys: {sorted(unknown)}")
    for key in ("n_classes", "dim_d", "dim_k"):
        if key not in raw:
            raise ConfigError(f"synthetic spec is missing {key!r}")
    seed = int(raw.get("seed", 0))
    dim_d, dim_k = int(raw["dim_d"]), int(raw["dim_k"])
    if "w_true" in raw:
        w_true = np.asarray(raw["w_true"], dtype=np.float64)
    else:
        rng = np.random.Generator(np.random.PCG64(derived_seed(seed, _TAG_TRUE_MAP)))
        w_true = standard_normal(rng, (dim_d, dim_k)) * float(raw.get("w_scale", 1.0))
    return SyntheticWorldSpec(
        n_classes=int(raw["n_classes"]),
        dim_d=dim_d,
        dim_k=dim_k,
        w_true=w_true,
        noise_scale=float(raw.get("noise_scale", 1.0)),
        examples_per_class=raw.get("examples_per_class", 100),
        attribute_scheme=raw.get("attribute_scheme", "random_unit"),
        seed=seed,
    )


def _cmd_synth_data(args) -> int:
    try:
        raw = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read spec file {args.spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec file {args.spec} is not valid JSON: {exc}") from exc
    spec = _world_spec_from_json(raw)
    dataset, truths = generate_synthetic(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_io.save_dataset(dataset, out_dir / "features.zsm", out_dir / "labels.csv",
                         out_dir / "attributes.csv")
    ground = [{"class": c,
               "mean": [float(v) for v in g.mean],
               "log_var": [float(v) for v in g.log_var]}
              for c, g in enumerate(truths)]
    (out_dir / "ground_truth.json").write_text(
        json.dumps(ground, sort_keys=True, indent=2) + "\n")
    world = {
        "n_classes": spec.n_classes, "dim_d": spec.dim_d, "dim_k": spec.dim_k,
        "noise_scale": spec.noise_scale,
        "examples_per_class": [int(v) for v in spec.counts()],
        "attribute_scheme": spec.attribute_scheme, "seed": spec.seed,
        "w_true": [[float(v) for v in row] for row in spec.w_true],
    }
    (out_dir / "world.json").write_text(json.dumps(world, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON file with default overrides")
    shared.add_argument("--json-errors", action="store_true",
                        help="emit a machine-readable error record on stderr")

    data_flags = argparse.ArgumentParser(add_help=False)
    data_flags.add_argument("--features", help="binary feature matrix file")
    data_flags.add_argument("--labels", help="CSV labels file, one class per line")
    data_flags.add_argument("--attributes", help="per-class attribute matrix (CSV or binary)")
    data_flags.add_argument("--standardize", action="store_true", default=None,
                            help="standardize features per dimension at load time")

    model_flags = argparse.ArgumentParser(add_help=False)
    model_flags.add_argument("--kernel", choices=["rbf", "linear", "auto"])
    model_flags.add_argument("--bandwidth", type=float)
    model_flags.add_argument("--lambda-mu", type=float)
    model_flags.add_argument("--lambda-1", type=float)
    model_flags.add_argument("--lambda-sigma", type=float)
    model_flags.add_argument("--lambda-2", type=float)
    model_flags.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(
        prog="zsar",
        description="Attribute-conditioned class Gaussians for zero-shot, "
                    "transductive, generalized, and few-shot recognition.")
    sub = parser.add_subparsers(dest="command")

    fit = sub.add_parser("fit", parents=[shared, data_flags, model_flags],
                         help="fit the weight maps on all classes and save them")
    fit.add_argument("--out", required=True, help="output path for the fitted map")
    fit.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")
    fit.add_argument("--linear-map", action="store_true",
                     help="map raw attributes instead of kernel similarities")
    fit.set_defaults(func=_cmd_fit)

    ev = sub.add_parser("eval", parents=[shared, data_flags, model_flags],
                        help="evaluate a recognition regime over class splits")
    ev.add_argument("--regime", required=True, choices=list(_REGIMES))
    ev.add_argument("--splits", help="splits CSV; omit to generate splits")
    ev.add_argument("--n-seen", type=int, help="seen-class count for generated splits")
    ev.add_argument("--n-splits", type=int)
    ev.add_argument("--out", required=True, help="report JSON output path")
    ev.add_argument("--per-split-csv", help="per-split CSV path "
                                            "(default: <out>.per_split.csv)")
    ev.add_argument("--synth-count", type=int)
    ev.add_argument("--classifier-lambda", type=float)
    ev.add_argument("--mode", choices=["inductive", "transductive"])
    ev.add_argument("--shots", help="comma-separated shot counts for few-shot")
    ev.add_argument("--em-max-iters", type=int)
    ev.add_argument("--em-rel-tol", type=float)
    ev.add_argument("--jobs", type=int, help="parallel split workers")
    ev.add_argument("--cv-grid", help="JSON list of hyperparameter dicts to "
                                      "cross-validate before evaluating")
    ev.add_argument("--cv-trials", type=int)
    ev.set_defaults(func=_cmd_eval)

    synth = sub.add_parser("synth-data", parents=[shared],
                           help="generate a synthetic dataset with known truth")
    synth.add_argument("--spec", required=True, help="synthetic world spec JSON")
    synth.add_argument("--out-dir", required=True)
    synth.set_defaults(func=_cmd_synth_data)
    return parser


def _report_error(args, exc: Exception, code: int) -> None:
    print(f"error: {exc}", file=sys.stderr)
    if getattr(args, "json_errors", False):
        record = {"error": str(exc), "type": type(exc).__name__, "exit_code": code}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return EXIT_INPUT
    try:
        return args.func(args)
    except (SingularPencilError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _report_error(args, exc, EXIT_NUMERIC)
        return EXIT_NUMERIC
    except ArithmeticError as exc:
        _report_error(args, exc, EXIT_NUMERIC)
        return EXIT_NUMERIC
    except (LoadError, ConfigError, DataValidationError, ValueError, OSError) as exc:
        _report_error(args, exc, EXIT_INPUT)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
