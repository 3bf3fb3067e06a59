"""Command-line entry point.

Subcommands wire the pipeline end to end:

    generate   write a synthetic (or bundled-fixture) dataset CSV
    train      scale/split/augment a dataset and train one autoencoder
    evaluate   score spline and/or trained models on held-out examples
    complete   fill one sparse surface CSV with a chosen method

Every run writes a manifest echoing its effective configuration
(defaults, then config file, then flags), so any output can be
regenerated from its manifest alone. All randomness derives from the
single --seed via named streams. Exit codes: 0 success, 1 runtime or
data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, dae, pipeline, tps
from .corruption import AugmentedDataset
from .data_io import (
    FIXTURE_NAMES,
    SurfaceDataset,
    SyntheticConfig,
    fixture_dataset,
    fixture_masked_input,
    load_csv,
    load_fixture,
    save_csv,
)
from .evaluate import TpsEvalConfig, render_text, report_to_dict, run_comparison
from .exceptions import DivergenceError, YieldFillError
from .rng import derive_seed
from .surface import (
    MaskedSurface,
    ScalingTransform,
    YieldSurface,
    monotonicity_report,
    scale,
    unscale,
)

THREADS_ENV = "YIELDFILL_THREADS"

_GENERATE_DEFAULTS = {
    "n": 63,
    "seed": 0,
    "fixture": None,
    "noise_sigma": SyntheticConfig.noise_sigma,
    "drift_sigma": SyntheticConfig.drift_sigma,
}

_TRAIN_DEFAULTS = {
    "model": None,
    "nu": 0.75,
    "seed": 0,
    "copies": 10,
    "test_fraction": 0.10,
    "epochs": 300,
    "batch_size": 32,
    "learning_rate": None,  # per-model default below
    "decay": 0.0,
    "hidden_width": 256,
    "conv_blocks": 2,
    "filters": "8,8",
    "trials": 0,
    "patience": dae.EARLY_STOP_PATIENCE,
    "early_stop": True,
}

_EVALUATE_DEFAULTS = {
    "fixture": None,
    "tps": False,
    "fcnn": None,
    "cnn": None,
    "nu": 0.75,
    "seed": 0,
    "copies": 10,
    "test_fraction": 0.10,
    "lambda_grid": ",".join(str(v) for v in tps.DEFAULT_LAMBDA_GRID),
    "folds": 5,
    "threads": None,
    "figures": True,
}

_COMPLETE_DEFAULTS = {
    "method": None,
    "model": None,
    "lambda_grid": ",".join(str(v) for v in tps.DEFAULT_LAMBDA_GRID),
    "folds": 5,
    "figures": True,
}

_MODEL_LR_DEFAULTS = {"fcnn": 1e-3, "cnn": 3e-3}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yieldfill",
        description=(
            "Reconstruct complete rating/tenor yield surfaces from sparse "
            "observations with thin plate splines and denoising autoencoders."
        ),
    )
    parser.add_argument("--version", action="version", version=f"yieldfill {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument(
        "--config",
        type=Path,
        help="JSON file of option defaults; explicit flags take precedence",
    )

    g = sub.add_parser(
        "generate", parents=[shared], help="write a dataset CSV plus manifest"
    )
    g.add_argument("--out", type=Path, required=True, help="output directory")
    g.add_argument("--n", type=int, help="number of synthetic observations")
    g.add_argument("--seed", type=int)
    g.add_argument("--fixture", choices=FIXTURE_NAMES, help="emit a bundled fixture instead")
    g.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    g.add_argument("--drift-sigma", type=float, dest="drift_sigma")

    t = sub.add_parser(
        "train", parents=[shared], help="train a denoising autoencoder on a dataset"
    )
    t.add_argument("data", type=Path, help="dataset CSV of complete surfaces")
    t.add_argument("--out", type=Path, required=True, help="output directory")
    t.add_argument("--model", choices=("fcnn", "cnn"))
    t.add_argument("--nu", type=float, help="corruption proportion")
    t.add_argument("--seed", type=int, help="root seed (split/corruption/init/search)")
    t.add_argument("--copies", type=int, help="corrupted copies per observation")
    t.add_argument("--test-fraction", type=float, dest="test_fraction")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int, dest="batch_size")
    t.add_argument("--learning-rate", type=float, dest="learning_rate")
    t.add_argument("--decay", type=float)
    t.add_argument("--hidden-width", type=int, dest="hidden_width")
    t.add_argument("--conv-blocks", type=int, dest="conv_blocks")
    t.add_argument("--filters", help="comma-separated filters per conv block")
    t.add_argument("--trials", type=int, help="random-search trials before training")
    t.add_argument("--patience", type=int, help="early-stopping patience in epochs")
    t.add_argument("--early-stop", action=argparse.BooleanOptionalAction, dest="early_stop")

    e = sub.add_parser(
        "evaluate", parents=[shared], help="score methods on held-out corrupted surfaces"
    )
    e.add_argument("data", type=Path, nargs="?", help="dataset CSV (omit with --fixture)")
    e.add_argument("--out", type=Path, required=True, help="output directory")
    e.add_argument("--fixture", choices=FIXTURE_NAMES, help="evaluate on the bundled sparse panel")
    e.add_argument("--tps", action=argparse.BooleanOptionalAction, help="include the spline")
    e.add_argument("--fcnn", type=Path, help="trained fcnn model file")
    e.add_argument("--cnn", type=Path, help="trained cnn model file")
    e.add_argument("--nu", type=float)
    e.add_argument("--seed", type=int, help="must match the training seed for a fair holdout")
    e.add_argument("--copies", type=int)
    e.add_argument("--test-fraction", type=float, dest="test_fraction")
    e.add_argument("--lambda-grid", dest="lambda_grid", help="comma-separated smoothing grid")
    e.add_argument("--folds", type=int)
    e.add_argument("--threads", type=int, help=f"worker cap (default ${THREADS_ENV} or 1)")
    e.add_argument("--figures", action=argparse.BooleanOptionalAction, help="render PNG figures")

    c = sub.add_parser(
        "complete", parents=[shared], help="fill one sparse surface CSV"
    )
    c.add_argument("data", type=Path, help="sparse surface CSV (single block)")
    c.add_argument("--out", type=Path, required=True, help="output CSV path")
    c.add_argument("--method", choices=("tps", "fcnn", "cnn"))
    c.add_argument("--model", type=Path, help="trained model file (fcnn/cnn methods)")
    c.add_argument("--lambda-grid", dest="lambda_grid")
    c.add_argument("--folds", type=int)
    c.add_argument("--figures", action=argparse.BooleanOptionalAction)
    return parser


def _effective_config(args, defaults: dict, parser) -> dict:
    """defaults < config file < explicit flags, with unknown keys rejected."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config file {args.config}: {exc}")
        unknown = set(loaded) - set(defaults)
        if unknown:
            parser.error(f"unknown config keys {sorted(unknown)}")
        merged.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _parse_lambda_grid(text: str, parser) -> tuple:
    try:
        grid = tuple(float(v) for v in str(text).split(",") if v.strip() != "")
    except ValueError:
        parser.error(f"bad --lambda-grid {text!r}")
    if not grid:
        parser.error("--lambda-grid must list at least one value")
    return grid


def _parse_filters(text, parser) -> tuple:
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip() != "")
    except ValueError:
        parser.error(f"bad --filters {text!r}")


def _write_manifest(path: Path, command: str, config: dict, inputs: dict, outputs: dict):
    payload = {
        "command": command,
        "version": __version__,
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()},
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_complete_dataset(path: Path) -> SurfaceDataset:
    dataset = load_csv(path)
    if not len(dataset):
        raise YieldFillError(f"{path} contains no surfaces")
    for index, surface in enumerate(dataset.surfaces):
        if not surface.is_complete:
            raise YieldFillError(
                f"{path}: surface {index} has missing cells; the training "
                "protocol needs complete surfaces"
            )
    return dataset


def _cmd_generate(args, parser) -> int:
    cfg = _effective_config(args, _GENERATE_DEFAULTS, parser)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg["fixture"]:
        dataset = fixture_dataset(cfg["fixture"])
    else:
        synth = dataclasses.replace(
            SyntheticConfig(),
            n_observations=cfg["n"],
            seed=cfg["seed"],
            noise_sigma=cfg["noise_sigma"],
            drift_sigma=cfg["drift_sigma"],
        )
        dataset = pipeline.generate_synthetic(synth)
    csv_path = out_dir / "surfaces.csv"
    save_csv(dataset, csv_path)
    _write_manifest(
        out_dir / "generate_manifest.json", "generate", cfg, {},
        {"surfaces": csv_path},
    )
    print(f"wrote {len(dataset)} surface(s) to {csv_path}")
    return 0


def _model_config(kind: str, cfg: dict, seed: int):
    lr = cfg["learning_rate"]
    if lr is None:
        lr = _MODEL_LR_DEFAULTS[kind]
    common = dict(
        learning_rate=lr,
        decay=cfg["decay"],
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        seed=derive_seed(seed, "init", kind),
    )
    if kind == "fcnn":
        return dae.FcnnConfig(hidden_width=cfg["hidden_width"], **common)
    return dae.CnnConfig(
        conv_blocks=cfg["conv_blocks"],
        filters_per_block=cfg["_filters"],
        **common,
    )


def _cmd_train(args, parser) -> int:
    cfg = _effective_config(args, _TRAIN_DEFAULTS, parser)
    if not cfg["model"]:
        parser.error("--model is required (fcnn or cnn)")
    cfg["_filters"] = _parse_filters(cfg["filters"], parser)
    kind = cfg["model"]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    dataset = _load_complete_dataset(args.data)
    protocol = pipeline.ProtocolConfig(
        nu=cfg["nu"], copies=cfg["copies"],
        test_fraction=cfg["test_fraction"], seed=cfg["seed"],
    )
    prepared = pipeline.prepare(dataset, protocol)

    if cfg["trials"]:
        fit_set, val_set = pipeline.carve_validation(prepared, protocol)
        space = dae.SearchSpace(epochs=max(1, cfg["epochs"] // 4))
        model_cfg, trial_log = dae.random_search(
            kind, space, fit_set, val_set, prepared.scaling,
            trials=cfg["trials"], seed=derive_seed(cfg["seed"], "search"),
        )
        print(f"random search picked {model_cfg} from {cfg['trials']} trial(s)")
        model_cfg = dataclasses.replace(model_cfg, epochs=cfg["epochs"])
    else:
        model_cfg = _model_config(kind, cfg, cfg["seed"])

    try:
        model = pipeline.train_model(
            kind, model_cfg, prepared, protocol, early_stop=cfg["early_stop"]
        )
    except DivergenceError as exc:
        checkpoint = out_dir / "checkpoint.bin"
        if exc.last_good_params is not None:
            net = dae.build_network(kind, model_cfg)
            net.set_param_vector(exc.last_good_params)
            dae.nn.save_network(net, checkpoint)
        print(f"error: {exc}; last good checkpoint at {checkpoint}", file=sys.stderr)
        return 1

    model_path = out_dir / "model.bin"
    sidecar = dae.save_model(model, model_path)
    from .plots import save_loss_curve

    loss_png = save_loss_curve(model.loss_history, model.val_history, out_dir / "loss_curve.png")
    cfg.pop("_filters")
    _write_manifest(
        out_dir / "train_manifest.json", "train",
        {**cfg, "model_config": dataclasses.asdict(model_cfg)},
        {"data": args.data},
        {
            "model": model_path,
            "model_manifest": sidecar,
            "loss_curve": loss_png,
            "scaling_factor": prepared.scaling.factor,
            "train_indices": list(prepared.train_indices),
            "test_indices": list(prepared.test_indices),
            "epochs_run": len(model.loss_history),
            "final_train_loss": model.final_train_loss,
        },
    )
    print(
        f"trained {kind} for {len(model.loss_history)} epoch(s); "
        f"final train MSE {model.final_train_loss:.3e}; model at {model_path}"
    )
    return 0


def _fixture_test_set(name: str, models: list) -> tuple[AugmentedDataset, ScalingTransform]:
    """The bundled sparse panel as a one-example test set."""
    full, mask = load_fixture(name)
    factor = models[0].scaling.factor if models else float(np.nanmax(full.values))
    scaling = ScalingTransform(factor)
    masked = fixture_masked_input(name, factor=factor)
    target = scale(full, scaling)
    return AugmentedDataset(((masked, target),), 1), scaling


def _cmd_evaluate(args, parser) -> int:
    cfg = _effective_config(args, _EVALUATE_DEFAULTS, parser)
    out_dir = Path(args.out)
    lambda_grid = _parse_lambda_grid(cfg["lambda_grid"], parser)
    threads = cfg["threads"]
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))

    models = {}
    for kind in ("fcnn", "cnn"):
        if cfg[kind]:
            models[kind] = dae.load_model(Path(cfg[kind]))
    use_tps = bool(cfg["tps"])
    if not use_tps and not models:
        parser.error("select at least one method: --tps, --fcnn PATH, --cnn PATH")

    if cfg["fixture"]:
        test_set, scaling = _fixture_test_set(cfg["fixture"], list(models.values()))
    else:
        if args.data is None:
            parser.error("a dataset CSV is required unless --fixture is given")
        dataset = _load_complete_dataset(args.data)
        protocol = pipeline.ProtocolConfig(
            nu=cfg["nu"], copies=cfg["copies"],
            test_fraction=cfg["test_fraction"], seed=cfg["seed"],
        )
        prepared = pipeline.prepare(dataset, protocol)
        test_set, scaling = prepared.test_set, prepared.scaling

    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_comparison(
        test_set,
        TpsEvalConfig(lambda_grid, cfg["folds"]) if use_tps else None,
        models.get("fcnn"),
        models.get("cnn"),
        scaling=scaling,
        seeds={"root": cfg["seed"]},
        threads=max(1, threads),
        keep_predictions=True,
    )
    json_path = out_dir / "report.json"
    text_path = out_dir / "report.txt"
    json_path.write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    text = render_text(report)
    text_path.write_text(text)
    outputs = {"report_json": json_path, "report_txt": text_path}

    if cfg["figures"]:
        from .plots import save_metrics_chart, save_reconstruction_panel

        outputs["metrics_png"] = save_metrics_chart(report, out_dir / "report_metrics.png")
        target0 = unscale(test_set.examples[0][1], scaling)
        sample = {name: preds[0] for name, preds in report.predictions.items() if preds}
        if sample:
            outputs["example_png"] = save_reconstruction_panel(
                target0, sample, out_dir / "report_example.png"
            )

    _write_manifest(
        out_dir / "evaluate_manifest.json", "evaluate",
        {**cfg, "threads": threads},
        {"data": args.data or f"fixture:{cfg['fixture']}"},
        outputs,
    )
    print(text, end="")
    return 0


def _cmd_complete(args, parser) -> int:
    cfg = _effective_config(args, _COMPLETE_DEFAULTS, parser)
    if not cfg["method"]:
        parser.error("--method is required (tps, fcnn or cnn)")
    method = cfg["method"]
    lambda_grid = _parse_lambda_grid(cfg["lambda_grid"], parser)
    if method in ("fcnn", "cnn") and not cfg["model"]:
        parser.error(f"--method {method} needs --model PATH")

    dataset = load_csv(args.data)
    if len(dataset) != 1:
        raise YieldFillError(
            f"{args.data} holds {len(dataset)} surfaces; complete expects exactly one"
        )
    sparse = dataset.surfaces[0]
    observed = sparse.present
    if method == "tps":
        factor = float(np.nanmax(sparse.values)) if observed.any() else 1.0
        scaling = ScalingTransform(factor)
        masked = MaskedSurface(
            np.where(observed, sparse.values / factor, 0.0), observed
        )
        completed = unscale(
            tps.complete_surface(masked, lambda_grid, cfg["folds"]), scaling
        )
    else:
        model = dae.load_model(Path(cfg["model"]))
        masked = MaskedSurface(
            np.where(observed, sparse.values / model.scaling.factor, 0.0), observed
        )
        completed = dae.reconstruct(model, masked)
    completed = YieldSurface(completed.values, sparse.observation_date)

    report = monotonicity_report(completed)
    if report.n_violations:
        print(
            f"warning: completed surface has {len(report.rating_violations)} rating "
            f"and {len(report.tenor_violations)} tenor monotonicity violation(s)",
            file=sys.stderr,
        )
        for tenor_years, (hi, lo), magnitude in report.rating_violations:
            print(
                f"warning: rating order {hi}>{lo} at {tenor_years}y by {magnitude:.4f}",
                file=sys.stderr,
            )

    out_path = Path(args.out)
    if out_path.parent:
        out_path.parent.mkdir(parents=True, exist_ok=True)
    save_csv(SurfaceDataset((completed,), source="csv"), out_path)
    outputs = {"completed": out_path}
    if cfg["figures"]:
        from .plots import save_surface_heatmap

        outputs["heatmap"] = save_surface_heatmap(
            completed, f"completed ({method})", out_path.with_suffix(".png")
        )
    _write_manifest(
        out_path.with_suffix(".manifest.json"), "complete", cfg,
        {"data": args.data}, outputs,
    )
    print(f"wrote completed surface to {out_path} ({report.n_violations} violation warning(s))")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "complete": _cmd_complete,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, parser)
    except (YieldFillError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
