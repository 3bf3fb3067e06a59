"""Error metrics and the three-method comparison report.

MAE and RMSE are pooled over every cell of every (prediction, target)
pair; both are reported in basis points and in percent relative to the
true yields. The percent figures aggregate per-cell ratios (mean of
|err|/true), not a ratio of pooled means; the choice matters at the
margins, so it is fixed here and baked into the regression baselines.

Monotonicity comes in two flavors: the full-surface rate (all 362
adjacent comparisons, averaged over predictions) inside MetricsReport,
and the rating-only pooled rate of :func:`violation_rate`, which tracks
how often a reconstructed surface orders adjacent credit grades the
wrong way round.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import tps
from .corruption import AugmentedDataset
from .dae import TrainedModel, reconstruct_batch
from .exceptions import YieldFillError
from .surface import (
    N_RATINGS,
    N_TENORS,
    ScalingTransform,
    YieldSurface,
    monotonicity_report,
    unscale,
)

__all__ = [
    "MetricsReport",
    "ComparisonReport",
    "TpsEvalConfig",
    "compute_metrics",
    "violation_rate",
    "run_comparison",
    "render_text",
    "report_to_dict",
    "report_to_json",
]


@dataclass(frozen=True)
class MetricsReport:
    """Pooled reconstruction error metrics in bps and percent."""

    mae_bps: float
    rmse_bps: float
    mae_pct: float
    rmse_pct: float
    n_points: int
    monotonicity_violation_rate: float


@dataclass(frozen=True)
class TpsEvalConfig:
    """Spline settings used when the comparison includes the TPS method."""

    lambda_grid: tuple = tps.DEFAULT_LAMBDA_GRID
    folds: int = 5


@dataclass
class ComparisonReport:
    """Per-method metrics on one shared set of (input, target) pairs."""

    methods: dict  # name -> MetricsReport
    n_examples: int
    excluded: dict  # name -> count of examples skipped due to errors
    rating_violation_rates: dict  # name -> pooled rating-only rate
    config_fingerprints: dict
    seeds: dict
    predictions: dict = field(default_factory=dict, repr=False)  # name -> [YieldSurface]


def compute_metrics(predictions: list[YieldSurface], targets: list[YieldSurface]) -> MetricsReport:
    """Pool errors over all cells of all pairs; inputs in percent units."""
    if len(predictions) != len(targets):
        raise ValueError(
            f"prediction/target counts differ: {len(predictions)} vs {len(targets)}"
        )
    if not predictions:
        raise ValueError("cannot compute metrics on zero examples")
    pred = np.stack([p.values for p in predictions])
    true = np.stack([t.values for t in targets])
    if np.isnan(pred).any() or np.isnan(true).any():
        raise ValueError("metrics require complete surfaces")
    err = pred - true
    abs_err = np.abs(err)
    rel = abs_err / true
    mono = float(np.mean([monotonicity_report(p).violation_rate for p in predictions]))
    return MetricsReport(
        mae_bps=float(abs_err.mean() * 100.0),
        rmse_bps=float(np.sqrt((err * err).mean()) * 100.0),
        mae_pct=float(rel.mean() * 100.0),
        rmse_pct=float(np.sqrt((rel * rel).mean()) * 100.0),
        n_points=int(err.size),
        monotonicity_violation_rate=mono,
    )


def violation_rate(predictions: list[YieldSurface]) -> float:
    """Fraction of adjacent rating comparisons out of order, pooled."""
    if not predictions:
        return 0.0
    values = np.stack([p.values for p in predictions])
    worse_minus_better = values[:, 1:, :] - values[:, :-1, :]
    return float((worse_minus_better < 0).mean())


def _complete_with_tps(masked, cfg: TpsEvalConfig, scaling: ScalingTransform):
    completed = tps.complete_surface(masked, cfg.lambda_grid, cfg.folds)
    return unscale(completed, scaling)


def _fingerprint(payload) -> str:
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def run_comparison(
    test_examples: AugmentedDataset,
    tps_cfg: TpsEvalConfig | None,
    fcnn: TrainedModel | None,
    cnn: TrainedModel | None,
    scaling: ScalingTransform | None = None,
    seeds: dict | None = None,
    threads: int = 1,
    keep_predictions: bool = False,
) -> ComparisonReport:
    """Complete every test input with each method and score the results.

    All methods see identical (input, target) pairs. Spline failures on
    individual examples (degenerate anchor geometry, unusable solves) are
    excluded from that method's pool and counted, never silently dropped;
    the corresponding targets are excluded too so metrics stay paired.
    """
    if scaling is None:
        for model in (fcnn, cnn):
            if model is not None:
                scaling = model.scaling
                break
    if scaling is None:
        raise ValueError("run_comparison needs a ScalingTransform when no model is given")
    if tps_cfg is None and fcnn is None and cnn is None:
        raise ValueError("no methods selected")

    targets = [unscale(t, scaling) for _, t in test_examples.examples]
    methods: dict[str, MetricsReport] = {}
    excluded: dict[str, int] = {}
    rating_rates: dict[str, float] = {}
    fingerprints: dict[str, str] = {}
    predictions_out: dict[str, list] = {}

    def record(name, predictions, kept_targets, n_excluded, fingerprint):
        methods[name] = compute_metrics(predictions, kept_targets)
        excluded[name] = n_excluded
        rating_rates[name] = violation_rate(predictions)
        fingerprints[name] = fingerprint
        if keep_predictions:
            predictions_out[name] = predictions

    if tps_cfg is not None:
        inputs = [masked for masked, _ in test_examples.examples]
        if threads > 1:
            def complete_or_error(masked):
                try:
                    return _complete_with_tps(masked, tps_cfg, scaling)
                except YieldFillError as exc:
                    return exc
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(complete_or_error, inputs))
        else:
            outcomes = []
            for masked in inputs:
                try:
                    outcomes.append(_complete_with_tps(masked, tps_cfg, scaling))
                except YieldFillError as exc:
                    outcomes.append(exc)
        kept, kept_targets, n_excluded = [], [], 0
        for outcome, target in zip(outcomes, targets):
            if isinstance(outcome, Exception):
                n_excluded += 1
            else:
                kept.append(outcome)
                kept_targets.append(target)
        if not kept:
            raise YieldFillError("spline completion failed on every test example")
        record(
            "tps", kept, kept_targets, n_excluded,
            _fingerprint({"lambda_grid": list(tps_cfg.lambda_grid), "folds": tps_cfg.folds}),
        )

    for name, model in (("fcnn", fcnn), ("cnn", cnn)):
        if model is None:
            continue
        preds = reconstruct_batch(model, test_examples)
        record(name, preds, targets, 0, _fingerprint(model.config))

    return ComparisonReport(
        methods=methods,
        n_examples=len(test_examples),
        excluded=excluded,
        rating_violation_rates=rating_rates,
        config_fingerprints=fingerprints,
        seeds=dict(seeds or {}),
        predictions=predictions_out,
    )


_METRIC_ROWS = (
    ("MAE (bps)", "mae_bps"),
    ("MAE (percent)", "mae_pct"),
    ("RMSE (bps)", "rmse_bps"),
    ("RMSE (percent)", "rmse_pct"),
)

_METHOD_ORDER = ("tps", "fcnn", "cnn")


def _ordered_methods(report: ComparisonReport) -> list[str]:
    names = [m for m in _METHOD_ORDER if m in report.methods]
    names += [m for m in report.methods if m not in names]
    return names


def render_text(report: ComparisonReport) -> str:
    """Aligned metric-by-method table plus the diagnostic footer."""
    names = _ordered_methods(report)
    width = max(len(label) for label, _ in _METRIC_ROWS)
    lines = [
        f"{'Metric':<{width}}  " + "  ".join(f"{name.upper():>8}" for name in names)
    ]
    for label, attr in _METRIC_ROWS:
        cells = "  ".join(
            f"{getattr(report.methods[name], attr):8.2f}" for name in names
        )
        lines.append(f"{label:<{width}}  {cells}")
    lines.append("")
    lines.append(f"examples evaluated: {report.n_examples}")
    for name in names:
        lines.append(
            f"{name}: rating-monotonicity violation rate "
            f"{report.rating_violation_rates[name]:.4f}, "
            f"excluded {report.excluded[name]}"
        )
    return "\n".join(lines) + "\n"


def report_to_dict(report: ComparisonReport) -> dict:
    return {
        "methods": {
            name: {
                "mae_bps": m.mae_bps,
                "rmse_bps": m.rmse_bps,
                "mae_pct": m.mae_pct,
                "rmse_pct": m.rmse_pct,
                "n_points": m.n_points,
                "monotonicity_violation_rate": m.monotonicity_violation_rate,
            }
            for name, m in report.methods.items()
        },
        "n_examples": report.n_examples,
        "excluded": report.excluded,
        "rating_violation_rates": report.rating_violation_rates,
        "config_fingerprints": report.config_fingerprints,
        "seeds": report.seeds,
    }


def report_to_json(report: ComparisonReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
