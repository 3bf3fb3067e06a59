"""End-to-end protocol wiring: scale, split, augment, train, compare.

The order of operations is fixed: fit the scaling on the full dataset,
scale, randomly hold out test observations, then corrupt 10 copies of
every observation on both sides of the split. All randomness fans out
from one root seed through named streams (split / corruption / model
seeds), so every stage is reproducible in isolation and a benchmark run
is a pure function of its config.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from . import dae
from .corruption import AugmentedDataset, CorruptionSpec, augment
from .data_io import SplitSpec, SurfaceDataset, SyntheticConfig, generate_synthetic, split_indices
from .evaluate import ComparisonReport, TpsEvalConfig, compute_metrics, run_comparison
from .rng import derive_seed
from .surface import ScalingTransform, fit_scaling, scale, unscale

__all__ = [
    "ProtocolConfig",
    "PreparedData",
    "BenchmarkConfig",
    "BenchmarkResult",
    "prepare",
    "train_model",
    "run_benchmark",
]

VALIDATION_FRACTION = 0.10


@dataclass(frozen=True)
class ProtocolConfig:
    """Data-side protocol knobs; the root seed feeds every derived stream."""

    nu: float = 0.75
    copies: int = 10
    test_fraction: float = 0.10
    seed: int = 0
    min_survivors: int = 5


@dataclass(frozen=True)
class PreparedData:
    scaling: ScalingTransform
    train_scaled: tuple
    test_scaled: tuple
    train_set: AugmentedDataset
    test_set: AugmentedDataset
    train_indices: tuple
    test_indices: tuple


def prepare(dataset: SurfaceDataset, cfg: ProtocolConfig) -> PreparedData:
    """Scale, split and augment a dataset of complete surfaces."""
    scaling = fit_scaling(list(dataset.surfaces))
    scaled = [scale(s, scaling) for s in dataset.surfaces]
    train_idx, test_idx = split_indices(
        len(scaled), SplitSpec(cfg.test_fraction, seed=derive_seed(cfg.seed, "split"))
    )
    train_scaled = tuple(scaled[i] for i in train_idx)
    test_scaled = tuple(scaled[i] for i in test_idx)
    train_set = augment(
        list(train_scaled),
        CorruptionSpec(cfg.nu, derive_seed(cfg.seed, "corruption", "train"), cfg.min_survivors),
        cfg.copies,
    )
    test_set = augment(
        list(test_scaled),
        CorruptionSpec(cfg.nu, derive_seed(cfg.seed, "corruption", "test"), cfg.min_survivors),
        cfg.copies,
    )
    return PreparedData(
        scaling=scaling,
        train_scaled=train_scaled,
        test_scaled=test_scaled,
        train_set=train_set,
        test_set=test_set,
        train_indices=tuple(int(i) for i in train_idx),
        test_indices=tuple(int(i) for i in test_idx),
    )


def carve_validation(prepared: PreparedData, cfg: ProtocolConfig):
    """Split the augmented training set for early stopping / searches.

    The last 10 percent of training observations (by index) become the
    validation pool, keeping the random test holdout untouched. Returns
    (fit_set, val_set).
    """
    n_obs = len(prepared.train_scaled)
    n_val = max(1, -(-n_obs // 10)) if n_obs > 1 else 0
    if n_val == 0:
        return prepared.train_set, None
    copies = prepared.train_set.copies_per_observation
    cut = (n_obs - n_val) * copies
    fit_examples = prepared.train_set.examples[:cut]
    val_examples = prepared.train_set.examples[cut:]
    return (
        AugmentedDataset(fit_examples, copies),
        AugmentedDataset(val_examples, copies),
    )


def train_model(
    kind: str,
    model_cfg,
    prepared: PreparedData,
    cfg: ProtocolConfig,
    early_stop: bool = True,
) -> dae.TrainedModel:
    """Train one DAE on the prepared data, with optional early stopping."""
    if early_stop:
        fit_set, val_set = carve_validation(prepared, cfg)
    else:
        fit_set, val_set = prepared.train_set, None
    return dae.train(kind, model_cfg, fit_set, prepared.scaling, val_set=val_set)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Full synthetic benchmark: data generation through the final report."""

    protocol: ProtocolConfig = ProtocolConfig()
    synthetic: SyntheticConfig = SyntheticConfig()
    fcnn: dae.FcnnConfig = dae.FcnnConfig(epochs=300)
    cnn: dae.CnnConfig = dae.CnnConfig(epochs=150, learning_rate=3e-3)
    tps: TpsEvalConfig = TpsEvalConfig()
    early_stop: bool = True
    threads: int = 1

    def resolved(self) -> "BenchmarkConfig":
        """Derive per-component seeds from the root protocol seed."""
        root = self.protocol.seed
        return dataclasses.replace(
            self,
            synthetic=dataclasses.replace(self.synthetic, seed=derive_seed(root, "synthetic")),
            fcnn=dataclasses.replace(self.fcnn, seed=derive_seed(root, "init", "fcnn")),
            cnn=dataclasses.replace(self.cnn, seed=derive_seed(root, "init", "cnn")),
        )


@dataclass
class BenchmarkResult:
    report: ComparisonReport
    baseline_mae_bps: dict = field(default_factory=dict)  # untrained-net reference
    models: dict = field(default_factory=dict)
    prepared: PreparedData | None = None


def _untrained_mae(kind, model_cfg, prepared: PreparedData) -> float:
    """Test MAE of a freshly initialized, never-trained network."""
    net = dae.build_network(kind, model_cfg)
    untrained = dae.TrainedModel(
        network=net,
        scaling=prepared.scaling,
        config=dataclasses.asdict(model_cfg),
        kind=kind,
        final_train_loss=float("nan"),
    )
    preds = dae.reconstruct_batch(untrained, prepared.test_set)
    targets = [unscale(t, prepared.scaling) for _, t in prepared.test_set.examples]
    return compute_metrics(preds, targets).mae_bps


def run_benchmark(cfg: BenchmarkConfig, keep_predictions: bool = False) -> BenchmarkResult:
    """Generate data, run the whole protocol, and score all three methods."""
    cfg = cfg.resolved()
    dataset = generate_synthetic(cfg.synthetic)
    prepared = prepare(dataset, cfg.protocol)

    fcnn = train_model("fcnn", cfg.fcnn, prepared, cfg.protocol, cfg.early_stop)
    cnn = train_model("cnn", cfg.cnn, prepared, cfg.protocol, cfg.early_stop)

    report = run_comparison(
        prepared.test_set,
        cfg.tps,
        fcnn,
        cnn,
        scaling=prepared.scaling,
        seeds={
            "root": cfg.protocol.seed,
            "synthetic": cfg.synthetic.seed,
            "fcnn": cfg.fcnn.seed,
            "cnn": cfg.cnn.seed,
        },
        threads=cfg.threads,
        keep_predictions=keep_predictions,
    )
    baselines = {
        "fcnn": _untrained_mae("fcnn", cfg.fcnn, prepared),
        "cnn": _untrained_mae("cnn", cfg.cnn, prepared),
    }
    return BenchmarkResult(
        report=report,
        baseline_mae_bps=baselines,
        models={"fcnn": fcnn, "cnn": cnn},
        prepared=prepared,
    )
