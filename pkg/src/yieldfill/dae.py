"""Denoising autoencoders over yield surfaces: architectures and training.

Two architectures reconstruct a complete scaled surface from a corrupted
one: a fully connected net with a single overcomplete hidden layer, and a
convolutional net (conv/pool encoder, conv/upsample decoder) that exploits
the local correlation of adjacent cells and needs far fewer parameters.

Training minimizes the MSE between the reconstruction of the corrupted
input and the *uncorrupted* target, over all 195 cells. The corrupted
copies are fixed at augmentation time, not resampled per epoch. Both nets
end in a sigmoid, so reconstructions live in (0, 1) scaled units; inputs
are expected scaled the same way (maximum reference yield = 1).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import nn
from .corruption import AugmentedDataset
from .exceptions import ConfigError, DivergenceError
from .rng import derive_seed, stream
from .surface import MaskedSurface, N_CELLS, N_RATINGS, N_TENORS, ScalingTransform, YieldSurface, unscale

__all__ = [
    "FcnnConfig",
    "CnnConfig",
    "TrainedModel",
    "SearchSpace",
    "build_fcnn",
    "build_cnn",
    "build_network",
    "train",
    "reconstruct",
    "random_search",
    "save_model",
    "load_model",
]

INPUT_SHAPE = (1, N_RATINGS, N_TENORS)

# Loss threshold beyond which training is considered diverged; scaled
# yields are in (0,1], so any sane MSE is far below 1.
DIVERGENCE_LIMIT = 1e3

EARLY_STOP_PATIENCE = 50


@dataclass(frozen=True)
class FcnnConfig:
    """Single hidden layer, at least as wide as the 195-cell input."""

    hidden_width: int = 256
    learning_rate: float = 1e-3
    decay: float = 0.0
    batch_size: int = 32
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.hidden_width < N_CELLS:
            raise ConfigError(
                f"hidden layer must be overcomplete (>= {N_CELLS}), got {self.hidden_width}"
            )
        _validate_training_fields(self)


@dataclass(frozen=True)
class CnnConfig:
    """Conv blocks before one 2x2 pool, then conv/upsample back to 13x15."""

    conv_blocks: int = 2
    filters_per_block: tuple = (8, 8)
    learning_rate: float = 1e-3
    decay: float = 0.0
    batch_size: int = 32
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.conv_blocks <= 3:
            raise ConfigError(f"conv_blocks must be in [1, 3], got {self.conv_blocks}")
        filters = tuple(self.filters_per_block)
        if len(filters) != self.conv_blocks or any(f < 1 for f in filters):
            raise ConfigError(
                f"filters_per_block needs {self.conv_blocks} positive entries, got {filters}"
            )
        object.__setattr__(self, "filters_per_block", filters)
        _validate_training_fields(self)


def _validate_training_fields(cfg):
    if cfg.learning_rate <= 0:
        raise ConfigError(f"learning_rate must be positive, got {cfg.learning_rate}")
    if cfg.decay < 0:
        raise ConfigError(f"decay must be nonnegative, got {cfg.decay}")
    if cfg.batch_size < 1:
        raise ConfigError(f"batch_size must be positive, got {cfg.batch_size}")
    if cfg.epochs < 1:
        raise ConfigError(f"epochs must be positive, got {cfg.epochs}")


def build_fcnn(cfg: FcnnConfig) -> nn.Network:
    """flatten -> dense -> relu -> batchnorm -> dense -> sigmoid -> 13x15."""
    rng = stream(cfg.seed, "init")
    layers = [
        nn.Flatten(),
        nn.Dense(N_CELLS, cfg.hidden_width, init="he", rng=rng),
        nn.ReLU(),
        nn.BatchNorm(cfg.hidden_width),
        nn.Dense(cfg.hidden_width, N_CELLS, init="glorot", rng=rng),
        nn.Sigmoid(),
        nn.Reshape(*INPUT_SHAPE),
    ]
    return nn.Network(layers, INPUT_SHAPE)


def build_cnn(cfg: CnnConfig) -> nn.Network:
    """Replicate-pad to 16x16, conv blocks, one pool/upsample round trip.

    The surface is padded to an even square so one pool/upsample pass
    restores the spatial dims exactly; the final crop cuts back to 13x15.
    Batch normalization follows each hidden activation; the sigmoid output
    layer is left unnormalized.
    """
    rng = stream(cfg.seed, "init")
    layers = [nn.Pad(16, 16)]
    channels = 1
    for filters in cfg.filters_per_block:
        layers += [
            nn.Conv3x3(channels, filters, init="he", rng=rng),
            nn.ReLU(),
            nn.BatchNorm(filters),
        ]
        channels = filters
    layers += [
        nn.MaxPool2x2(),
        nn.Conv3x3(channels, channels, init="he", rng=rng),
        nn.ReLU(),
        nn.BatchNorm(channels),
        nn.Upsample2x2(),
        nn.Conv3x3(channels, 1, init="glorot", rng=rng),
        nn.Sigmoid(),
        nn.Crop(N_RATINGS, N_TENORS),
    ]
    net = nn.Network(layers, INPUT_SHAPE)
    if net.output_shape != INPUT_SHAPE:
        raise ConfigError(f"cnn output shape {net.output_shape} != {INPUT_SHAPE}")
    return net


def build_network(kind: str, cfg) -> nn.Network:
    if kind == "fcnn":
        return build_fcnn(cfg)
    if kind == "cnn":
        return build_cnn(cfg)
    raise ConfigError(f"unknown model kind {kind!r}")


@dataclass
class TrainedModel:
    """A trained network plus everything needed to reuse it on new data."""

    network: nn.Network
    scaling: ScalingTransform
    config: dict
    kind: str
    final_train_loss: float
    loss_history: list[float] = field(default_factory=list)
    val_history: list[float] = field(default_factory=list)


def _epoch_batches(n: int, batch_size: int, gen: np.random.Generator):
    order = gen.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train(
    kind: str,
    cfg,
    train_set: AugmentedDataset,
    scaling: ScalingTransform,
    val_set: AugmentedDataset | None = None,
    patience: int = EARLY_STOP_PATIENCE,
) -> TrainedModel:
    """Adam/MSE training loop; deterministic given cfg.seed.

    With a validation set, stops once validation MSE has not improved for
    ``patience`` epochs and restores the best parameters seen. A loss that
    goes non-finite or explodes aborts with the last finite parameter
    vector attached to the raised DivergenceError.
    """
    net = build_network(kind, cfg)
    inputs = train_set.inputs_array()
    targets = train_set.targets_array()
    n = inputs.shape[0]
    shuffle = stream(cfg.seed, "shuffle")
    opt = nn.AdamState(learning_rate=cfg.learning_rate, decay=cfg.decay)
    params = net.param_vector()

    val_inputs = val_targets = None
    if val_set is not None and len(val_set):
        val_inputs = val_set.inputs_array()
        val_targets = val_set.targets_array()

    history: list[float] = []
    val_history: list[float] = []
    best_val = math.inf
    best_params = None
    stale = 0
    for epoch in range(cfg.epochs):
        total = 0.0
        last_good = params.copy()
        for batch in _epoch_batches(n, cfg.batch_size, shuffle):
            out = net.forward(inputs[batch], train=True)
            loss, loss_grad = nn.mse_loss(out, targets[batch])
            if not math.isfinite(loss) or loss > DIVERGENCE_LIMIT:
                raise DivergenceError(
                    f"{kind} training diverged at epoch {epoch} (loss {loss})",
                    last_good_params=last_good,
                    epoch=epoch,
                )
            grads = net.backward(loss_grad)
            params = nn.adam_step(opt, params, grads)
            net.set_param_vector(params)
            total += loss * len(batch)
        history.append(total / n)

        if val_inputs is not None:
            val_loss, _ = nn.mse_loss(net.forward(val_inputs, train=False), val_targets)
            val_history.append(val_loss)
            if val_loss < best_val:
                best_val = val_loss
                best_params = params.copy()
                stale = 0
            else:
                stale += 1
                if patience and stale >= patience:
                    break

    if best_params is not None:
        net.set_param_vector(best_params)

    return TrainedModel(
        network=net,
        scaling=scaling,
        config=asdict(cfg),
        kind=kind,
        final_train_loss=history[-1],
        loss_history=history,
        val_history=val_history,
    )


def reconstruct(model: TrainedModel, masked: MaskedSurface) -> YieldSurface:
    """Complete one sparse surface; output is in percent, all cells present."""
    batch = masked.values[None, None, :, :]
    out = model.network.forward(batch, train=False)[0, 0]
    return unscale(YieldSurface(out), model.scaling)


def reconstruct_batch(model: TrainedModel, dataset: AugmentedDataset) -> list[YieldSurface]:
    """Complete every input of an augmented dataset (single forward pass)."""
    out = model.network.forward(dataset.inputs_array(), train=False)
    return [unscale(YieldSurface(out[i, 0]), model.scaling) for i in range(out.shape[0])]


@dataclass(frozen=True)
class SearchSpace:
    """Ranges sampled by random hyperparameter search.

    learning_rate is sampled log-uniformly over its (lo, hi) range; decay
    uniformly; the discrete fields are sampled from the given choices.
    epochs is fixed per trial (search compares configs, not budgets).
    """

    learning_rate: tuple = (1e-4, 1e-2)
    decay: tuple = (0.0, 1e-3)
    batch_size: tuple = (16, 32, 64)
    hidden_width: tuple = (195, 256, 390)
    conv_blocks: tuple = (1, 2, 3)
    filters: tuple = (4, 8, 16)
    epochs: int = 100

    def __post_init__(self):
        for name in ("batch_size", "hidden_width", "conv_blocks", "filters"):
            if not tuple(getattr(self, name)):
                raise ConfigError(f"search space field {name} is empty")
        lo, hi = self.learning_rate
        if not 0 < lo <= hi:
            raise ConfigError(f"bad learning_rate range {self.learning_rate}")
        lo, hi = self.decay
        if not 0 <= lo <= hi:
            raise ConfigError(f"bad decay range {self.decay}")


def sample_config(kind: str, space: SearchSpace, seed: int, trial: int):
    """Deterministically sample one trial configuration."""
    gen = stream(seed, "search", trial)
    lr_lo, lr_hi = space.learning_rate
    lr = float(np.exp(gen.uniform(np.log(lr_lo), np.log(lr_hi))))
    decay = float(gen.uniform(*space.decay))
    batch = int(gen.choice(np.asarray(space.batch_size)))
    common = dict(
        learning_rate=lr,
        decay=decay,
        batch_size=batch,
        epochs=space.epochs,
        seed=derive_seed(seed, "search-train", trial),
    )
    if kind == "fcnn":
        return FcnnConfig(hidden_width=int(gen.choice(np.asarray(space.hidden_width))), **common)
    blocks = int(gen.choice(np.asarray(space.conv_blocks)))
    filters = tuple(int(gen.choice(np.asarray(space.filters))) for _ in range(blocks))
    return CnnConfig(conv_blocks=blocks, filters_per_block=filters, **common)


def random_search(
    kind: str,
    space: SearchSpace,
    train_set: AugmentedDataset,
    val_set: AugmentedDataset,
    scaling: ScalingTransform,
    trials: int,
    seed: int,
):
    """Sample ``trials`` configs, train each, return the one with the lowest
    validation reconstruction MSE; exact ties break to fewer parameters.

    The validation examples must be carved from training observations so
    the held-out test set stays untouched.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if not len(val_set):
        raise ConfigError("random search needs a non-empty validation set")
    val_inputs = val_set.inputs_array()
    val_targets = val_set.targets_array()
    results = []
    for trial in range(trials):
        cfg = sample_config(kind, space, seed, trial)
        model = train(kind, cfg, train_set, scaling, val_set=None)
        val_mse, _ = nn.mse_loss(model.network.forward(val_inputs, train=False), val_targets)
        results.append((val_mse, model.network.n_params, trial, cfg))
    results.sort(key=lambda r: (r[0], r[1], r[2]))
    best = results[0]
    return best[3], [(r[0], r[3]) for r in results]


def save_model(model: TrainedModel, path) -> Path:
    """Write the network binary plus a JSON sidecar manifest.

    The manifest records the layer stack, tensor shapes, seed, scaling
    factor and training config: everything needed to reload and rerun.
    """
    path = Path(path)
    nn.save_network(model.network, path)
    manifest = {
        "kind": model.kind,
        "scaling_factor": model.scaling.factor,
        "config": model.config,
        "final_train_loss": model.final_train_loss,
        "loss_history": model.loss_history,
        "val_history": model.val_history,
        "input_shape": list(model.network.input_shape),
        "layers": [list(layer.config()) for layer in model.network.layers],
        "param_shapes": [
            [list(p.shape) for p in layer.params] for layer in model.network.layers
        ],
        "n_params": model.network.n_params,
    }
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return sidecar


def load_model(path) -> TrainedModel:
    """Reload a model saved by :func:`save_model`."""
    path = Path(path)
    net = nn.load_network(path)
    manifest = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return TrainedModel(
        network=net,
        scaling=ScalingTransform(manifest["scaling_factor"]),
        config=manifest["config"],
        kind=manifest["kind"],
        final_train_loss=manifest["final_train_loss"],
        loss_history=manifest.get("loss_history", []),
        val_history=manifest.get("val_history", []),
    )
