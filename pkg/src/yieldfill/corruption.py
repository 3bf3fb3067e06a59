"""Stochastic cell-zeroing corruption and dataset augmentation.

Denoising training corrupts each scaled surface by forcing a fixed
proportion of cells to zero; the model is then asked to reproduce the
uncorrupted surface. Corruption runs after scaling, so the sentinel 0 sits
outside the range of genuine scaled yields (which are all positive).

Two readings of "fixed" are reconciled as: exactly ``floor(nu * n_cells)``
cells chosen uniformly without replacement. Masks are a pure function of
(seed, stream_id), so augmentation parallelizes without shared state and
the same corrupted copies are reproduced on every run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .surface import MaskedSurface, YieldSurface

__all__ = ["CorruptionSpec", "AugmentedDataset", "zero_count", "corrupt", "augment"]

DEFAULT_COPIES = 10


@dataclass(frozen=True)
class CorruptionSpec:
    """Proportion of cells to zero out, plus the seed of the mask stream.

    min_survivors guards the degenerate near-empty input: a spline fit
    needs at least 3 non-collinear anchors, and 5 leaves slack.
    """

    nu: float
    seed: int
    min_survivors: int = 5

    def __post_init__(self):
        if not 0.0 <= self.nu < 1.0:
            raise ValueError(f"corruption proportion must be in [0, 1), got {self.nu}")
        if self.min_survivors < 1:
            raise ValueError(f"min_survivors must be positive, got {self.min_survivors}")


def zero_count(spec: CorruptionSpec, n_cells: int) -> int:
    """Number of cells zeroed on an ``n_cells`` input: floor(nu * n_cells)."""
    k = math.floor(spec.nu * n_cells)
    if k > n_cells - spec.min_survivors:
        raise ValueError(
            f"nu={spec.nu} would leave fewer than {spec.min_survivors} "
            f"observed cells out of {n_cells}"
        )
    return k


def corrupt(surface: YieldSurface, spec: CorruptionSpec, stream_id: int) -> MaskedSurface:
    """Zero out exactly floor(nu * n) cells of a complete scaled surface.

    Cells are drawn uniformly without replacement by a generator keyed on
    (spec.seed, stream_id); surviving cells are bit-identical to the input.
    """
    if not surface.is_complete:
        raise ValueError("corruption requires a complete surface")
    values = surface.values
    k = zero_count(spec, values.size)
    flat = values.flatten()
    observed = np.ones(values.size, dtype=bool)
    if k > 0:
        gen = rng.stream(spec.seed, stream_id)
        hit = gen.choice(values.size, size=k, replace=False)
        flat[hit] = 0.0
        observed[hit] = False
    return MaskedSurface(flat.reshape(values.shape), observed.reshape(values.shape))


@dataclass(frozen=True)
class AugmentedDataset:
    """Corrupted copies of scaled surfaces paired with their clean targets."""

    examples: tuple
    copies_per_observation: int

    def __len__(self) -> int:
        return len(self.examples)

    def inputs_array(self) -> np.ndarray:
        """(n, 1, 13, 15) stack of corrupted inputs."""
        return np.stack([m.values for m, _ in self.examples])[:, None, :, :]

    def targets_array(self) -> np.ndarray:
        """(n, 1, 13, 15) stack of clean targets."""
        return np.stack([t.values for _, t in self.examples])[:, None, :, :]


def augment(
    dataset: list[YieldSurface],
    spec: CorruptionSpec,
    copies: int = DEFAULT_COPIES,
) -> AugmentedDataset:
    """Repeat each surface ``copies`` times under independent corruptions.

    Copy c of observation i uses stream_id ``i * copies + c``, making the
    whole augmented dataset a pure function of (dataset, spec, copies).
    """
    if copies < 1:
        raise ValueError(f"copies must be >= 1, got {copies}")
    examples = []
    for index, surface in enumerate(dataset):
        for copy in range(copies):
            masked = corrupt(surface, spec, index * copies + copy)
            examples.append((masked, surface))
    return AugmentedDataset(tuple(examples), copies)
