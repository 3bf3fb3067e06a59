"""Dataset ingestion, the bundled sample matrix, splitting, synthetic data.

CSV schema: per surface, an optional ``# date=YYYY-MM-DD`` comment line,
a header row ``rating,3M,...,30Y``, then 13 data rows keyed by rating
label. Blocks are separated by blank lines. Cells are yields in percent
with a decimal point; an empty field means missing. Parse errors name the
offending line and cell.

The bundled fixture is a transcribed real observation: one complete
13x15 corporate-bond yield matrix paired with the sparse quote pattern
actually seen that day (48 of 195 cells). The pair doubles as ground
truth for completion demos and as a monotonicity regression case: the
full matrix is weakly monotone in rating everywhere, and its only tenor
inversions sit at the 20y+ long end.

Licensed market data cannot ship with the package, so a Nelson-Siegel
generator stands in: base curve by rating-independent level/slope/
curvature/decay, a per-notch spread that widens with tenor, parameters
random-walking across dates, and i.i.d. observation noise.
"""
from __future__ import annotations

import datetime
import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, ParseError
from .rng import stream
from .surface import (
    N_RATINGS,
    N_TENORS,
    RATING_LABELS,
    TENOR_LABELS,
    TENOR_YEARS,
    MaskedSurface,
    YieldSurface,
)

__all__ = [
    "SurfaceDataset",
    "SplitSpec",
    "SyntheticConfig",
    "FIXTURE_NAMES",
    "load_fixture",
    "fixture_dataset",
    "fixture_masked_input",
    "load_csv",
    "loads_csv",
    "save_csv",
    "dumps_csv",
    "generate_synthetic",
    "split",
    "split_indices",
]

# One trading day's full yield matrix (percent), ratings AAA..B by tenor
# 3M..30Y, and the sparse subset of cells actually quoted that day.
_SAMPLE_FULL = (
    (2.10, 2.17, 2.30, 2.53, 2.68, 2.79, 2.91, 3.19, 3.29, 3.37, 3.45, 3.73, 3.85, 3.86, 3.88),
    (2.11, 2.18, 2.31, 2.56, 2.74, 2.88, 3.02, 3.31, 3.41, 3.51, 3.59, 3.91, 4.03, 4.01, 4.03),
    (2.11, 2.18, 2.31, 2.59, 2.79, 2.96, 3.12, 3.41, 3.52, 3.62, 3.71, 4.02, 4.15, 4.13, 4.15),
    (2.16, 2.23, 2.36, 2.63, 2.83, 2.99, 3.14, 3.42, 3.54, 3.64, 3.73, 4.05, 4.17, 4.15, 4.17),
    (2.23, 2.29, 2.40, 2.64, 2.84, 3.00, 3.16, 3.46, 3.57, 3.68, 3.77, 4.09, 4.19, 4.17, 4.19),
    (2.33, 2.40, 2.52, 2.76, 2.96, 3.13, 3.30, 3.61, 3.73, 3.84, 3.94, 4.30, 4.43, 4.39, 4.38),
    (2.35, 2.42, 2.56, 2.84, 3.07, 3.25, 3.43, 3.77, 3.91, 4.03, 4.14, 4.55, 4.67, 4.52, 4.46),
    (2.37, 2.45, 2.63, 2.95, 3.18, 3.36, 3.54, 3.90, 4.05, 4.17, 4.30, 4.84, 5.06, 5.05, 5.06),
    (2.73, 2.85, 3.08, 3.53, 3.87, 4.13, 4.38, 4.85, 5.03, 5.18, 5.33, 6.02, 6.29, 6.03, 6.00),
    (2.75, 2.87, 3.10, 3.54, 3.95, 4.29, 4.60, 5.15, 5.36, 5.54, 5.72, 6.50, 6.76, 6.51, 6.48),
    (2.77, 2.89, 3.12, 3.57, 3.97, 4.31, 4.62, 5.17, 5.38, 5.56, 5.74, 6.52, 6.78, 6.53, 6.50),
    (2.89, 3.02, 3.24, 3.75, 4.19, 4.56, 4.90, 5.48, 5.70, 5.89, 6.08, 6.90, 7.36, 7.65, 7.63),
    (3.11, 3.23, 3.47, 4.02, 4.49, 4.87, 5.21, 5.77, 5.97, 6.17, 6.39, 7.25, 7.71, 8.01, 7.98),
)

# (rating_label, tenor_label) -> quoted value in the sparse panel. Stored
# with the quoted values (not just the mask) so the transcription can be
# cross-checked cell by cell against the full panel.
_SAMPLE_SPARSE = {
    ("AAA", "20Y"): 3.85, ("AAA", "25Y"): 3.86, ("AAA", "30Y"): 3.88,
    ("AA", "4Y"): 2.88, ("AA", "5Y"): 3.02, ("AA", "7Y"): 3.31,
    ("AA", "10Y"): 3.59, ("AA", "20Y"): 4.03,
    ("A+", "2Y"): 2.59,
    ("A", "1Y"): 2.36, ("A", "4Y"): 2.99, ("A", "7Y"): 3.42,
    ("A-", "2Y"): 2.64, ("A-", "15Y"): 4.09, ("A-", "20Y"): 4.19,
    ("BBB+", "3M"): 2.33, ("BBB+", "2Y"): 2.76, ("BBB+", "4Y"): 3.13,
    ("BBB+", "8Y"): 3.73, ("BBB+", "9Y"): 3.84, ("BBB+", "30Y"): 4.38,
    ("BBB", "10Y"): 4.14,
    ("BBB-", "4Y"): 3.36, ("BBB-", "7Y"): 3.90, ("BBB-", "9Y"): 4.17,
    ("BBB-", "10Y"): 4.30,
    ("BB+", "6M"): 2.85, ("BB+", "1Y"): 3.08, ("BB+", "3Y"): 3.87,
    ("BB+", "4Y"): 4.13, ("BB+", "5Y"): 4.38,
    ("BB", "7Y"): 5.15, ("BB", "9Y"): 5.54, ("BB", "15Y"): 6.50,
    ("BB", "30Y"): 6.48,
    ("BB-", "1Y"): 3.12, ("BB-", "3Y"): 3.97, ("BB-", "9Y"): 5.56,
    ("BB-", "15Y"): 6.52,
    ("B+", "3M"): 2.89, ("B+", "1Y"): 3.24, ("B+", "4Y"): 4.56,
    ("B+", "7Y"): 5.48, ("B+", "8Y"): 5.70, ("B+", "20Y"): 7.36,
    ("B+", "25Y"): 7.65,
    ("B", "2Y"): 4.02, ("B", "15Y"): 7.25,
}

# SHA-256 of the canonical CSV text of the full panel; guards the
# transcription against accidental edits.
FIXTURE_SHA256 = "befc58063cefc0f3c3ebd87675fef19cf18b180c5fe95bee112ab3174a685a13"

FIXTURE_NAMES = ("figure5",)


@dataclass(frozen=True)
class SurfaceDataset:
    """Date-ordered complete surfaces plus where they came from."""

    surfaces: tuple
    source: str  # csv | synthetic | fixture

    def __post_init__(self):
        if self.source not in ("csv", "synthetic", "fixture"):
            raise ValueError(f"unknown dataset source {self.source!r}")
        dates = [s.observation_date for s in self.surfaces if s.observation_date]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError("observation dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.surfaces)


@dataclass(frozen=True)
class SplitSpec:
    """Random holdout of test_fraction of the observations.

    The test count is ceil(test_fraction * n): with 63 daily observations
    at the default 10 percent this holds out 7, which is the only rounding
    consistent with a 70-example test set after 10x augmentation.
    """

    test_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")


def load_fixture(name: str = "figure5") -> tuple[YieldSurface, np.ndarray]:
    """Return the bundled (full surface, sparse observation mask) pair."""
    if name not in FIXTURE_NAMES:
        raise ValueError(f"unknown fixture {name!r}; available: {FIXTURE_NAMES}")
    full = YieldSurface(np.array(_SAMPLE_FULL))
    mask = np.zeros((N_RATINGS, N_TENORS), dtype=bool)
    for (rating, tenor), _ in _SAMPLE_SPARSE.items():
        mask[RATING_LABELS.index(rating), TENOR_LABELS.index(tenor)] = True
    mask.setflags(write=False)
    return full, mask


def fixture_sparse_values() -> dict:
    """The sparse panel's quoted values, for transcription cross-checks."""
    return dict(_SAMPLE_SPARSE)


def fixture_dataset(name: str = "figure5") -> SurfaceDataset:
    full, _ = load_fixture(name)
    return SurfaceDataset((full,), source="fixture")


def fixture_masked_input(name: str = "figure5", factor: float | None = None) -> MaskedSurface:
    """The fixture's sparse panel as a scaled model input.

    By default scales by the full panel's own maximum, mirroring how a
    complete reference dataset would be normalized.
    """
    full, mask = load_fixture(name)
    if factor is None:
        factor = float(np.nanmax(full.values))
    values = np.where(mask, full.values / factor, 0.0)
    return MaskedSurface(values, mask)


def _format_cell(value: float) -> str:
    return repr(float(value))


def dumps_csv(dataset: SurfaceDataset) -> str:
    """Serialize to the block-per-surface CSV schema (missing = empty field)."""
    out = io.StringIO()
    for index, surface in enumerate(dataset.surfaces):
        if index:
            out.write("\n")
        if surface.observation_date is not None:
            out.write(f"# date={surface.observation_date.isoformat()}\n")
        out.write("rating," + ",".join(TENOR_LABELS) + "\n")
        for i, label in enumerate(RATING_LABELS):
            cells = [
                "" if math.isnan(v) else _format_cell(v) for v in surface.values[i]
            ]
            out.write(label + "," + ",".join(cells) + "\n")
    return out.getvalue()


def save_csv(dataset: SurfaceDataset, path) -> None:
    Path(path).write_text(dumps_csv(dataset))


_EXPECTED_HEADER = ("rating",) + TENOR_LABELS


def loads_csv(text: str, source: str = "csv") -> SurfaceDataset:
    """Parse the CSV schema; errors carry the line number and cell locus."""
    surfaces = []
    block_date = None
    header_seen = False
    rows: dict[str, np.ndarray] = {}

    def finish_block(line_no):
        nonlocal block_date, header_seen, rows
        if not header_seen:
            return
        if len(rows) != N_RATINGS:
            missing = sorted(set(RATING_LABELS) - set(rows))
            raise ParseError(f"line {line_no}: surface block is missing rating rows {missing}")
        values = np.vstack([rows[label] for label in RATING_LABELS])
        try:
            surfaces.append(YieldSurface(values, block_date))
        except ValueError as exc:
            raise ParseError(f"line {line_no}: {exc}") from None
        block_date = None
        header_seen = False
        rows = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            finish_block(line_no)
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("date="):
                try:
                    block_date = datetime.date.fromisoformat(body[5:])
                except ValueError:
                    raise ParseError(f"line {line_no}: bad date {body[5:]!r}") from None
            continue
        fields = line.split(",")
        if fields[0] == "rating":
            if tuple(fields) != _EXPECTED_HEADER:
                raise ParseError(
                    f"line {line_no}: malformed header; expected "
                    f"{','.join(_EXPECTED_HEADER)!r}"
                )
            header_seen = True
            continue
        if not header_seen:
            raise ParseError(f"line {line_no}: data row before header")
        label = fields[0]
        if label not in RATING_LABELS:
            raise ParseError(f"line {line_no}: unknown rating label {label!r}")
        if label in rows:
            raise ParseError(f"line {line_no}: duplicate rating row {label!r}")
        if len(fields) != N_TENORS + 1:
            raise ParseError(
                f"line {line_no}: expected {N_TENORS} cells for {label}, got {len(fields) - 1}"
            )
        row = np.full(N_TENORS, np.nan)
        for j, cell in enumerate(fields[1:]):
            cell = cell.strip()
            if not cell:
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"line {line_no}, column {TENOR_LABELS[j]}: non-numeric cell {cell!r}"
                ) from None
            if not value > 0:
                raise ParseError(
                    f"line {line_no}, column {TENOR_LABELS[j]}: yield must be "
                    f"positive, got {value}"
                )
            row[j] = value
        rows[label] = row
    finish_block(len(text.splitlines()) + 1)
    return SurfaceDataset(tuple(surfaces), source=source)


def load_csv(path) -> SurfaceDataset:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return loads_csv(text)


def fixture_checksum() -> str:
    """SHA-256 of the canonical CSV text of the full fixture panel."""
    return hashlib.sha256(dumps_csv(fixture_dataset()).encode()).hexdigest()


@dataclass(frozen=True)
class SyntheticConfig:
    """Nelson-Siegel surface generator settings.

    Base curve: y(t) = b0 + b1*(1-exp(-t/tau))/(t/tau)
                      + b2*((1-exp(-t/tau))/(t/tau) - exp(-t/tau)).
    Rating spread: step*(ordinal-1)*(1 + slope*t/30), so worse credit is
    always wider and the widening grows with tenor (weakly rating-monotone
    by construction, before noise). Defaults are calibrated so generated
    levels bracket the bundled sample matrix (AAA short end near 2,
    single-B long end near 8).
    """

    n_observations: int = 63
    beta0: tuple = (3.7, 4.1)
    beta1: tuple = (-2.1, -1.7)
    beta2: tuple = (-0.3, 0.8)
    tau: tuple = (1.4, 2.6)
    rating_step: float = 0.25
    rating_slope: float = 0.4
    drift_sigma: float = 0.02
    noise_sigma: float = 0.01
    seed: int = 0
    start_date: datetime.date = datetime.date(2018, 1, 29)

    def __post_init__(self):
        if self.n_observations < 1:
            raise ConfigError(f"n_observations must be >= 1, got {self.n_observations}")
        for name in ("beta0", "beta1", "beta2", "tau"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ConfigError(f"bad {name} range ({lo}, {hi})")
        if self.tau[0] <= 0:
            raise ConfigError("tau must be positive")
        if self.rating_step <= 0 or self.rating_slope < 0:
            raise ConfigError("rating spread must widen with worse credit")
        if self.drift_sigma < 0 or self.noise_sigma < 0:
            raise ConfigError("sigmas must be nonnegative")


def nelson_siegel(t: np.ndarray, beta0, beta1, beta2, tau) -> np.ndarray:
    """Level/slope/curvature/decay parametric curve, in percent."""
    x = np.asarray(t, dtype=float) / tau
    decay = (1.0 - np.exp(-x)) / x
    return beta0 + beta1 * decay + beta2 * (decay - np.exp(-x))


def generate_synthetic(cfg: SyntheticConfig) -> SurfaceDataset:
    """Deterministically generate a date-ordered dataset of full surfaces."""
    gen = stream(cfg.seed, "synthetic")
    beta0 = gen.uniform(*cfg.beta0)
    beta1 = gen.uniform(*cfg.beta1)
    beta2 = gen.uniform(*cfg.beta2)
    tau = gen.uniform(*cfg.tau)

    tenors = np.asarray(TENOR_YEARS)
    ordinals = np.arange(1, N_RATINGS + 1, dtype=float)
    spread = cfg.rating_step * (ordinals[:, None] - 1.0) * (
        1.0 + cfg.rating_slope * tenors[None, :] / 30.0
    )
    surfaces = []
    for day in range(cfg.n_observations):
        base = nelson_siegel(tenors, beta0, beta1, beta2, tau)
        values = base[None, :] + spread
        if cfg.noise_sigma:
            values = values + gen.normal(0.0, cfg.noise_sigma, size=values.shape)
        if (values <= 0).any():
            raise ConfigError(
                f"synthetic parameters produced nonpositive yields on day {day}; "
                "tighten the beta/tau ranges or reduce noise"
            )
        date = cfg.start_date + datetime.timedelta(days=day)
        surfaces.append(YieldSurface(values, date))
        if cfg.drift_sigma:
            beta0 += gen.normal(0.0, cfg.drift_sigma)
            beta1 += gen.normal(0.0, cfg.drift_sigma)
            beta2 += gen.normal(0.0, cfg.drift_sigma)
            tau = float(np.clip(tau + gen.normal(0.0, cfg.drift_sigma), 0.3, 10.0))
    return SurfaceDataset(tuple(surfaces), source="synthetic")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) index arrays: ceil(fraction*n) test picks, seeded."""
    if n < 2:
        raise ValueError(f"need at least 2 observations to split, got {n}")
    n_test = max(1, math.ceil(spec.test_fraction * n))
    gen = stream(spec.seed, "split")
    test = np.sort(gen.choice(n, size=n_test, replace=False))
    train = np.setdiff1d(np.arange(n), test)
    return train, test


def split(dataset: SurfaceDataset, spec: SplitSpec) -> tuple[SurfaceDataset, SurfaceDataset]:
    """Random train/test partition of the observations."""
    train_idx, test_idx = split_indices(len(dataset), spec)
    train = tuple(dataset.surfaces[i] for i in train_idx)
    test = tuple(dataset.surfaces[i] for i in test_idx)
    return (
        SurfaceDataset(train, source=dataset.source),
        SurfaceDataset(test, source=dataset.source),
    )
