"""Rating/tenor yield-surface domain model.

A surface is a 13x15 grid of corporate-bond yields in percent per annum,
indexed by credit rating (best to worst quality) and tenor in years.
Missing cells are stored as NaN so "absent" never collides with a genuine
zero; the masked representation used as model input substitutes literal
zeros and carries an explicit observation mask.

All values here are immutable after construction and the operations are
pure functions, so everything is safe to share across threads.
"""
from __future__ import annotations

import datetime
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError

__all__ = [
    "RATING_LABELS",
    "TENOR_YEARS",
    "TENOR_LABELS",
    "N_RATINGS",
    "N_TENORS",
    "N_CELLS",
    "Rating",
    "Tenor",
    "YieldSurface",
    "ScalingTransform",
    "MaskedSurface",
    "MonotonicityReport",
    "rating_coordinate",
    "tenor_coordinate",
    "grid_coordinates",
    "scale",
    "unscale",
    "fit_scaling",
    "extend_long_tenors",
    "monotonicity_report",
]

RATING_LABELS = (
    "AAA", "AA", "A+", "A", "A-", "BBB+", "BBB", "BBB-",
    "BB+", "BB", "BB-", "B+", "B",
)
TENOR_YEARS = (
    0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 8.0, 9.0, 10.0,
    15.0, 20.0, 25.0, 30.0,
)
TENOR_LABELS = (
    "3M", "6M", "1Y", "2Y", "3Y", "4Y", "5Y", "7Y", "8Y", "9Y", "10Y",
    "15Y", "20Y", "25Y", "30Y",
)

N_RATINGS = len(RATING_LABELS)
N_TENORS = len(TENOR_YEARS)
N_CELLS = N_RATINGS * N_TENORS

_ORDINAL_BY_LABEL = {label: i + 1 for i, label in enumerate(RATING_LABELS)}
_TENOR_INDEX_BY_YEARS = {y: j for j, y in enumerate(TENOR_YEARS)}


@dataclass(frozen=True, order=True)
class Rating:
    """Credit-quality grade; ordinal 1 (AAA, best) through 13 (B, worst)."""

    ordinal: int

    def __post_init__(self):
        if not 1 <= self.ordinal <= N_RATINGS:
            raise ValueError(f"rating ordinal must be in [1, {N_RATINGS}], got {self.ordinal}")

    @property
    def label(self) -> str:
        return RATING_LABELS[self.ordinal - 1]

    @classmethod
    def from_label(cls, label: str) -> "Rating":
        try:
            return cls(_ORDINAL_BY_LABEL[label])
        except KeyError:
            raise ValueError(f"unknown rating label {label!r}") from None


@dataclass(frozen=True, order=True)
class Tenor:
    """Time to maturity in years."""

    years: float

    def __post_init__(self):
        if not self.years > 0:
            raise ValueError(f"tenor must be positive, got {self.years}")

    @property
    def label(self) -> str:
        try:
            return TENOR_LABELS[_TENOR_INDEX_BY_YEARS[self.years]]
        except KeyError:
            raise ValueError(f"{self.years}y is not on the canonical tenor grid") from None

    @classmethod
    def from_label(cls, label: str) -> "Tenor":
        try:
            return cls(TENOR_YEARS[TENOR_LABELS.index(label)])
        except ValueError:
            raise ValueError(f"unknown tenor label {label!r}") from None


def rating_coordinate(rating: Rating | int) -> float:
    """Map a rating to [0, 1]: AAA -> 0, B -> 1, equally spaced notches.

    Rating grades are ordinal, so any numeric coordinate is a modelling
    choice; equal spacing is the minimal assumption and is isolated here
    so alternatives (spread-based spacing, say) can be swapped in.
    """
    ordinal = rating.ordinal if isinstance(rating, Rating) else Rating(rating).ordinal
    return (ordinal - 1) / (N_RATINGS - 1)


def tenor_coordinate(tenor: Tenor | float) -> float:
    """Map tenor years onto [0, 1] over the canonical 0.25y..30y span.

    Min-max normalization keeps the two surface axes comparable so spline
    distances are not dominated by the 30-year tenor scale.
    """
    years = tenor.years if isinstance(tenor, Tenor) else float(tenor)
    lo, hi = TENOR_YEARS[0], TENOR_YEARS[-1]
    if not lo <= years <= hi:
        raise ValueError(f"tenor {years}y outside supported range [{lo}, {hi}]")
    return (years - lo) / (hi - lo)


def grid_coordinates() -> np.ndarray:
    """(195, 2) array of (rating_coordinate, tenor_coordinate) per grid cell."""
    coords = np.empty((N_CELLS, 2))
    for i in range(N_RATINGS):
        for j in range(N_TENORS):
            coords[i * N_TENORS + j] = (
                rating_coordinate(i + 1),
                tenor_coordinate(TENOR_YEARS[j]),
            )
    coords.setflags(write=False)
    return coords


def _frozen_array(values, shape, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class YieldSurface:
    """13x15 grid of yields in percent per annum; NaN marks a missing cell."""

    values: np.ndarray
    observation_date: datetime.date | None = None

    def __post_init__(self):
        arr = _frozen_array(self.values, (N_RATINGS, N_TENORS))
        present = ~np.isnan(arr)
        bad = present & ~(np.isfinite(arr) & (arr > 0))
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            raise ValueError(
                f"yield at ({RATING_LABELS[i]}, {TENOR_LABELS[j]}) must be finite "
                f"and positive, got {arr[i, j]}"
            )
        object.__setattr__(self, "values", arr)

    @property
    def present(self) -> np.ndarray:
        """Boolean mask of populated cells."""
        return ~np.isnan(self.values)

    @property
    def is_complete(self) -> bool:
        return bool(self.present.all())


@dataclass(frozen=True)
class ScalingTransform:
    """Divide-by-maximum scaling so the largest reference yield maps to 1."""

    factor: float

    def __post_init__(self):
        if not (np.isfinite(self.factor) and self.factor > 0):
            raise ValueError(f"scaling factor must be positive, got {self.factor}")


@dataclass(frozen=True)
class MaskedSurface:
    """A scaled surface with an observation mask; unobserved cells hold 0.0."""

    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values, (N_RATINGS, N_TENORS))
        observed = _frozen_array(self.observed, (N_RATINGS, N_TENORS), dtype=bool)
        if not np.isfinite(values).all():
            raise ValueError("masked surface values must be finite")
        if (values[~observed] != 0.0).any():
            raise ValueError("unobserved cells must hold exactly 0.0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())


@dataclass(frozen=True)
class MonotonicityReport:
    """Adjacent-pair monotonicity violations of a complete surface.

    rating_violations: (tenor_years, (better_label, worse_label), magnitude)
    tenor_violations:  (rating_label, (shorter_years, longer_years), magnitude)
    Magnitudes are in percent. The rate denominator counts every adjacent
    comparison on the grid: 12*15 rating pairs + 13*14 tenor pairs = 362.
    """

    rating_violations: tuple
    tenor_violations: tuple
    violation_rate: float

    @property
    def n_violations(self) -> int:
        return len(self.rating_violations) + len(self.tenor_violations)


def scale(surface: YieldSurface, xform: ScalingTransform) -> YieldSurface:
    """Divide every present value by the scaling factor; NaN preserved."""
    return YieldSurface(surface.values / xform.factor, surface.observation_date)


def unscale(surface: YieldSurface, xform: ScalingTransform) -> YieldSurface:
    """Inverse of :func:`scale`; round trip is identity to 1e-12 relative."""
    return YieldSurface(surface.values * xform.factor, surface.observation_date)


def fit_scaling(dataset: list[YieldSurface]) -> ScalingTransform:
    """Scaling factor = maximum present yield over the whole dataset.

    Scaling the maximum to 1 keeps model inputs and outputs inside the
    range of a sigmoid output unit.
    """
    best = -np.inf
    for surface in dataset:
        present = surface.present
        if present.any():
            best = max(best, float(surface.values[present].max()))
    if not np.isfinite(best):
        raise ValueError("cannot fit scaling: dataset has no present values")
    return ScalingTransform(best)


def extend_long_tenors(
    surface: YieldSurface,
    generic_spreads: dict[float, float],
    anchor: Tenor = Tenor(15.0),
) -> YieldSurface:
    """Fill missing long-tenor cells as anchor-tenor value plus a generic spread.

    Long tenors are frequently unquoted for sub-investment-grade indices;
    the convention is to carry the 15-year level plus the spread observed
    between generic indices at the long tenor and at 15 years. Present
    cells are never overwritten.
    """
    anchor_col = _TENOR_INDEX_BY_YEARS.get(anchor.years)
    if anchor_col is None:
        raise ValueError(f"anchor tenor {anchor.years}y is not on the canonical grid")
    values = surface.values.copy()
    for years, spread in generic_spreads.items():
        col = _TENOR_INDEX_BY_YEARS.get(float(years))
        if col is None:
            raise ValueError(f"spread tenor {years}y is not on the canonical grid")
        for row in range(N_RATINGS):
            if np.isnan(values[row, col]):
                anchor_value = surface.values[row, anchor_col]
                if np.isnan(anchor_value):
                    raise DataError(
                        f"cannot extend {RATING_LABELS[row]} to "
                        f"{TENOR_LABELS[col]}: anchor {anchor.label} is missing"
                    )
                values[row, col] = anchor_value + spread
    return YieldSurface(values, surface.observation_date)


def monotonicity_report(surface: YieldSurface) -> MonotonicityReport:
    """Flag adjacent cells where yield falls as rating worsens or tenor grows.

    Empirically yields increase weakly with worsening credit and, except
    at the very long end, with tenor; the report lists every adjacent
    violation and leaves interpretation to the caller.
    """
    if not surface.is_complete:
        raise ValueError("monotonicity report requires a complete surface")
    v = surface.values
    rating_violations = []
    for j in range(N_TENORS):
        for i in range(N_RATINGS - 1):
            if v[i + 1, j] < v[i, j]:
                rating_violations.append(
                    (TENOR_YEARS[j], (RATING_LABELS[i], RATING_LABELS[i + 1]),
                     float(v[i, j] - v[i + 1, j]))
                )
    tenor_violations = []
    for i in range(N_RATINGS):
        for j in range(N_TENORS - 1):
            if v[i, j + 1] < v[i, j]:
                tenor_violations.append(
                    (RATING_LABELS[i], (TENOR_YEARS[j], TENOR_YEARS[j + 1]),
                     float(v[i, j] - v[i, j + 1]))
                )
    total = (N_RATINGS - 1) * N_TENORS + N_RATINGS * (N_TENORS - 1)
    rate = (len(rating_violations) + len(tenor_violations)) / total
    return MonotonicityReport(tuple(rating_violations), tuple(tenor_violations), rate)
