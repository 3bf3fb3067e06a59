"""Thin plate spline fitting, evaluation and smoothing-parameter selection.

The spline is the radial-basis expansion

    f(x) = sum_i a_i * u(|x - X_i|) + b0 + b1*x1 + b2*x2,   u(r) = r^2 ln r,

fitted to anchors {(X_i, y_i)} by solving

    Y = (M + lambda*I) a + N b,      N^T a = 0,

where M_ij = u(|X_i - X_j|) and N has rows [1, x1_i, x2_i]. lambda = 0
interpolates; lambda > 0 trades fit error against bending energy (the
integrated squared Hessian of f, which equals a^T M a up to a constant
for this kernel family).

The two closed-form expressions b = (N^T M^-1 N)^-1 N^T M^-1 Y and
a = M^-1 (Y - N b) are solved here through a single LU factorization of
the bordered matrix [[M + lambda*I, N], [N^T, 0]] rather than by forming
M^-1: one factorization serves both unknowns, and the bordered form stays
solvable in the corner cases where M itself is singular (e.g. three
anchors pairwise at distance 1, where u(1) = 0 zeroes an entire row)
while agreeing exactly with the explicit formulas whenever M + lambda*I
is invertible.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .exceptions import GeometryError, NumericError
from .surface import MaskedSurface, YieldSurface, grid_coordinates

__all__ = [
    "AnchorSet",
    "TpsSystem",
    "TpsFit",
    "DEFAULT_LAMBDA_GRID",
    "kernel_u",
    "build_system",
    "fit",
    "evaluate",
    "evaluate_many",
    "bending_energy",
    "cross_validate_lambda",
    "complete_surface",
]

DEFAULT_LAMBDA_GRID = (0.0, 1e-6, 1e-4, 1e-2, 1.0)

# Condition threshold above which the solve is reported as ill-conditioned.
CONDITION_LIMIT = 1e12

# Rank tolerance for collinearity detection, relative to ||N||.
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class AnchorSet:
    """Anchor coordinates in [0,1]^2 with their (scaled) yield values."""

    coordinates: np.ndarray  # (m, 2)
    values: np.ndarray  # (m,)

    def __post_init__(self):
        coords = np.array(self.coordinates, dtype=float)
        values = np.array(self.values, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coordinates must be (m, 2), got {coords.shape}")
        if values.shape != (coords.shape[0],):
            raise ValueError("values must match the number of coordinates")
        m = coords.shape[0]
        if m < 3:
            raise GeometryError(f"need at least 3 anchors, got {m}")
        if not (np.isfinite(coords).all() and np.isfinite(values).all()):
            raise ValueError("anchor coordinates and values must be finite")
        seen = {}
        for idx, point in enumerate(map(tuple, coords)):
            if point in seen:
                raise ValueError(f"duplicate anchor coordinates at rows {seen[point]} and {idx}")
            seen[point] = idx
        n = poly_matrix(coords)
        sv = np.linalg.svd(n, compute_uv=False)
        if (sv > _RANK_TOL * sv[0]).sum() < 3:
            raise GeometryError("anchors are collinear; spline plane is underdetermined")
        coords.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.coordinates.shape[0]


@dataclass(frozen=True)
class TpsSystem:
    """Kernel matrix M (lambda-augmented diagonal) and affine matrix N."""

    M: np.ndarray  # (m, m), symmetric
    N: np.ndarray  # (m, 3), rows [1, x1, x2]


@dataclass(frozen=True)
class TpsFit:
    """Fitted spline: kernel coefficients a, affine coefficients b, lambda."""

    a: np.ndarray  # (m,)
    b: np.ndarray  # (3,)
    lam: float
    anchors: AnchorSet


def kernel_u(r) -> float | np.ndarray:
    """Radial kernel u(r) = r^2 ln r, continuously extended with u(0) = 0."""
    arr = np.asarray(r, dtype=float)
    if (arr < 0).any():
        raise ValueError("kernel argument must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(arr > 0.0, arr * arr * np.log(np.where(arr > 0.0, arr, 1.0)), 0.0)
    if np.isscalar(r):
        return float(out)
    return out


def poly_matrix(coords: np.ndarray) -> np.ndarray:
    """Affine design matrix with rows [1, x1, x2]."""
    return np.column_stack([np.ones(len(coords)), coords])


def _kernel_matrix(coords: np.ndarray) -> np.ndarray:
    # Squared distances via symmetric differences keep M bitwise symmetric.
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    return kernel_u(dist)


def build_system(anchors: AnchorSet, lam: float = 0.0) -> TpsSystem:
    """Assemble M_ij = u(|X_i - X_j|) + lambda*delta_ij and N."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    M = _kernel_matrix(anchors.coordinates)
    if lam:
        M = M + lam * np.eye(anchors.m)
    N = poly_matrix(anchors.coordinates)
    return TpsSystem(M, N)


def fit(anchors: AnchorSet, lam: float = 0.0) -> TpsFit:
    """Solve the spline system at the given smoothing parameter.

    Raises NumericError (with the condition number in the message) if the
    bordered system is singular or the solution fails the orthogonality
    check; GeometryError comes from AnchorSet validation upstream.
    """
    system = build_system(anchors, lam)
    m = anchors.m
    bordered = np.zeros((m + 3, m + 3))
    bordered[:m, :m] = system.M
    bordered[:m, m:] = system.N
    bordered[m:, :m] = system.N.T
    rhs = np.concatenate([anchors.values, np.zeros(3)])

    # Exactly singular systems surface as non-finite solutions, checked below;
    # scipy's singular-matrix warnings are silenced in favor of that check.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            with np.errstate(all="ignore"):
                lu, piv = lu_factor(bordered)
                solution = lu_solve((lu, piv), rhs)
        except Exception as exc:
            raise NumericError(f"spline system factorization failed: {exc}") from exc

    if not np.isfinite(solution).all():
        cond = float(np.linalg.cond(bordered))
        raise NumericError(f"spline system is singular (condition number {cond:.3e})")

    cond = float(np.linalg.cond(bordered))
    if cond > CONDITION_LIMIT:
        warnings.warn(
            f"spline system ill-conditioned: condition number {cond:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )

    a = solution[:m]
    b = solution[m:]
    # Project out any residual affine component so N^T a = 0 holds to
    # roundoff even when a itself is at noise level (pure affine data).
    nta = system.N.T @ a
    if nta.any():
        gram = system.N.T @ system.N
        a = a - system.N @ np.linalg.solve(gram, nta)

    a_scale = np.abs(a).max()
    residual = np.abs(system.N.T @ a).max()
    if residual > 1e-8 * a_scale:
        raise NumericError(
            f"orthogonality residual {residual:.3e} exceeds tolerance "
            f"(condition number {cond:.3e})"
        )
    return TpsFit(a, b, float(lam), anchors)


def evaluate(tps_fit: TpsFit, point) -> float:
    """Evaluate the fitted spline at one (x1, x2) point."""
    return float(evaluate_many(tps_fit, np.asarray(point, dtype=float)[None, :])[0])


def evaluate_many(tps_fit: TpsFit, points: np.ndarray) -> np.ndarray:
    """Evaluate the fitted spline at an (n, 2) array of points."""
    points = np.asarray(points, dtype=float)
    diff = points[:, None, :] - tps_fit.anchors.coordinates[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    radial = kernel_u(dist) @ tps_fit.a
    affine = tps_fit.b[0] + points @ tps_fit.b[1:]
    return radial + affine


def bending_energy(tps_fit: TpsFit) -> float:
    """Roughness a^T M0 a of the fit, with M0 the bare kernel matrix.

    Proportional to the integral of the squared Hessian of f over the
    plane (the smoothing penalty); zero exactly for affine surfaces and
    nonnegative up to roundoff otherwise.
    """
    M0 = _kernel_matrix(tps_fit.anchors.coordinates)
    return float(tps_fit.a @ M0 @ tps_fit.a)


def cross_validate_lambda(
    anchors: AnchorSet,
    folds: int,
    grid=DEFAULT_LAMBDA_GRID,
) -> float:
    """Pick the smoothing parameter by k-fold cross validation.

    Anchors are assigned to folds round-robin by index (deterministic,
    no RNG). A fold whose training part is degenerate is skipped; if all
    folds degenerate the anchor geometry cannot support validation.
    Ties in held-out MSE break toward the larger lambda (the smoother
    surface), with errors within max(1e-14, 1e-9 * best) treated as tied.
    """
    grid = tuple(grid)
    if not grid:
        raise ValueError("lambda grid must be non-empty")
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if anchors.m < folds + 3:
        raise ValueError(f"need at least folds + 3 = {folds + 3} anchors, got {anchors.m}")

    assignment = np.arange(anchors.m) % folds
    mse = {}
    for lam in grid:
        if lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {lam}")
        squared_errors = []
        usable_folds = 0
        for fold in range(folds):
            held = assignment == fold
            if held.all() or not held.any():
                continue
            try:
                train = AnchorSet(anchors.coordinates[~held], anchors.values[~held])
                fold_fit = fit(train, lam)
            except (GeometryError, NumericError):
                continue
            predicted = evaluate_many(fold_fit, anchors.coordinates[held])
            squared_errors.extend(((predicted - anchors.values[held]) ** 2).tolist())
            usable_folds += 1
        if usable_folds:
            mse[lam] = float(np.mean(squared_errors))
    if not mse:
        raise GeometryError("every cross-validation fold was degenerate")

    best = min(mse.values())
    tolerance = max(1e-14, 1e-9 * best)
    return max(lam for lam, err in mse.items() if err <= best + tolerance)


def complete_surface(
    masked: MaskedSurface,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    folds: int = 5,
) -> YieldSurface:
    """Fill all 195 grid cells from a sparse surface via a fresh spline fit.

    Observed cells become anchors in normalized (rating, tenor) coordinates;
    lambda is chosen by cross validation when enough anchors exist (folds
    shrink to m - 3 if needed; below 2 usable folds the largest grid lambda
    is taken, consistent with the tie-break toward smoothness). Observed
    cells are re-predicted, not clamped, so lambda > 0 may smooth them.
    """
    coords = grid_coordinates()
    observed = masked.observed.ravel()
    anchors = AnchorSet(coords[observed], masked.values.ravel()[observed])

    usable_folds = min(folds, anchors.m - 3)
    if usable_folds >= 2:
        try:
            lam = cross_validate_lambda(anchors, usable_folds, lambda_grid)
        except GeometryError:
            # Every fold degenerate even though the full anchor set fits;
            # fall back to the smoothest grid point (zero-information tie-break).
            lam = max(lambda_grid)
    else:
        lam = max(lambda_grid)
    final = fit(anchors, lam)
    values = evaluate_many(final, coords).reshape(masked.values.shape)
    if (values <= 0).any() or not np.isfinite(values).all():
        raise NumericError(
            "spline completion produced nonpositive or non-finite yields; "
            f"anchor count {anchors.m}, lambda {lam}"
        )
    return YieldSurface(values)
