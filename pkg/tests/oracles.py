"""Independent oracles shared by module and acceptance tests.

These deliberately avoid the library's own code paths wherever a result
is being checked: quadrature for the spline roughness, explicit solves
for small systems, brute-force statistics for the corruption mask.
"""
from __future__ import annotations

import numpy as np

from yieldfill import tps


def hessian_quadrature_energy(fit, n: int = 400, lo: float = -2.0, hi: float = 3.0) -> float:
    """Central-difference quadrature of the integrated squared Hessian.

    The roughness integral lives on the whole plane and its value equals
    8*pi times the kernel quadratic form, so the grid spans well past the
    anchor box and the result is normalized by 8*pi before comparison.
    """
    h = (hi - lo) / n
    xs = np.linspace(lo, hi, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    f = tps.evaluate_many(fit, pts).reshape(n + 1, n + 1)
    fxx = (f[2:, 1:-1] - 2.0 * f[1:-1, 1:-1] + f[:-2, 1:-1]) / h**2
    fyy = (f[1:-1, 2:] - 2.0 * f[1:-1, 1:-1] + f[1:-1, :-2]) / h**2
    fxy = (f[2:, 2:] - f[2:, :-2] - f[:-2, 2:] + f[:-2, :-2]) / (4.0 * h**2)
    integral = (fxx**2 + 2.0 * fxy**2 + fyy**2).sum() * h * h
    return float(integral / (8.0 * np.pi))


def solve_tps_reference(coords, values, lam=0.0, kernel=None):
    """Direct dense solve of the bordered spline system, own kernel allowed."""
    coords = np.asarray(coords, dtype=float)
    values = np.asarray(values, dtype=float)
    m = len(coords)
    if kernel is None:
        kernel = lambda r: np.where(r > 0, r * r * np.log(np.where(r > 0, r, 1.0)), 0.0)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    big = np.zeros((m + 3, m + 3))
    big[:m, :m] = kernel(dist) + lam * np.eye(m)
    n_mat = np.column_stack([np.ones(m), coords])
    big[:m, m:] = n_mat
    big[m:, :m] = n_mat.T
    rhs = np.concatenate([values, np.zeros(3)])
    sol = np.linalg.solve(big, rhs)
    return sol[:m], sol[m:]


def evaluate_tps_reference(coords, a, b, points, kernel=None):
    if kernel is None:
        kernel = lambda r: np.where(r > 0, r * r * np.log(np.where(r > 0, r, 1.0)), 0.0)
    points = np.asarray(points, dtype=float)
    diff = points[:, None, :] - np.asarray(coords, dtype=float)[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    return kernel(dist) @ np.asarray(a) + b[0] + points @ np.asarray(b)[1:]


def numeric_gradient(loss_fn, theta: np.ndarray, epsilon: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    grad = np.empty_like(theta)
    probe = theta.copy()
    for i in range(theta.size):
        probe[i] = theta[i] + epsilon
        up = loss_fn(probe)
        probe[i] = theta[i] - epsilon
        down = loss_fn(probe)
        probe[i] = theta[i]
        grad[i] = (up - down) / (2.0 * epsilon)
    return grad
