"""Descent on isometries (complex Stiefel manifold) with Armijo backtracking.

``fun_grad(X)`` returns ``(f, G)`` where ``G = df/dconj(X)`` is the Wirtinger
gradient, i.e. ``df = 2 Re tr(G^dagger dX)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .qmath import dag, polar_isometry


@dataclass
class StiefelResult:
    x: np.ndarray
    fun: float
    iterations: int
    grad_norm: float


def _riemannian(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    s = dag(x) @ g
    return g - x @ ((s + dag(s)) / 2)


def minimize_stiefel(
    fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    maxiter: int = 500,
    gtol: float = 1e-10,
    ftol: float = 1e-15,
    step: float = 0.5,
) -> StiefelResult:
    x = polar_isometry(x0)
    f, g = fun_grad(x)
    xi = _riemannian(x, g)
    gnorm = float(np.linalg.norm(xi))
    it = 0
    for it in range(1, maxiter + 1):
        if gnorm < gtol:
            break
        slope = 2 * gnorm**2
        t = step
        while True:
            x_new = polar_isometry(x - t * xi)
            f_new, g_new = fun_grad(x_new)
            if f_new <= f - 1e-4 * t * slope or t < 1e-14:
                break
            t *= 0.5
        if t < 1e-14 and f_new > f:
            break
        done = abs(f - f_new) <= ftol * max(1.0, abs(f))
        x, f, g = x_new, f_new, g_new
        xi = _riemannian(x, g)
        gnorm = float(np.linalg.norm(xi))
        step = min(4 * t, 1e3)
        if done:
            break
    return StiefelResult(x, float(f), it, gnorm)
