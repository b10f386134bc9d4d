"""BFGS with backtracking line search, plus finite-difference derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = np.finfo(float).eps


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str


def bfgs(fun_grad, x0, gtol=1e-6, ftol=1e-10, max_iter=1000, max_step=10.0):
    """Minimize ``fun_grad(x) -> (f, g)`` by BFGS.

    Steps are shortened by Armijo backtracking; non-finite trial values count
    as failures of the sufficient-decrease test. Converged when
    ``max|g| < gtol`` or the relative change in ``f`` stays below ``ftol``
    for two consecutive iterations.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    if not np.isfinite(f):
        return OptimResult(x, f, g, 0, False, "non-finite objective at start")
    n = x.size
    H = np.eye(n)
    first = True
    small = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) < gtol:
            return OptimResult(x, f, g, it - 1, True, "gradient below tolerance")
        p = -H @ g
        slope = g @ p
        if slope >= 0:
            H = np.eye(n)
            first = True
            p = -g
            slope = g @ p
        norm = np.linalg.norm(p)
        if norm > max_step:
            p *= max_step / norm
            slope *= max_step / norm
        t = 1.0
        while True:
            x_new = x + t * p
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * t * slope:
                break
            t *= 0.5 if np.isfinite(f_new) else 0.1
            if t < 1e-12:
                return OptimResult(x, f, g, it, False, "line search failed")
        s = x_new - x
        yk = g_new - g
        sy = s @ yk
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yk):
            if first:
                H = np.eye(n) * (sy / (yk @ yk))
                first = False
            rho = 1.0 / sy
            Hy = H @ yk
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) \
                + (rho * rho * (yk @ Hy) + rho) * np.outer(s, s)
        rel = abs(f - f_new) / max(abs(f_new), 1.0)
        x, f, g = x_new, f_new, g_new
        small = small + 1 if rel < ftol else 0
        if small >= 2:
            return OptimResult(x, f, g, it, True, "objective change below tolerance")
    return OptimResult(x, f, g, max_iter, False, "iteration limit reached")


def fd_step(x, order=2):
    base = EPS ** (1.0 / 3.0) if order == 2 else EPS ** (1.0 / 5.0)
    return base * np.maximum(1.0, np.abs(x))


def fd_gradient(f, x):
    """Central differences with step ``eps**(1/3) * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2 * h[i])
    return g


def fd_gradient_4th(f, x):
    """Five-point stencil, fourth-order accurate."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x, order=4)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h[i])
    return g


def fd_hessian(grad, x):
    """Symmetrized central-difference Jacobian of an analytic gradient."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x)
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h[i]
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * h[i])
    return 0.5 * (H + H.T)
