"""Synthetic objectives with exactly known constants."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError
from .base import SmoothProblem, StochasticOracle


class QuadraticProblem(SmoothProblem):
    """f(x) = 1/2 x^T diag(a) x, minimum 0 at the origin."""

    name = "quadratic"

    def __init__(self, eigenvalues, x_init=None):
        a = np.asarray(eigenvalues, dtype=np.float64)
        if a.ndim != 1 or np.any(a <= 0):
            raise DomainError("eigenvalues must be a positive vector")
        self.eigenvalues = a
        super().__init__(len(a), L=float(a.max()), f_lb=0.0,
                         x_init=np.ones(len(a)) if x_init is None else x_init)

    def _value(self, x):
        return 0.5 * float(np.dot(self.eigenvalues * x, x))

    def grad(self, x):
        return self.eigenvalues * np.asarray(x, dtype=np.float64)


class QuadCosineProblem(SmoothProblem):
    """f(x) = sum_i x_i^2/2 + a cos(b x_i).

    |f''| <= 1 + a b^2 per coordinate, and f >= -a d.  Non-convex whenever
    a b^2 > 1.
    """

    name = "quad_cosine"

    def __init__(self, d, a, b, x_init=None):
        if a < 0 or b <= 0:
            raise DomainError("quad-cosine needs a >= 0 and b > 0")
        self.a = float(a)
        self.b = float(b)
        super().__init__(d, L=1.0 + a * b * b, f_lb=-a * d,
                         x_init=np.full(d, 2.0) if x_init is None else x_init)

    def _value(self, x):
        return float(0.5 * np.dot(x, x) + self.a * np.sum(np.cos(self.b * x)))

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x - self.a * self.b * np.sin(self.b * x)


def make_noisy_quadratic(d, eigmin, eigmax, sigma, seed=0, x_init=None):
    """Diagonal quadratic with log-spaced spectrum and a Gaussian-noise oracle."""
    if not 0 < eigmin <= eigmax:
        raise DomainError(f"need 0 < eigmin <= eigmax, got {eigmin}, {eigmax}")
    eig = np.geomspace(eigmin, eigmax, d) if d > 1 else np.array([eigmax], dtype=np.float64)
    eig[-1] = eigmax
    problem = QuadraticProblem(eig, x_init)
    return problem, StochasticOracle(problem, "gaussian", sigma=sigma, seed=seed)


def make_quad_cosine(d, a, b, sigma, seed=0, x_init=None):
    problem = QuadCosineProblem(d, a, b, x_init)
    return problem, StochasticOracle(problem, "gaussian", sigma=sigma, seed=seed)
