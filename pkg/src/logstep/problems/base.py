from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError, InputError

# f may dip below its certified lower bound only by round-off
_LB_SLACK = 1e-9


class LowerBoundViolation(AssertionError):
    pass


class SmoothProblem:
    """Objective with analytic gradient and the constants the theory needs.

    ``L`` is ``None`` when the smoothness constant is only known
    empirically.  ``f_lb`` is a certified lower bound on f (equal to f*
    when the minimum is known).  Every call to :meth:`value` asserts
    ``f(x) >= f_lb``.

    Stochastic oracles talk to the problem through :meth:`draw`,
    :meth:`sample_value` and :meth:`sample_grad`; a *sample* is whatever
    object selects one component function (a noise vector or a batch of
    row indices).
    """

    name = "problem"

    def __init__(self, dim: int, L: float | None, f_lb: float, x_init):
        if dim < 1:
            raise DomainError("dimension must be positive")
        self.dim = int(dim)
        self.L = None if L is None else float(L)
        self.f_lb = float(f_lb)
        x_init = np.asarray(x_init, dtype=np.float64).copy()
        if x_init.shape != (self.dim,):
            raise InputError(f"x_init has shape {x_init.shape}, expected ({self.dim},)")
        x_init.setflags(write=False)
        self.x_init = x_init

    @property
    def L_declared(self) -> bool:
        return self.L is not None

    # subclasses implement _value and grad
    def _value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, x) -> float:
        f = self._value(np.asarray(x, dtype=np.float64))
        if math.isfinite(f) and f < self.f_lb - _LB_SLACK * max(1.0, abs(self.f_lb)):
            raise LowerBoundViolation(f"{self.name}: f(x)={f} below certified lower bound {self.f_lb}")
        return f

    def value_and_grad(self, x):
        return self.value(x), self.grad(x)

    def validation_loss(self, x) -> float:
        return self.value(x)

    def val_metric(self, x) -> float:
        """Per-epoch evaluation metric; the objective itself unless overridden."""
        return self.value(x)

    # gaussian-noise component: f_xi(x) = f(x) + <xi, x>, so grad f_xi = grad f + xi
    def sample_value(self, x, sample) -> float:
        if sample is None:
            return self._value(x)
        return self._value(x) + float(np.dot(sample, x))

    def sample_grad(self, x, sample) -> np.ndarray:
        g = self.grad(x)
        return g if sample is None else g + sample


class StochasticOracle:
    """Unbiased stochastic gradient with bounded variance.

    ``noise_kind='gaussian'`` adds xi ~ N(0, sigma^2/d I) to the exact
    gradient, so E||g - grad f||^2 = sigma^2 exactly.  ``'minibatch'``
    averages per-sample gradients over ``batch_size`` rows drawn uniformly
    with replacement; the problem supplies ``sigma`` for that case.
    """

    def __init__(self, problem, noise_kind="gaussian", sigma=0.0, batch_size=1, seed=0,
                 sigma_empirical=False):
        if noise_kind not in ("gaussian", "minibatch"):
            raise DomainError(f"unknown noise kind {noise_kind!r}")
        if batch_size < 1:
            raise DomainError("batch_size must be positive")
        if sigma < 0:
            raise DomainError("sigma must be nonnegative")
        self.problem = problem
        self.noise_kind = noise_kind
        self.sigma = float(sigma)
        self.batch_size = int(batch_size)
        self.sigma_empirical = sigma_empirical
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def spawn(self, seed) -> "StochasticOracle":
        """Same oracle, fresh generator."""
        return StochasticOracle(self.problem, self.noise_kind, self.sigma, self.batch_size, seed,
                                self.sigma_empirical)

    def draw(self):
        if self.noise_kind == "gaussian":
            if self.sigma == 0:
                return None
            d = self.problem.dim
            return self.rng.normal(0.0, self.sigma / math.sqrt(d), size=d)
        if self.batch_size >= self.problem.n:
            return None  # full batch: exact gradient
        return self.rng.integers(0, self.problem.n, size=self.batch_size)

    def grad(self, x, sample) -> np.ndarray:
        return self.problem.sample_grad(x, sample)

    def value(self, x, sample) -> float:
        return self.problem.sample_value(x, sample)

    def __call__(self, x):
        sample = self.draw()
        return self.grad(x, sample), sample


def finite_difference_grad(f, x, rel_step=1e-5) -> np.ndarray:
    """Central differences with per-coordinate step rel_step * (1 + |x_i|)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return g


def gradient_rel_error(problem, x) -> float:
    g = problem.grad(x)
    g_fd = finite_difference_grad(problem.value, x)
    return float(np.linalg.norm(g - g_fd) / max(np.linalg.norm(g_fd), 1e-12))
