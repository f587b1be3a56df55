"""Finite-sum classification objectives: multinomial logistic regression and
a one-hidden-layer softplus network, both with cross-entropy + l2."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from ..errors import DomainError, InputError
from .base import SmoothProblem, StochasticOracle

SIGMA_SAFETY = 1.2
N_SIGMA_PROBES = 50


@dataclass(frozen=True)
class DatasetSplit:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise InputError(f"features {X.shape} and labels {y.shape} are inconsistent")
        if X.shape[0] == 0:
            raise InputError("empty split")
        if self.n_classes < 1 or y.min() < 0 or y.max() >= self.n_classes:
            raise InputError(f"labels must lie in [0, {self.n_classes})")
        if X.min() < 0 or X.max() > 1:
            raise InputError("features must be rescaled to [0, 1]")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "DatasetSplit":
        return DatasetSplit(self.features[idx], self.labels[idx], self.n_classes)


def synth_classification(n, d, n_classes, seed=0, spread=0.05) -> DatasetSplit:
    """Gaussian class clusters clipped to [0, 1]; every class is present."""
    if n < n_classes:
        raise DomainError(f"need n >= n_classes, got n={n}, n_classes={n_classes}")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.2, 0.8, size=(n_classes, d))
    labels = rng.permutation(np.arange(n) % n_classes)
    X = centers[labels] + rng.normal(0.0, spread, size=(n, d))
    return DatasetSplit(np.clip(X, 0.0, 1.0), labels, n_classes)


def train_val_split(split: DatasetSplit, val_fraction=0.2, seed=0):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(split.n)
    n_val = int(round(val_fraction * split.n))
    return split.subset(np.sort(perm[n_val:])), split.subset(np.sort(perm[:n_val]))


def _cross_entropy(logits, y):
    """Mean CE and the per-row logit residual softmax(logits) - onehot(y)."""
    lse = logsumexp(logits, axis=1)
    loss = float(np.mean(lse - logits[np.arange(len(y)), y]))
    resid = np.exp(logits - lse[:, None])
    resid[np.arange(len(y)), y] -= 1.0
    return loss, resid


class FiniteSumClassifier(SmoothProblem):
    """Mean cross-entropy over the training rows plus (l2/2)||theta||^2."""

    def __init__(self, train: DatasetSplit, l2, L, x_init, val: DatasetSplit | None = None):
        if l2 < 0:
            raise DomainError("l2 must be nonnegative")
        self.train = train
        self.val = val if val is not None else train
        self.l2 = float(l2)
        super().__init__(len(x_init), L=L, f_lb=0.0, x_init=x_init)

    @property
    def n(self) -> int:
        return self.train.n

    # subclasses: data loss and gradient on given rows; optionally per-row grad norms
    def _data_loss_grad(self, theta, X, y, need_grad=True):
        raise NotImplementedError

    def _logits(self, theta, X):
        raise NotImplementedError

    def _rows(self, idx):
        if idx is None:
            return self.train.features, self.train.labels
        return self.train.features[idx], self.train.labels[idx]

    def _value(self, x):
        loss, _ = self._data_loss_grad(x, *self._rows(None), need_grad=False)
        return loss + 0.5 * self.l2 * float(np.dot(x, x))

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        _, g = self._data_loss_grad(x, *self._rows(None))
        return g + self.l2 * x

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        loss, g = self._data_loss_grad(x, *self._rows(None))
        f = loss + 0.5 * self.l2 * float(np.dot(x, x))
        if f < self.f_lb:
            self.value(x)  # raises
        return f, g + self.l2 * x

    def sample_value(self, x, sample):
        loss, _ = self._data_loss_grad(x, *self._rows(sample), need_grad=False)
        return loss + 0.5 * self.l2 * float(np.dot(x, x))

    def sample_grad(self, x, sample):
        _, g = self._data_loss_grad(x, *self._rows(sample))
        return g + self.l2 * x

    def validation_loss(self, x):
        loss, _ = self._data_loss_grad(x, self.val.features, self.val.labels, need_grad=False)
        return loss

    def val_metric(self, x):
        """Validation accuracy."""
        pred = np.argmax(self._logits(x, self.val.features), axis=1)
        return float(np.mean(pred == self.val.labels))

    def train_accuracy(self, x):
        pred = np.argmax(self._logits(x, self.train.features), axis=1)
        return float(np.mean(pred == self.train.labels))

    def _per_row_sq_norms(self, theta):
        raise NotImplementedError

    def minibatch_variance(self, x, batch_size) -> float:
        """Exact E||g_B - grad f||^2 for a with-replacement batch of the given size.

        A batch covering all n rows is the full gradient and has zero variance.
        """
        if batch_size >= self.n:
            return 0.0
        x = np.asarray(x, dtype=np.float64)
        sq = self._per_row_sq_norms(x)
        _, gbar = self._data_loss_grad(x, *self._rows(None))
        return max(float(np.mean(sq)) - float(np.dot(gbar, gbar)), 0.0) / batch_size


class LogisticRegression(FiniteSumClassifier):
    """Multinomial logistic regression, parameters [W (d x K), b (K)].

    The softmax-CE Hessian in the logits is bounded by I/2, hence
    L = ||[X 1]||_op^2 / (2n) + l2.
    """

    name = "logreg"

    def __init__(self, train, l2=0.0, x_init=None, val=None):
        self.d = train.dim
        self.K = train.n_classes
        Xt = np.hstack([train.features, np.ones((train.n, 1))])
        L = np.linalg.norm(Xt, 2) ** 2 / (2.0 * train.n) + l2
        p = (self.d + 1) * self.K
        super().__init__(train, l2, L, np.zeros(p) if x_init is None else x_init, val)

    def _split(self, theta):
        W = theta[: self.d * self.K].reshape(self.d, self.K)
        b = theta[self.d * self.K:]
        return W, b

    def _logits(self, theta, X):
        W, b = self._split(theta)
        return X @ W + b

    def _data_loss_grad(self, theta, X, y, need_grad=True):
        loss, resid = _cross_entropy(self._logits(theta, X), y)
        if not need_grad:
            return loss, None
        resid /= len(y)
        return loss, np.concatenate([(X.T @ resid).ravel(), resid.sum(axis=0)])

    def _per_row_sq_norms(self, theta):
        X, y = self._rows(None)
        _, resid = _cross_entropy(self._logits(theta, X), y)
        return (np.einsum("ij,ij->i", X, X) + 1.0) * np.einsum("ij,ij->i", resid, resid)


def softplus(z):
    return np.logaddexp(0.0, z)


class SoftplusMLP(FiniteSumClassifier):
    """One hidden softplus layer; parameters [W1 (d x h), b1, W2 (h x K), b2].

    Backward pass is the chain rule written out by hand.  L is empirical.
    """

    name = "mlp"

    def __init__(self, train, hidden, l2=0.0, seed=0, x_init=None, val=None):
        if hidden < 1:
            raise DomainError("hidden width must be >= 1")
        self.d = train.dim
        self.h = int(hidden)
        self.K = train.n_classes
        d, h, K = self.d, self.h, self.K
        self._shapes = [(d, h), (h,), (h, K), (K,)]
        self._sizes = [math.prod(s) for s in self._shapes]
        if x_init is None:
            rng = np.random.default_rng(seed)
            x_init = np.concatenate([
                rng.normal(0.0, 1.0 / math.sqrt(d), d * h),
                np.zeros(h),
                rng.normal(0.0, 1.0 / math.sqrt(h), h * K),
                np.zeros(K),
            ])
        super().__init__(train, l2, None, x_init, val)

    def unpack(self, theta):
        out, pos = [], 0
        for shape, size in zip(self._shapes, self._sizes):
            out.append(theta[pos:pos + size].reshape(shape))
            pos += size
        return out

    def _forward(self, theta, X):
        W1, b1, W2, b2 = self.unpack(theta)
        z1 = X @ W1 + b1
        a1 = softplus(z1)
        return z1, a1, a1 @ W2 + b2

    def _logits(self, theta, X):
        return self._forward(theta, X)[2]

    def _backward(self, theta, X, z1, a1, dz2):
        W1, b1, W2, b2 = self.unpack(theta)
        dz1 = (dz2 @ W2.T) * expit(z1)
        return dz1, [X.T @ dz1, dz1.sum(axis=0), a1.T @ dz2, dz2.sum(axis=0)]

    def _data_loss_grad(self, theta, X, y, need_grad=True):
        z1, a1, logits = self._forward(theta, X)
        loss, resid = _cross_entropy(logits, y)
        if not need_grad:
            return loss, None
        _, parts = self._backward(theta, X, z1, a1, resid / len(y))
        return loss, np.concatenate([p.ravel() for p in parts])

    def _per_row_sq_norms(self, theta):
        X, y = self._rows(None)
        z1, a1, logits = self._forward(theta, X)
        _, dz2 = _cross_entropy(logits, y)
        dz1, _ = self._backward(theta, X, z1, a1, dz2)
        n2 = lambda A: np.einsum("ij,ij->i", A, A)  # noqa: E731
        # per-row weight gradients are outer products, so their norms factor
        return (n2(X) + 1.0) * n2(dz1) + (n2(a1) + 1.0) * n2(dz2)


def estimate_minibatch_sigma(problem: FiniteSumClassifier, batch_size, n_probes=N_SIGMA_PROBES,
                             seed=0, scale=0.5):
    """Max exact minibatch variance over probe points, times a safety factor.

    Probes are x_init and x_init + N(0, scale^2) perturbations.  Returns
    (sigma, probes).
    """
    rng = np.random.default_rng(seed)
    probes = [np.array(problem.x_init)]
    probes += [problem.x_init + rng.normal(0.0, scale, problem.dim) for _ in range(n_probes - 1)]
    worst = max(problem.minibatch_variance(p, batch_size) for p in probes)
    return math.sqrt(SIGMA_SAFETY * worst), probes


def _minibatch_oracle(problem, batch_size, seed):
    batch_size = min(batch_size, problem.n)
    sigma, _ = estimate_minibatch_sigma(problem, batch_size, seed=seed)
    return StochasticOracle(problem, "minibatch", sigma=sigma, batch_size=batch_size, seed=seed,
                            sigma_empirical=True)


def make_logreg(split: DatasetSplit, l2=0.0, batch_size=32, seed=0, val=None):
    problem = LogisticRegression(split, l2, val=val)
    return problem, _minibatch_oracle(problem, batch_size, seed)


def make_smooth_mlp(split: DatasetSplit, hidden, l2=0.0, seed=0, batch_size=32, val=None):
    problem = SoftplusMLP(split, hidden, l2, seed=seed, val=val)
    return problem, _minibatch_oracle(problem, batch_size, seed)
