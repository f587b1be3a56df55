from .base import SmoothProblem, StochasticOracle, finite_difference_grad, gradient_rel_error
from .classifiers import (
    DatasetSplit,
    LogisticRegression,
    SoftplusMLP,
    estimate_minibatch_sigma,
    make_logreg,
    make_smooth_mlp,
    synth_classification,
    train_val_split,
)
from .idx import load_fashion_mnist, load_idx, write_idx_images, write_idx_labels
from .synthetic import QuadCosineProblem, QuadraticProblem, make_noisy_quadratic, make_quad_cosine

__all__ = [
    "DatasetSplit",
    "LogisticRegression",
    "QuadCosineProblem",
    "QuadraticProblem",
    "SmoothProblem",
    "SoftplusMLP",
    "StochasticOracle",
    "estimate_minibatch_sigma",
    "finite_difference_grad",
    "gradient_rel_error",
    "load_fashion_mnist",
    "load_idx",
    "make_logreg",
    "make_noisy_quadratic",
    "make_quad_cosine",
    "make_smooth_mlp",
    "synth_classification",
    "train_val_split",
    "write_idx_images",
    "write_idx_labels",
]
