"""Per-class diagonal Gaussians in feature space.

Covers the maximum-likelihood fit, log-density scoring, seeded sampling, and
the conjugate update that folds a handful of labeled examples into an
existing class estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VARIANCE_FLOOR = 1e-6
LOG_VARIANCE_FLOOR = float(np.log(VARIANCE_FLOOR))
_LOG_2PI = float(np.log(2.0 * np.pi))


class EmptyClassError(ValueError):
    """A class estimate was requested from zero examples."""


@dataclass(frozen=True)
class ClassGaussian:
    """Diagonal Gaussian: mean and per-dimension log-variance.

    Variances are floored at VARIANCE_FLOOR on construction so densities
    never degenerate, even for single-example classes.
    """

    mean: np.ndarray
    log_var: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        log_var = np.asarray(self.log_var, dtype=np.float64)
        if mean.ndim != 1 or log_var.shape != mean.shape:
            raise ValueError("mean and log_var must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_var))):
            raise ValueError("Gaussian parameters must be finite")
        log_var = np.maximum(log_var, LOG_VARIANCE_FLOOR)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "log_var", log_var)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.log_var)


@dataclass(frozen=True)
class LabeledBatch:
    """Feature rows with one class index per row."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise ValueError("features must be a non-empty 2-d matrix")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must hold one class index per feature row")
        if self.n_classes < 1:
            raise ValueError("n_classes must be at least 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError("labels reference undeclared classes")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def rows_of(self, class_id: int) -> np.ndarray:
        return self.features[self.labels == class_id]


def fit_mle(examples) -> ClassGaussian:
    """Biased maximum-likelihood fit: mean and per-dimension variance both
    divide by the example count, variance floored at VARIANCE_FLOOR."""
    x = np.asarray(examples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"examples must be a 2-d matrix, got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyClassError("cannot fit a class from zero examples")
    mean = x.mean(axis=0)
    var = np.maximum(((x - mean) ** 2).mean(axis=0), VARIANCE_FLOOR)
    return ClassGaussian(mean, np.log(var))


def log_density_rows(x, g: ClassGaussian) -> np.ndarray:
    """Log density of each row of x under g."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != g.dim:
        raise ValueError(f"expected rows of dimension {g.dim}, got shape {arr.shape}")
    z2 = (arr - g.mean) ** 2 / np.exp(g.log_var)
    return -0.5 * (g.dim * _LOG_2PI + g.log_var.sum() + z2.sum(axis=1))


def log_density(x, g: ClassGaussian) -> float:
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"expected a vector, got shape {vec.shape}")
    return float(log_density_rows(vec[None, :], g)[0])


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals from uniform draws via the Box-Muller transform.

    Keeps golden tests bit-stable across platforms and numpy versions,
    unlike the generator's own ziggurat-based normals.
    """
    n = int(np.prod(shape)) if np.ndim(shape) else int(shape)
    pairs = (n + 1) // 2
    u1 = rng.random(pairs)
    u2 = rng.random(pairs)
    # 1 - u1 lies in (0, 1], so the log never sees zero
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
    return z.reshape(shape)


def sample(g: ClassGaussian, n: int, seed: int) -> np.ndarray:
    """Draw n rows from g, deterministically for a given seed."""
    if n < 1:
        raise ValueError("sample count must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = standard_normal(rng, (n, g.dim))
    return g.mean + np.sqrt(np.exp(g.log_var)) * z


def few_shot_update(g: ClassGaussian, new_examples) -> ClassGaussian:
    """Conjugate refinement of g from a few labeled examples.

    The updated mean averages the prior mean with the example sum; the
    updated variance combines prior precision with the empirical precision
    of the examples, where the empirical variance is taken around the PRIOR
    mean. Both variances are floored at VARIANCE_FLOOR.
    """
    x = np.asarray(new_examples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"new_examples must be a 2-d matrix, got shape {x.shape}")
    n = x.shape[0]
    if n == 0:
        raise EmptyClassError("few-shot update needs at least one example")
    if x.shape[1] != g.dim:
        raise ValueError(f"expected examples of dimension {g.dim}, got {x.shape[1]}")
    mean_fs = (g.mean + x.sum(axis=0)) / (1.0 + n)
    emp_var = np.maximum(((x - g.mean) ** 2).mean(axis=0), VARIANCE_FLOOR)
    var_fs = np.maximum(1.0 / (1.0 / np.exp(g.log_var) + n / emp_var), VARIANCE_FLOOR)
    return ClassGaussian(mean_fs, np.log(var_fs))
