"""Weight maps from class attributes to class-Gaussian parameters.

Two maps are learned from seen-class statistics: one producing means, one
producing log-variances. Each minimizes a ridge-regularized fit of the
statistics against per-class inputs plus an optional reverse-direction term
that asks the inputs to be reconstructable from the statistics. Inputs are
either kernel similarities against the seen attributes (the default) or the
raw attribute vectors themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussians import LOG_VARIANCE_FLOOR, ClassGaussian
from .linalg import DimensionError, KernelSpec, _as_matrix, kernel_matrix, solve_sylvester

LOG_VAR_MAX = 50.0


@dataclass(frozen=True)
class HyperParams:
    """Regularization weights for the two maps.

    lambda_mu and lambda_sigma are the ridge weights of the mean and
    log-variance maps; they must be positive so the solved systems stay
    nonsingular. lambda_1 and lambda_2 weight the respective reconstruction
    terms and may be zero.
    """

    lambda_mu: float = 0.1
    lambda_1: float = 0.0
    lambda_sigma: float = 0.1
    lambda_2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("lambda_mu", "lambda_1", "lambda_sigma", "lambda_2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.lambda_mu > 0 and self.lambda_sigma > 0):
            raise ValueError("lambda_mu and lambda_sigma must be positive")
        if self.lambda_1 < 0 or self.lambda_2 < 0:
            raise ValueError("lambda_1 and lambda_2 must be nonnegative")


@dataclass(frozen=True)
class ParamMap:
    """Fitted weight maps plus the context needed to evaluate them.

    kernel is the KernelSpec the maps were fitted with, in which case the
    weights act on kernel similarities against seen_attrs; kernel is None
    when the weights act on raw attribute vectors directly.
    """

    w_mu: np.ndarray
    w_sigma: np.ndarray
    seen_attrs: np.ndarray
    kernel: KernelSpec | None
    hyper: HyperParams

    def __post_init__(self) -> None:
        w_mu = _as_matrix(self.w_mu, "w_mu")
        w_sigma = _as_matrix(self.w_sigma, "w_sigma")
        attrs = _as_matrix(self.seen_attrs, "seen_attrs")
        if w_mu.shape != w_sigma.shape:
            raise DimensionError("w_mu and w_sigma must have identical shapes")
        expected = attrs.shape[0] if self.kernel is not None else attrs.shape[1]
        if w_mu.shape[1] != expected:
            raise DimensionError(
                f"weight maps expect inputs of size {w_mu.shape[1]}, "
                f"but the attribute context provides {expected}")
        object.__setattr__(self, "w_mu", w_mu)
        object.__setattr__(self, "w_sigma", w_sigma)
        object.__setattr__(self, "seen_attrs", attrs)


def _stationary_solve(targets, inputs, ridge_weight, recon_weight):
    # Zero-gradient system of
    #   ||T - W X||_F^2 + ridge ||W||_F^2 + recon ||X - W^T T||_F^2
    # over W:
    #   recon T T^T W + W (X X^T + ridge I) = (1 + recon) T X^T
    # The left operands are PSD and PD, so the two-sided solve applies.
    a = recon_weight * (targets @ targets.T)
    b = inputs @ inputs.T + ridge_weight * np.eye(inputs.shape[0])
    c = (1.0 + recon_weight) * (targets @ inputs.T)
    return solve_sylvester(a, b, c)


def _stack_stats(seen_gaussians):
    if len(seen_gaussians) < 2:
        raise ValueError("need at least two seen classes")
    dims = {g.dim for g in seen_gaussians}
    if len(dims) != 1:
        raise DimensionError(f"seen classes disagree on feature dimension: {sorted(dims)}")
    m = np.column_stack([g.mean for g in seen_gaussians])
    r = np.column_stack([g.log_var for g in seen_gaussians])
    return m, r


def fit_param_map(seen_gaussians, seen_attrs, kernel: KernelSpec,
                  hyper: HyperParams) -> ParamMap:
    """Fit both maps with kernel similarities as the per-class inputs."""
    m, r = _stack_stats(seen_gaussians)
    attrs = _as_matrix(seen_attrs, "seen_attrs")
    if attrs.shape[0] != m.shape[1]:
        raise DimensionError(
            f"got {attrs.shape[0]} attribute rows for {m.shape[1]} seen classes")
    gram = kernel_matrix(attrs, attrs, kernel)
    w_mu = _stationary_solve(m, gram, hyper.lambda_mu, hyper.lambda_1)
    w_sigma = _stationary_solve(r, gram, hyper.lambda_sigma, hyper.lambda_2)
    return ParamMap(w_mu, w_sigma, attrs, kernel, hyper)


def fit_param_map_linear(seen_gaussians, seen_attrs, hyper: HyperParams) -> ParamMap:
    """Fit both maps on raw attribute vectors; with the reconstruction
    weights at zero this is multi-output ridge regression."""
    m, r = _stack_stats(seen_gaussians)
    attrs = _as_matrix(seen_attrs, "seen_attrs")
    if attrs.shape[0] != m.shape[1]:
        raise DimensionError(
            f"got {attrs.shape[0]} attribute rows for {m.shape[1]} seen classes")
    inputs = attrs.T
    w_mu = _stationary_solve(m, inputs, hyper.lambda_mu, hyper.lambda_1)
    w_sigma = _stationary_solve(r, inputs, hyper.lambda_sigma, hyper.lambda_2)
    return ParamMap(w_mu, w_sigma, attrs, None, hyper)


def _map_inputs(param_map: ParamMap, attrs: np.ndarray) -> np.ndarray:
    if param_map.kernel is None:
        return attrs
    return kernel_matrix(attrs, param_map.seen_attrs, param_map.kernel)


def predict_unseen(param_map: ParamMap, unseen_attrs) -> list[ClassGaussian]:
    """Map attribute vectors to class Gaussians.

    Predicted log-variances are clamped to [log(VARIANCE_FLOOR), LOG_VAR_MAX]
    so the exponential stays positive and bounded.
    """
    attrs = _as_matrix(unseen_attrs, "unseen_attrs")
    if attrs.shape[1] != param_map.seen_attrs.shape[1]:
        raise DimensionError(
            f"attribute dimensionality mismatch: {attrs.shape[1]} vs "
            f"{param_map.seen_attrs.shape[1]}")
    feats = _map_inputs(param_map, attrs)
    means = feats @ param_map.w_mu.T
    log_vars = np.clip(feats @ param_map.w_sigma.T, LOG_VARIANCE_FLOOR, LOG_VAR_MAX)
    return [ClassGaussian(means[i], log_vars[i]) for i in range(attrs.shape[0])]


def system_residuals(param_map: ParamMap, seen_gaussians) -> tuple[float, float]:
    """Relative residuals of the two solved stationarity systems.

    Returns ||A W + W B - C||_F / (1 + ||C||_F) for the mean map and the
    log-variance map, rebuilt from the same statistics the fit used.
    """
    m, r = _stack_stats(seen_gaussians)
    inputs = _map_inputs(param_map, param_map.seen_attrs) if param_map.kernel \
        else param_map.seen_attrs.T
    out = []
    for targets, w, ridge, recon in (
            (m, param_map.w_mu, param_map.hyper.lambda_mu, param_map.hyper.lambda_1),
            (r, param_map.w_sigma, param_map.hyper.lambda_sigma, param_map.hyper.lambda_2)):
        a = recon * (targets @ targets.T)
        b = inputs @ inputs.T + ridge * np.eye(inputs.shape[0])
        c = (1.0 + recon) * (targets @ inputs.T)
        out.append(float(np.linalg.norm(a @ w + w @ b - c) / (1.0 + np.linalg.norm(c))))
    return out[0], out[1]
