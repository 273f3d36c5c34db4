"""EM refinement of class Gaussians on unlabeled feature rows.

Equivalent to fitting a diagonal-covariance Gaussian mixture whose mixing
weights are pinned uniform: only means and variances are re-estimated, so
the attribute-predicted initialization is fine-tuned rather than replaced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .gaussians import VARIANCE_FLOOR, ClassGaussian, log_density_rows

COLLAPSE_TOL = 1e-8


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 100
    rel_tol: float = 1e-6
    variance_floor: float = VARIANCE_FLOOR

    def __post_init__(self) -> None:
        object.__setattr__(self, "max_iters", int(self.max_iters))
        object.__setattr__(self, "rel_tol", float(self.rel_tol))
        object.__setattr__(self, "variance_floor", float(self.variance_floor))
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.variance_floor > 0:
            raise ValueError("variance_floor must be positive")


@dataclass(frozen=True)
class EmResult:
    gaussians: list[ClassGaussian]
    responsibilities: np.ndarray
    log_likelihoods: list[float]
    iterations_run: int


def _log_joint(x: np.ndarray, gaussians) -> np.ndarray:
    # One column per component; weights stay uniform and are never updated.
    cols = [log_density_rows(x, g) for g in gaussians]
    return np.stack(cols, axis=1) - np.log(len(gaussians))


def gmm_log_likelihood(unlabeled, gaussians) -> float:
    """Total log-likelihood of the rows under the uniform-weight mixture,
    accumulated in log space so high dimensions cannot underflow."""
    x = np.asarray(unlabeled, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"unlabeled data must be a 2-d matrix, got shape {x.shape}")
    if not gaussians:
        raise ValueError("need at least one component")
    return float(logsumexp(_log_joint(x, gaussians), axis=1).sum())


def _m_step(x, gaussians, resp, floor):
    totals = resp.sum(axis=0)
    out = []
    for c, g in enumerate(gaussians):
        if totals[c] < COLLAPSE_TOL:
            # Collapsed component: freeze its attribute-predicted parameters.
            out.append(g)
            continue
        w = resp[:, c] / totals[c]
        mean = w @ x
        var = np.maximum(w @ (x - mean) ** 2, floor)
        out.append(ClassGaussian(mean, np.log(var)))
    return out


def em_refine(unlabeled, init, cfg: EmConfig = EmConfig()) -> EmResult:
    """Alternate E and M steps from the given initialization.

    The E-step normalizes per-row component log-densities with log-sum-exp;
    priors are held uniform throughout. The M-step re-estimates means and
    floored variances from the responsibilities. Iteration stops when the
    relative log-likelihood change drops below cfg.rel_tol or after
    cfg.max_iters M-steps; the returned responsibilities and the last
    log-likelihood entry always correspond to the returned parameters.
    """
    x = np.asarray(unlabeled, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"unlabeled data must be a 2-d matrix, got shape {x.shape}")
    gaussians = list(init)
    if not gaussians:
        raise ValueError("need at least one initial component")
    if any(g.dim != x.shape[1] for g in gaussians):
        raise ValueError("component dimension does not match the data")

    lls: list[float] = []
    prev = None
    resp = None
    iterations = 0
    for it in range(cfg.max_iters + 1):
        joint = _log_joint(x, gaussians)
        norm = logsumexp(joint, axis=1, keepdims=True)
        resp = np.exp(joint - norm)
        ll = float(norm.sum())
        lls.append(ll)
        if prev is not None and abs(ll - prev) / (1.0 + abs(ll)) < cfg.rel_tol:
            break
        if it == cfg.max_iters:
            break
        prev = ll
        gaussians = _m_step(x, gaussians, resp, cfg.variance_floor)
        iterations = it + 1
    return EmResult(gaussians, resp, lls, iterations)
