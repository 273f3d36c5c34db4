"""Dense linear-algebra kernels shared by the model layers.

Symmetric eigendecomposition, the two-sided linear solve used by both weight
maps, kernel matrices over attribute vectors, and the ridge closed form. All
operations are pure functions on float64 numpy arrays and never mutate their
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

PENCIL_TOL = 1e-12


class DimensionError(ValueError):
    """Operands have incompatible or non-conforming shapes."""


class SingularPencilError(ArithmeticError):
    """An eigenvalue sum of the two-sided solve is numerically zero."""


class DegenerateAttributesError(ValueError):
    """Attribute rows are too degenerate to derive a kernel bandwidth."""


@dataclass(frozen=True)
class KernelSpec:
    """Similarity kernel over attribute vectors.

    kind is "rbf" (bandwidth required, in attribute-space distance units) or
    "linear" (plain dot products, bandwidth ignored).
    """

    kind: str
    bandwidth: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel kind: {self.kind!r}")
        if self.kind == "rbf" and not (self.bandwidth is not None and self.bandwidth > 0):
            raise ValueError("rbf kernel requires bandwidth > 0")


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    return arr


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a (near-)symmetric matrix.

    The input is averaged with its transpose first to absorb round-off.
    Returns eigenvalues in ascending order and orthonormal eigenvector
    columns satisfying V diag(w) V^T = sym(m).
    """
    m = _as_matrix(m, "m")
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    evals, evecs = np.linalg.eigh(0.5 * (m + m.T))
    return evals, evecs


def solve_sylvester(a, b, c) -> np.ndarray:
    """Solve a @ w + w @ b = c for symmetric PSD a and symmetric PD b.

    Both operands are eigendecomposed; in the joint eigenbasis the equation
    is an entrywise division by eigenvalue sums. Every sum must exceed
    PENCIL_TOL, which holds whenever b is positive definite.
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    c = _as_matrix(c, "c")
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"a must be square, got shape {a.shape}")
    if b.shape[0] != b.shape[1]:
        raise DimensionError(f"b must be square, got shape {b.shape}")
    if c.shape != (a.shape[0], b.shape[0]):
        raise DimensionError(
            f"c must have shape {(a.shape[0], b.shape[0])}, got {c.shape}")
    ev_a, u_a = sym_eig(a)
    ev_b, u_b = sym_eig(b)
    denom = ev_a[:, None] + ev_b[None, :]
    smallest = float(denom.min())
    if smallest <= PENCIL_TOL:
        raise SingularPencilError(
            f"smallest eigenvalue sum {smallest:.3e} is below {PENCIL_TOL:g}")
    w = u_a @ ((u_a.T @ c @ u_b) / denom) @ u_b.T
    if not np.all(np.isfinite(w)):
        raise SingularPencilError("two-sided solve produced non-finite values")
    return w


def kernel_matrix(rows_attrs, cols_attrs, spec: KernelSpec) -> np.ndarray:
    """Pairwise kernel values between two attribute sets, one row per entry
    of rows_attrs and one column per entry of cols_attrs."""
    x = _as_matrix(rows_attrs, "rows_attrs")
    y = _as_matrix(cols_attrs, "cols_attrs")
    if x.shape[1] != y.shape[1]:
        raise DimensionError(
            f"attribute dimensionality mismatch: {x.shape[1]} vs {y.shape[1]}")
    if spec.kind == "linear":
        return x @ y.T
    sq = cdist(x, y, "sqeuclidean")
    return np.exp(-sq / (2.0 * spec.bandwidth ** 2))


def median_bandwidth(attrs) -> float:
    """Median of all pairwise Euclidean distances between attribute rows."""
    a = _as_matrix(attrs, "attrs")
    if a.shape[0] < 2:
        raise DimensionError("median bandwidth needs at least two attribute rows")
    med = float(np.median(pdist(a)))
    if med <= 0.0:
        raise DegenerateAttributesError("median pairwise attribute distance is zero")
    return med


def ridge_solve(targets, inputs, lam: float) -> np.ndarray:
    """Unique minimizer of ||T - W X||_F^2 + lam ||W||_F^2.

    Closed form W = T X^T (X X^T + lam I)^{-1}; lam > 0 keeps the Gram
    factor positive definite so the solve cannot fail.
    """
    t = _as_matrix(targets, "targets")
    x = _as_matrix(inputs, "inputs")
    if t.shape[1] != x.shape[1]:
        raise DimensionError(
            f"targets and inputs need matching column counts: {t.shape[1]} vs {x.shape[1]}")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    gram = x @ x.T
    gram[np.diag_indices_from(gram)] += lam
    return np.linalg.solve(gram, x @ t.T).T
