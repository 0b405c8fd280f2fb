"""Sample moments: group means, integrated covariances, and the pooled matrix.

The integrated covariance of a group is the time integral of the pointwise
covariance diagonal, computed directly from centered curves without ever
materializing the full covariance kernel. The pooled matrix combines the
per-group integrated covariances with the diagonal of the hypothesis
weighting matrix; its symmetric inverse square root standardizes every
downstream quantity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FunctionalDataset
from .errors import (
    InsufficientReplicationError,
    NotPositiveDefiniteError,
    SingularOmegaError,
    ValidationError,
)
from .grid import QuadWeights

__all__ = [
    "MeanFunctions",
    "OmegaHat",
    "group_means",
    "sigma_hat",
    "omega_hat",
    "inv_sqrt_spd",
]

PD_REL_TOL = 1e-10


@dataclass(frozen=True)
class MeanFunctions:
    """Per-group mean curves, shape (k, p, m); row i is the i-th group mean."""

    means: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.means, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "means", arr)
        if arr.ndim != 3:
            raise ValidationError("means must have shape (k, p, m)")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("mean functions must be finite")


@dataclass(frozen=True)
class OmegaHat:
    """Pooled SPD matrix with its inverse and symmetric inverse square root."""

    omega: np.ndarray
    inv: np.ndarray
    inv_sqrt: np.ndarray


def group_means(ds: FunctionalDataset) -> MeanFunctions:
    """Average curves within each group."""
    return MeanFunctions(np.stack([g.values.mean(axis=0) for g in ds.groups]))


def sigma_hat(ds: FunctionalDataset, i: int, w: QuadWeights) -> np.ndarray:
    """Integrated covariance of group ``i``: a symmetric PSD p x p matrix.

    Requires at least two observations in the group.
    """
    values = ds.group_values(i)
    n_obs = values.shape[0]
    if n_obs < 2:
        raise InsufficientReplicationError(
            f"group {i + 1} needs n >= 2 observations for a covariance, has {n_obs}"
        )
    centered = values - values.mean(axis=0)
    sigma = np.einsum("jpt,jqt,t->pq", centered, centered, w.weights) / (n_obs - 1)
    return (sigma + sigma.T) / 2.0


def inv_sqrt_spd(a: np.ndarray, rel_tol: float = PD_REL_TOL) -> np.ndarray:
    """Symmetric inverse square root of an SPD matrix via eigendecomposition.

    Raises ``NotPositiveDefiniteError`` when any eigenvalue falls at or
    below ``rel_tol`` times the largest one.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("expected a square matrix")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0 and np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ValidationError("matrix is not symmetric")
    sym = (a + a.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals[-1] <= 0 or eigvals[0] <= rel_tol * eigvals[-1]:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (eigenvalues {eigvals[0]:.3e} .. "
            f"{eigvals[-1]:.3e}, relative tolerance {rel_tol:g})"
        )
    return (eigvecs / np.sqrt(eigvals)) @ eigvecs.T


def omega_hat(sigmas, h_diag, n) -> OmegaHat:
    """Pooled matrix ``sum_i h_ii sigma_i / n_i`` with inverse and inverse root.

    Groups the contrast does not touch have a zero diagonal weight and
    simply contribute nothing.
    """
    h_diag = np.asarray(h_diag, dtype=np.float64)
    n = np.asarray(n)
    sigmas = [np.asarray(s, dtype=np.float64) for s in sigmas]
    if not (len(sigmas) == h_diag.size == n.size):
        raise ValidationError("sigmas, h_diag, and n must have the same length")
    if np.any(h_diag < 0) or not np.any(h_diag > 0):
        raise ValidationError("diagonal hypothesis weights must be nonnegative, some positive")
    omega = sum(h * s / ni for h, s, ni in zip(h_diag, sigmas, n))
    omega = (omega + omega.T) / 2.0
    try:
        inv_sqrt = inv_sqrt_spd(omega)
    except NotPositiveDefiniteError as exc:
        raise SingularOmegaError(
            "pooled covariance matrix is numerically singular; collect more "
            "observations or reduce the number of components"
        ) from exc
    return OmegaHat(omega=omega, inv=inv_sqrt @ inv_sqrt, inv_sqrt=inv_sqrt)
