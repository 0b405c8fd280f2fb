"""Degrees-of-freedom estimation for the hypothesis and error matrices.

The two variation matrices are approximated by Wishart laws whose degrees
of freedom are chosen to match total variation. Estimating those degrees
of freedom needs four trace-type functionals per group, built from
U-statistics over distinct observation tuples so that unknown group means
drop out exactly. Two interchangeable evaluation paths are provided:

* ``ustat_within_naive`` enumerates every distinct index tuple, exactly as
  the defining sums are written. It is the correctness oracle and is
  intended for small groups only.
* ``ustat_within_fast`` computes identical values through an
  inclusion-exclusion rewrite in terms of complete-sum aggregates of the
  block Gram tensor, never touching 3- or 4-tuples. Cost is O(n^2 p^2 m)
  per group with O(n^2 p^2) memory.

``true_dof`` evaluates the same degrees-of-freedom formulas from known
covariance structures, which simulation tests use as the ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import permutations

import numpy as np

from . import _kernels
from .dataset import FunctionalDataset
from .errors import (
    DegenerateDofError,
    InsufficientReplicationError,
    NotPositiveDefiniteError,
    ValidationError,
)
from .glht import ContrastSpec, GlhtMatrices, build_glht
from .grid import QuadWeights
from .moments import OmegaHat, inv_sqrt_spd

__all__ = [
    "WithinGroupUStats",
    "DofEstimate",
    "SeparableCovariances",
    "TrueDof",
    "ustat_within_naive",
    "ustat_within_fast",
    "k4_hat",
    "cross_terms",
    "dof_estimates",
    "separable_trace_integrals",
    "true_dof",
]


@dataclass(frozen=True)
class WithinGroupUStats:
    """Within-group trace functionals of one standardized sample."""

    i_hat: float
    t_hat: float
    tr_sigma2_hat: float
    k4_hat: float | None = None

    def with_k4(self, value: float) -> "WithinGroupUStats":
        return replace(self, k4_hat=float(value))


@dataclass(frozen=True)
class DofEstimate:
    """Estimated degrees of freedom plus every intermediate statistic."""

    d_b: float
    d_e: float
    within: tuple[WithinGroupUStats, ...]
    i_cross: np.ndarray
    t_cross: np.ndarray
    clamped_b: tuple[bool, ...]
    clamped_e: tuple[bool, ...]

    @property
    def any_clamped(self) -> bool:
        return any(self.clamped_b) or any(self.clamped_e)


def _standardized(ds: FunctionalDataset, i: int, omega: OmegaHat) -> np.ndarray:
    return np.einsum("pq,jqt->jpt", omega.inv_sqrt, ds.group_values(i))


def _require_replication(ds: FunctionalDataset, i: int) -> int:
    n_i = ds.n[i]
    if n_i < 4:
        raise InsufficientReplicationError(
            f"group {i + 1} has n={n_i} observations; the distinct-index "
            f"U-statistics require n >= 4"
        )
    return n_i


def _combine_scalars(scalars: np.ndarray, n: int) -> WithinGroupUStats:
    """Assemble the three functionals from the nine aggregate integrals."""
    i_d2, i_du, i_u2, i_e2, i_v, i_w, i_w12, i_f2, i_f2x = scalars
    d2 = n * (n - 1)
    d3 = d2 * (n - 2)
    d4 = d3 * (n - 3)
    # Shared 4-distinct-index complete-sum expansion (identical for all three
    # functionals because relabeling distinct tuples is a bijection).
    t4 = i_u2 - 2 * i_du - 2 * i_w - 2 * i_w12 + i_d2 + i_f2 + i_f2x + 8 * i_v - 6 * i_e2
    i_hat = (i_d2 - i_e2) / d2 - 2 * (i_du - 2 * i_v - i_d2 + 2 * i_e2) / d3 + t4 / d4
    t_hat = (i_f2x - i_e2) / d2 - 2 * (i_w12 - 2 * i_v - i_f2x + 2 * i_e2) / d3 + t4 / d4
    tr2_hat = (i_f2 - i_e2) / d2 - 2 * (i_w - 2 * i_v - i_f2 + 2 * i_e2) / d3 + t4 / d4
    return WithinGroupUStats(float(i_hat), float(t_hat), float(tr2_hat))


def ustat_within_fast(
    ds: FunctionalDataset,
    i: int,
    omega: OmegaHat,
    w: QuadWeights,
    backend: str | None = None,
) -> WithinGroupUStats:
    """Within-group trace functionals via the aggregate-kernel fast path."""
    n_i = _require_replication(ds, i)
    z = _standardized(ds, i, omega)
    scalars = _kernels.within_group_scalars(z, w.weights, backend=backend)
    return _combine_scalars(scalars, n_i)


def ustat_within_naive(
    ds: FunctionalDataset, i: int, omega: OmegaHat, w: QuadWeights
) -> WithinGroupUStats:
    """Within-group trace functionals by literal distinct-tuple enumeration.

    Quadratic-integral tables are precomputed per index pair; the 2-, 3-,
    and 4-index sums then run over explicit tuples of distinct indices.
    Intended for small n as the correctness oracle for the fast path.
    """
    n_i = _require_replication(ds, i)
    z = _standardized(ds, i, omega)
    wv = w.weights
    delta = np.einsum("apt,bps->abts", z, z)
    # ja[a,b,c,d] integrates delta_ab(t,s) * delta_cd(t,s);
    # jb[a,b,c,d] integrates delta_ab(s,t) * delta_cd(t,s).
    ja = np.einsum("abts,cdts,t,s->abcd", delta, delta, wv, wv)
    jb = np.einsum("abst,cdts,s,t->abcd", delta, delta, wv, wv)
    pairs = np.array(list(permutations(range(n_i), 2)))
    triples = np.array(list(permutations(range(n_i), 3)))
    quads = np.array(list(permutations(range(n_i), 4)))
    d2 = n_i * (n_i - 1)
    d3 = d2 * (n_i - 2)
    d4 = d3 * (n_i - 3)
    a, b = pairs[:, 0], pairs[:, 1]
    a3, b3, c3 = triples[:, 0], triples[:, 1], triples[:, 2]
    a4, b4, c4, d4i = quads[:, 0], quads[:, 1], quads[:, 2], quads[:, 3]
    i_hat = (
        ja[a, a, b, b].sum() / d2
        - 2 * ja[a3, a3, b3, c3].sum() / d3
        + ja[a4, b4, c4, d4i].sum() / d4
    )
    t_hat = (
        ja[a, b, b, a].sum() / d2
        - 2 * ja[a3, b3, c3, a3].sum() / d3
        + ja[b4, c4, d4i, a4].sum() / d4
    )
    tr2_hat = (
        jb[a, b, b, a].sum() / d2
        - 2 * jb[a3, b3, c3, a3].sum() / d3
        + jb[b4, c4, d4i, a4].sum() / d4
    )
    return WithinGroupUStats(float(i_hat), float(t_hat), float(tr2_hat))


def k4_hat(
    ds: FunctionalDataset,
    i: int,
    omega: OmegaHat,
    w: QuadWeights,
    within: WithinGroupUStats,
    backend: str | None = None,
) -> float:
    """Kurtosis functional estimate for group ``i``.

    First term is the average squared self-kernel of the centered
    standardized curves; the three within-group functionals are then
    subtracted.
    """
    n_i = _require_replication(ds, i)
    values = ds.group_values(i)
    centered = values - values.mean(axis=0)
    c = np.einsum("pq,jqt->jpt", omega.inv_sqrt, centered)
    first = _kernels.k4_first_term(c, w.weights, backend=backend) / (n_i - 1)
    return float(first - within.tr_sigma2_hat - within.i_hat - within.t_hat)


def cross_terms(
    ds: FunctionalDataset,
    i1: int,
    i2: int,
    omega: OmegaHat,
    w: QuadWeights,
    backend: str | None = None,
) -> tuple[float, float]:
    """Between-group trace functionals (plug-in sample covariances).

    Works through centered-data Gram kernels; the pointwise covariance
    estimates are never materialized.
    """
    if i1 == i2:
        raise ValidationError("cross terms need two distinct groups; use the within path")
    centered = []
    for i in (i1, i2):
        if ds.n[i] < 2:
            raise InsufficientReplicationError(
                f"group {i + 1} needs n >= 2 observations for cross terms"
            )
        values = ds.group_values(i)
        centered.append(
            np.einsum("pq,jqt->jpt", omega.inv_sqrt, values - values.mean(axis=0))
        )
    i_val, t_val = _kernels.pair_trace_integrals(
        centered[0], centered[1], w.weights, backend=backend
    )
    scale = 1.0 / ((ds.n[i1] - 1) * (ds.n[i2] - 1))
    return i_val * scale, t_val * scale


def dof_estimates(
    ds: FunctionalDataset,
    spec: ContrastSpec,
    w: QuadWeights,
    glht: GlhtMatrices | None = None,
    method: str = "fast",
    backend: str | None = None,
) -> DofEstimate:
    """Estimated degrees of freedom for the hypothesis and error matrices.

    Each group's bracketed denominator contribution estimates a variance
    and is clamped at zero from below; clamping is reported per group in
    the result's diagnostics.
    """
    if method not in ("fast", "naive"):
        raise ValidationError(f"unknown method {method!r}; use 'fast' or 'naive'")
    for i in range(ds.k):
        _require_replication(ds, i)
    if glht is None:
        glht = build_glht(ds, spec, w)
    omega, hn = glht.omega, glht.hn
    n = np.asarray(ds.n, dtype=np.float64)
    k = ds.k
    p = ds.p

    within = []
    for i in range(k):
        if method == "fast":
            stats = ustat_within_fast(ds, i, omega, w, backend=backend)
        else:
            stats = ustat_within_naive(ds, i, omega, w)
        within.append(stats.with_k4(k4_hat(ds, i, omega, w, stats, backend=backend)))

    i_cross = np.zeros((k, k))
    t_cross = np.zeros((k, k))
    for i in range(k):
        i_cross[i, i] = within[i].i_hat
        t_cross[i, i] = within[i].t_hat
    for i1 in range(k):
        for i2 in range(i1 + 1, k):
            iv, tv = cross_terms(ds, i1, i2, omega, w, backend=backend)
            i_cross[i1, i2] = i_cross[i2, i1] = iv
            t_cross[i1, i2] = t_cross[i2, i1] = tv

    h_diag = np.diag(hn)
    db_denom = 0.0
    de_denom = 0.0
    clamped_b = []
    clamped_e = []
    for i in range(k):
        k4 = within[i].k4_hat
        it_sum = within[i].i_hat + within[i].t_hat
        bracket_b = float(k4 / n[i] ** 3 + it_sum / n[i] ** 2)
        bracket_e = float(k4 / n[i] ** 3 + it_sum / (n[i] ** 2 * (n[i] - 1)))
        clamped_b.append(bracket_b < 0)
        clamped_e.append(bracket_e < 0)
        db_denom += h_diag[i] ** 2 * max(bracket_b, 0.0)
        de_denom += h_diag[i] ** 2 * max(bracket_e, 0.0)
    for i1 in range(k):
        for i2 in range(k):
            if i1 != i2:
                db_denom += (
                    hn[i1, i2] ** 2 * (i_cross[i1, i2] + t_cross[i1, i2]) / (n[i1] * n[i2])
                )
    if db_denom <= 0 or de_denom <= 0:
        raise DegenerateDofError(
            "degrees-of-freedom denominator is nonpositive after clamping; "
            "the data carry no usable variation"
        )
    return DofEstimate(
        d_b=float(p * (p + 1) / db_denom),
        d_e=float(p * (p + 1) / de_denom),
        within=tuple(within),
        i_cross=i_cross,
        t_cross=t_cross,
        clamped_b=tuple(clamped_b),
        clamped_e=tuple(clamped_e),
    )


# ---------------------------------------------------------------------------
# True-parameter degrees of freedom
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparableCovariances:
    """Covariance structures of the form sum_r lambda_{ir} phi_r(s) phi_r(t)^T.

    ``lambdas`` has shape (k, q); ``basis`` holds the vector curves phi_r
    on the grid, shape (q, p, m), shared by all groups.
    """

    lambdas: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.lambdas, dtype=np.float64))
        basis = np.asarray(self.basis, dtype=np.float64)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "basis", basis)
        if basis.ndim != 3:
            raise ValidationError("basis must have shape (q, p, m)")
        if lam.shape[1] != basis.shape[0]:
            raise ValidationError("lambdas and basis disagree on the number of terms")
        if np.any(lam < 0):
            raise ValidationError("variance components must be nonnegative")


@dataclass(frozen=True)
class TrueDof:
    """True-parameter degrees of freedom with all intermediate functionals."""

    d_b: float
    d_e: float
    omega: np.ndarray
    i_star: np.ndarray
    t_star: np.ndarray
    tr_sigma2_star: np.ndarray
    sigma: np.ndarray


def separable_trace_integrals(
    lambdas: np.ndarray,
    basis: np.ndarray,
    w: QuadWeights,
    inv_sqrt: np.ndarray | None = None,
):
    """Trace functionals of separable covariances by quadrature.

    With ``inv_sqrt`` omitted the raw (unstandardized) functionals are
    returned. Returns (i_mat, t_mat, tr_sigma2, sigma) where the first two
    are k x k, the third length k, and ``sigma`` stacks the integrated
    covariance matrices, shape (k, p, p).
    """
    lam = np.atleast_2d(np.asarray(lambdas, dtype=np.float64))
    phi = np.asarray(basis, dtype=np.float64)
    if inv_sqrt is not None:
        phi = np.einsum("pq,rqt->rpt", inv_sqrt, phi)
    wv = w.weights
    s_r = np.einsum("rpt,rqt,t->rpq", phi, phi, wv)
    sigma = np.einsum("ir,rpq->ipq", lam, s_r)
    gram = np.einsum("rpt,mps->rmts", phi, phi)
    diag_g = np.einsum("rrts->rts", gram)
    l_mat = np.einsum("rts,mts,t,s->rm", diag_g, diag_g, wv, wv)
    k_mat = np.einsum("rmts,mrts,t,s->rm", gram, gram, wv, wv)
    i_mat = lam @ l_mat @ lam.T
    t_mat = lam @ k_mat @ lam.T
    tr_sigma2 = np.einsum("ipq,iqp->i", sigma, sigma)
    return i_mat, t_mat, tr_sigma2, sigma


def _dense_trace_integrals(gammas, w: QuadWeights, inv_sqrt: np.ndarray | None = None):
    kernels = [np.asarray(g, dtype=np.float64) for g in gammas]
    p = kernels[0].shape[0]
    for g in kernels:
        if g.ndim != 4 or g.shape[0] != p or g.shape[1] != p:
            raise ValidationError("dense covariance kernels must have shape (p, p, m, m)")
    if inv_sqrt is not None:
        kernels = [np.einsum("ha,abst,bl->hlst", inv_sqrt, g, inv_sqrt) for g in kernels]
    wv = w.weights
    k = len(kernels)
    traces = [np.einsum("hhst->st", g) for g in kernels]
    sigma = np.stack([np.einsum("hltt,t->hl", g, wv) for g in kernels])
    i_mat = np.empty((k, k))
    t_mat = np.empty((k, k))
    for i1 in range(k):
        for i2 in range(i1, k):
            i_mat[i1, i2] = i_mat[i2, i1] = np.einsum(
                "st,st,s,t->", traces[i1], traces[i2], wv, wv
            )
            t_mat[i1, i2] = t_mat[i2, i1] = np.einsum(
                "hlst,lhst,s,t->", kernels[i1], kernels[i2], wv, wv
            )
    tr_sigma2 = np.einsum("ipq,iqp->i", sigma, sigma)
    return i_mat, t_mat, tr_sigma2, sigma


def true_dof(
    gammas,
    n,
    hn: np.ndarray,
    w: QuadWeights,
    kurtosis=None,
) -> TrueDof:
    """Degrees of freedom from known covariance structures.

    ``gammas`` is either a ``SeparableCovariances`` or a sequence of dense
    kernels of shape (p, p, m, m), one per group. ``kurtosis`` supplies the
    per-group standardized kurtosis functionals (zero for Gaussian
    processes, the default).
    """
    n = np.asarray(n, dtype=np.float64)
    hn = np.asarray(hn, dtype=np.float64)
    k = n.size
    if isinstance(gammas, SeparableCovariances):
        raw = separable_trace_integrals(gammas.lambdas, gammas.basis, w)
    else:
        raw = _dense_trace_integrals(gammas, w)
    sigma = raw[3]
    p = sigma.shape[1]
    h_diag = np.diag(hn)
    omega = np.einsum("i,ipq->pq", h_diag / n, sigma)
    omega = (omega + omega.T) / 2.0
    inv_sqrt = inv_sqrt_spd(omega)  # raises NotPositiveDefiniteError if degenerate
    if isinstance(gammas, SeparableCovariances):
        i_star, t_star, tr_sigma2_star, _ = separable_trace_integrals(
            gammas.lambdas, gammas.basis, w, inv_sqrt=inv_sqrt
        )
    else:
        i_star, t_star, tr_sigma2_star, _ = _dense_trace_integrals(
            gammas, w, inv_sqrt=inv_sqrt
        )
    k4 = np.zeros(k) if kurtosis is None else np.asarray(kurtosis, dtype=np.float64)
    if k4.size != k:
        raise ValidationError("kurtosis must supply one value per group")

    db_denom = float(np.sum(h_diag**2 * k4 / n**3))
    de_denom = db_denom
    for i1 in range(k):
        for i2 in range(k):
            db_denom += hn[i1, i2] ** 2 * (i_star[i1, i2] + t_star[i1, i2]) / (n[i1] * n[i2])
    de_denom += float(
        np.sum(h_diag**2 * (np.diag(i_star) + np.diag(t_star)) / (n**2 * (n - 1)))
    )
    if db_denom <= 0 or de_denom <= 0:
        raise DegenerateDofError("true-parameter DoF denominator is nonpositive")
    return TrueDof(
        d_b=float(p * (p + 1) / db_denom),
        d_e=float(p * (p + 1) / de_denom),
        omega=omega,
        i_star=i_star,
        t_star=t_star,
        tr_sigma2_star=tr_sigma2_star,
        sigma=sigma,
    )
