"""Hypothesis machinery: contrast specs and the variation matrices.

A general linear hypothesis on the k group mean curves is encoded by a
full-rank q x k coefficient matrix C and a constant curve matrix C0(t)
(zero by default). From these we form the weighting matrix H, the
hypothesis variation matrix B (an integrated quadratic form in the
contrasted group means), and the error variation matrix E (the pooled
integrated covariance), whose expectations match under the null.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dataset import FunctionalDataset
from .errors import ContrastRankError, IngestionError, ValidationError
from .grid import QuadWeights
from .moments import MeanFunctions, OmegaHat, group_means, omega_hat, sigma_hat

__all__ = [
    "ContrastSpec",
    "GlhtMatrices",
    "hn_matrix",
    "b_matrix",
    "e_matrix",
    "build_glht",
    "oneway_contrast",
    "load_contrast_csv",
    "load_c0_csv",
]

RANK_REL_TOL = 1e-10


@dataclass(frozen=True)
class ContrastSpec:
    """Coefficient matrix C (q x k) and constant curves C0 (q x p x m or None)."""

    c: np.ndarray
    c0: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c, dtype=np.float64))
        c.flags.writeable = False
        object.__setattr__(self, "c", c)
        if not np.all(np.isfinite(c)):
            raise ValidationError("contrast matrix must be finite")
        q, k = c.shape
        if q > k:
            raise ContrastRankError(f"contrast has more rows ({q}) than groups ({k})")
        svals = np.linalg.svd(c, compute_uv=False)
        if svals[-1] <= RANK_REL_TOL * svals[0]:
            raise ContrastRankError(
                f"contrast matrix is numerically rank deficient (singular values "
                f"{svals[0]:.3e} .. {svals[-1]:.3e})"
            )
        if self.c0 is not None:
            c0 = np.ascontiguousarray(self.c0, dtype=np.float64)
            c0.flags.writeable = False
            object.__setattr__(self, "c0", c0)
            if c0.ndim != 3 or c0.shape[0] != q:
                raise ValidationError("C0 must have shape (q, p, m)")
            if not np.all(np.isfinite(c0)):
                raise ValidationError("C0 must be finite")

    @property
    def q(self) -> int:
        return self.c.shape[0]

    @property
    def k(self) -> int:
        return self.c.shape[1]

    def is_pure_contrast(self, tol: float = 1e-12) -> bool:
        """True when every row of C annihilates the ones vector."""
        return bool(np.all(np.abs(self.c.sum(axis=1)) <= tol * max(1.0, np.abs(self.c).max())))


@dataclass(frozen=True)
class GlhtMatrices:
    """All matrices the tests consume, computed for one dataset and contrast."""

    hn: np.ndarray
    bn: np.ndarray
    en: np.ndarray
    omega: OmegaHat
    dn_diag: np.ndarray = field(repr=False)


def oneway_contrast(k: int) -> ContrastSpec:
    """The contrast (I_{k-1}, -1_{k-1}) testing equality of all k group means."""
    if k < 2:
        raise ValidationError("one-way contrast needs k >= 2 groups")
    return ContrastSpec(np.hstack([np.eye(k - 1), -np.ones((k - 1, 1))]))


def _gram_cho_factor(c: np.ndarray, n) -> tuple:
    n = np.asarray(n, dtype=np.float64)
    if np.any(n < 1):
        raise ValidationError("group sizes must be >= 1")
    gram = (c / n) @ c.T
    return scipy.linalg.cho_factor((gram + gram.T) / 2.0, lower=True)


def hn_matrix(c: np.ndarray, n) -> np.ndarray:
    """Weighting matrix C^T (C D C^T)^{-1} C with D = diag(1/n_i); k x k PSD."""
    spec = c if isinstance(c, ContrastSpec) else ContrastSpec(c)
    cho = _gram_cho_factor(spec.c, n)
    hn = spec.c.T @ scipy.linalg.cho_solve(cho, spec.c)
    return (hn + hn.T) / 2.0


def b_matrix(
    means: MeanFunctions, spec: ContrastSpec, w: QuadWeights, n
) -> np.ndarray:
    """Hypothesis variation matrix: integrated quadratic form in C M(t) - C0(t)."""
    k, p, m = means.means.shape
    if spec.k != k:
        raise ValidationError(f"contrast has {spec.k} columns but dataset has {k} groups")
    resid = np.einsum("qk,kpm->qpm", spec.c, means.means)
    if spec.c0 is not None:
        if spec.c0.shape != (spec.q, p, m):
            raise ValidationError(
                f"C0 shape {spec.c0.shape} does not match (q={spec.q}, p={p}, m={m})"
            )
        resid = resid - spec.c0
    cho = _gram_cho_factor(spec.c, n)
    solved = scipy.linalg.cho_solve(cho, resid.reshape(spec.q, -1)).reshape(resid.shape)
    bn = np.einsum("qpt,qot,t->po", resid, solved, w.weights)
    return (bn + bn.T) / 2.0


def e_matrix(sigmas, hn: np.ndarray, n) -> np.ndarray:
    """Error variation matrix: sum_i h_ii sigma_i / n_i (equals the pooled matrix)."""
    h_diag = np.diag(np.asarray(hn, dtype=np.float64))
    n = np.asarray(n, dtype=np.float64)
    en = sum(h * np.asarray(s) / ni for h, s, ni in zip(h_diag, sigmas, n))
    return (en + en.T) / 2.0


def build_glht(ds: FunctionalDataset, spec: ContrastSpec, w: QuadWeights) -> GlhtMatrices:
    """Assemble H, B, E, and the pooled matrix for one dataset and contrast."""
    if spec.k != ds.k:
        raise ValidationError(f"contrast has {spec.k} columns but dataset has {ds.k} groups")
    n = np.asarray(ds.n)
    hn = hn_matrix(spec.c, n)
    means = group_means(ds)
    bn = b_matrix(means, spec, w, n)
    sigmas = [sigma_hat(ds, i, w) for i in range(ds.k)]
    omega = omega_hat(sigmas, np.diag(hn), n)
    en = e_matrix(sigmas, hn, n)
    return GlhtMatrices(hn=hn, bn=bn, en=en, omega=omega, dn_diag=1.0 / n)


def _open_text(source):
    if isinstance(source, str) and "\n" in source:
        return io.StringIO(source), False
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), True
    return source, False


def load_contrast_csv(source) -> np.ndarray:
    """Read a contrast matrix from CSV with header ``row,col,value`` (1-based)."""
    fh, owned = _open_text(source)
    try:
        cells: dict[tuple[int, int], float] = {}
        header_seen = False
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [part.strip() for part in line.split(",")]
            if not header_seen:
                if tuple(part.lower() for part in parts) != ("row", "col", "value"):
                    raise IngestionError(f"line {line_no}: expected header 'row,col,value'")
                header_seen = True
                continue
            if len(parts) != 3:
                raise IngestionError(f"line {line_no}: expected 3 fields")
            try:
                r, c_idx, value = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise IngestionError(f"line {line_no}: malformed row") from None
            if (r, c_idx) in cells:
                raise IngestionError(f"duplicate cell (row={r}, col={c_idx})")
            cells[(r, c_idx)] = value
        if not cells:
            raise IngestionError("contrast file has no data rows")
        q = max(key[0] for key in cells)
        k = max(key[1] for key in cells)
        c = np.zeros((q, k))
        for (r, c_idx), value in cells.items():
            c[r - 1, c_idx - 1] = value
        return c
    finally:
        if owned:
            fh.close()


def load_c0_csv(source, p: int, m: int) -> np.ndarray:
    """Read C0 curves from CSV with header ``row,component,time_index,value``."""
    fh, owned = _open_text(source)
    try:
        cells: dict[tuple[int, int, int], float] = {}
        header_seen = False
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [part.strip() for part in line.split(",")]
            if not header_seen:
                expected = ("row", "component", "time_index", "value")
                if tuple(part.lower() for part in parts) != expected:
                    raise IngestionError(
                        f"line {line_no}: expected header 'row,component,time_index,value'"
                    )
                header_seen = True
                continue
            if len(parts) != 4:
                raise IngestionError(f"line {line_no}: expected 4 fields")
            try:
                r, ci, ti, value = int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
            except ValueError:
                raise IngestionError(f"line {line_no}: malformed row") from None
            if (r, ci, ti) in cells:
                raise IngestionError(f"duplicate cell (row={r}, component={ci}, time_index={ti})")
            cells[(r, ci, ti)] = value
        if not cells:
            raise IngestionError("C0 file has no data rows")
        q = max(key[0] for key in cells)
        c0 = np.zeros((q, p, m))
        for (r, ci, ti), value in cells.items():
            if ci > p or ti > m:
                raise IngestionError(
                    f"C0 cell (row={r}, component={ci}, time_index={ti}) outside "
                    f"dataset shape (p={p}, m={m})"
                )
            c0[r - 1, ci - 1, ti - 1] = value
        return c0
    finally:
        if owned:
            fh.close()
