"""Test statistics, F-approximations, p-values, and the end-to-end test.

Scaling the hypothesis and error variation matrices by their estimated
degrees of freedom yields two approximately Wishart matrices M1 and M2;
the Wilks, Lawley-Hotelling, and Pillai functionals of (M1, M2) are then
mapped to F statistics with (possibly fractional) degrees of freedom.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import betainc

from .dataset import FunctionalDataset
from .dof import DofEstimate, dof_estimates
from .errors import (
    ApproximationUndefinedError,
    InputError,
    SingularErrorMatrixError,
    ValidationError,
)
from .glht import ContrastSpec, build_glht
from .grid import quad_weights

__all__ = [
    "TestStatistics",
    "FApprox",
    "TestReport",
    "statistics",
    "f_cdf",
    "f_sf",
    "f_approx_mfw",
    "f_approx_mflh",
    "f_approx_mfp",
    "run_glht",
]

STATISTIC_NAMES = ("mfw", "mflh", "mfp")


@dataclass(frozen=True)
class TestStatistics:
    """The three matrix functionals of M1 (hypothesis) and M2 (error)."""

    mfw: float
    mflh: float
    mfp: float
    m1: np.ndarray = field(repr=False)
    m2: np.ndarray = field(repr=False)

    def by_name(self, name: str) -> float:
        return {"mfw": self.mfw, "mflh": self.mflh, "mfp": self.mfp}[name]


@dataclass(frozen=True)
class FApprox:
    """F statistic with degrees of freedom and the branch that produced it."""

    f_stat: float
    df1: float
    df2: float
    branch: str
    aux: dict = field(default_factory=dict)
    pole_fallback: bool = False


@dataclass(frozen=True)
class TestReport:
    """Everything one test run produces, ready for JSON serialization."""

    statistics: TestStatistics
    approx: dict
    p_values: dict
    dof: DofEstimate
    alpha: float
    decisions: dict
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "statistics": {name: self.statistics.by_name(name) for name in STATISTIC_NAMES},
            "f_approx": {
                name: {
                    "f_stat": approx.f_stat,
                    "df1": approx.df1,
                    "df2": approx.df2,
                    "branch": approx.branch,
                    "pole_fallback": approx.pole_fallback,
                    "aux": dict(approx.aux),
                }
                for name, approx in self.approx.items()
            },
            "p_values": dict(self.p_values),
            "decisions": dict(self.decisions),
            "dof": {
                "d_b": self.dof.d_b,
                "d_e": self.dof.d_e,
                "within": [
                    {
                        "i_hat": ws.i_hat,
                        "t_hat": ws.t_hat,
                        "tr_sigma2_hat": ws.tr_sigma2_hat,
                        "k4_hat": ws.k4_hat,
                    }
                    for ws in self.dof.within
                ],
                "i_cross": self.dof.i_cross.tolist(),
                "t_cross": self.dof.t_cross.tolist(),
                "clamped_b": list(self.dof.clamped_b),
                "clamped_e": list(self.dof.clamped_e),
            },
            "diagnostics": dict(self.diagnostics),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _chol(matrix: np.ndarray, what: str):
    try:
        return scipy.linalg.cholesky(matrix, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularErrorMatrixError(f"{what} is not positive definite") from exc


def statistics(m1: np.ndarray, m2: np.ndarray) -> TestStatistics:
    """Wilks, Lawley-Hotelling, and Pillai functionals of (M1, M2).

    Determinants go through Cholesky log-determinants and inverses through
    Cholesky solves, so an indefinite error matrix fails fast.
    """
    m1 = np.asarray(m1, dtype=np.float64)
    m2 = np.asarray(m2, dtype=np.float64)
    if m1.shape != m2.shape or m1.ndim != 2 or m1.shape[0] != m1.shape[1]:
        raise ValidationError("M1 and M2 must be square matrices of equal size")
    m1 = (m1 + m1.T) / 2.0
    m2 = (m2 + m2.T) / 2.0
    scale = max(np.abs(m1).max(), 1.0)
    if np.linalg.eigvalsh(m1)[0] < -1e-8 * scale:
        raise ValidationError("M1 must be positive semidefinite")
    chol2 = _chol(m2, "error matrix M2")
    chol12 = _chol(m1 + m2, "M1 + M2")
    logdet2 = 2.0 * np.sum(np.log(np.diag(chol2)))
    logdet12 = 2.0 * np.sum(np.log(np.diag(chol12)))
    mfw = float(np.exp(logdet2 - logdet12))
    mflh = float(np.trace(scipy.linalg.cho_solve((chol2, True), m1)))
    mfp = float(np.trace(scipy.linalg.cho_solve((chol12, True), m1)))
    return TestStatistics(mfw=mfw, mflh=mflh, mfp=mfp, m1=m1, m2=m2)


def f_cdf(x: float, df1: float, df2: float) -> float:
    """CDF of the F distribution, fractional degrees of freedom included."""
    if df1 <= 0 or df2 <= 0:
        raise InputError("degrees of freedom must be positive")
    if x < 0:
        raise InputError("the F distribution is supported on x >= 0")
    return float(betainc(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2)))


def f_sf(x: float, df1: float, df2: float) -> float:
    """Survival function 1 - f_cdf, computed without cancellation."""
    if df1 <= 0 or df2 <= 0:
        raise InputError("degrees of freedom must be positive")
    if x < 0:
        raise InputError("the F distribution is supported on x >= 0")
    return float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df1 * x + df2)))


def _nu_s(p: int, d_b: float, d_e: float) -> tuple[float, float, float]:
    nu1 = (abs(d_b - p) - 1.0) / 2.0
    nu2 = (d_e - p - 1.0) / 2.0
    s = min(float(p), d_b)
    return nu1, nu2, s


def f_approx_mfw(t: float, p: int, d_b: float, d_e: float) -> FApprox:
    """F-approximation of the Wilks statistic."""
    if not (0.0 < t <= 1.0):
        raise ValidationError(f"Wilks statistic must lie in (0, 1], got {t}")
    if d_b <= 0 or d_e <= 0:
        raise ValidationError("degrees of freedom must be positive")
    den = p * p + d_b * d_b - 5.0
    num = p * p * d_b * d_b - 4.0
    pole_fallback = False
    if den > 0 and num > 0:
        theta1 = float(np.sqrt(num / den))
    else:
        # num <= 0 < den is outside the formula's intended range; use the
        # same fallback as the den <= 0 branch and flag it.
        theta1 = 1.0
        pole_fallback = den > 0
    theta2 = d_e - (p - d_b + 1.0) / 2.0
    theta3 = p * d_b / 2.0 - 1.0
    df1 = p * d_b
    df2 = theta1 * theta2 - theta3
    if df2 <= 0:
        raise ApproximationUndefinedError(
            f"Wilks F-approximation undefined: theta1*theta2 - theta3 = {df2:.6g} <= 0 "
            f"(p={p}, d_b={d_b:.6g}, d_e={d_e:.6g})"
        )
    t_root = t ** (1.0 / theta1)
    f_stat = (df2 / df1) * (1.0 - t_root) / t_root
    return FApprox(
        f_stat=float(f_stat),
        df1=float(df1),
        df2=float(df2),
        branch="MFW",
        aux={"theta1": theta1, "theta2": theta2, "theta3": theta3},
        pole_fallback=pole_fallback,
    )


def f_approx_mflh(t: float, p: int, d_b: float, d_e: float) -> FApprox:
    """F-approximation of the Lawley-Hotelling statistic.

    Branches on the sign of nu2; near the pole of phi2 at nu2 = 1 (and
    whenever phi2 fails to exceed 1) the nonpositive-nu2 formula is used
    instead, with a diagnostic flag.
    """
    if t < 0:
        raise ValidationError(f"Lawley-Hotelling statistic must be >= 0, got {t}")
    if d_b <= 0 or d_e <= 0:
        raise ValidationError("degrees of freedom must be positive")
    nu1, nu2, s = _nu_s(p, d_b, d_e)
    aux = {"nu1": nu1, "nu2": nu2, "s": s}
    use_neg = nu2 <= 0
    pole_fallback = False
    phi2 = None
    if not use_neg:
        if abs(nu2 - 1.0) <= 1e-9:
            use_neg = pole_fallback = True
        else:
            phi2 = (p + 2 * nu2) * (d_b + 2 * nu2) / (2 * (2 * nu2 + 1) * (nu2 - 1))
            aux["phi2"] = phi2
            if phi2 <= 1.0 + 1e-9:
                use_neg = pole_fallback = True
    if use_neg:
        df1 = s * (2 * nu1 + s + 1)
        df2 = 2 * (s * nu2 + 1)
        if df2 <= 0:
            raise ApproximationUndefinedError(
                f"Lawley-Hotelling F-approximation undefined: 2(s*nu2 + 1) = "
                f"{df2:.6g} <= 0 (p={p}, d_b={d_b:.6g}, d_e={d_e:.6g})"
            )
        f_stat = df2 * t / (s * s * (2 * nu1 + s + 1))
        return FApprox(
            f_stat=float(f_stat),
            df1=float(df1),
            df2=float(df2),
            branch="MFLH-neg-nu2",
            aux=aux,
            pole_fallback=pole_fallback,
        )
    ratio = (p * d_b + 2.0) / (phi2 - 1.0)
    phi1 = (2.0 + ratio) / (2.0 * nu2)
    aux["phi1"] = phi1
    df1 = p * d_b
    df2 = 4.0 + ratio
    f_stat = df2 * t / (df1 * phi1)
    return FApprox(
        f_stat=float(f_stat),
        df1=float(df1),
        df2=float(df2),
        branch="MFLH-pos-nu2",
        aux=aux,
    )


def f_approx_mfp(t: float, p: int, d_b: float, d_e: float) -> FApprox:
    """F-approximation of the Pillai statistic."""
    if d_b <= 0 or d_e <= 0:
        raise ValidationError("degrees of freedom must be positive")
    nu1, nu2, s = _nu_s(p, d_b, d_e)
    if not (0.0 <= t < s):
        raise ApproximationUndefinedError(
            f"Pillai F-approximation needs 0 <= t < s = {s:.6g}, got t = {t:.6g}"
        )
    df1 = s * (2 * nu1 + s + 1)
    df2 = s * (2 * nu2 + s + 1)
    if df2 <= 0:
        raise ApproximationUndefinedError(
            f"Pillai F-approximation undefined: s(2*nu2 + s + 1) = {df2:.6g} <= 0 "
            f"(p={p}, d_b={d_b:.6g}, d_e={d_e:.6g})"
        )
    f_stat = ((2 * nu2 + s + 1) / (2 * nu1 + s + 1)) * t / (s - t)
    return FApprox(
        f_stat=float(f_stat),
        df1=float(df1),
        df2=float(df2),
        branch="MFP",
        aux={"nu1": nu1, "nu2": nu2, "s": s},
    )


def run_glht(
    ds: FunctionalDataset,
    spec: ContrastSpec,
    alpha: float = 0.05,
    method: str = "fast",
    backend: str | None = None,
) -> TestReport:
    """Run all three tests end to end on one dataset and contrast."""
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    w = quad_weights(ds.grid)
    glht = build_glht(ds, spec, w)
    dof = dof_estimates(ds, spec, w, glht=glht, method=method, backend=backend)
    m1 = dof.d_b * glht.bn
    m2 = dof.d_e * glht.en
    stats = statistics(m1, m2)
    p = ds.p
    approx = {
        "mfw": f_approx_mfw(stats.mfw, p, dof.d_b, dof.d_e),
        "mflh": f_approx_mflh(stats.mflh, p, dof.d_b, dof.d_e),
        "mfp": f_approx_mfp(stats.mfp, p, dof.d_b, dof.d_e),
    }
    p_values = {
        name: f_sf(fa.f_stat, fa.df1, fa.df2) for name, fa in approx.items()
    }
    decisions = {name: bool(p_values[name] < alpha) for name in approx}
    diagnostics = {
        "dof_clamped": dof.any_clamped,
        "mflh_pole_fallback": approx["mflh"].pole_fallback,
        "mfw_theta_fallback": approx["mfw"].pole_fallback,
    }
    return TestReport(
        statistics=stats,
        approx=approx,
        p_values=p_values,
        dof=dof,
        alpha=float(alpha),
        decisions=decisions,
        diagnostics=diagnostics,
    )
