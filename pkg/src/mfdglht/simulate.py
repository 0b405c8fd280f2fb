"""Synthetic data generation and Monte Carlo size/power studies.

Samples are Karhunen-Loeve style sums: group mean plus a linear
combination of orthonormal vector basis curves with group-specific
variance components and i.i.d. unit-variance innovations. Three
innovation laws are supported (standard normal, scaled t with 8 degrees
of freedom, centered scaled chi-square with 4 degrees of freedom), all
driven by a single seeded normal stream so that every replication is
exactly reproducible.

Study runs are deterministic regardless of worker count: replication
``r`` of a study with master seed ``s`` always uses the stream seeded by
``SeedSequence([s, r])``, and results are reduced in replication order.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import FunctionalDataset, GroupSample
from .dof import dof_estimates
from .errors import DegeneracyError, InputError, ValidationError
from .fstats import STATISTIC_NAMES, run_glht, statistics
from .glht import ContrastSpec, build_glht, oneway_contrast
from .grid import Grid, make_uniform_grid, quad_weights

__all__ = [
    "SimConfig",
    "StudyResult",
    "N_PRESETS",
    "SCENARIO_NUS",
    "CONTRAST_PRESETS",
    "scalar_basis",
    "basis_functions",
    "component_stream_basis",
    "component_stream_lambdas",
    "mean_functions",
    "lambda_grid",
    "draw_innovations",
    "sample_curves",
    "gen_sample",
    "size_power_study",
    "are_metric",
    "permutation_pvalue",
    "load_config_file",
]

N_PRESETS = {
    "n1": (10, 10, 10, 10),
    "n2": (10, 12, 12, 15),
    "n3": (15, 15, 25, 25),
}

SCENARIO_NUS = {
    "S1": (1.5, 1.5, 1.5, 1.5),
    "S2": (1.5, 2.0, 2.5, 3.0),
}

CONTRAST_PRESETS = {
    "oneway": lambda k: oneway_contrast(k).c,
    "two_sample": lambda k: _pair_contrast(k),
    "linear_combo": lambda k: _linear_combo_contrast(k),
}


def _pair_contrast(k: int) -> np.ndarray:
    if k != 4:
        raise ValidationError("the two-sample preset compares groups 1 and 4 of k=4")
    return np.array([[1.0, 0.0, 0.0, -1.0]])


def _linear_combo_contrast(k: int) -> np.ndarray:
    if k != 4:
        raise ValidationError("the linear-combination preset is defined for k=4")
    return np.array([[1.0, -3.0, 0.0, 2.0]])


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo setting.

    ``n`` may be a preset name ("n1", "n2", "n3") or an explicit tuple.
    ``contrast`` may be a preset name or an explicit coefficient matrix.
    """

    n: tuple[int, ...] = (15, 15, 25, 25)
    p: int = 6
    m: int = 80
    q: int = 7
    rho: float = 0.5
    scenario: str = "S1"
    model: int = 1
    delta: float = 0.0
    contrast: str = "oneway"
    alpha: float = 0.05
    reps: int = 1000
    seed: int = 20240101
    label: str = ""

    def __post_init__(self):
        if isinstance(self.n, str):
            try:
                object.__setattr__(self, "n", N_PRESETS[self.n])
            except KeyError:
                raise ValidationError(f"unknown sample-size preset {self.n!r}") from None
        else:
            object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if any(v < 1 for v in self.n):
            raise ValidationError("group sizes must be positive")
        if self.scenario not in SCENARIO_NUS:
            raise ValidationError(f"scenario must be one of {sorted(SCENARIO_NUS)}")
        if self.model not in (1, 2, 3):
            raise ValidationError("model must be 1, 2, or 3")
        if not (0.0 < self.rho < 1.0):
            raise ValidationError("rho must lie in (0, 1)")
        if self.q % 2 == 0 or self.q < 1:
            raise ValidationError("q must be odd (paired sine/cosine construction)")
        if self.delta < 0:
            raise ValidationError("delta must be >= 0")
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError("alpha must lie in (0, 1)")
        if self.reps < 1:
            raise ValidationError("reps must be >= 1")
        if self.p < 1 or self.m < 2:
            raise ValidationError("need p >= 1 and m >= 2")

    @property
    def k(self) -> int:
        return len(self.n)

    def contrast_spec(self) -> ContrastSpec:
        if isinstance(self.contrast, str):
            try:
                c = CONTRAST_PRESETS[self.contrast](self.k)
            except KeyError:
                raise ValidationError(f"unknown contrast preset {self.contrast!r}") from None
        else:
            c = np.asarray(self.contrast, dtype=np.float64)
        return ContrastSpec(c)

    def grid(self) -> Grid:
        return make_uniform_grid(self.m, 0.0, 1.0)

    def nus(self) -> tuple[float, ...]:
        return SCENARIO_NUS[self.scenario]


@dataclass(frozen=True)
class StudyResult:
    """Empirical rejection rates of one Monte Carlo setting."""

    config: SimConfig
    rejections: dict
    completed: int
    errored: int
    elapsed_seconds: float

    def rate_percent(self, name: str) -> float:
        if self.completed == 0:
            return float("nan")
        return 100.0 * self.rejections[name] / self.completed


def scalar_basis(count: int, grid: Grid) -> np.ndarray:
    """First ``count`` orthonormal scalar basis curves on [0, 1].

    Index 1 is the constant 1; indices 2r and 2r+1 are sqrt(2) sin(2 pi r t)
    and sqrt(2) cos(2 pi r t).
    """
    t = grid.points
    psi = np.empty((count, t.size))
    psi[0] = 1.0
    for idx in range(2, count + 1):
        r = idx // 2
        if idx % 2 == 0:
            psi[idx - 1] = np.sqrt(2.0) * np.sin(2.0 * np.pi * r * t)
        else:
            psi[idx - 1] = np.sqrt(2.0) * np.cos(2.0 * np.pi * r * t)
    return psi


def component_weights(p: int) -> np.ndarray:
    """Weights c_l = l / sqrt(1^2 + ... + p^2), so their squares sum to 1."""
    ell = np.arange(1, p + 1, dtype=np.float64)
    return ell / np.sqrt(np.sum(ell**2))


def basis_functions(p: int, q: int, grid: Grid) -> np.ndarray:
    """Common-direction orthonormal vector basis curves, shape (q, p, m).

    The r-th curve is the scalar basis curve psi_r stacked onto the fixed
    direction (c_1, ..., c_p); the curves are orthonormal (the time
    integral of phi_r . phi_m is 1 when r = m and 0 otherwise).

    Covariances built on this family put all variation along one p-vector,
    so a sample drawn from them has a singular pooled covariance whenever
    p > 1. They serve analytic computations (trace functionals have
    closed forms); data generation uses ``component_stream_basis``.
    """
    if q % 2 == 0 or q < 1:
        raise ValidationError("q must be odd (paired sine/cosine construction)")
    c = component_weights(p)
    psi = scalar_basis(q, grid)
    return c[None, :, None] * psi[:, None, :]


def component_stream_basis(p: int, q: int, grid: Grid) -> np.ndarray:
    """Basis giving every component its own innovation stream, shape (q*p, p, m).

    Term (r, l) is c_l psi_r(t) on component l and zero elsewhere, so a
    sample built on it draws q independent innovations per component:

        y_l(t) = eta_l(t) + c_l * sum_r sqrt(lambda_r) eps_{lr} psi_r(t).

    Components are independent with integrated covariance
    (sum_r lambda_r) diag(c_1^2, ..., c_p^2), which has full rank p; this
    is the construction behind all simulation presets. Terms are ordered
    r-major: (r=1, l=1..p), (r=2, l=1..p), ...
    """
    if q % 2 == 0 or q < 1:
        raise ValidationError("q must be odd (paired sine/cosine construction)")
    c = component_weights(p)
    psi = scalar_basis(q, grid)
    basis = np.zeros((q * p, p, grid.m))
    for r in range(q):
        for ell in range(p):
            basis[r * p + ell, ell, :] = c[ell] * psi[r]
    return basis


def component_stream_lambdas(nus, rho: float, q: int, p: int) -> np.ndarray:
    """Variance components matching ``component_stream_basis`` term order."""
    return np.repeat(lambda_grid(nus, rho, q), p, axis=1)


def mean_functions(p: int, grid: Grid, delta: float = 0.0) -> np.ndarray:
    """The four preset group mean curves, shape (4, p, m); requires p = 6.

    Groups 1 and 2 share one mean; groups 3 and 4 share another whose
    sixth (polynomial) component is shifted by delta through
    (1, 2, 3, 4) / sqrt(30) on the polynomial coefficients.
    """
    if p != 6:
        raise ValidationError("the preset mean curves are defined for p = 6 only")
    t = grid.points
    base = np.stack(
        [
            np.sin(2.0 * np.pi * t**2) ** 5,
            np.cos(2.0 * np.pi * t**2) ** 5,
            np.cbrt(t) * (1.0 - t) - 5.0,
            np.sqrt(5.0) * t ** (2.0 / 3.0) * np.exp(-7.0 * t),
            np.sqrt(13.0 * t) * np.exp(-13.0 * t / 2.0),
            1.0 + 2.3 * t + 3.4 * t**2 + 1.5 * t**3,
        ]
    )
    shift = delta / np.sqrt(30.0)
    shifted6 = (
        (1.0 + shift)
        + (2.3 + 2.0 * shift) * t
        + (3.4 + 3.0 * shift) * t**2
        + (1.5 + 4.0 * shift) * t**3
    )
    eta3 = base.copy()
    eta3[5] = shifted6
    return np.stack([base, base, eta3, eta3])


def lambda_grid(nus, rho: float, q: int) -> np.ndarray:
    """Variance components nu_i * rho^r for r = 1..q, shape (k, q)."""
    nus = np.asarray(nus, dtype=np.float64)
    r = np.arange(1, q + 1, dtype=np.float64)
    return nus[:, None] * rho ** r[None, :]


def draw_innovations(rng: np.random.Generator, shape, model: int) -> np.ndarray:
    """Zero-mean unit-variance innovations built from standard normals.

    Model 1 uses the normals directly. Model 2 forms t_8 / sqrt(4/3):
    one numerator normal and eight squared normals for the denominator
    chi-square. Model 3 forms (chi2_4 - 4) / (2 sqrt(2)) from four
    squared normals.
    """
    shape = tuple(shape)
    if model == 1:
        return rng.standard_normal(shape)
    if model == 2:
        z = rng.standard_normal(shape + (9,))
        chi2 = np.sum(z[..., 1:] ** 2, axis=-1)
        t8 = z[..., 0] / np.sqrt(chi2 / 8.0)
        return t8 / np.sqrt(4.0 / 3.0)
    if model == 3:
        z = rng.standard_normal(shape + (4,))
        chi2 = np.sum(z**2, axis=-1)
        return (chi2 - 4.0) / (2.0 * np.sqrt(2.0))
    raise ValidationError("model must be 1, 2, or 3")


def sample_curves(
    means: np.ndarray,
    lambdas: np.ndarray,
    basis: np.ndarray,
    n,
    model: int,
    rng: np.random.Generator,
) -> FunctionalDataset:
    """Draw one dataset from the component model.

    ``means`` is (k, p, m), ``lambdas`` (k, q), ``basis`` (q, p, m).
    Groups are generated in order, each consuming its innovations from the
    shared stream.
    """
    means = np.asarray(means, dtype=np.float64)
    lambdas = np.atleast_2d(np.asarray(lambdas, dtype=np.float64))
    basis = np.asarray(basis, dtype=np.float64)
    k = means.shape[0]
    n = tuple(int(v) for v in n)
    if lambdas.shape[0] != k or len(n) != k:
        raise ValidationError("means, lambdas, and n disagree on the group count")
    if basis.shape[0] != lambdas.shape[1]:
        raise ValidationError("basis and lambdas disagree on the number of terms")
    groups = []
    sqrt_lam = np.sqrt(lambdas)
    for i in range(k):
        eps = draw_innovations(rng, (n[i], lambdas.shape[1]), model)
        coeff = eps * sqrt_lam[i][None, :]
        values = means[i][None, :, :] + np.einsum("jr,rpm->jpm", coeff, basis)
        groups.append(GroupSample(values))
    m = means.shape[2]
    return FunctionalDataset(make_uniform_grid(m, 0.0, 1.0), tuple(groups))


def gen_sample(cfg: SimConfig, seed) -> FunctionalDataset:
    """Generate one dataset for a simulation setting, deterministically."""
    grid = cfg.grid()
    means = mean_functions(cfg.p, grid, cfg.delta)[: cfg.k]
    lambdas = component_stream_lambdas(cfg.nus(), cfg.rho, cfg.q, cfg.p)
    basis = component_stream_basis(cfg.p, cfg.q, grid)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return sample_curves(means, lambdas, basis, cfg.n, cfg.model, rng)


def _study_replication(cfg: SimConfig, spec: ContrastSpec, rep: int, backend):
    ds = gen_sample(cfg, [cfg.seed, rep])
    report = run_glht(ds, spec, alpha=cfg.alpha, backend=backend)
    return {name: report.decisions[name] for name in STATISTIC_NAMES}


def size_power_study(
    cfg: SimConfig, threads: int | None = None, backend: str | None = None
) -> StudyResult:
    """Empirical rejection rates over ``cfg.reps`` independent replications.

    Replications that fail with a numerical degeneracy are counted as
    errored and excluded from the rate denominator, never silently
    dropped. The result is identical for any worker count.
    """
    spec = cfg.contrast_spec()
    if threads is None:
        threads = int(os.environ.get("MFD_GLHT_THREADS", "0")) or (os.cpu_count() or 1)
    start = time.perf_counter()
    outcomes: list = [None] * cfg.reps

    def run_one(rep: int):
        try:
            return _study_replication(cfg, spec, rep, backend)
        except DegeneracyError as exc:
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rep, outcome in enumerate(pool.map(run_one, range(cfg.reps))):
                outcomes[rep] = outcome
    else:
        for rep in range(cfg.reps):
            outcomes[rep] = run_one(rep)

    rejections = {name: 0 for name in STATISTIC_NAMES}
    errored = 0
    for outcome in outcomes:
        if isinstance(outcome, Exception):
            errored += 1
            continue
        for name in STATISTIC_NAMES:
            rejections[name] += bool(outcome[name])
    return StudyResult(
        config=cfg,
        rejections=rejections,
        completed=cfg.reps - errored,
        errored=errored,
        elapsed_seconds=time.perf_counter() - start,
    )


def are_metric(alphas, alpha_nominal: float) -> float:
    """Average relative error of empirical sizes against the nominal level.

    Both arguments are in percent; the result is 100 times the mean
    relative deviation.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.size == 0:
        raise InputError("need at least one empirical size")
    if alpha_nominal <= 0:
        raise InputError("nominal level must be positive")
    return float(100.0 * np.mean(np.abs(alphas - alpha_nominal)) / alpha_nominal)


def _evidence(name: str, stats) -> float:
    # All three are compared on a larger-is-stronger-evidence scale; the
    # Wilks statistic rejects for small values, so it enters negated.
    value = stats.by_name(name)
    return -value if name == "mfw" else value


def permutation_pvalue(
    ds: FunctionalDataset,
    spec: ContrastSpec,
    statistic: str = "mfp",
    b: int = 199,
    seed: int = 0,
    backend: str | None = None,
) -> float:
    """Label-permutation p-value for one of the three statistics.

    Valid as an exchangeability oracle only under the null with equal
    covariance functions across groups; requires a pure contrast. The
    statistic (including its estimated degrees of freedom) is recomputed
    on every relabeled dataset.
    """
    if statistic not in STATISTIC_NAMES:
        raise InputError(f"statistic must be one of {STATISTIC_NAMES}")
    if not spec.is_pure_contrast():
        raise InputError("permutation test requires a pure contrast (C 1_k = 0)")
    if b < 99:
        raise InputError("use at least 99 permutations")
    w = quad_weights(ds.grid)

    def stat_value(dataset: FunctionalDataset) -> float:
        glht = build_glht(dataset, spec, w)
        dof = dof_estimates(dataset, spec, w, glht=glht, backend=backend)
        stats = statistics(dof.d_b * glht.bn, dof.d_e * glht.en)
        return _evidence(statistic, stats)

    observed = stat_value(ds)
    pooled = np.concatenate([g.values for g in ds.groups], axis=0)
    sizes = ds.n
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    exceed = 0
    for _ in range(b):
        order = rng.permutation(pooled.shape[0])
        groups = []
        offset = 0
        for size in sizes:
            groups.append(GroupSample(pooled[order[offset : offset + size]]))
            offset += size
        permuted = FunctionalDataset(ds.grid, tuple(groups))
        if stat_value(permuted) >= observed:
            exceed += 1
    return (1.0 + exceed) / (b + 1.0)


def load_config_file(path) -> list[SimConfig]:
    """Read one or many simulation settings from a JSON file.

    The file holds either a single setting object or ``{"settings":
    [...]}`` where top-level keys act as defaults merged into every
    setting.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed config JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    known = set(SimConfig.__dataclass_fields__)
    if "settings" in raw:
        defaults = {key: value for key, value in raw.items() if key != "settings"}
        configs = []
        for idx, entry in enumerate(raw["settings"]):
            merged = {**defaults, **entry}
            unknown = set(merged) - known
            if unknown:
                raise InputError(f"setting {idx + 1}: unknown config keys {sorted(unknown)}")
            try:
                configs.append(SimConfig(**_coerce(merged)))
            except (TypeError, ValidationError) as exc:
                raise InputError(f"setting {idx + 1}: {exc}") from None
        if not configs:
            raise InputError("config lists no settings")
        return configs
    unknown = set(raw) - known
    if unknown:
        raise InputError(f"unknown config keys {sorted(unknown)}")
    try:
        return [SimConfig(**_coerce(raw))]
    except (TypeError, ValidationError) as exc:
        raise InputError(str(exc)) from None


def _coerce(entry: dict) -> dict:
    out = dict(entry)
    if "n" in out and isinstance(out["n"], list):
        out["n"] = tuple(out["n"])
    if "contrast" in out and isinstance(out["contrast"], list):
        out["contrast"] = np.asarray(out["contrast"], dtype=np.float64)
    return out
