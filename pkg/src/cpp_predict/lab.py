"""Simulation harness: clean data, response contamination, MLPD and probes.

Replicates are seeded from ``SeedSequence(scenario.seed).spawn(n_replicates)``
so each replicate's result depends only on its own child sequence; the
summary is the same whether replicates run serially or in a process pool.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .conjugate import Dataset, PriorSpec, fit_posterior
from .dataio import ColumnTransform, fit_transform
from .divergences import DivergenceKind, GaussianLaw
from .engine import ModelConfig, predict
from .errors import CppError
from .solver import CppConfig, linear_problem, solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContaminationSpec:
    frac: float = 0.0
    perturb_sd: float = 10.0

    def __post_init__(self):
        if not 0 <= self.frac < 1:
            raise ValueError(f"frac must lie in [0, 1), got {self.frac}")
        if not self.perturb_sd > 0:
            raise ValueError("perturb_sd must be positive")


@dataclass(frozen=True)
class SimScenario:
    """One simulation setting.

    ``perturb_sd=None`` means ten times ``sigma``. ``beta_true=None`` means
    ``(1, -1, 0.5, 0, ..., 0)`` truncated or padded to length ``p``.
    """

    n: int = 200
    p: int = 6
    sigma: float = 1.0
    outlier_frac: float = 0.0
    perturb_sd: float | None = None
    n_replicates: int = 50
    divergence: DivergenceKind = field(default_factory=lambda: DivergenceKind("dpd", 1.0))
    seed: int = 0
    beta_true: tuple | None = None
    n_test: int = 50
    n_draws: int = 500
    a0: float = 0.1
    b0: float = 0.1
    prior_scale: float = 100.0
    cpp: CppConfig = field(default_factory=CppConfig)

    def __post_init__(self):
        if self.n < 2 or self.p < 1 or self.n_test < 1 or self.n_replicates < 1:
            raise ValueError("n >= 2, p >= 1, n_test >= 1 and n_replicates >= 1 are required")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.beta_true is not None and len(self.beta_true) != self.p:
            raise ValueError(f"beta_true has length {len(self.beta_true)}, expected p = {self.p}")
        ContaminationSpec(self.outlier_frac, self.effective_perturb_sd)

    @property
    def beta(self):
        if self.beta_true is not None:
            return np.asarray(self.beta_true, dtype=float)
        b = np.zeros(self.p)
        head = [1.0, -1.0, 0.5][: self.p]
        b[: len(head)] = head
        return b

    @property
    def effective_perturb_sd(self):
        if self.perturb_sd is not None:
            return float(self.perturb_sd)
        return 10.0 * self.sigma if self.sigma > 0 else 10.0

    @property
    def contamination(self):
        return ContaminationSpec(self.outlier_frac, self.effective_perturb_sd)

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            divergence=self.divergence, prior_scale=self.prior_scale, a0=self.a0, b0=self.b0,
            n_draws=self.n_draws, cpp=self.cpp,
        )

    def to_dict(self):
        d = asdict(self)
        d["divergence"] = {"kind": self.divergence.kind, "alpha": self.divergence.alpha}
        d["perturb_sd"] = self.effective_perturb_sd
        d["beta_true"] = self.beta.tolist()
        return d


class Contaminated(NamedTuple):
    data: Dataset
    indices: np.ndarray
    transform: ColumnTransform


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    seed_entropy: str
    mlpd: float
    a_star: np.ndarray = field(repr=False)
    map_pred: np.ndarray = field(repr=False)
    y_test: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    pred_var: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    boundary_draws: int = 0
    nonconvex_points: int = 0
    outlier_indices: tuple = ()
    error: str = ""

    @property
    def failed(self):
        return bool(self.error)

    @property
    def cpp_positive(self):
        return (not self.failed) and self.mlpd > 0

    def row(self):
        shift = float(np.mean(np.abs(self.a_star - self.map_pred))) if self.a_star.size else math.nan
        return {
            "replicate": self.replicate, "seed_entropy": self.seed_entropy, "mlpd": self.mlpd,
            "cpp_positive": self.cpp_positive, "mean_abs_shift": shift,
            "boundary_draws": self.boundary_draws, "nonconvex_points": self.nonconvex_points,
            "failed": self.failed, "error": self.error,
        }

    def observation_rows(self):
        gains = ((self.y_test - self.map_pred) ** 2 - (self.y_test - self.a_star) ** 2) / (2.0 * self.pred_var)
        return [
            {"unit": self.replicate, "index": k, "outlier": False, "y": float(y), "cpp_mean": float(a),
             "map_mean": float(m), "pred_var": float(v), "gain": float(g)}
            for k, (y, a, m, v, g) in enumerate(zip(self.y_test, self.a_star, self.map_pred, self.pred_var, gains))
        ]


@dataclass(frozen=True)
class ScenarioSummary:
    scenario: SimScenario
    mean: float
    se: float
    ci_lower: float
    ci_upper: float
    pct_positive: float
    n_ok: int
    n_failed: int
    replicates: tuple

    def as_dict(self):
        return {
            "scenario": self.scenario.to_dict(), "mean_mlpd": self.mean, "se": self.se,
            "ci_lower": self.ci_lower, "ci_upper": self.ci_upper, "pct_positive": self.pct_positive,
            "n_ok": self.n_ok, "n_failed": self.n_failed,
        }


# ---------------------------------------------------------------------------
# data


def generate_data(scenario: SimScenario, seed):
    """Clean training set and an independent clean test set of ``n_test`` rows."""
    rng = np.random.default_rng(seed)
    beta = scenario.beta

    def draw(m):
        X = rng.standard_normal((m, scenario.p))
        return Dataset(X, X @ beta + scenario.sigma * rng.standard_normal(m))

    train = draw(scenario.n)
    return train, draw(scenario.n_test)


def contaminate(data: Dataset, spec: ContaminationSpec, seed) -> Contaminated:
    """Perturb ``floor(frac * n)`` responses, then standardize covariate columns.

    The returned transform carries the training column moments so that test
    covariates can be mapped identically.
    """
    rng = np.random.default_rng(seed)
    k = int(math.floor(spec.frac * data.n + 1e-9))
    idx = np.sort(rng.choice(data.n, size=k, replace=False)) if k else np.empty(0, dtype=int)
    y = data.y.copy()
    y[idx] += spec.perturb_sd * rng.standard_normal(k)
    tr = fit_transform(data.X)
    return Contaminated(Dataset(tr.apply_X(data.X), y), idx, tr)


# ---------------------------------------------------------------------------
# metric


def log_density_gain(y, cpp: GaussianLaw, plug_in: GaussianLaw) -> float:
    return cpp.logpdf(y) - plug_in.logpdf(y)


def mlpd(y_test, cpp_laws, map_laws) -> float:
    """Mean over the test points of ``log p_CPP(y) - log p_MAP(y)``."""
    y_test = np.atleast_1d(np.asarray(y_test, dtype=float))
    if y_test.size == 0 or len(cpp_laws) != y_test.size or len(map_laws) != y_test.size:
        raise ValueError("need one CPP and one MAP law per test response")
    return float(np.mean([log_density_gain(y, c, m) for y, c, m in zip(y_test, cpp_laws, map_laws)]))


# ---------------------------------------------------------------------------
# replicates


def _entropy(ss):
    return f"{ss.entropy}:{'/'.join(map(str, ss.spawn_key))}"


def run_replicate(scenario: SimScenario, seed_seq: np.random.SeedSequence, replicate: int = 0) -> ReplicateResult:
    data_ss, cont_ss, draw_ss = seed_seq.spawn(3)
    train, test = generate_data(scenario, data_ss)
    cont = contaminate(train, scenario.contamination, cont_ss)
    X_test = cont.transform.apply_X(test.X)
    pred = predict(cont.data, X_test, scenario.model_config(), np.random.default_rng(draw_ss))
    value = float(np.mean(pred.cpp_logpdf(test.y) - pred.map_logpdf(test.y)))
    return ReplicateResult(
        replicate, _entropy(seed_seq), value, pred.cpp_mean, pred.map_mean, test.y, pred.pred_var,
        int(pred.boundary_draws.sum()), int((~pred.convexity_ok).sum()), tuple(cont.indices.tolist()),
    )


def _safe_replicate(args):
    scenario, ss, r = args
    try:
        return run_replicate(scenario, ss, r)
    except (CppError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.warning("replicate %d failed: %s", r, exc)
        return ReplicateResult(r, _entropy(ss), math.nan, np.empty(0), np.empty(0), error=f"{type(exc).__name__}: {exc}")


def summarize(scenario, results) -> ScenarioSummary:
    ok = np.array([r.mlpd for r in results if not r.failed])
    k = ok.size
    mean = float(ok.mean()) if k else math.nan
    se = float(ok.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
    pct = 100.0 * float(np.mean(ok > 0)) if k else math.nan
    return ScenarioSummary(
        scenario, mean, se, mean - 1.96 * se, mean + 1.96 * se, pct, k, len(results) - k, tuple(results),
    )


def run_scenario(scenario: SimScenario, workers: int = 1) -> ScenarioSummary:
    """Run all replicates; failures are counted and left out of the statistics."""
    children = np.random.SeedSequence(scenario.seed).spawn(scenario.n_replicates)
    jobs = [(scenario, ss, r) for r, ss in enumerate(children)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_safe_replicate, jobs))
    else:
        results = [_safe_replicate(j) for j in jobs]
    return summarize(scenario, results)


# ---------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class SweepResult:
    magnitudes: np.ndarray
    a_star: np.ndarray
    map_pred: np.ndarray
    boundary: np.ndarray
    map_slope: float  # x_new' A^-1 x_j
    sigma_hat: float

    @property
    def cpp_range(self):
        return float(np.ptp(self.a_star))

    @property
    def map_range(self):
        return float(np.ptp(self.map_pred))

    def fitted_map_slope(self):
        return float(np.polyfit(self.magnitudes, self.map_pred, 1)[0])


def influence_sweep(data: Dataset, prior: PriorSpec, x_new, j: int, magnitudes, divergence: DivergenceKind,
                    sigma2: float | None = None, cfg: CppConfig = CppConfig()) -> SweepResult:
    """Replace ``y_j`` by each magnitude and re-solve CPP and the plug-in at ``x_new``.

    The noise variance is held fixed (``sigma2`` or ``prior.sigma2``) so that
    the window scale ``sigma_hat`` is the same at every sweep point.
    """
    s2 = prior.sigma2 if sigma2 is None else sigma2
    if s2 is None:
        raise ValueError("influence_sweep needs a fixed noise variance")
    if not 0 <= j < data.n:
        raise IndexError(f"j = {j} out of range for n = {data.n}")
    x_new = np.asarray(x_new, dtype=float)
    mags = np.asarray(magnitudes, dtype=float)
    a = np.empty(mags.size)
    m = np.empty(mags.size)
    bnd = np.zeros(mags.size, dtype=bool)
    state = fit_posterior(data, prior)
    slope = float(x_new @ state.Ainv @ data.X[j])
    for k, v in enumerate(mags):
        d = data.with_response(j, v)
        st = fit_posterior(d, prior)
        sol = solve(linear_problem(st, d, x_new, divergence, s2), cfg)
        a[k], m[k], bnd[k] = sol.a_star, float(x_new @ st.beta_hat), sol.boundary
    return SweepResult(mags, a, m, bnd, slope, math.sqrt(s2))


@dataclass(frozen=True)
class ElpdProbeRow:
    perturb_sd: float
    gain_contaminated: float
    gain_clean: float
    se_contaminated: float

    @property
    def difference(self):
        return self.gain_contaminated - self.gain_clean


def elpd_probe(scenario: SimScenario, eps: float, perturb_sds=(5.0, 20.0, 80.0), workers: int = 1):
    """Empirical ELPD(CPP) - ELPD(plug-in) under contamination ``eps`` and under clean data.

    Both arms share the scenario seed, so each pair of replicates uses the same
    design, noise and draws and differs only in the perturbation.
    """
    if not 0 <= eps <= 0.05:
        raise ValueError("the first-order probe is meant for eps <= 0.05")
    clean = run_scenario(replace(scenario, outlier_frac=0.0), workers)
    rows = []
    for sd in perturb_sds:
        dirty = run_scenario(replace(scenario, outlier_frac=eps, perturb_sd=float(sd)), workers)
        rows.append(ElpdProbeRow(float(sd), dirty.mean, clean.mean, dirty.se))
    return rows
