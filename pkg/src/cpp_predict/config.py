"""JSON run configuration.

The file is a flat object plus optional ``basis``, ``kernel``, ``simulate``
and ``split`` sub-objects. Unknown keys are rejected so that typos fail loudly::

    {
      "divergence": "dpd", "alpha": 1.0, "backend": "linear",
      "prior_scale": 100, "a0": 0.1, "b0": 0.1, "n_draws": 500,
      "grid_len": 61, "window_sd": 4, "seed": 0,
      "simulate": {"n": 200, "p": 6, "sigma": 1, "outlier_frac": 0.03, "n_replicates": 50},
      "split": {"n_splits": 10, "n_clean_test": 18}
    }

The environment variable ``CPP_SEED`` overrides ``seed``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

from .basis import BasisSpec
from .divergences import DivergenceKind
from .engine import BACKENDS, ModelConfig
from .gp import KernelSpec
from .lab import SimScenario
from .solver import CppConfig

SEED_ENV = "CPP_SEED"


@dataclass(frozen=True)
class SimulateSection:
    n: int = 200
    p: int = 6
    sigma: float = 1.0
    outlier_frac: float = 0.03
    perturb_sd: float | None = None
    n_replicates: int = 50
    n_test: int = 50
    workers: int = 1


@dataclass(frozen=True)
class SplitSection:
    n_splits: int = 10
    n_clean_test: int = 18
    standardize: bool = True


@dataclass(frozen=True)
class RunConfig:
    divergence: str = "dpd"
    alpha: float | None = 1.0
    backend: str = "linear"
    intercept: bool = False
    prior_scale: float = 100.0
    a0: float = 0.1
    b0: float = 0.1
    sigma2: float | None = None
    n_draws: int = 500
    approach: str = "I"
    grid_len: int = 61
    window_sd: float = 4.0
    refine_tol: float = 1e-8
    summary: str = "mean"
    truncate_quantile: float | None = None
    seed: int = 0
    basis: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=dict)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    split: SplitSection = field(default_factory=SplitSection)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        self.model()  # validates the numeric fields

    @property
    def divergence_kind(self):
        return DivergenceKind.parse(self.divergence, self.alpha)

    def cpp_config(self):
        return CppConfig(self.grid_len, self.window_sd, self.refine_tol, self.summary, self.truncate_quantile)

    def model(self) -> ModelConfig:
        b = dict(self.basis)
        if "knots" in b:
            b["knots"] = tuple(tuple(k) if isinstance(k, list) else k for k in b["knots"])
        return ModelConfig(
            divergence=self.divergence_kind, backend=self.backend, intercept=self.intercept,
            prior_scale=self.prior_scale, a0=self.a0, b0=self.b0, sigma2=self.sigma2,
            n_draws=self.n_draws, approach=self.approach, cpp=self.cpp_config(),
            basis=BasisSpec(**b), kernel=KernelSpec(**self.kernel),
        )

    def scenario(self) -> SimScenario:
        s = self.simulate
        return SimScenario(
            n=s.n, p=s.p, sigma=s.sigma, outlier_frac=s.outlier_frac, perturb_sd=s.perturb_sd,
            n_replicates=s.n_replicates, divergence=self.divergence_kind, seed=self.seed,
            n_test=s.n_test, n_draws=self.n_draws, a0=self.a0, b0=self.b0,
            prior_scale=self.prior_scale, cpp=self.cpp_config(),
        )

    def to_dict(self):
        return asdict(self)


def _check_keys(cls, d, where):
    allowed = {f.name for f in fields(cls)}
    extra = set(d) - allowed
    if extra:
        raise KeyError(f"unknown key(s) in {where}: {sorted(extra)}")


def from_dict(d: dict, env=None) -> RunConfig:
    d = dict(d)
    _check_keys(RunConfig, d, "config")
    if "simulate" in d:
        _check_keys(SimulateSection, d["simulate"], "simulate")
        d["simulate"] = SimulateSection(**d["simulate"])
    if "split" in d:
        _check_keys(SplitSection, d["split"], "split")
        d["split"] = SplitSection(**d["split"])
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        d["seed"] = int(env[SEED_ENV])
    return RunConfig(**d)


def load_config(path=None, overrides=None, env=None) -> RunConfig:
    d = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if not isinstance(d, dict):
            raise ValueError(f"{path}: top level must be a JSON object")
    d.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return from_dict(d, env)
