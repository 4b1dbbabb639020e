"""Repeated random-split evaluation with held-out outliers.

Every split puts all flagged outliers in the test set together with a fresh
random draw of clean rows; training uses the remaining clean rows only.
Covariates and response are standardized on the training rows of each split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conjugate import Dataset
from .dataio import Report, fit_transform
from .engine import ModelConfig, predict

OUTLIER_RULES = ("studentized", "iqr")


@dataclass(frozen=True)
class SplitPlan:
    n_clean_test: int
    outlier_indices: tuple = ()
    n_splits: int = 10
    seed: int = 0

    def __post_init__(self):
        idx = tuple(sorted({int(i) for i in self.outlier_indices}))
        if any(i < 0 for i in idx):
            raise ValueError("outlier indices must be non-negative")
        if self.n_splits < 1 or self.n_clean_test < 1:
            raise ValueError("n_splits and n_clean_test must be positive")
        object.__setattr__(self, "outlier_indices", idx)

    @property
    def test_size(self):
        return len(self.outlier_indices) + self.n_clean_test


def make_splits(n: int, plan: SplitPlan):
    """``[(train_idx, test_idx), ...]``; outliers lead every test set."""
    out = np.asarray(plan.outlier_indices, dtype=int)
    if out.size and out.max() >= n:
        raise IndexError(f"outlier index {out.max()} out of range for n = {n}")
    clean = np.setdiff1d(np.arange(n), out)
    if plan.n_clean_test >= clean.size:
        raise ValueError(f"n_clean_test = {plan.n_clean_test} leaves no training rows out of {clean.size} clean rows")
    rng = np.random.default_rng(plan.seed)
    splits = []
    for _ in range(plan.n_splits):
        test_clean = np.sort(rng.choice(clean, size=plan.n_clean_test, replace=False))
        train = np.setdiff1d(clean, test_clean)
        splits.append((train, np.concatenate([out, test_clean])))
    return splits


def studentized_outliers(X, y, threshold=2.5):
    """Rows whose externally studentized OLS residual (intercept added) exceeds ``threshold``."""
    X = np.column_stack([np.ones(len(y)), np.asarray(X, dtype=float)])
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    Q, _ = np.linalg.qr(X)
    h = np.sum(Q**2, axis=1)
    e = y - Q @ (Q.T @ y)
    s2 = e @ e / (n - k)
    s2_i = ((n - k) * s2 - e**2 / (1.0 - h)) / (n - k - 1)
    t = e / np.sqrt(s2_i * (1.0 - h))
    return np.flatnonzero(np.abs(t) > threshold)


def iqr_outliers(y, k=1.5):
    """Rows outside ``[Q1 - k IQR, Q3 + k IQR]`` (linear-interpolation quartiles)."""
    y = np.asarray(y, dtype=float)
    q1, q3 = np.quantile(y, [0.25, 0.75])
    return np.flatnonzero((y < q1 - k * (q3 - q1)) | (y > q3 + k * (q3 - q1)))


def find_outliers(data: Dataset, rule: str):
    if rule == "studentized":
        return studentized_outliers(data.X, data.y)
    if rule == "iqr":
        return iqr_outliers(data.y)
    raise ValueError(f"unknown outlier rule {rule!r}; expected one of {OUTLIER_RULES}")


@dataclass
class SplitReport:
    split_mlpd: np.ndarray
    observations: list = field(repr=False)  # dict rows, one per (split, test index)
    split_rows: list = field(repr=False)
    plan: SplitPlan = None

    @property
    def mean(self):
        return float(np.mean(self.split_mlpd))

    @property
    def se(self):
        k = self.split_mlpd.size
        return float(np.std(self.split_mlpd, ddof=1) / math.sqrt(k)) if k > 1 else math.nan

    @property
    def splits_positive(self):
        return int(np.sum(self.split_mlpd > 0))

    def stratum_gain(self, outlier: bool):
        g = [o["gain"] for o in self.observations if o["outlier"] == outlier]
        return float(np.mean(g)) if g else math.nan

    def per_index_gain(self):
        """Average gain per distinct test row across the splits it appeared in."""
        acc = {}
        for o in self.observations:
            acc.setdefault(o["index"], []).append(o["gain"])
        return {i: float(np.mean(v)) for i, v in sorted(acc.items())}

    def metrics(self):
        return {
            "mean_mlpd": self.mean, "se": self.se, "splits_positive": self.splits_positive,
            "n_splits": int(self.split_mlpd.size),
            "gain_clean": self.stratum_gain(False), "gain_outlier": self.stratum_gain(True),
        }

    def to_report(self, config_echo: dict) -> Report:
        summary = {"config": config_echo, "metrics": self.metrics()}
        return Report(summary, "splits", self.split_rows, {"gains": self.observations})


def split_eval(data: Dataset, plan: SplitPlan, cfg: ModelConfig) -> SplitReport:
    """Run the split protocol; raises with the split id attached on failure."""
    splits = make_splits(data.n, plan)
    draw_seeds = np.random.SeedSequence(plan.seed).spawn(plan.n_splits)
    outliers = set(plan.outlier_indices)
    obs, rows, mlpds = [], [], []
    for s, ((train, test), ss) in enumerate(zip(splits, draw_seeds)):
        try:
            tr = fit_transform(data.X[train], data.y[train])
            train_d = Dataset(tr.apply_X(data.X[train]), tr.apply_y(data.y[train]))
            y_test = tr.apply_y(data.y[test])
            pred = predict(train_d, tr.apply_X(data.X[test]), cfg, np.random.default_rng(ss))
        except Exception as exc:
            raise type(exc)(f"split {s}: {exc}") from exc
        gains = pred.gains(y_test)
        is_out = np.array([i in outliers for i in test])
        mlpds.append(float(gains.mean()))
        rows.append({
            "split": s, "n_train": int(train.size), "n_test": int(test.size), "mlpd": mlpds[-1],
            "gain_clean": float(gains[~is_out].mean()) if (~is_out).any() else math.nan,
            "gain_outlier": float(gains[is_out].mean()) if is_out.any() else math.nan,
            "boundary_draws": int(pred.boundary_draws.sum()),
            "nonconvex_points": int((~pred.convexity_ok).sum()),
        })
        for k, i in enumerate(test):
            obs.append({
                "unit": s, "index": int(i), "outlier": bool(is_out[k]), "y": float(y_test[k]),
                "cpp_mean": float(pred.cpp_mean[k]), "map_mean": float(pred.map_mean[k]),
                "pred_var": float(pred.pred_var[k]), "gain": float(gains[k]),
            })
    return SplitReport(np.array(mlpds), obs, rows, plan)
