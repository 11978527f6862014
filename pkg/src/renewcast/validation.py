"""k-fold cross-validation for the boosted trees and historical backtesting for trends."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    SOURCE_ORDER,
    DeterministicRng,
    InputError,
    UndefinedMetricError,
    evaluate,
    mape,
)
from .dataset import Dataset
from .gbrt import Hyperparams, fit_ensemble
from .trendcast import TrendConfig, fit_trend, predict_point


def _mean(values) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


@dataclass(frozen=True)
class CvReport:
    k: int
    per_fold: tuple
    folds: tuple = field(repr=False)

    @property
    def mean_r2(self) -> Optional[float]:
        return _mean(f.r2 for f in self.per_fold)

    @property
    def mean_mae(self) -> float:
        return _mean(f.mae for f in self.per_fold)

    @property
    def mean_rmse(self) -> float:
        return _mean(f.rmse for f in self.per_fold)

    @property
    def skipped_r2(self) -> int:
        return sum(f.r2 is None for f in self.per_fold)

    def to_dict(self) -> dict:
        return {"k": self.k,
                "mean_r2": self.mean_r2, "mean_mae": self.mean_mae,
                "mean_rmse": self.mean_rmse,
                "r2_convention": "mean of per-fold scores; folds with undefined R2 skipped",
                "r2_skipped_folds": self.skipped_r2,
                "per_fold": [f.to_dict() for f in self.per_fold]}


def fold_assignment(n: int, k: int, seed: int) -> list:
    """Fold f holds the shuffled indices at positions congruent to f mod k."""
    if k < 2:
        raise InputError("k must be at least 2")
    if k > n:
        raise InputError(f"k={k} exceeds the {n} available samples")
    order = DeterministicRng(seed).shuffle_indices(n)
    return [sorted(order[f::k]) for f in range(k)]


def kfold_cv(rows, targets, k: int = 5, hyper: Optional[Hyperparams] = None) -> CvReport:
    hyper = hyper or Hyperparams()
    X = np.asarray(rows, dtype=float)
    y = np.asarray(targets, dtype=float)
    folds = fold_assignment(y.size, k, hyper.seed)
    reports = []
    for fold in folds:
        test = np.zeros(y.size, dtype=bool)
        test[fold] = True
        model = fit_ensemble(X[~test], y[~test], hyper)
        reports.append(evaluate(y[test], model.predict_many(X[test])))
    return CvReport(k, tuple(reports), tuple(tuple(f) for f in folds))


@dataclass(frozen=True)
class BacktestReport:
    cutoff_year: int
    test_years: tuple
    per_source_mape: dict
    skipped: tuple = ()

    @property
    def mape_min(self) -> Optional[float]:
        vals = [v[0] for v in self.per_source_mape.values()]
        return min(vals) if vals else None

    @property
    def mape_max(self) -> Optional[float]:
        vals = [v[0] for v in self.per_source_mape.values()]
        return max(vals) if vals else None

    def best_worst(self) -> tuple:
        ranked = sorted(self.per_source_mape, key=lambda s: self.per_source_mape[s][0])
        return (ranked[0], ranked[-1]) if ranked else (None, None)

    def summary_line(self) -> str:
        if not self.per_source_mape:
            return "MAPE: no source had nonzero actuals in the test window"
        best, worst = self.best_worst()
        return (f"MAPE between {self.mape_min:.1f}% and {self.mape_max:.1f}% across "
                f"sources (most accurate: {best}, least accurate: {worst})")

    def to_dict(self) -> dict:
        return {"cutoff_year": self.cutoff_year,
                "test_years": list(self.test_years),
                "per_source_mape": {str(s): {"mape": v[0], "excluded": v[1]}
                                    for s, v in self.per_source_mape.items()},
                "skipped_sources": [str(s) for s in self.skipped],
                "mape_min": self.mape_min, "mape_max": self.mape_max,
                "summary": self.summary_line()}


def backtest(dataset: Dataset, cutoff_year: int = 2015,
             test_window: tuple = (2016, 2020),
             config: Optional[TrendConfig] = None) -> BacktestReport:
    """Fit each continent-aggregated source on years up to the cutoff and score the window."""
    config = config or TrendConfig()
    first, last = test_window
    if not (cutoff_year < first <= last):
        raise InputError("test window must start after the cutoff")
    years = dataset.years
    if not years or years[0] > cutoff_year or years[-1] < last:
        raise InputError(
            f"history {years[0] if years else '?'}-{years[-1] if years else '?'} does not "
            f"cover cutoff {cutoff_year} and window {first}-{last}")
    window = np.arange(first, last + 1)
    per_source, skipped = {}, []
    aggregates = dataset.aggregate_by_source()
    for source in SOURCE_ORDER:
        if source not in aggregates:
            continue
        full = aggregates[source]
        train = full.until(cutoff_year)
        assert max(train.years) <= cutoff_year
        model = fit_trend(train, config)
        lookup = dict(zip(full.years, full.values))
        actual = np.array([lookup[y] for y in window])
        try:
            per_source[source] = mape(actual, predict_point(model, window))
        except UndefinedMetricError:
            skipped.append(source)
    return BacktestReport(cutoff_year, tuple(int(y) for y in window), per_source, tuple(skipped))


def dump(report) -> str:
    return json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"
