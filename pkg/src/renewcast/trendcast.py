"""Piecewise-linear trend forecaster with L1-penalised changepoints.

The trend on standardised time ``t`` in [0, 1] is

    g(t) = (k + sum_{s_j <= t} delta_j) * t + (m - sum_{s_j <= t} s_j * delta_j)

which equals ``k*t + m + sum_j delta_j * max(t - s_j, 0)``. Parameters are the
minimiser of half the squared error plus ``penalty * sum|delta_j|``, found by cyclic
coordinate descent. Future uncertainty is simulated by extending the trend with
randomly placed slope changes drawn from a Laplace distribution whose scale is the
mean absolute fitted change.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import (
    DeterministicRng,
    EnergySeries,
    InputError,
    ModelError,
    series_seed,
)

SCALE_FLOOR = 1e-12
LAPLACE_FLOOR = 1e-8
TOL = 1e-9
MAX_SWEEPS = 5000


@dataclass(frozen=True)
class TrendConfig:
    n_changepoints: Optional[int] = None  # None: min(25, floor(0.8 n) - 1)
    changepoint_range: float = 0.8
    penalty: float = 0.01
    interval_level: float = 0.8
    n_simulations: int = 1000
    seed: int = 42

    def __post_init__(self):
        if self.n_changepoints is not None and self.n_changepoints < 0:
            raise InputError("n_changepoints must be >= 0")
        if not 0 < self.changepoint_range <= 1:
            raise InputError("changepoint_range must be in (0, 1]")
        if not self.penalty >= 0:
            raise InputError("penalty must be >= 0")
        if not 0 < self.interval_level < 1:
            raise InputError("interval_level must be in (0, 1)")
        if self.n_simulations < 1:
            raise InputError("n_simulations must be >= 1")


@dataclass(frozen=True)
class Scaler:
    t_min: float
    t_max: float
    y_mean: float
    y_std: float

    def time(self, years) -> np.ndarray:
        return (np.asarray(years, dtype=float) - self.t_min) / (self.t_max - self.t_min)

    def values(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def invert(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.y_std + self.y_mean


@dataclass(frozen=True)
class TrendModel:
    k: float
    m: float
    changepoints: tuple
    deltas: tuple
    scaler: Scaler
    country_iso: str = ""
    source: str = ""
    sweeps: int = 0

    def trend(self, t) -> np.ndarray:
        """g at standardised times."""
        t = np.asarray(t, dtype=float)
        out = self.k * t + self.m
        for s, d in zip(self.changepoints, self.deltas):
            out = out + d * np.maximum(t - s, 0.0)
        return out

    @property
    def terminal_slope(self) -> float:
        """Effective slope after the last changepoint, in standardised units."""
        return self.k + sum(self.deltas)

    def to_dict(self) -> dict:
        return {"k": self.k, "m": self.m, "changepoints": list(self.changepoints),
                "deltas": list(self.deltas), "scaler": vars(self.scaler).copy(),
                "country_iso": self.country_iso, "source": self.source}


@dataclass(frozen=True)
class Forecast:
    country_iso: str
    source: str
    years: tuple
    point: tuple
    lo: tuple
    hi: tuple
    level: float

    def to_dict(self) -> dict:
        return {"country": self.country_iso, "source": self.source, "level": self.level,
                "rows": [{"year": y, "point": p, "lo": lo, "hi": hi}
                         for y, p, lo, hi in zip(self.years, self.point, self.lo, self.hi)]}

    @classmethod
    def from_dict(cls, doc) -> "Forecast":
        rows = doc["rows"]
        return cls(doc["country"], doc["source"],
                   tuple(int(r["year"]) for r in rows),
                   tuple(float(r["point"]) for r in rows),
                   tuple(float(r["lo"]) for r in rows),
                   tuple(float(r["hi"]) for r in rows),
                   float(doc["level"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _observed(series: EnergySeries) -> tuple[np.ndarray, np.ndarray]:
    years = series.year_array()
    values = series.value_array()
    keep = ~np.isnan(values)
    return years[keep], values[keep]


def standardize(series: EnergySeries):
    """Scaled times in [0, 1], z-scored values and the scaler that inverts them."""
    years, values = _observed(series)
    if years.size < 3:
        raise InputError(
            f"series {series.country_iso}/{series.source} needs at least 3 observations")
    y_std = float(np.std(values))
    if y_std < SCALE_FLOOR:
        y_std = 1.0
    scaler = Scaler(float(years.min()), float(years.max()), float(np.mean(values)), y_std)
    return scaler.time(years), scaler.values(values), scaler


def default_changepoints(n_obs: int) -> int:
    return max(0, min(25, math.floor(0.8 * n_obs) - 1))


def place_changepoints(n_obs: int, config: TrendConfig = TrendConfig(),
                       t: Optional[np.ndarray] = None) -> np.ndarray:
    """Evenly spaced changepoints over (0, changepoint_range].

    The count is capped by the number of observations strictly inside
    (0, changepoint_range); ``t`` defaults to evenly spaced observation times.
    """
    if n_obs < 3:
        raise InputError("changepoint placement needs at least 3 observations")
    requested = (default_changepoints(n_obs) if config.n_changepoints is None
                 else config.n_changepoints)
    if t is None:
        t = np.linspace(0.0, 1.0, n_obs)
    interior = int(np.sum((t > 0) & (t < config.changepoint_range)))
    S = min(requested, interior)
    return np.arange(1, S + 1) * config.changepoint_range / (S + 1)


def design_matrix(t: np.ndarray, changepoints: Sequence[float]) -> np.ndarray:
    """Columns: t, 1, then max(t - s_j, 0) for each changepoint."""
    cols = [t, np.ones_like(t)] + [np.maximum(t - s, 0.0) for s in changepoints]
    return np.column_stack(cols)


def objective(A: np.ndarray, y: np.ndarray, beta: np.ndarray, penalty: float) -> float:
    r = y - A @ beta
    return 0.5 * float(r @ r) + penalty * float(np.sum(np.abs(beta[2:])))


def _soft(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def fit_trend(series: EnergySeries, config: TrendConfig = TrendConfig(),
              trace: Optional[list] = None) -> TrendModel:
    """Fit the penalised piecewise-linear trend.

    ``trace``, when given, receives the objective value after every sweep.
    """
    t, y, scaler = standardize(series)
    s = place_changepoints(t.size, config, t)
    A = design_matrix(t, s)
    G = A.T @ A
    c = A.T @ y
    p = A.shape[1]
    beta = np.zeros(p)
    beta[:2] = np.linalg.lstsq(A[:, :2], y, rcond=None)[0]
    lam = config.penalty
    # Gram-form updates: a_j.r = c_j - G_j.beta + G_jj beta_j
    Gb = G @ beta
    sweeps = 0
    for sweeps in range(1, MAX_SWEEPS + 1):
        max_change = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            rho = c[j] - Gb[j] + gjj * beta[j]
            new = rho / gjj if j < 2 else _soft(rho, lam) / gjj
            change = new - beta[j]
            if change != 0.0:
                Gb += G[:, j] * change
                beta[j] = new
                max_change = max(max_change, abs(change))
        if trace is not None:
            trace.append(objective(A, y, beta, lam))
        if max_change < TOL:
            break
    return TrendModel(float(beta[0]), float(beta[1]), tuple(float(v) for v in s),
                      tuple(float(v) for v in beta[2:]), scaler,
                      series.country_iso, str(series.source), sweeps)


def predict_point(model: TrendModel, years) -> np.ndarray:
    """Trend in TWh at the given years, clamped at zero."""
    z = model.trend(model.scaler.time(years))
    return np.maximum(model.scaler.invert(z), 0.0)


def _laplace(u: np.ndarray, scale: float) -> np.ndarray:
    """Inverse CDF of Laplace(0, scale) for u in [0, 1)."""
    centred = u - 0.5
    tail = np.maximum(1.0 - 2.0 * np.abs(centred), 2.0 ** -53)
    return -scale * np.sign(centred) * np.log(tail)


def simulate_trajectories(model: TrendModel, years, config: TrendConfig,
                          rng: DeterministicRng) -> np.ndarray:
    """Simulated future trends in TWh, shape (n_simulations, len(years)), unclamped.

    Each future step draws two uniforms, in simulation-major order: one decides
    whether a slope change starts at the previous step (Bernoulli with the
    historical changepoint rate times the step length), the other draws its size.
    """
    years = np.asarray(years, dtype=float)
    if years.size == 0:
        return np.empty((config.n_simulations, 0))
    if years[0] <= model.scaler.t_max or np.any(np.diff(years) <= 0):
        raise InputError("simulation years must be increasing and after the history")
    t = model.scaler.time(years)
    starts = np.concatenate(([1.0], t[:-1]))
    steps = t - starts

    S = len(model.changepoints)
    rate = S / config.changepoint_range
    prob = np.minimum(1.0, rate * steps)
    b = float(np.mean(np.abs(model.deltas))) if S else 0.0
    b = max(b, LAPLACE_FLOOR)

    n_sim, H = config.n_simulations, years.size
    u = rng.next_f64_block(2 * n_sim * H).reshape(n_sim, H, 2)
    jumps = np.where(u[:, :, 0] < prob, _laplace(u[:, :, 1], b), 0.0)
    # contribution of a jump starting at starts[h] to time t[i] for i >= h
    lag = np.maximum(t[None, :] - starts[:, None], 0.0)  # (h, i)
    extra = jumps @ lag
    base = model.trend(t)
    return model.scaler.invert(base[None, :] + extra)


def simulate_intervals(model: TrendModel, years, config: TrendConfig = TrendConfig(),
                       rng: Optional[DeterministicRng] = None):
    """Lower and upper interval bounds at ``config.interval_level``, clamped at zero."""
    if rng is None:
        rng = DeterministicRng(series_seed(config.seed, model.country_iso or "SAM",
                                           model.source or "Hydro"))
    sims = simulate_trajectories(model, years, config, rng)
    alpha = config.interval_level
    lo = np.quantile(sims, (1 - alpha) / 2, axis=0, method="linear")
    hi = np.quantile(sims, (1 + alpha) / 2, axis=0, method="linear")
    return np.maximum(lo, 0.0), np.maximum(hi, 0.0)


def forecast_source(series: EnergySeries, horizon_year: int,
                    config: TrendConfig = TrendConfig()) -> Forecast:
    """Fit, extrapolate and attach intervals for years after the history up to the horizon."""
    model = fit_trend(series, config)
    last = int(model.scaler.t_max)
    if horizon_year <= last:
        raise ModelError(f"horizon {horizon_year} is not after the last year {last}")
    years = np.arange(last + 1, horizon_year + 1)
    point = predict_point(model, years)
    rng = DeterministicRng(series_seed(config.seed, series.country_iso, series.source))
    lo, hi = simulate_intervals(model, years, config, rng)
    lo = np.minimum(lo, point)
    hi = np.maximum(hi, point)
    return Forecast(series.country_iso, str(series.source),
                    tuple(int(y) for y in years),
                    tuple(float(v) for v in point),
                    tuple(float(v) for v in lo),
                    tuple(float(v) for v in hi),
                    config.interval_level)


def sum_forecasts(forecasts: Sequence[Forecast], country_iso: str = "SAM",
                  source: str = "Total") -> Forecast:
    """Year-wise sum of point forecasts (and, as a rough band, of the bounds)."""
    if not forecasts:
        raise InputError("nothing to sum")
    years = forecasts[0].years
    if any(f.years != years for f in forecasts):
        raise InputError("forecasts cover different years")
    stack = lambda attr: np.sum([getattr(f, attr) for f in forecasts], axis=0)
    return Forecast(country_iso, source, years,
                    tuple(float(v) for v in stack("point")),
                    tuple(float(v) for v in stack("lo")),
                    tuple(float(v) for v in stack("hi")),
                    forecasts[0].level)


def with_seed(config: TrendConfig, seed: int) -> TrendConfig:
    return replace(config, seed=seed)
