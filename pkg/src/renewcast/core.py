"""Shared domain types, the splitmix64 generator and evaluation metrics."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_ISO_RE = re.compile(r"^[A-Z]{3}$")


class RenewcastError(Exception):
    """Base error. ``code`` is the machine-readable prefix, ``exit_code`` the CLI status."""

    code = "E_INTERNAL"
    exit_code = 1


class InputError(RenewcastError, ValueError):
    code = "E_INPUT"
    exit_code = 2


class ModelError(RenewcastError, ValueError):
    code = "E_MODEL"
    exit_code = 3


class StorageError(RenewcastError, OSError):
    code = "E_IO"
    exit_code = 4


class UndefinedMetricError(ModelError):
    """Raised when a metric has no defined value for the given input."""

    code = "E_METRIC"


class Source(str, enum.Enum):
    HYDRO = "Hydro"
    WIND = "Wind"
    SOLAR = "Solar"
    BIOMASS = "Biomass"
    GEOTHERMAL = "Geothermal"
    OTHER = "OtherRenewable"

    @classmethod
    def parse(cls, label: str) -> "Source":
        key = label.strip().lower().replace("_", "").replace(" ", "")
        for member in cls:
            if member.value.lower() == key:
                return member
        aliases = {"hydroelectric": cls.HYDRO, "hydropower": cls.HYDRO,
                   "bioenergy": cls.BIOMASS, "other": cls.OTHER,
                   "otherrenewables": cls.OTHER}
        if key in aliases:
            return aliases[key]
        raise InputError(f"unknown energy source {label!r}")

    def __str__(self) -> str:
        return self.value


# Fixed ordering used for stacking, report rows and deterministic aggregation.
SOURCE_ORDER = tuple(Source)


def valid_iso(code: str) -> bool:
    return bool(_ISO_RE.match(code))


@dataclass(frozen=True)
class EnergyRecord:
    """One observation. ``generation`` is ``None`` for a missing cell."""

    country_iso: str
    country_name: str
    year: int
    source: Source
    generation: Optional[float]

    def __post_init__(self):
        if not valid_iso(self.country_iso):
            raise InputError(f"invalid ISO code {self.country_iso!r}")
        if not 1900 <= self.year <= 2100:
            raise InputError(f"year {self.year} outside [1900, 2100]")
        if self.generation is not None:
            if not math.isfinite(self.generation) or self.generation < 0:
                raise InputError(
                    f"generation must be a non-negative number, got {self.generation}")


@dataclass(frozen=True)
class EnergySeries:
    """Annual generation for one (country, source) pair, in TWh.

    ``values`` may hold ``nan`` for missing years until the series is imputed.
    """

    country_iso: str
    source: Source
    years: tuple
    values: tuple
    imputed_mask: tuple = field(default=())

    def __post_init__(self):
        if not self.imputed_mask:
            object.__setattr__(self, "imputed_mask", (False,) * len(self.years))
        if not (len(self.years) == len(self.values) == len(self.imputed_mask)):
            raise InputError("years, values and imputed_mask differ in length")
        if any(b <= a for a, b in zip(self.years, self.years[1:])):
            raise InputError("series years must be strictly increasing")
        if any(v < 0 for v in self.values if not math.isnan(v)):
            raise InputError("series values must be non-negative")

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(np.asarray(self.values, dtype=float))

    @property
    def complete(self) -> bool:
        return bool(self.observed.all())

    def year_array(self) -> np.ndarray:
        return np.asarray(self.years, dtype=float)

    def value_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def until(self, last_year: int) -> "EnergySeries":
        keep = [i for i, y in enumerate(self.years) if y <= last_year]
        return EnergySeries(
            self.country_iso, self.source,
            tuple(self.years[i] for i in keep),
            tuple(self.values[i] for i in keep),
            tuple(self.imputed_mask[i] for i in keep),
        )


class DeterministicRng:
    """splitmix64 generator; the stream depends only on the seed."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    @staticmethod
    def _mix(z: int) -> int:
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return self._mix(self.state)

    def next_f64(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def next_u64_block(self, n: int) -> np.ndarray:
        """Next ``n`` outputs as a uint64 array, identical to ``n`` calls of next_u64."""
        base = np.uint64(self.state)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = base + steps * np.uint64(GOLDEN_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        return z

    def next_f64_block(self, n: int) -> np.ndarray:
        return (self.next_u64_block(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def shuffle_indices(self, n: int) -> list:
        """Fisher-Yates over 0..n-1, partner j = next_u64 mod (i+1), i from n-1 down to 1."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            order[i], order[j] = order[j], order[i]
        return order


def fnv1a64(data: str | bytes) -> int:
    """64-bit FNV-1a hash, used to derive per-series seeds."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def series_seed(seed: int, country_iso: str, source: Source | str) -> int:
    return (int(seed) & MASK64) ^ fnv1a64(f"{country_iso}|{Source(source).value}")


# ---------------------------------------------------------------- metrics

def _pair(actual: Sequence[float], predicted: Sequence[float]):
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1:
        raise InputError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise InputError("metrics need at least one point")
    return a, p


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    d = np.abs(a - p)
    top = float(d.max())
    if top == 0.0:
        return 0.0
    # scaled to avoid underflow/overflow of the squares
    return top * float(np.sqrt(np.mean((d / top) ** 2)))


def r_squared(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    if a.size < 2:
        raise UndefinedMetricError("R-squared needs at least two points")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("R-squared undefined for constant actual values")
    ss_res = float(np.sum((a - p) ** 2))
    return 1.0 - ss_res / ss_tot


def mape(actual, predicted) -> tuple[float, int]:
    """Mean absolute percentage error over nonzero actuals, and the count skipped."""
    a, p = _pair(actual, predicted)
    nonzero = a != 0
    if not nonzero.any():
        raise UndefinedMetricError("MAPE undefined: every actual value is zero")
    pct = 100.0 * np.abs(a[nonzero] - p[nonzero]) / np.abs(a[nonzero])
    return float(np.mean(pct)), int((~nonzero).sum())


@dataclass(frozen=True)
class MetricReport:
    """Scores for one evaluation. ``r2``/``mape`` are ``None`` when undefined."""

    mae: float
    rmse: float
    r2: Optional[float]
    mape: Optional[float]
    mape_excluded_count: int
    n: int

    def to_dict(self) -> dict:
        return {"n": self.n, "mae": self.mae, "rmse": self.rmse, "r2": self.r2,
                "mape": self.mape, "mape_excluded_count": self.mape_excluded_count}


def evaluate(actual, predicted) -> MetricReport:
    a, p = _pair(actual, predicted)
    try:
        r2 = r_squared(a, p)
    except UndefinedMetricError:
        r2 = None
    try:
        mape_value, excluded = mape(a, p)
    except UndefinedMetricError:
        mape_value, excluded = None, int(a.size)
    return MetricReport(mae(a, p), rmse(a, p), r2, mape_value, excluded, int(a.size))
