"""Pipeline commands: ingest, forecast, validate, render and report.

Each command reads its inputs from the run's output directory (or the configured
data paths) and writes deterministic artifacts back into it.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import SOURCE_ORDER, InputError, ModelError, Source, StorageError, evaluate
from .dataset import Dataset, load_dataset, split
from .gbrt import Hyperparams, country_year_table, fit_ensemble, predict_year
from .geoviz import ColorRamp, parse_geojson, render_choropleth, render_share_lines, render_stacked_chart
from .trendcast import Forecast, TrendConfig, forecast_source
from .validation import backtest, dump, kfold_cv

log = logging.getLogger(__name__)

SNAPSHOT = "dataset.json"
MODEL = "gbrt_model.json"
FORECAST = "forecast.json"
REPORT = "report.json"
CV_REPORT = "cv_report.json"
BACKTEST_REPORT = "backtest_report.json"
CHOROPLETH = "choropleth_2050.svg"
STACKED = "stacked_forecast.svg"
SHARES = "share_lines.svg"
COUNTRY_TABLE = "report_countries.csv"
SOURCE_TABLE = "report_sources.csv"

FORECAST_VERSION = 1


def bundled(name: str) -> str:
    return str(resources.files("renewcast") / "data" / name)


@dataclass
class RunConfig:
    data_path: str = field(default_factory=lambda: bundled("sample_energy.csv"))
    geojson_path: str = field(default_factory=lambda: bundled("south_america.geojson"))
    output_dir: str = "renewcast-out"
    horizon_year: int = 2050
    gbrt: Hyperparams = field(default_factory=Hyperparams)
    trend: TrendConfig = field(default_factory=TrendConfig)
    cv_folds: int = 5
    split_ratio: float = 0.8
    backtest_cutoff: int = 2015
    backtest_window: tuple = (2016, 2020)
    baseline_years: int = 7
    strict_geo: bool = False
    stacked_from: str = "per-series"  # or "continent"
    map_size: tuple = (720, 900)
    chart_size: tuple = (960, 540)
    legend_label: str = "TWh / year"

    def __post_init__(self):
        if not self.data_path or not self.geojson_path or not self.output_dir:
            raise InputError("data_path, geojson_path and output_dir must be non-empty")
        if self.stacked_from not in ("per-series", "continent"):
            raise InputError("stacked_from must be 'per-series' or 'continent'")
        if self.baseline_years < 1:
            raise InputError("baseline_years must be >= 1")

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            if "gbrt" in doc:
                doc["gbrt"] = Hyperparams(**doc["gbrt"])
            if "trend" in doc:
                doc["trend"] = TrendConfig(**doc["trend"])
        except TypeError as exc:
            raise InputError(f"bad config section: {exc}") from None
        for key in ("backtest_window", "map_size", "chart_size"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls()
        text = _read(path)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def with_overrides(self, seed=None, horizon=None, out=None, strict_geo=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, gbrt=dataclasses.replace(cfg.gbrt, seed=seed),
                                      trend=dataclasses.replace(cfg.trend, seed=seed))
        if horizon is not None:
            cfg = dataclasses.replace(cfg, horizon_year=horizon)
        if out is not None:
            cfg = dataclasses.replace(cfg, output_dir=out)
        if strict_geo:
            cfg = dataclasses.replace(cfg, strict_geo=True)
        return cfg


# ---------------------------------------------------------------- io helpers

def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise StorageError(f"file not found: {path}") from None
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from None


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from None
    return path


def _dumps(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _load_json(path: Path, what: str) -> dict:
    if not path.exists():
        raise StorageError(f"{what} not found at {path}; run the earlier pipeline step first")
    return json.loads(_read(path))


def load_snapshot(cfg: RunConfig) -> Dataset:
    path = cfg.out / SNAPSHOT
    if not path.exists():
        raise StorageError(f"dataset snapshot not found at {path}; run 'ingest' first")
    return Dataset.from_json(_read(path))


# ---------------------------------------------------------------- ingest

def cmd_ingest(cfg: RunConfig) -> dict:
    dataset = load_dataset(_read(cfg.data_path))
    if not dataset.series_index:
        raise InputError(f"no South American observations in {cfg.data_path}")
    _write(cfg.out / SNAPSHOT, dataset.to_json())
    return dataset.summary()


# ---------------------------------------------------------------- forecast

@dataclass(frozen=True)
class Report:
    horizon_year: int
    total_2050: float
    baseline: float
    baseline_span: tuple
    per_country_2050: dict
    per_source_2050: dict
    gbrt_per_country: dict

    @property
    def growth_ratio(self) -> float:
        return self.total_2050 / self.baseline

    def to_dict(self) -> dict:
        return {"horizon_year": self.horizon_year,
                "total_2050": self.total_2050,
                "baseline": self.baseline,
                "baseline_span": list(self.baseline_span),
                "growth_ratio": self.growth_ratio,
                "per_country_2050": self.per_country_2050,
                "per_source_2050": self.per_source_2050,
                "gbrt_per_country": self.gbrt_per_country,
                "gbrt_total": sum(self.gbrt_per_country.values()),
                "headline": (f"{self.total_2050:,.0f} TWh/year by {self.horizon_year}, "
                             f"{self.growth_ratio:.2f}x the {self.baseline_span[0]}-"
                             f"{self.baseline_span[1]} mean of {self.baseline:,.0f} TWh/year")}


def forecast_all(dataset: Dataset, horizon: int, config: TrendConfig) -> list[Forecast]:
    out = []
    for key in sorted(dataset.series_index, key=lambda k: (k[0], SOURCE_ORDER.index(k[1]))):
        out.append(forecast_source(dataset.series_index[key], horizon, config))
    return out


def build_report(dataset: Dataset, forecasts: list[Forecast], horizon: int,
                 baseline_years: int, gbrt_values: dict) -> Report:
    per_country: dict = {}
    per_source: dict = {}
    for f in forecasts:
        value = f.point[f.years.index(horizon)]
        per_country[f.country_iso] = per_country.get(f.country_iso, 0.0) + value
        per_source[f.source] = per_source.get(f.source, 0.0) + value
    per_source = {s.value: per_source[s.value] for s in SOURCE_ORDER if s.value in per_source}
    total = float(np.sum([per_country[k] for k in sorted(per_country)]))

    years = dataset.years[-baseline_years:]
    totals = sum(dataset.country_totals().values())
    baseline = float(np.mean(totals[-baseline_years:]))
    if baseline <= 0:
        raise ModelError("baseline generation is zero; growth ratio undefined")
    return Report(horizon, total, baseline, (years[0], years[-1]),
                  per_country, per_source, gbrt_values)


def cmd_forecast(cfg: RunConfig) -> Report:
    dataset = load_snapshot(cfg)
    horizon = cfg.horizon_year
    if horizon <= dataset.years[-1]:
        raise InputError(f"horizon {horizon} must be after the last year {dataset.years[-1]}")

    forecasts = forecast_all(dataset, horizon, cfg.trend)
    continent = [forecast_source(s, horizon, cfg.trend)
                 for s in dataset.aggregate_by_source().values()]

    rows, targets, _ = country_year_table(dataset)
    plan = split(len(targets), cfg.split_ratio, cfg.gbrt.seed)
    train, test = list(plan.train_indices), list(plan.test_indices)
    model = fit_ensemble(rows[train], targets[train], cfg.gbrt)
    holdout = evaluate(targets[test], model.predict_many(rows[test]))
    gbrt_values = predict_year(model, horizon, dataset.countries)
    _write(cfg.out / MODEL, model.to_json() + "\n")

    report = build_report(dataset, forecasts, horizon, cfg.baseline_years, gbrt_values)
    doc = {
        "version": FORECAST_VERSION,
        "horizon_year": horizon,
        "level": cfg.trend.interval_level,
        "forecasts": [f.to_dict() for f in forecasts],
        "continent_forecasts": [f.to_dict() for f in continent],
        "gbrt": {"year": horizon, "predictions": gbrt_values,
                 "split": {"ratio": cfg.split_ratio, "seed": cfg.gbrt.seed,
                           "n_train": len(train), "n_test": len(test)},
                 "holdout": holdout.to_dict()},
    }
    _write(cfg.out / FORECAST, _dumps(doc))
    _write(cfg.out / REPORT, _dumps(report.to_dict()))
    return report


def load_forecasts(cfg: RunConfig, key: str = "forecasts") -> list[Forecast]:
    doc = _load_json(cfg.out / FORECAST, "forecast JSON")
    return [Forecast.from_dict(d) for d in doc[key]]


# ---------------------------------------------------------------- validate

def cmd_validate(cfg: RunConfig):
    dataset = load_snapshot(cfg)
    first, last = cfg.backtest_window
    if dataset.years[-1] < last or dataset.years[0] > cfg.backtest_cutoff:
        raise InputError(f"history {dataset.years[0]}-{dataset.years[-1]} does not cover "
                         f"the backtest window {first}-{last}")
    rows, targets, _ = country_year_table(dataset)
    cv = kfold_cv(rows, targets, cfg.cv_folds, cfg.gbrt)
    bt = backtest(dataset, cfg.backtest_cutoff, (first, last), cfg.trend)
    _write(cfg.out / CV_REPORT, dump(cv))
    _write(cfg.out / BACKTEST_REPORT, dump(bt))
    return cv, bt


# ---------------------------------------------------------------- render

def _by_source(forecasts: list[Forecast]) -> dict:
    out: dict = {}
    for f in forecasts:
        src = Source(f.source)
        bucket = out.setdefault(src, {})
        for y, p in zip(f.years, f.point):
            bucket[y] = bucket.get(y, 0.0) + p
    return out


def historical_shares(dataset: Dataset) -> dict:
    """Percent of total renewable generation per plotted source.

    ``Total`` is the combined share of hydro, wind and solar; the input schema has
    no non-renewable denominator.
    """
    totals = dataset.source_totals()
    grand = sum(totals.values())
    safe = np.where(grand > 0, grand, 1.0)
    shares = {}
    for src in (Source.HYDRO, Source.WIND, Source.SOLAR):
        if src in totals:
            shares[src.value] = np.clip(100.0 * totals[src] / safe, 0.0, 100.0)
    if shares:
        shares["Total"] = np.clip(sum(shares.values()), 0.0, 100.0)
    return {k: [float(v) for v in vals] for k, vals in shares.items()}


def cmd_render(cfg: RunConfig) -> list[Path]:
    dataset = load_snapshot(cfg)
    report = _load_json(cfg.out / REPORT, "report JSON")
    geo = parse_geojson(_read(cfg.geojson_path), strict=cfg.strict_geo)

    choropleth = render_choropleth(
        geo.geometries, report["per_country_2050"], ColorRamp(), cfg.map_size,
        title=f"Projected renewable generation, {report['horizon_year']}",
        legend_label=cfg.legend_label)

    history = {src: dict(zip(dataset.years, (float(v) for v in vals)))
               for src, vals in dataset.source_totals().items()}
    key = "continent_forecasts" if cfg.stacked_from == "continent" else "forecasts"
    stacked = render_stacked_chart(history, _by_source(load_forecasts(cfg, key)), cfg.chart_size)
    shares = render_share_lines(dataset.years, historical_shares(dataset), cfg.chart_size)

    return [_write(cfg.out / CHOROPLETH, choropleth),
            _write(cfg.out / STACKED, stacked),
            _write(cfg.out / SHARES, shares)]


# ---------------------------------------------------------------- report

def report_tables(cfg: RunConfig) -> tuple[str, str]:
    """Country and source tables as CSV text."""
    dataset = load_snapshot(cfg)
    report = _load_json(cfg.out / REPORT, "report JSON")
    horizon = report["horizon_year"]
    total = report["total_2050"]

    cbuf = io.StringIO()
    w = csv.writer(cbuf, lineterminator="\n")
    w.writerow(["iso", "country", "baseline_twh", f"trend_{horizon}_twh",
                f"gbrt_{horizon}_twh", "share_pct", "growth_ratio"])
    n = cfg.baseline_years
    for iso, series in dataset.country_totals().items():
        base = float(np.mean(series[-n:]))
        value = report["per_country_2050"].get(iso, 0.0)
        w.writerow([iso, dataset.names.get(iso, iso), f"{base:.3f}", f"{value:.3f}",
                    f"{report['gbrt_per_country'].get(iso, 0.0):.3f}",
                    f"{100 * value / total:.2f}" if total else "",
                    f"{value / base:.3f}" if base > 0 else ""])

    continent = {Source(f.source): f for f in load_forecasts(cfg, "continent_forecasts")}
    sbuf = io.StringIO()
    w = csv.writer(sbuf, lineterminator="\n")
    w.writerow(["source", "baseline_twh", f"trend_{horizon}_twh", "continent_fit_twh",
                "lo_twh", "hi_twh", "growth_ratio"])
    for src, series in dataset.source_totals().items():
        base = float(np.mean(series[-n:]))
        value = report["per_source_2050"].get(src.value, 0.0)
        f = continent.get(src)
        i = f.years.index(horizon) if f else None
        w.writerow([src.value, f"{base:.3f}", f"{value:.3f}",
                    f"{f.point[i]:.3f}" if f else "", f"{f.lo[i]:.3f}" if f else "",
                    f"{f.hi[i]:.3f}" if f else "",
                    f"{value / base:.3f}" if base > 0 else ""])
    return cbuf.getvalue(), sbuf.getvalue()


def cmd_report(cfg: RunConfig, figures: bool = True) -> dict:
    countries, sources = report_tables(cfg)
    written = [_write(cfg.out / COUNTRY_TABLE, countries),
               _write(cfg.out / SOURCE_TABLE, sources)]
    if figures:
        from . import plotting

        dataset = load_snapshot(cfg)
        written += plotting.write_report_figures(
            cfg.out, dataset, load_forecasts(cfg, "continent_forecasts"),
            _load_json(cfg.out / REPORT, "report JSON"))
    return {"report": _load_json(cfg.out / REPORT, "report JSON"),
            "countries_csv": countries, "sources_csv": sources, "written": written}


def run_all(cfg: RunConfig) -> Report:
    cmd_ingest(cfg)
    report = cmd_forecast(cfg)
    cmd_validate(cfg)
    cmd_render(cfg)
    return report
