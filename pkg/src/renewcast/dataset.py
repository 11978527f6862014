"""CSV ingestion, South America filtering, gap imputation and seeded splits."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .core import (
    SOURCE_ORDER,
    DeterministicRng,
    EnergyRecord,
    EnergySeries,
    InputError,
    Source,
)

log = logging.getLogger(__name__)

CSV_HEADER = ("country", "iso_code", "year", "source", "generation_twh")

SOUTH_AMERICA = ("ARG", "BOL", "BRA", "CHL", "COL", "ECU",
                 "GUY", "PER", "PRY", "SUR", "URY", "VEN")

SNAPSHOT_VERSION = 1


def parse_csv(text: str) -> list[EnergyRecord]:
    """Parse long-format CSV text into records; empty generation cells are missing."""
    reader = csv.reader(io.StringIO(text.lstrip("﻿")))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("CSV is empty; expected header " + ",".join(CSV_HEADER))
    if tuple(h.strip().lower() for h in header) != CSV_HEADER:
        raise InputError(f"bad CSV header {header!r}; expected {','.join(CSV_HEADER)}")

    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise InputError(f"line {lineno}: expected 5 fields, got {len(row)}")
        name, iso, year, source, value = (cell.strip() for cell in row)
        try:
            year_int = int(year)
        except ValueError:
            raise InputError(f"line {lineno}: unparseable year {year!r}") from None
        if value == "":
            generation = None
        else:
            try:
                generation = float(value)
            except ValueError:
                raise InputError(f"line {lineno}: unparseable value {value!r}") from None
        try:
            records.append(EnergyRecord(iso.upper(), name, year_int,
                                        Source.parse(source), generation))
        except InputError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
    return records


def serialize_csv(records: Iterable[EnergyRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        value = "" if r.generation is None else repr(r.generation)
        writer.writerow([r.country_name, r.country_iso, r.year, r.source.value, value])
    return buf.getvalue()


def filter_south_america(records: Iterable[EnergyRecord]) -> list[EnergyRecord]:
    members = set(SOUTH_AMERICA)
    return [r for r in records if r.country_iso in members]


def impute_series(series: EnergySeries) -> EnergySeries:
    """Fill gaps: interpolate inside, zeros before the first observation, hold-last after."""
    values = series.value_array()
    observed = ~np.isnan(values)
    if not observed.any():
        raise InputError(
            f"series {series.country_iso}/{series.source} has no observed values")
    years = series.year_array()
    filled = np.interp(years, years[observed], values[observed])
    first = np.argmax(observed)
    filled[:first] = 0.0
    mask = tuple(bool(a or not o) for a, o in zip(series.imputed_mask, observed))
    return EnergySeries(series.country_iso, series.source, series.years,
                        tuple(float(v) for v in filled), mask)


@dataclass(frozen=True)
class SplitPlan:
    train_indices: tuple
    test_indices: tuple
    ratio: float
    seed: int


def split(n: int, ratio: float = 0.8, seed: int = 42) -> SplitPlan:
    if n < 2:
        raise InputError(f"cannot split {n} samples")
    if not 0 < ratio < 1:
        raise InputError(f"split ratio must be in (0, 1), got {ratio}")
    order = DeterministicRng(seed).shuffle_indices(n)
    n_train = math.floor(ratio * n)
    return SplitPlan(tuple(order[:n_train]), tuple(order[n_train:]), ratio, seed)


class Dataset:
    """Records plus one imputed series per (country, source), aligned on a shared year span.

    Years absent from the input for a series are treated as missing cells, so every
    series covers the dataset's full year range.
    """

    def __init__(self, records: Iterable[EnergyRecord], impute: bool = True):
        self.records = tuple(records)
        self.names: dict[str, str] = {}
        cells: dict[tuple, dict[int, float]] = {}
        for r in self.records:
            key = (r.country_iso, r.source)
            bucket = cells.setdefault(key, {})
            if r.year in bucket:
                raise InputError(f"duplicate observation {r.country_iso}/{r.source}/{r.year}")
            bucket[r.year] = math.nan if r.generation is None else r.generation
            self.names.setdefault(r.country_iso, r.country_name)

        self.series_index: dict[tuple, EnergySeries] = {}
        self.dropped: list[tuple] = []
        if not cells:
            self.years: tuple = ()
            self.countries: tuple = ()
            return
        lo = min(min(b) for b in cells.values())
        hi = max(max(b) for b in cells.values())
        self.years = tuple(range(lo, hi + 1))
        for key in sorted(cells, key=lambda k: (k[0], SOURCE_ORDER.index(k[1]))):
            bucket = cells[key]
            values = tuple(bucket.get(y, math.nan) for y in self.years)
            series = EnergySeries(key[0], key[1], self.years, values)
            if not series.observed.any():
                self.dropped.append(key)
                continue
            self.series_index[key] = impute_series(series) if impute else series
        if self.dropped:
            log.warning("dropped %d series without any observed value", len(self.dropped))
        self.countries = tuple(sorted({k[0] for k in self.series_index}))

    def __len__(self) -> int:
        return len(self.series_index)

    @property
    def sources(self) -> tuple:
        present = {k[1] for k in self.series_index}
        return tuple(s for s in SOURCE_ORDER if s in present)

    @property
    def imputed_count(self) -> int:
        return sum(sum(s.imputed_mask) for s in self.series_index.values())

    def series(self, country_iso: str, source: Source) -> EnergySeries:
        return self.series_index[(country_iso, Source(source))]

    def source_totals(self) -> dict[Source, np.ndarray]:
        """Continent-wide generation per source, summed over countries."""
        out = {}
        for source in self.sources:
            total = np.zeros(len(self.years))
            for (iso, src), s in self.series_index.items():
                if src is source:
                    total = total + s.value_array()
            out[source] = total
        return out

    def aggregate_by_source(self, label: str = "SAM") -> dict[Source, EnergySeries]:
        return {src: EnergySeries(label, src, self.years, tuple(float(v) for v in vals))
                for src, vals in self.source_totals().items()}

    def country_totals(self) -> dict[str, np.ndarray]:
        """Generation summed over sources for each country."""
        out = {}
        for iso in self.countries:
            total = np.zeros(len(self.years))
            for (c, _), s in self.series_index.items():
                if c == iso:
                    total = total + s.value_array()
            out[iso] = total
        return out

    # ------------------------------------------------------------ snapshots

    def to_json(self) -> str:
        doc = {
            "version": SNAPSHOT_VERSION,
            "years": [self.years[0], self.years[-1]] if self.years else [],
            "countries": {iso: self.names.get(iso, iso) for iso in self.countries},
            "series": [
                {"country_iso": s.country_iso, "source": s.source.value,
                 "values": list(s.values),
                 "imputed": [i for i, m in enumerate(s.imputed_mask) if m]}
                for s in self.series_index.values()
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        doc = json.loads(text)
        if doc.get("version") != SNAPSHOT_VERSION:
            raise InputError(f"unsupported snapshot version {doc.get('version')!r}")
        ds = cls(())
        ds.names = dict(doc["countries"])
        if doc["years"]:
            ds.years = tuple(range(doc["years"][0], doc["years"][1] + 1))
        for entry in doc["series"]:
            imputed = set(entry["imputed"])
            s = EnergySeries(entry["country_iso"], Source(entry["source"]), ds.years,
                             tuple(float(v) for v in entry["values"]),
                             tuple(i in imputed for i in range(len(ds.years))))
            ds.series_index[(s.country_iso, s.source)] = s
        ds.countries = tuple(sorted({k[0] for k in ds.series_index}))
        return ds

    def summary(self) -> dict:
        return {
            "countries": list(self.countries),
            "sources": [s.value for s in self.sources],
            "year_span": [self.years[0], self.years[-1]] if self.years else [],
            "series": len(self.series_index),
            "imputed_values": self.imputed_count,
        }


def load_dataset(text: str, south_america_only: bool = True) -> Dataset:
    records = parse_csv(text)
    if south_america_only:
        records = filter_south_america(records)
    return Dataset(records)


def series_from_mapping(country_iso: str, source: Source,
                        values: Mapping[int, float]) -> EnergySeries:
    years = tuple(sorted(values))
    return EnergySeries(country_iso, Source(source), years,
                        tuple(float(values[y]) for y in years))
