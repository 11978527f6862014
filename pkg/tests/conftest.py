import numpy as np
import pytest

from renewcast.core import EnergyRecord, EnergySeries, Source
from renewcast.dataset import SOUTH_AMERICA, Dataset, load_dataset
from renewcast.pipeline import bundled

NAMES = dict(zip(SOUTH_AMERICA, ("Argentina", "Bolivia", "Brazil", "Chile", "Colombia",
                                 "Ecuador", "Guyana", "Peru", "Paraguay", "Suriname",
                                 "Uruguay", "Venezuela")))


def make_series(values, start=1962, iso="BRA", source=Source.SOLAR):
    years = tuple(range(start, start + len(values)))
    return EnergySeries(iso, source, years, tuple(float(v) for v in values))


def two_segment(n=60, kink_frac=0.6, slope1=2.0, slope2=0.5, offset=10.0):
    """Noiseless piecewise-linear values with the kink at ``kink_frac`` of the span."""
    x = np.arange(n, dtype=float)
    kink = kink_frac * (n - 1)
    return np.where(x <= kink, offset + slope1 * x,
                    offset + slope1 * kink + slope2 * (x - kink))


def records_from(table, names=NAMES):
    """table: {(iso, source): {year: value}} -> records."""
    out = []
    for (iso, source), values in table.items():
        for year, v in values.items():
            out.append(EnergyRecord(iso, names.get(iso, iso), year, Source(source), v))
    return out


def tripling_dataset(countries=("ARG", "BRA", "CHL", "COL"), first=1990, last=2021,
                     noise=0.02, seed=7):
    """Linear series whose 2050 value is three times their 2015-2021 mean."""
    rng = np.random.default_rng(seed)
    table = {}
    years = np.arange(first, last + 1)
    for iso in countries:
        for source in (Source.HYDRO, Source.WIND, Source.SOLAR):
            level = rng.uniform(5, 100)          # mean over 2015-2021 (centred on 2018)
            slope = level / 16.0                 # level + 32 * slope == 3 * level
            base = level + slope * (years - 2018)
            vals = np.maximum(base * (1 + noise * rng.standard_normal(years.size)), 0)
            table[(iso, source)] = {int(y): float(v) for y, v in zip(years, vals)}
    return Dataset(records_from(table))


def noisy_source_dataset(noise=0.05, seed=11, first=1980, last=2020):
    """Continent-level linear-growth source series with multiplicative noise."""
    rng = np.random.default_rng(seed)
    table = {}
    years = np.arange(first, last + 1)
    for source in Source:
        start = rng.uniform(5, 50)
        slope = rng.uniform(0.5, 4)
        vals = (start + slope * (years - first)) * (1 + noise * rng.standard_normal(years.size))
        table[("BRA", source)] = {int(y): float(v) for y, v in zip(years, vals)}
    return Dataset(records_from(table))


@pytest.fixture(scope="session")
def sample_csv():
    with open(bundled("sample_energy.csv"), encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def sample_dataset(sample_csv):
    return load_dataset(sample_csv)


@pytest.fixture(scope="session")
def sample_geojson():
    with open(bundled("south_america.geojson"), encoding="utf-8") as fh:
        return fh.read()


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
