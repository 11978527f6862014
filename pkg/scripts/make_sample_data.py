"""Regenerate the bundled illustrative dataset.

The values are synthetic: smooth adoption curves scaled to rough 2021 magnitudes
per country and source, with multiplicative noise and a handful of blank cells.
They exist so the pipeline has something realistic-looking to run on; supply real
data through the same CSV schema for actual analysis.

    python scripts/make_sample_data.py > src/renewcast/data/sample_energy.csv
"""

import csv
import sys

import numpy as np

YEARS = np.arange(1965, 2022)

# (name, {source: (2021 TWh, first year of generation)})
COUNTRIES = {
    "ARG": ("Argentina", {"Hydro": (25.0, 1965), "Wind": (12.9, 2008), "Solar": (2.3, 2012),
                          "Biomass": (2.2, 1990), "OtherRenewable": (0.1, 2015)}),
    "BOL": ("Bolivia", {"Hydro": (3.1, 1965), "Wind": (0.4, 2014), "Solar": (0.3, 2015),
                        "Biomass": (0.5, 1995)}),
    "BRA": ("Brazil", {"Hydro": (362.0, 1965), "Wind": (72.0, 2005), "Solar": (16.8, 2013),
                       "Biomass": (56.0, 1975), "OtherRenewable": (0.4, 2010)}),
    "CHL": ("Chile", {"Hydro": (17.0, 1965), "Wind": (7.2, 2008), "Solar": (12.1, 2012),
                      "Biomass": (7.0, 1985), "Geothermal": (0.3, 2017)}),
    "COL": ("Colombia", {"Hydro": (60.0, 1965), "Wind": (0.1, 2004), "Solar": (0.5, 2016),
                         "Biomass": (1.7, 1990)}),
    "ECU": ("Ecuador", {"Hydro": (26.0, 1965), "Wind": (0.1, 2013), "Solar": (0.04, 2013),
                        "Biomass": (0.4, 1995)}),
    "GUY": ("Guyana", {"Biomass": (0.1, 2000), "Solar": (0.02, 2016)}),
    "PER": ("Peru", {"Hydro": (32.0, 1965), "Wind": (1.8, 2014), "Solar": (0.8, 2012),
                     "Biomass": (1.0, 1995)}),
    "PRY": ("Paraguay", {"Hydro": (40.0, 1972)}),
    "SUR": ("Suriname", {"Hydro": (1.2, 1965), "Solar": (0.01, 2018)}),
    "URY": ("Uruguay", {"Hydro": (5.0, 1965), "Wind": (5.5, 2008), "Solar": (0.5, 2014),
                        "Biomass": (3.0, 1990)}),
    "VEN": ("Venezuela", {"Hydro": (75.0, 1965), "Wind": (0.08, 2012)}),
    # outside the region, removed by the ingestion filter
    "MEX": ("Mexico", {"Hydro": (34.0, 1965), "Wind": (20.0, 2008)}),
}

BLANKS = {("BRA", "Biomass", 1992), ("CHL", "Hydro", 1977), ("CHL", "Hydro", 1978),
          ("ARG", "Wind", 2021), ("PER", "Hydro", 1999), ("COL", "Biomass", 2003)}


def curve(level_2021, start, source):
    t = np.clip(YEARS - start, 0, None).astype(float)
    span = 2021 - start
    if source == "Hydro":
        # slow build-out saturating towards the present level
        shape = 0.15 + 0.85 * (1 - np.exp(-t / 25.0)) / (1 - np.exp(-span / 25.0))
    elif source in ("Wind", "Solar"):
        shape = (t / span) ** 1.8
    else:
        shape = (t / span) ** 1.3
    out = level_2021 * shape
    out[YEARS < start] = 0.0
    return out


def main(out=sys.stdout):
    rng = np.random.default_rng(2050)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["country", "iso_code", "year", "source", "generation_twh"])
    for iso, (name, sources) in COUNTRIES.items():
        for source, (level, start) in sources.items():
            values = curve(level, start, source) * (1 + 0.04 * rng.standard_normal(YEARS.size))
            for year, v in zip(YEARS, values):
                cell = "" if (iso, source, int(year)) in BLANKS else f"{max(v, 0.0):.3f}"
                writer.writerow([name, iso, int(year), source.lower(), cell])


if __name__ == "__main__":
    main()
