"""Matplotlib figures for the report step (PNG, written next to the CSV tables)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import SOURCE_ORDER  # noqa: E402
from .geoviz import SOURCE_COLORS  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 11,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "svg.hashsalt": "renewcast",
}
PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=150, metadata=PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def source_fan_chart(ax, dataset, continent_forecasts):
    """History per source plus the fitted continent forecast with its interval band."""
    totals = dataset.source_totals()
    years = np.asarray(dataset.years)
    for src in SOURCE_ORDER:
        if src not in totals:
            continue
        colour = SOURCE_COLORS[src]
        ax.plot(years, totals[src], color=colour, lw=1.4, label=src.value)
        fc = next((f for f in continent_forecasts if f.source == src.value), None)
        if fc is None:
            continue
        ax.plot(fc.years, fc.point, color=colour, lw=1.2, ls="--")
        ax.fill_between(fc.years, fc.lo, fc.hi, color=colour, alpha=0.15, lw=0)
    ax.axvline(years[-1] + 0.5, color="0.3", lw=0.8, ls=":")
    ax.set_xlabel("Year")
    ax.set_ylabel("TWh / year")
    ax.set_title(f"Generation by source, forecast to {continent_forecasts[0].years[-1]}"
                 if continent_forecasts else "Generation by source")
    ax.legend(ncol=2, loc="upper left")


def country_bars(ax, report, names):
    horizon = report["horizon_year"]
    per_country = report["per_country_2050"]
    gbrt = report["gbrt_per_country"]
    isos = sorted(per_country, key=per_country.get, reverse=True)
    x = np.arange(len(isos))
    ax.bar(x - 0.2, [per_country[i] for i in isos], 0.4, color="#238B45",
           label="Trend forecast")
    ax.bar(x + 0.2, [gbrt.get(i, 0.0) for i in isos], 0.4, color="#A1D99B",
           label="Boosted trees")
    ax.set_xticks(x)
    ax.set_xticklabels([names.get(i, i) for i in isos], rotation=45, ha="right")
    ax.set_ylabel(f"TWh in {horizon}")
    ax.set_title(f"Projected renewable generation by country, {horizon}")
    ax.legend()


def write_report_figures(out_dir: Path, dataset, continent_forecasts, report) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        source_fan_chart(ax, dataset, continent_forecasts)
        written.append(_save(fig, out_dir / "report_sources.png"))

        fig, ax = plt.subplots(figsize=(8, 4.5))
        country_bars(ax, report, dataset.names)
        written.append(_save(fig, out_dir / "report_countries.png"))
    return written
