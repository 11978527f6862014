"""Country geometry parsing, planar centroids and SVG figure rendering.

SVG is assembled with ElementTree so output is always well-formed and, with
fixed number formatting, byte-identical for identical inputs.
"""

from __future__ import annotations

import json
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional, Sequence

from .core import SOURCE_ORDER, InputError, Source, valid_iso
from .dataset import SOUTH_AMERICA

log = logging.getLogger(__name__)

ISO_KEYS = ("ISO_A3", "ADM0_A3", "iso_a3")
MIN_AREA = 1e-12

# Hydro red, wind blue, solar green as in the historical share figure.
SOURCE_COLORS = {
    Source.HYDRO: "#D62728",
    Source.WIND: "#1F77B4",
    Source.SOLAR: "#2CA02C",
    Source.BIOMASS: "#8C564B",
    Source.GEOTHERMAL: "#FF7F0E",
    Source.OTHER: "#7F7F7F",
}
TOTAL_COLOR = "#000000"
FORECAST_OPACITY = "0.5"
FONT = "DejaVu Sans, Arial, sans-serif"


def _num(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


# ---------------------------------------------------------------- geometry

def signed_area(ring: Sequence) -> float:
    """Shoelace area; positive for counterclockwise rings."""
    a = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        a += x0 * y1 - x1 * y0
    return a / 2.0


@dataclass(frozen=True)
class CountryGeometry:
    """Polygons as tuples of rings; ring 0 of each polygon is the exterior."""

    iso: str
    polygons: tuple
    name: str = ""

    @property
    def rings(self):
        for poly in self.polygons:
            yield from poly

    @property
    def centroid(self) -> tuple[float, float]:
        return centroid(self)

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for ring in self.rings for p in ring]
        ys = [p[1] for ring in self.rings for p in ring]
        return min(xs), min(ys), max(xs), max(ys)


def _normalise_ring(raw, exterior: bool) -> tuple:
    pts = []
    for p in raw:
        if len(p) < 2:
            raise InputError("coordinate with fewer than two values")
        lon, lat = float(p[0]), float(p[1])
        if not (-180 <= lon <= 180 and -90 <= lat <= 90):
            raise InputError(f"coordinate out of range: ({lon}, {lat})")
        pts.append((lon, lat))
    if len(pts) < 3:
        raise InputError("ring with fewer than three points")
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    ccw = signed_area(pts) > 0
    if ccw != exterior:
        pts.reverse()
    return tuple(pts)


def polygon_from_rings(rings: Sequence) -> tuple:
    return tuple(_normalise_ring(r, i == 0) for i, r in enumerate(rings))


def geometry_from_coords(iso: str, polygons: Sequence, name: str = "") -> CountryGeometry:
    """Build a geometry from GeoJSON-style polygon coordinate lists."""
    return CountryGeometry(iso, tuple(polygon_from_rings(p) for p in polygons), name)


class ParsedGeo(NamedTuple):
    geometries: list
    dropped: int


def _feature_iso(props: Mapping) -> Optional[str]:
    for key in ISO_KEYS:
        value = props.get(key)
        if isinstance(value, str) and valid_iso(value):
            return value
    return None


def parse_geojson(text: str, strict: bool = False,
                  keep: Sequence[str] = SOUTH_AMERICA) -> ParsedGeo:
    """Country geometries for the ISO codes in ``keep``; other features are counted as dropped."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed GeoJSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise InputError("GeoJSON root must be a FeatureCollection")
    wanted = set(keep)
    out, seen, dropped = [], set(), 0
    for i, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        if gtype not in ("Polygon", "MultiPolygon"):
            raise InputError(f"feature {i}: unsupported geometry type {gtype!r}")
        props = feat.get("properties") or {}
        iso = _feature_iso(props)
        if iso is None:
            if strict:
                raise InputError(f"feature {i} has no usable ISO code property")
            dropped += 1
            continue
        if iso not in wanted:
            dropped += 1
            continue
        if iso in seen:
            raise InputError(f"duplicate geometry for ISO code {iso}")
        seen.add(iso)
        coords = geom["coordinates"]
        polys = [coords] if gtype == "Polygon" else coords
        name = props.get("NAME") or props.get("name") or iso
        out.append(geometry_from_coords(iso, polys, name))
    if dropped:
        log.warning("dropped %d GeoJSON features outside the selected countries", dropped)
    out.sort(key=lambda g: g.iso)
    return ParsedGeo(out, dropped)


def centroid(geometry: CountryGeometry) -> tuple[float, float]:
    """Area-weighted planar centroid over all rings; holes carry negative area."""
    area = cx = cy = 0.0
    for ring in geometry.rings:
        for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
            cross = x0 * y1 - x1 * y0
            area += cross
            cx += (x0 + x1) * cross
            cy += (y0 + y1) * cross
    area /= 2.0
    if abs(area) <= MIN_AREA:
        raise InputError(f"geometry {geometry.iso} has zero area")
    return cx / (6.0 * area), cy / (6.0 * area)


# ---------------------------------------------------------------- colours

def _rgb(hexcode: str) -> tuple[int, int, int]:
    h = hexcode.lstrip("#")
    if len(h) != 6:
        raise InputError(f"invalid hex colour {hexcode!r}")
    try:
        return tuple(int(h[i:i + 2], 16) for i in (0, 2, 4))
    except ValueError:
        raise InputError(f"invalid hex colour {hexcode!r}") from None


@dataclass(frozen=True)
class ColorRamp:
    low: str = "#E5F5E0"
    high: str = "#00441B"
    missing: str = "#F0F0F0"

    def __post_init__(self):
        for c in (self.low, self.high, self.missing):
            _rgb(c)

    def at(self, fraction: float) -> str:
        f = min(1.0, max(0.0, fraction))
        lo, hi = _rgb(self.low), _rgb(self.high)
        rgb = (round(a + (b - a) * f) for a, b in zip(lo, hi))
        return "#{:02X}{:02X}{:02X}".format(*rgb)

    def color(self, value: float, vmin: float, vmax: float) -> str:
        if vmax == vmin:
            return self.high.upper()
        return self.at((value - vmin) / (vmax - vmin))


# ---------------------------------------------------------------- svg helpers

def _svg_root(width: int, height: int, title: str) -> ET.Element:
    root = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg", "version": "1.1",
        "width": str(width), "height": str(height),
        "viewBox": f"0 0 {width} {height}",
        "font-family": FONT,
    })
    ET.SubElement(root, "rect", {"x": "0", "y": "0", "width": str(width),
                                 "height": str(height), "fill": "#FFFFFF"})
    t = ET.SubElement(root, "text", {"x": _num(width / 2), "y": "24",
                                     "text-anchor": "middle", "font-size": "16",
                                     "class": "title"})
    t.text = title
    return root


def _text(parent, x, y, s, **attrs) -> ET.Element:
    el = ET.SubElement(parent, "text", {"x": _num(x), "y": _num(y),
                                        **{k.replace("_", "-"): str(v) for k, v in attrs.items()}})
    el.text = s
    return el


def _serialise(root: ET.Element) -> str:
    ET.indent(root, space=" ")
    return ('<?xml version="1.0" encoding="UTF-8"?>\n'
            + ET.tostring(root, encoding="unicode") + "\n")


def nice_ceiling(x: float) -> float:
    """Smallest 1, 2, 2.5 or 5 times a power of ten that is >= x."""
    if x <= 0:
        return 1.0
    exp = math.floor(math.log10(x))
    for m in (1, 2, 2.5, 5, 10):
        v = m * 10 ** exp
        if v >= x * (1 - 1e-12):
            return float(v)
    return float(10 ** (exp + 1))


def nice_ticks(vmax: float, target: int = 5) -> list[float]:
    """Round-number ticks from zero up to at least ``vmax``."""
    step = nice_ceiling(max(vmax, 1e-12) / target)
    n = max(1, math.ceil(vmax / step - 1e-9))
    return [i * step for i in range(n + 1)]


def _fmt_tick(v: float) -> str:
    return f"{v:,.0f}" if v >= 10 or v == 0 else f"{v:g}"


# ---------------------------------------------------------------- choropleth

def render_choropleth(geometries: Sequence[CountryGeometry], values: Mapping[str, float],
                      ramp: ColorRamp = ColorRamp(), size: tuple = (720, 900),
                      title: str = "Projected renewable generation, 2050",
                      legend_label: str = "TWh / year") -> str:
    if not values:
        raise InputError("choropleth needs at least one value")
    if not geometries:
        raise InputError("choropleth needs at least one geometry")
    width, height = size
    margin, top, legend_h = 20.0, 40.0, 70.0
    box_w, box_h = width - 2 * margin, height - top - legend_h - margin

    bounds = [g.bounds() for g in geometries]
    x0 = min(b[0] for b in bounds); y0 = min(b[1] for b in bounds)
    x1 = max(b[2] for b in bounds); y1 = max(b[3] for b in bounds)
    scale = min(box_w / (x1 - x0), box_h / (y1 - y0))
    ox = margin + (box_w - scale * (x1 - x0)) / 2
    oy = top + (box_h - scale * (y1 - y0)) / 2

    def project(lon, lat):
        return ox + (lon - x0) * scale, oy + (y1 - lat) * scale

    vmin, vmax = min(values.values()), max(values.values())
    root = _svg_root(width, height, title)
    layer = ET.SubElement(root, "g", {"class": "countries", "stroke": "#555555",
                                      "stroke-width": "0.6"})
    for g in geometries:
        parts = []
        for ring in g.rings:
            pts = [project(*p) for p in ring[:-1]]
            parts.append("M" + " L".join(f"{_num(x)},{_num(y)}" for x, y in pts) + " Z")
        has = g.iso in values
        fill = ramp.color(values[g.iso], vmin, vmax) if has else ramp.missing.upper()
        attrs = {"d": " ".join(parts), "fill": fill, "fill-rule": "evenodd",
                 "data-iso": g.iso}
        if has:
            attrs["data-value"] = repr(float(values[g.iso]))
        path = ET.SubElement(layer, "path", attrs)
        ET.SubElement(path, "title").text = (
            f"{g.name or g.iso}: {values[g.iso]:,.1f}" if has else f"{g.name or g.iso}: no data")

    # legend: gradient bar with endpoint labels
    defs = ET.SubElement(root, "defs")
    grad = ET.SubElement(defs, "linearGradient", {"id": "ramp", "x1": "0", "x2": "1",
                                                  "y1": "0", "y2": "0"})
    ET.SubElement(grad, "stop", {"offset": "0", "stop-color": ramp.low.upper()})
    ET.SubElement(grad, "stop", {"offset": "1", "stop-color": ramp.high.upper()})
    legend = ET.SubElement(root, "g", {"class": "legend"})
    lx, ly, lw = margin + 40, height - legend_h + 10, width - 2 * margin - 80
    ET.SubElement(legend, "rect", {"x": _num(lx), "y": _num(ly), "width": _num(lw),
                                   "height": "14", "fill": "url(#ramp)",
                                   "stroke": "#555555", "stroke-width": "0.5"})
    _text(legend, lx, ly + 30, f"{vmin:,.1f}", font_size=11, text_anchor="start")
    _text(legend, lx + lw, ly + 30, f"{vmax:,.1f}", font_size=11, text_anchor="end")
    _text(legend, lx + lw / 2, ly + 30, legend_label, font_size=11, text_anchor="middle")
    return _serialise(root)


# ---------------------------------------------------------------- stacked chart

def render_stacked_chart(history: Mapping, forecast: Mapping, size: tuple = (960, 540),
                         title: str = "Renewable generation by source, history and forecast") -> str:
    """Stacked annual bars; ``history`` and ``forecast`` map source -> {year: TWh}.

    Forecast bars are drawn at half opacity after a dashed divider.
    """
    hist_years = sorted({y for series in history.values() for y in series})
    fc_years = sorted({y for series in forecast.values() for y in series})
    if hist_years and fc_years and fc_years[0] <= hist_years[-1]:
        raise InputError("forecast years must come strictly after the history")
    years = hist_years + fc_years
    if not years:
        raise InputError("nothing to plot")

    def stack(year):
        src = history if year in hist_years else forecast
        return [(s, float(src.get(s, {}).get(year, 0.0))) for s in SOURCE_ORDER
                if s in src]

    totals = {y: sum(v for _, v in stack(y)) for y in years}
    ticks = nice_ticks(max(totals.values()))
    ymax = ticks[-1]

    width, height = size
    left, right, top, bottom = 70.0, 150.0, 40.0, 50.0
    pw, ph = width - left - right, height - top - bottom
    px_per_unit = ph / ymax
    slot = pw / len(years)
    bar_w = slot * 0.8

    root = _svg_root(width, height, title)
    plot = ET.SubElement(root, "g", {"class": "plot", "data-px-per-unit": repr(px_per_unit),
                                     "data-baseline": _num(top + ph)})
    axis = ET.SubElement(plot, "g", {"class": "y-axis", "font-size": "10"})
    for t in ticks:
        y = top + ph - t * px_per_unit
        ET.SubElement(axis, "line", {"x1": _num(left), "x2": _num(left + pw), "y1": _num(y),
                                     "y2": _num(y), "stroke": "#DDDDDD", "stroke-width": "0.5"})
        _text(axis, left - 6, y + 3, _fmt_tick(t), text_anchor="end")
    _text(axis, 18, top + ph / 2, "TWh", text_anchor="middle", font_size=12,
          transform=f"rotate(-90 18 {_num(top + ph / 2)})")

    bars = ET.SubElement(plot, "g", {"class": "bars"})
    for i, year in enumerate(years):
        is_fc = year not in hist_years
        x = left + i * slot + (slot - bar_w) / 2
        base = top + ph
        col = ET.SubElement(bars, "g", {"data-year": str(year),
                                        "data-kind": "forecast" if is_fc else "history",
                                        "opacity": FORECAST_OPACITY if is_fc else "1.0"})
        for source, v in stack(year):
            h = v * px_per_unit
            base -= h
            ET.SubElement(col, "rect", {"x": _num(x), "y": repr(base), "width": _num(bar_w),
                                        "height": repr(h), "fill": SOURCE_COLORS[source],
                                        "data-source": source.value, "data-value": repr(v)})
        if year % 10 == 0:
            _text(plot, x + bar_w / 2, top + ph + 16, str(year), font_size=10,
                  text_anchor="middle")

    ET.SubElement(plot, "line", {"x1": _num(left), "x2": _num(left + pw), "y1": _num(top + ph),
                                 "y2": _num(top + ph), "stroke": "#333333"})
    if hist_years and fc_years:
        xd = left + len(hist_years) * slot
        ET.SubElement(plot, "line", {"class": "divider", "x1": _num(xd), "x2": _num(xd),
                                     "y1": _num(top), "y2": _num(top + ph), "stroke": "#333333",
                                     "stroke-dasharray": "4 3"})
        _text(plot, xd + 4, top + 12, "forecast", font_size=10, text_anchor="start")

    _legend(root, [(s.value, SOURCE_COLORS[s]) for s in SOURCE_ORDER
                   if s in history or s in forecast], width - right + 16, top + 10)
    return _serialise(root)


def _legend(root, entries, x, y):
    g = ET.SubElement(root, "g", {"class": "legend", "font-size": "11"})
    for i, (label, colour) in enumerate(entries):
        yy = y + i * 18
        ET.SubElement(g, "rect", {"x": _num(x), "y": _num(yy), "width": "12", "height": "12",
                                  "fill": colour})
        _text(g, x + 18, yy + 10, label, text_anchor="start")


# ---------------------------------------------------------------- share lines

LEFT_AXIS = ("Total", Source.HYDRO.value)
RIGHT_AXIS = (Source.WIND.value, Source.SOLAR.value)
LINE_COLORS = {"Total": TOTAL_COLOR, Source.HYDRO.value: SOURCE_COLORS[Source.HYDRO],
               Source.WIND.value: SOURCE_COLORS[Source.WIND],
               Source.SOLAR.value: SOURCE_COLORS[Source.SOLAR]}


def render_share_lines(years: Sequence[int], shares: Mapping[str, Sequence[float]],
                       size: tuple = (960, 540),
                       title: str = "Renewable shares by source") -> str:
    """Dual-axis percentage lines: Total and Hydro on the left, Wind and Solar on the right."""
    years = list(years)
    if len(years) < 2:
        raise InputError("share chart needs at least two years")
    clean = {}
    for key, series in shares.items():
        name = str(key)
        if name not in LINE_COLORS:
            raise InputError(f"no axis assignment for series {name!r}")
        vals = [float(v) for v in series]
        if len(vals) != len(years):
            raise InputError(f"series {name} length does not match years")
        if any(not 0 <= v <= 100 for v in vals):
            raise InputError(f"share values for {name} must lie in [0, 100]")
        clean[name] = vals

    def axis_max(names):
        peak = max((max(clean[n]) for n in names if n in clean), default=0.0)
        return nice_ticks(peak if peak > 0 else 1.0)

    lt, rt = axis_max(LEFT_AXIS), axis_max(RIGHT_AXIS)
    width, height = size
    left, right, top, bottom = 70.0, 150.0, 40.0, 50.0
    pw, ph = width - left - right, height - top - bottom
    x_of = lambda yr: left + (yr - years[0]) / (years[-1] - years[0]) * pw

    root = _svg_root(width, height, title)
    plot = ET.SubElement(root, "g", {"class": "plot"})
    for side, ticks, x, anchor, dx in (("left", lt, left, "end", -6),
                                       ("right", rt, left + pw, "start", 6)):
        ax = ET.SubElement(plot, "g", {"class": f"axis-{side}", "font-size": "10",
                                       "data-max": repr(ticks[-1])})
        ET.SubElement(ax, "line", {"x1": _num(x), "x2": _num(x), "y1": _num(top),
                                   "y2": _num(top + ph), "stroke": "#333333"})
        for t in ticks:
            y = top + ph - t / ticks[-1] * ph
            _text(ax, x + dx, y + 3, f"{t:g}%", text_anchor=anchor)
    ET.SubElement(plot, "line", {"x1": _num(left), "x2": _num(left + pw), "y1": _num(top + ph),
                                 "y2": _num(top + ph), "stroke": "#333333"})
    for yr in years:
        if yr % 10 == 0:
            _text(plot, x_of(yr), top + ph + 16, str(yr), font_size=10, text_anchor="middle")

    entries = []
    for name in LEFT_AXIS + RIGHT_AXIS:
        if name not in clean:
            continue
        side = "left" if name in LEFT_AXIS else "right"
        top_val = (lt if side == "left" else rt)[-1]
        pts = " ".join(f"{_num(x_of(yr))},{_num(top + ph - v / top_val * ph)}"
                       for yr, v in zip(years, clean[name]))
        ET.SubElement(plot, "polyline", {"points": pts, "fill": "none",
                                         "stroke": LINE_COLORS[name], "stroke-width": "1.8",
                                         "data-series": name, "data-axis": side})
        entries.append((f"{name} ({side})", LINE_COLORS[name]))
    _legend(root, entries, width - right + 40, top + 10)
    return _serialise(root)
