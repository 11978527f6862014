"""Command-line entry point.

Precedence for settings is flag > config file > built-in default. Errors are
printed to stderr as a single line ``E_CODE: message`` and map to exit codes
2 (input), 3 (model) and 4 (I/O).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .core import SOURCE_ORDER, RenewcastError, StorageError
from . import pipeline


def _table(headers, rows) -> str:
    cells = [[str(h) for h in headers]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for n, r in enumerate(cells):
        lines.append("  ".join(c.rjust(w) if n and i else c.ljust(w)
                               for i, (c, w) in enumerate(zip(r, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _f(x, fmt="{:.3f}") -> str:
    return "n/a" if x is None else fmt.format(x)


def _show_ingest(summary):
    print(f"countries: {', '.join(summary['countries'])}")
    print(f"sources:   {', '.join(summary['sources'])}")
    print(f"years:     {summary['year_span'][0]}-{summary['year_span'][1]}")
    print(f"series:    {summary['series']} ({summary['imputed_values']} imputed values)")


def _show_report(rep: dict):
    print(rep["headline"] if "headline" in rep else "")
    rows = [(iso, f"{v:,.1f}", f"{rep['gbrt_per_country'].get(iso, 0.0):,.1f}")
            for iso, v in sorted(rep["per_country_2050"].items(), key=lambda kv: -kv[1])]
    print(_table(["country", f"trend {rep['horizon_year']}", "gbrt"], rows))
    print()
    print(_table(["source", f"TWh {rep['horizon_year']}"],
                 [(s.value, f"{rep['per_source_2050'][s.value]:,.1f}") for s in SOURCE_ORDER
                  if s.value in rep["per_source_2050"]]))
    print(f"growth ratio: {rep['growth_ratio']:.3f}")


def _show_validation(cv, bt):
    rows = [(i, f.n, _f(f.mae), _f(f.rmse), _f(f.r2, "{:.4f}")) for i, f in enumerate(cv.per_fold)]
    rows.append(("mean", "", _f(cv.mean_mae), _f(cv.mean_rmse), _f(cv.mean_r2, "{:.4f}")))
    print(f"{cv.k}-fold cross-validation (mean of fold scores)")
    print(_table(["fold", "n", "MAE", "RMSE", "R2"], rows))
    print()
    print(f"backtest: trained through {bt.cutoff_year}, "
          f"tested {bt.test_years[0]}-{bt.test_years[-1]}")
    print(_table(["source", "MAPE %", "excluded"],
                 [(str(s), f"{v[0]:.2f}", v[1]) for s, v in bt.per_source_mape.items()]))
    print(bt.summary_line())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="seed for the split, CV folds and simulations")
    common.add_argument("--horizon", type=int, metavar="YEAR", help="forecast horizon year")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--strict-geo", action="store_true",
                        help="reject GeoJSON features without a usable ISO code")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="renewcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="filter and impute the input CSV")
    sub.add_parser("forecast", parents=[common], help="fit trend models and boosted trees")
    sub.add_parser("validate", parents=[common], help="cross-validation and backtest")
    sub.add_parser("render", parents=[common], help="write SVG map and charts")
    rp = sub.add_parser("report", parents=[common],
                        help="print the summary, write CSV tables and PNG figures")
    rp.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = pipeline.RunConfig.load(args.config).with_overrides(
            seed=args.seed, horizon=args.horizon, out=args.out, strict_geo=args.strict_geo)
        if args.command == "ingest":
            _show_ingest(pipeline.cmd_ingest(cfg))
        elif args.command == "forecast":
            _show_report(pipeline.cmd_forecast(cfg).to_dict())
        elif args.command == "validate":
            _show_validation(*pipeline.cmd_validate(cfg))
        elif args.command == "render":
            for path in pipeline.cmd_render(cfg):
                print(path)
        elif args.command == "report":
            result = pipeline.cmd_report(cfg, figures=not args.no_figures)
            _show_report(result["report"])
            for path in result["written"]:
                print(path)
    except RenewcastError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:
        print(f"E_INPUT: malformed JSON: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{StorageError.code}: {exc}", file=sys.stderr)
        return StorageError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
