import csv
import io
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from renewcast import cli, pipeline
from renewcast.core import InputError, ModelError, StorageError
from renewcast.gbrt import Hyperparams
from renewcast.pipeline import RunConfig

HEADER = "country,iso_code,year,source,generation_twh\n"


def small_csv(seed=0, first=1990, last=2021, zero=False):
    rng = np.random.default_rng(seed)
    lines = [HEADER]
    for iso, name in (("ARG", "Argentina"), ("BRA", "Brazil"), ("CHL", "Chile")):
        for source in ("hydro", "wind", "solar"):
            level, slope = rng.uniform(5, 80), rng.uniform(0.2, 3)
            for y in range(first, last + 1):
                v = 0.0 if zero else max(0.0, (level + slope * (y - first)) * (1 + 0.03 * rng.standard_normal()))
                lines.append(f"{name},{iso},{y},{source},{v!r}\n")
    lines.append("Mexico,MEX,2000,hydro,30.0\n")
    return "".join(lines)


def config(tmp_path, text=None, **kw):
    data = tmp_path / "energy.csv"
    data.write_text(text or small_csv())
    kw.setdefault("gbrt", Hyperparams(n_estimators=20))
    return RunConfig(data_path=str(data), output_dir=str(tmp_path / "out"), **kw)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("small")
    cfg = config(tmp)
    report = pipeline.run_all(cfg)
    return cfg, report


class TestIngest:
    def test_summary_and_snapshot(self, tmp_path):
        cfg = config(tmp_path)
        summary = pipeline.cmd_ingest(cfg)
        assert (cfg.out / pipeline.SNAPSHOT).exists()
        snap = json.loads((cfg.out / pipeline.SNAPSHOT).read_text())
        assert json.dumps(summary)
        assert "MEX" not in json.dumps(snap)

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = config(tmp_path)
        pipeline.cmd_ingest(cfg)
        first = (cfg.out / pipeline.SNAPSHOT).read_bytes()
        pipeline.cmd_ingest(cfg)
        assert (cfg.out / pipeline.SNAPSHOT).read_bytes() == first

    def test_no_member_rows(self, tmp_path):
        cfg = config(tmp_path, HEADER + "Mexico,MEX,2000,hydro,30.0\n")
        with pytest.raises(InputError):
            pipeline.cmd_ingest(cfg)

    def test_missing_file(self, tmp_path):
        cfg = RunConfig(data_path=str(tmp_path / "nope.csv"), output_dir=str(tmp_path))
        with pytest.raises(StorageError):
            pipeline.cmd_ingest(cfg)

    def test_forecast_needs_snapshot(self, tmp_path):
        with pytest.raises(StorageError, match="ingest"):
            pipeline.cmd_forecast(config(tmp_path))


class TestForecast:
    def test_report_consistency(self, small_run):
        cfg, report = small_run
        assert report.growth_ratio == report.total_2050 / report.baseline
        assert sum(report.per_country_2050.values()) == pytest.approx(report.total_2050, abs=1e-9)
        assert sum(report.per_source_2050.values()) == pytest.approx(report.total_2050, abs=1e-9)
        assert report.baseline_span == (2015, 2021)

    def test_forecast_document(self, small_run):
        cfg, _ = small_run
        doc = json.loads((cfg.out / pipeline.FORECAST).read_text())
        assert len(doc["forecasts"]) == 9 and len(doc["continent_forecasts"]) == 3
        for fc in doc["forecasts"]:
            assert [r["year"] for r in fc["rows"]] == list(range(2022, 2051))
            assert all(0 <= r["lo"] <= r["point"] <= r["hi"] for r in fc["rows"])
        split = doc["gbrt"]["split"]
        assert split["n_train"] == int(0.8 * 96) and split["n_train"] + split["n_test"] == 96
        assert set(doc["gbrt"]["predictions"]) == {"ARG", "BRA", "CHL"}

    def test_zero_baseline_is_model_error(self, tmp_path):
        cfg = config(tmp_path, small_csv(zero=True))
        pipeline.cmd_ingest(cfg)
        with pytest.raises(ModelError):
            pipeline.cmd_forecast(cfg)

    def test_horizon_must_follow_history(self, tmp_path):
        cfg = config(tmp_path, horizon_year=2020)
        pipeline.cmd_ingest(cfg)
        with pytest.raises(InputError):
            pipeline.cmd_forecast(cfg)


class TestValidate:
    def test_reports_written(self, small_run):
        cfg, _ = small_run
        cv = json.loads((cfg.out / pipeline.CV_REPORT).read_text())
        bt = json.loads((cfg.out / pipeline.BACKTEST_REPORT).read_text())
        assert cv["k"] == 5 and len(cv["per_fold"]) == 5
        assert bt["test_years"] == [2016, 2017, 2018, 2019, 2020]
        assert set(bt["per_source_mape"]) == {"Hydro", "Wind", "Solar"}

    def test_short_history(self, tmp_path):
        cfg = config(tmp_path, small_csv(first=2000, last=2018))
        pipeline.cmd_ingest(cfg)
        with pytest.raises(InputError, match="cover"):
            pipeline.cmd_validate(cfg)


class TestRender:
    def test_three_files(self, small_run):
        cfg, _ = small_run
        for name in (pipeline.CHOROPLETH, pipeline.STACKED, pipeline.SHARES):
            ET.fromstring((cfg.out / name).read_text())

    def test_darkest_country_is_largest(self, small_run):
        cfg, report = small_run
        root = ET.fromstring((cfg.out / pipeline.CHOROPLETH).read_text())
        fills = {p.get("data-iso"): p.get("fill")
                 for p in root.iter("{http://www.w3.org/2000/svg}path")}
        top = max(report.per_country_2050, key=report.per_country_2050.get)
        assert fills[top] == "#00441B"
        # countries without data get the neutral fill
        assert fills["PER"] == "#F0F0F0"

    def test_shares_within_percent(self, small_run):
        cfg, _ = small_run
        shares = pipeline.historical_shares(pipeline.load_snapshot(cfg))
        assert set(shares) == {"Total", "Hydro", "Wind", "Solar"}
        np.testing.assert_allclose(shares["Total"], 100.0, rtol=1e-12)


class TestReport:
    def test_tables_and_figures(self, small_run):
        cfg, report = small_run
        result = pipeline.cmd_report(cfg)
        names = {p.name for p in result["written"]}
        assert {"report_countries.csv", "report_sources.csv",
                "report_sources.png", "report_countries.png"} <= names
        rows = list(csv.DictReader(io.StringIO(result["countries_csv"])))
        assert [r["iso"] for r in rows] == ["ARG", "BRA", "CHL"]
        assert sum(float(r["share_pct"]) for r in rows) == pytest.approx(100, abs=0.05)
        png = (cfg.out / "report_sources.png").read_bytes()
        assert png[:8] == b"\x89PNG\r\n\x1a\n"

    def test_figures_deterministic(self, small_run):
        cfg, _ = small_run
        pipeline.cmd_report(cfg)
        a = (cfg.out / "report_countries.png").read_bytes()
        pipeline.cmd_report(cfg)
        assert (cfg.out / "report_countries.png").read_bytes() == a


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(InputError, match="colour"):
            RunConfig.from_dict({"colour": "red"})

    def test_sections(self):
        cfg = RunConfig.from_dict({"gbrt": {"n_estimators": 7}, "trend": {"penalty": 0.5},
                                   "backtest_window": [2015, 2019]})
        assert cfg.gbrt.n_estimators == 7 and cfg.trend.penalty == 0.5
        assert cfg.backtest_window == (2015, 2019)

    def test_bad_section(self):
        with pytest.raises(InputError):
            RunConfig.from_dict({"gbrt": {"trees": 3}})

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"horizon_year": 2040, "output_dir": "a",
                                    "gbrt": {"seed": 1}, "trend": {"seed": 1}}))
        cfg = RunConfig.load(str(path))
        assert cfg.horizon_year == 2040 and cfg.gbrt.seed == 1
        cfg = cfg.with_overrides(seed=9, horizon=2045, out="b")
        assert (cfg.horizon_year, cfg.output_dir, cfg.gbrt.seed, cfg.trend.seed) == (2045, "b", 9, 9)

    def test_stacked_from_validated(self):
        with pytest.raises(InputError):
            RunConfig(stacked_from="both")


class TestCli:
    def run(self, capsys, *argv):
        code = cli.main(list(argv))
        out, err = capsys.readouterr()
        return code, out, err

    def test_full_sequence(self, tmp_path, capsys):
        data = tmp_path / "energy.csv"
        data.write_text(small_csv(1))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data_path": str(data), "gbrt": {"n_estimators": 10}}))
        common = ["--config", str(cfg), "--out", str(tmp_path / "o")]
        code, out, _ = self.run(capsys, "ingest", *common)
        assert code == 0 and "ARG" in out
        code, out, _ = self.run(capsys, "forecast", *common, "--horizon", "2035")
        assert code == 0 and "2035" in out
        code, out, _ = self.run(capsys, "validate", *common)
        assert code == 0 and "MAPE between" in out
        code, out, _ = self.run(capsys, "render", *common)
        assert code == 0 and out.count(".svg") == 3
        code, out, _ = self.run(capsys, "report", *common, "--no-figures")
        assert code == 0 and "report_sources.csv" in out and ".png" not in out

    def test_input_error_exit(self, tmp_path, capsys):
        data = tmp_path / "mex.csv"
        data.write_text(HEADER + "Mexico,MEX,2000,hydro,30.0\n")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data_path": str(data)}))
        code, out, err = self.run(capsys, "ingest", "--config", str(cfg), "--out", str(tmp_path))
        assert code == 2 and err.startswith("E_INPUT: ") and err.count("\n") == 1

    def test_model_error_exit(self, tmp_path, capsys):
        data = tmp_path / "zero.csv"
        data.write_text(small_csv(zero=True))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data_path": str(data), "gbrt": {"n_estimators": 3}}))
        common = ["--config", str(cfg), "--out", str(tmp_path / "o")]
        assert self.run(capsys, "ingest", *common)[0] == 0
        code, _, err = self.run(capsys, "forecast", *common)
        assert code == 3 and err.startswith("E_MODEL: ")

    def test_io_error_exit(self, tmp_path, capsys):
        code, _, err = self.run(capsys, "forecast", "--out", str(tmp_path / "empty"))
        assert code == 4 and err.startswith("E_IO: ")

    def test_missing_config(self, tmp_path, capsys):
        code, _, err = self.run(capsys, "ingest", "--config", str(tmp_path / "none.json"))
        assert code == 4 and err.startswith("E_IO: ")

    def test_bad_config_json(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{oops")
        code, _, err = self.run(capsys, "ingest", "--config", str(cfg))
        assert code == 2 and err.startswith("E_INPUT: ")

    def test_unknown_command(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["explode"])
        assert exc.value.code == 2
