import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from renewcast.core import EnergyRecord, EnergySeries, InputError, Source
from renewcast.dataset import (
    SOUTH_AMERICA,
    Dataset,
    filter_south_america,
    impute_series,
    load_dataset,
    parse_csv,
    serialize_csv,
    split,
)

HEADER = "country,iso_code,year,source,generation_twh\n"


def series(values, start=2000):
    vals = tuple(math.nan if v is None else float(v) for v in values)
    return EnergySeries("BRA", Source.WIND, tuple(range(start, start + len(vals))), vals)


class TestParse:
    def test_direct_mapping(self):
        [r] = parse_csv(HEADER + "Brazil,BRA,2020,hydro,396.8\n")
        assert (r.country_iso, r.year, r.source, r.generation) == ("BRA", 2020, Source.HYDRO, 396.8)
        assert r.country_name == "Brazil"

    def test_empty_cell_is_missing_not_zero(self):
        [r] = parse_csv(HEADER + "Chile,CHL,2019,solar,\n")
        assert r.generation is None and r.source is Source.SOLAR

    def test_unknown_source(self):
        with pytest.raises(InputError, match="fusion"):
            parse_csv(HEADER + "Peru,PER,2018,fusion,1.0\n")

    @pytest.mark.parametrize("row", ["Peru,PER,20x8,hydro,1.0", "Peru,PER,2018,hydro,abc",
                                     "Peru,PER,2018,hydro"])
    def test_bad_rows(self, row):
        with pytest.raises(InputError):
            parse_csv(HEADER + row + "\n")

    def test_missing_header(self):
        with pytest.raises(InputError, match="header"):
            parse_csv("Brazil,BRA,2020,hydro,396.8\n")
        with pytest.raises(InputError):
            parse_csv("")

    def test_blank_lines_skipped_and_case_insensitive(self):
        recs = parse_csv(HEADER + "\nBrazil,bra,2020,WIND,1.5\n\n")
        assert len(recs) == 1 and recs[0].country_iso == "BRA" and recs[0].source is Source.WIND

    def test_round_trip(self, sample_csv):
        records = parse_csv(sample_csv)
        again = parse_csv(serialize_csv(records))
        assert again == records

    @given(st.lists(st.tuples(st.sampled_from(SOUTH_AMERICA), st.integers(1900, 2100),
                              st.sampled_from(list(Source)),
                              st.one_of(st.none(), st.floats(0, 1e6))), max_size=30))
    def test_round_trip_property(self, rows):
        records = [EnergyRecord(iso, f"Name {iso}", y, s, v) for iso, y, s, v in rows]
        assert parse_csv(serialize_csv(records)) == records


class TestFilter:
    def _rec(self, iso):
        return EnergyRecord(iso, iso, 2000, Source.HYDRO, 1.0)

    def test_membership(self):
        assert [r.country_iso for r in filter_south_america([self._rec("BRA"), self._rec("MEX")])] == ["BRA"]

    def test_empty(self):
        assert filter_south_america([]) == []

    def test_all_twelve(self):
        kept = filter_south_america([self._rec(i) for i in SOUTH_AMERICA])
        assert {r.country_iso for r in kept} == set(SOUTH_AMERICA) and len(SOUTH_AMERICA) == 12

    def test_french_guiana_excluded(self):
        assert filter_south_america([self._rec("GUF")]) == []


class TestImpute:
    def test_midpoint(self):
        out = impute_series(series([1, None, 3]))
        assert out.values == (1.0, 2.0, 3.0)
        assert out.imputed_mask == (False, True, False)

    def test_leading_zero(self):
        out = impute_series(series([None, None, 5]))
        assert out.values == (0.0, 0.0, 5.0) and out.imputed_mask == (True, True, False)

    def test_hold_last(self):
        out = impute_series(series([4, None, None]))
        assert out.values == (4.0, 4.0, 4.0) and out.imputed_mask == (False, True, True)

    def test_no_observations(self):
        with pytest.raises(InputError):
            impute_series(series([None, None]))

    @given(st.lists(st.one_of(st.none(), st.floats(0, 1e4)), min_size=1, max_size=40)
           .filter(lambda v: any(x is not None for x in v)))
    def test_idempotent_and_non_negative(self, values):
        once = impute_series(series(values))
        assert all(v >= 0 for v in once.values)
        assert once.complete
        twice = impute_series(once)
        assert twice.values == once.values and twice.imputed_mask == once.imputed_mask


class TestSplit:
    def test_cardinality(self):
        plan = split(10, 0.8, 42)
        assert len(plan.train_indices) == 8 and len(plan.test_indices) == 2
        assert sorted(plan.train_indices + plan.test_indices) == list(range(10))

    def test_deterministic(self):
        assert split(37, 0.8, 42) == split(37, 0.8, 42)

    def test_frozen_permutation(self):
        # hand-run Fisher-Yates over splitmix64(42): shuffled order [1, 2, 0, 4, 3]
        plan = split(5, 0.8, 42)
        assert plan.train_indices == (1, 2, 0, 4) and plan.test_indices == (3,)

    def test_errors(self):
        with pytest.raises(InputError):
            split(1, 0.8, 0)
        with pytest.raises(InputError):
            split(10, 1.0, 0)

    @given(st.integers(2, 300), st.floats(0.01, 0.99), st.integers(0, 2 ** 64 - 1))
    def test_partition_property(self, n, ratio, seed):
        plan = split(n, ratio, seed)
        train, test = set(plan.train_indices), set(plan.test_indices)
        assert not train & test and train | test == set(range(n))
        assert len(train) == math.floor(ratio * n)


class TestDataset:
    def test_sample_has_twelve_countries(self, sample_dataset):
        assert sample_dataset.countries == tuple(sorted(SOUTH_AMERICA))
        assert "MEX" not in {k[0] for k in sample_dataset.series_index}

    def test_all_series_aligned_and_complete(self, sample_dataset):
        for s in sample_dataset.series_index.values():
            assert s.years == sample_dataset.years and s.complete

    def test_duplicates_rejected(self):
        r = EnergyRecord("BRA", "Brazil", 2000, Source.HYDRO, 1.0)
        with pytest.raises(InputError, match="duplicate"):
            Dataset([r, r])

    def test_absent_years_become_gaps(self):
        recs = [EnergyRecord("BRA", "Brazil", y, Source.HYDRO, float(y - 1999)) for y in (2000, 2003)]
        ds = Dataset(recs)
        s = ds.series("BRA", Source.HYDRO)
        assert s.years == (2000, 2001, 2002, 2003)
        assert s.values == (1.0, 2.0, 3.0, 4.0)
        assert s.imputed_mask == (False, True, True, False)

    def test_all_missing_series_dropped(self):
        recs = [EnergyRecord("BRA", "Brazil", 2000, Source.HYDRO, 1.0),
                EnergyRecord("BRA", "Brazil", 2000, Source.WIND, None)]
        ds = Dataset(recs)
        assert ds.dropped == [("BRA", Source.WIND)] and len(ds) == 1

    def test_snapshot_round_trip(self, sample_dataset):
        text = sample_dataset.to_json()
        back = Dataset.from_json(text)
        assert back.series_index == sample_dataset.series_index
        assert back.to_json() == text

    def test_aggregates_add_up(self, sample_dataset):
        by_source = sum(sample_dataset.source_totals().values())
        by_country = sum(sample_dataset.country_totals().values())
        np.testing.assert_allclose(by_source, by_country, rtol=1e-12)

    def test_non_member_only_is_empty(self):
        ds = load_dataset(HEADER + "Mexico,MEX,2000,hydro,1.0\n")
        assert len(ds) == 0 and ds.countries == ()
