from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from soilscreen import geodata
from soilscreen.geodata import METALS, DataError, FeatureMatrix, SampleRecord

from oracles import type7_quantile

HEADER = "sample_id,site,is_control," + ",".join(METALS)


def _row(sid="S1-01", site="S1", ctrl="false", values=None):
    values = values or ["1.0"] * 8
    return ",".join([sid, site, ctrl, *values])


def _write(tmp_path, lines):
    p = tmp_path / "data.csv"
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def _fm(values, columns=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    cols = columns or [f"c{j}" for j in range(values.shape[1])]
    return FeatureMatrix(values, cols, [f"r{i}" for i in range(values.shape[0])])


class TestLoad:
    def test_fixture_shape(self, fixture_dataset):
        assert len(fixture_dataset) == 78
        assert int(fixture_dataset.controls.sum()) == 6
        sites = fixture_dataset.sites
        assert all(sites.count(f"S{i}") == 6 for i in range(1, 13))
        assert fixture_dataset.has_risk

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="no data rows"):
            geodata.load_dataset(p)

    def test_header_only(self, tmp_path):
        with pytest.raises(DataError, match="no data rows"):
            geodata.load_dataset(_write(tmp_path, [HEADER]))

    def test_non_numeric_names_row_and_column(self, tmp_path):
        vals = ["1"] * 8
        vals[METALS.index("Cu")] = "abc"
        p = _write(tmp_path, [HEADER, _row(), _row("S1-02", values=vals)])
        with pytest.raises(DataError) as err:
            geodata.load_dataset(p)
        assert "row 3" in str(err.value) and "Cu" in str(err.value)

    def test_negative_rejected(self, tmp_path):
        vals = ["1"] * 8
        vals[0] = "-0.5"
        with pytest.raises(DataError, match="row 2, column As"):
            geodata.load_dataset(_write(tmp_path, [HEADER, _row(values=vals)]))

    def test_missing_column(self, tmp_path):
        header = HEADER.replace(",Zn", "")
        with pytest.raises(DataError, match="Zn"):
            geodata.load_dataset(_write(tmp_path, [header, "a,S1,false,1,1,1,1,1,1,1"]))

    def test_duplicate_id(self, tmp_path):
        with pytest.raises(DataError, match="duplicate"):
            geodata.load_dataset(_write(tmp_path, [HEADER, _row(), _row()]))

    def test_control_must_match_site(self, tmp_path):
        with pytest.raises(DataError, match="row 2"):
            geodata.load_dataset(_write(tmp_path, [HEADER, _row(ctrl="true")]))

    def test_partial_risk_columns(self, tmp_path):
        with pytest.raises(DataError, match="all present or all absent"):
            geodata.load_dataset(_write(tmp_path, [HEADER + ",hi_child", _row() + ",1.0"]))

    def test_round_trip(self, tmp_path, fixture_dataset):
        p = tmp_path / "copy.csv"
        geodata.write_dataset(fixture_dataset, p)
        again = geodata.load_dataset(p)
        assert again == fixture_dataset

    def test_sample_record_validation(self):
        conc = {m: 1.0 for m in METALS}
        with pytest.raises(DataError):
            SampleRecord("x", "S1", False, {**conc, "Hg": float("nan")})
        with pytest.raises(DataError):
            SampleRecord("x", "S1", False, {k: v for k, v in conc.items() if k != "Pb"})


class TestStats:
    def test_hand_quartiles(self):
        conc_rows = [{m: float(v) for m in METALS} for v in (1, 2, 3, 4)]
        ds = geodata.Dataset(tuple(SampleRecord(f"s{i}", "S1", False, c) for i, c in enumerate(conc_rows)))
        s = geodata.descriptive_stats(ds)["As"]
        assert (s.mean, s.median, s.p25, s.p75) == (2.5, 2.5, 1.75, 3.25)

    def test_single_sample(self):
        ds = geodata.Dataset((SampleRecord("only", "S2", False, {m: 3.0 for m in METALS}),))
        with pytest.warns(UserWarning, match="single sample"):
            stats = geodata.descriptive_stats(ds)
        s = stats["Cd"]
        assert s.mean == s.min == s.max == 3.0
        assert s.std == 0.0 and not s.std_defined

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), st.floats(0, 1))
    def test_quantile_matches_oracle(self, values, q):
        got = geodata.quantile(np.array(values), q)
        assert got == pytest.approx(type7_quantile(values, q), rel=1e-12, abs=1e-9)

    def test_fixture_table_targets(self, fixture_dataset):
        stats = geodata.descriptive_stats(fixture_dataset)
        assert abs(stats["As"].mean - 6.48) <= 0.15 * 6.48
        assert abs(stats["Cu"].max - 611.76) <= 0.05 * 611.76


class TestPearson:
    def test_linear(self):
        x = np.arange(10.0)
        r = geodata.pearson_matrix(_fm(np.column_stack([x, 2 * x + 1, -x])))
        assert r[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert r[0, 2] == pytest.approx(-1.0, abs=1e-12)

    def test_zero_variance_gives_zero(self):
        x = np.arange(5.0)
        with pytest.warns(UserWarning, match="zero-variance"):
            r = geodata.pearson_matrix(_fm(np.column_stack([x, np.full(5, 2.0)])))
        assert r[0, 1] == 0.0 and r[1, 1] == 1.0

    def test_fixture_paper_pairs(self, fixture_dataset):
        r = geodata.pearson_matrix(fixture_dataset.features())
        i = {m: j for j, m in enumerate(METALS)}
        assert abs(r[i["Cr"], i["Hg"]] - 0.82) <= 0.15
        assert abs(r[i["As"], i["Pb"]] - 0.89) <= 0.15

    @given(arrays(np.float64, (12, 3), elements=st.floats(-100, 100)))
    def test_bounded_symmetric(self, x):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = geodata.pearson_matrix(_fm(x))
        assert np.allclose(r, r.T) and np.all(np.abs(r) <= 1.0)


class TestStandardize:
    def test_hand_values(self):
        z = geodata.standardize(_fm([1.0, 2.0, 3.0]))
        assert np.allclose(z.values[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_constant_column(self):
        with pytest.warns(UserWarning):
            z = geodata.standardize(_fm([5.0, 5.0, 5.0]))
        assert np.all(z.values == 0.0)
        assert np.allclose(z.inverse_transform().values, 5.0)

    def test_table_value(self):
        # mean 6.48, population std 3.33: 11.40 -> (11.40 - 6.48) / 3.33
        assert (11.40 - 6.48) / 3.33 == pytest.approx(1.477, abs=1e-3)
        col = np.array([6.48 - 3.33, 6.48 + 3.33])
        z = geodata.standardize(_fm(col))
        raw_std = z.col_stds[0]
        assert raw_std == pytest.approx(3.33) and z.col_means[0] == pytest.approx(6.48)
        assert (11.40 - z.col_means[0]) / raw_std == pytest.approx(1.477, abs=1e-3)

    def test_needs_two_rows(self):
        with pytest.raises(DataError, match="at least 2"):
            geodata.standardize(_fm([[1.0, 2.0]]))

    def test_rejects_double_standardization(self):
        z = geodata.standardize(_fm([1.0, 2.0, 4.0]))
        with pytest.raises(DataError, match="already"):
            geodata.standardize(z)

    @given(arrays(np.float64, (9, 4), elements=st.floats(0, 1e4)))
    def test_round_trip(self, x):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            z = geodata.standardize(_fm(x))
        assert np.allclose(z.inverse_transform().values, x, rtol=1e-9, atol=1e-9)
