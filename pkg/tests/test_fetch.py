"""Fetch clients against canned HTTP payloads; no network involved."""

from datetime import datetime, timezone

import numpy as np
import pytest

from gridbench.errors import BadValue, GapTooLong
from gridbench.fetch import (WEATHER_FIELDS, fetch_eia_demand,
                             fetch_weather_archive, write_weather_csv)
from gridbench.series import parse_hourly_csv

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
T1 = datetime(2024, 1, 2, tzinfo=timezone.utc)


class FakeResponse:
    def __init__(self, payload):
        self.payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self.payload


class FakeSession:
    def __init__(self, payloads):
        self.payloads = list(payloads)
        self.calls = []

    def get(self, url, params=None, timeout=None):
        self.calls.append((url, dict(params)))
        return FakeResponse(self.payloads.pop(0))


def eia_rows(hours, start_hour=0, base=1000.0):
    return [{"period": f"2024-01-01T{start_hour + h:02d}",
             "respondent": "CISO", "value": base + h}
            for h in range(hours)]


def test_eia_paginates_and_writes_csv(tmp_path):
    rows = eia_rows(7)
    session = FakeSession([
        {"response": {"data": rows[:5], "total": 7}},
        {"response": {"data": rows[5:], "total": 7}},
    ])
    out = tmp_path / "load.csv"
    series = fetch_eia_demand("CISO", T0, T1, api_key="k", out_path=out,
                              session=session, page_size=5)
    assert len(session.calls) == 2
    _, params = session.calls[0]
    assert params["facets[respondent][]"] == "CISO"
    assert params["facets[type][]"] == "D"
    assert params["start"] == "2024-01-01T00"
    assert session.calls[1][1]["offset"] == 5
    assert len(series) == 7
    assert series.values[0] == 1000.0

    text = out.read_text()
    assert text.splitlines()[0].startswith("# source=eia-v2 respondent=CISO")
    parsed = parse_hourly_csv(text, "demand_mw", grid_id="CISO")
    np.testing.assert_array_equal(parsed.values, series.values)


def test_eia_fills_short_gap():
    rows = eia_rows(3) + [{"period": "2024-01-01T05", "value": 1010.0}]
    session = FakeSession([{"response": {"data": rows, "total": 4}}])
    series = fetch_eia_demand("CISO", T0, T1, "k", session=session)
    assert len(series) == 6
    np.testing.assert_allclose(series.values[3:5],
                               [1002.0 + 8 / 3, 1002.0 + 16 / 3])


def test_eia_rejects_malformed_payload():
    session = FakeSession([{"nope": 1}])
    with pytest.raises(BadValue, match="response.data"):
        fetch_eia_demand("CISO", T0, T1, "k", session=session)
    session = FakeSession([{"response": {"data": [], "total": 0}}])
    with pytest.raises(BadValue, match="no hourly"):
        fetch_eia_demand("CISO", T0, T1, "k", session=session)


def weather_payload(hours=6, none_at=(), drop_field=None):
    times = [f"2024-01-01T{h:02d}:00" for h in range(hours)]
    payload = {"hourly": {"time": times}}
    for name, field in WEATHER_FIELDS.items():
        if field == drop_field:
            continue
        vals = [10.0 + h for h in range(hours)]
        for idx in none_at:
            vals[idx] = None
        payload["hourly"][field] = vals
    return payload


def test_weather_all_covariates_roundtrip(tmp_path):
    session = FakeSession([weather_payload()])
    out = tmp_path / "weather.csv"
    covs = fetch_weather_archive(34.05, -118.25, T0, T1, out_path=out,
                                 session=session, grid_id="CISO")
    _, params = session.calls[0]
    assert params["timezone"] == "UTC"
    assert "temperature_2m" in params["hourly"]
    assert covs.names == list(WEATHER_FIELDS)
    assert len(covs) == 6

    text = out.read_text()
    header = [ln for ln in text.splitlines() if not ln.startswith("#")][0]
    assert header == "timestamp," + ",".join(WEATHER_FIELDS)
    for name in covs.names:
        parsed = parse_hourly_csv(text, name)
        np.testing.assert_array_equal(parsed.values, covs.columns[name].values)


def test_weather_interpolates_short_none_run():
    session = FakeSession([weather_payload(none_at=(2, 3))])
    covs = fetch_weather_archive(0.0, 0.0, T0, T1, session=session)
    np.testing.assert_allclose(covs.columns["temp_c"].values,
                               [10.0, 11.0, 12.0, 13.0, 14.0, 15.0])


def test_weather_long_none_run_fails():
    session = FakeSession([weather_payload(hours=8, none_at=(2, 3, 4, 5))])
    with pytest.raises(GapTooLong):
        fetch_weather_archive(0.0, 0.0, T0, T1, session=session)


def test_weather_rejects_misaligned_and_nonhourly():
    payload = weather_payload()
    payload["hourly"]["temperature_2m"] = [1.0]
    with pytest.raises(BadValue, match="misaligned"):
        fetch_weather_archive(0.0, 0.0, T0, T1,
                              session=FakeSession([payload]))
    payload = weather_payload()
    payload["hourly"]["time"][3] = "2024-01-01T07:00"
    with pytest.raises(BadValue, match="hourly"):
        fetch_weather_archive(0.0, 0.0, T0, T1,
                              session=FakeSession([payload]))
    with pytest.raises(BadValue, match="unknown"):
        fetch_weather_archive(0.0, 0.0, T0, T1, names=("pressure",),
                              session=FakeSession([]))


def test_weather_subset_of_covariates():
    session = FakeSession([weather_payload()])
    covs = fetch_weather_archive(0.0, 0.0, T0, T1,
                                 names=("temp_c", "cloud_pct"),
                                 session=session)
    assert covs.names == ["temp_c", "cloud_pct"]
    _, params = session.calls[0]
    assert params["hourly"] == "temperature_2m,cloud_cover"


def test_write_weather_csv_header_comments(tmp_path):
    session = FakeSession([weather_payload()])
    covs = fetch_weather_archive(0.0, 0.0, T0, T1, session=session)
    path = tmp_path / "w.csv"
    write_weather_csv(covs.columns, covs.names, path,
                      header_comments=("hello",))
    assert path.read_text().startswith("# hello\n")
