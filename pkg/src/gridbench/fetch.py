"""Optional HTTP clients that materialize the canonical CSV formats.

EIA API v2 supplies hourly balancing-authority demand; an hourly weather
archive API supplies the meteorological covariates.  Both clients write the
same CSV layouts the ingest path reads, so fetched and local data are
interchangeable.  The HTTP session is injectable and the test suite never
touches the network.
"""

from datetime import datetime, timedelta

import numpy as np
import requests

from .errors import BadValue
from .series import (CovariateSet, HourlySeries, fill_gaps, parse_hourly_csv,
                     parse_timestamp, write_series_csv)

EIA_URL = "https://api.eia.gov/v2/electricity/rto/region-data/data/"
WEATHER_URL = "https://archive-api.open-meteo.com/v1/archive"
HOUR = timedelta(hours=1)

# canonical covariate column -> archive API field
WEATHER_FIELDS = {
    "temp_c": "temperature_2m",
    "humidity_pct": "relative_humidity_2m",
    "wind_mps": "wind_speed_10m",
    "ghi_wm2": "shortwave_radiation",
    "cloud_pct": "cloud_cover",
}


def _get_json(session, url, params):
    resp = session.get(url, params=params, timeout=60)
    resp.raise_for_status()
    return resp.json()


def fetch_eia_demand(grid_id: str, start: datetime, end: datetime,
                     api_key: str, out_path=None, session=None,
                     page_size: int = 5000) -> HourlySeries:
    """Page through EIA v2 hourly demand for one balancing authority.

    Gaps up to 3 hours are interpolated; longer outages raise GapTooLong
    rather than silently imputing.
    """
    session = session or requests.Session()
    rows = []
    offset = 0
    while True:
        payload = _get_json(session, EIA_URL, {
            "api_key": api_key,
            "frequency": "hourly",
            "data[0]": "value",
            "facets[respondent][]": grid_id,
            "facets[type][]": "D",
            "start": start.strftime("%Y-%m-%dT%H"),
            "end": end.strftime("%Y-%m-%dT%H"),
            "sort[0][column]": "period",
            "sort[0][direction]": "asc",
            "offset": offset,
            "length": page_size,
        })
        response = payload.get("response")
        if not isinstance(response, dict) or "data" not in response:
            raise BadValue("EIA payload missing response.data")
        page = response["data"]
        rows.extend(page)
        offset += len(page)
        total = int(response.get("total", offset))
        if not page or offset >= total:
            break
    if not rows:
        raise BadValue(f"EIA returned no hourly demand rows for {grid_id!r}")

    lines = ["timestamp,demand_mw"]
    for row in rows:
        period = str(row["period"])
        if len(period) == 13:
            period += ":00"
        lines.append(f"{period}Z,{float(row['value']):.6f}")
    series = parse_hourly_csv("\n".join(lines) + "\n", "demand_mw",
                              grid_id=grid_id, on_gap="mark")
    series = fill_gaps(series)
    if out_path is not None:
        write_series_csv(series, out_path, header_comments=(
            f"source=eia-v2 respondent={grid_id}",
            f"window={start.isoformat()}..{end.isoformat()}"))
    return series


def write_weather_csv(columns: dict, names, path, header_comments=()) -> None:
    """Multi-covariate CSV: `timestamp,<covariate>...` on a common clock."""
    names = list(names)
    ref = columns[names[0]]
    with open(path, "w", encoding="utf-8") as fh:
        for c in header_comments:
            fh.write(f"# {c}\n")
        fh.write("timestamp," + ",".join(names) + "\n")
        for i in range(len(ref)):
            ts = ref.timestamp(i).strftime("%Y-%m-%dT%H:%M:%SZ")
            vals = ",".join(f"{columns[n].values[i]:.6f}" for n in names)
            fh.write(f"{ts},{vals}\n")


def fetch_weather_archive(latitude: float, longitude: float, start: datetime,
                          end: datetime, out_path=None,
                          names=tuple(WEATHER_FIELDS), session=None,
                          grid_id: str = "") -> CovariateSet:
    """One archive call for all requested covariates, hourly UTC."""
    unknown = [n for n in names if n not in WEATHER_FIELDS]
    if unknown:
        raise BadValue(f"unknown covariates {unknown}; "
                       f"known: {sorted(WEATHER_FIELDS)}")
    session = session or requests.Session()
    payload = _get_json(session, WEATHER_URL, {
        "latitude": latitude,
        "longitude": longitude,
        "start_date": start.strftime("%Y-%m-%d"),
        "end_date": end.strftime("%Y-%m-%d"),
        "hourly": ",".join(WEATHER_FIELDS[n] for n in names),
        "timezone": "UTC",
    })
    hourly = payload.get("hourly")
    if not isinstance(hourly, dict) or "time" not in hourly:
        raise BadValue("weather payload missing hourly.time")
    times = [parse_timestamp(t) for t in hourly["time"]]
    if not times:
        raise BadValue("weather archive returned no hours")
    for prev, cur in zip(times, times[1:]):
        if cur - prev != HOUR:
            raise BadValue(f"weather clock not hourly at {cur.isoformat()}")

    columns = {}
    for name in names:
        field = WEATHER_FIELDS[name]
        raw = hourly.get(field)
        if raw is None or len(raw) != len(times):
            raise BadValue(f"weather field {field!r} missing or misaligned")
        values = np.array([np.nan if v is None else float(v) for v in raw])
        col = HourlySeries(grid_id, times[0], values, name=name)
        columns[name] = fill_gaps(col)
    covs = CovariateSet(names=list(names), columns=columns,
                        lags={n: 0 for n in names})
    if out_path is not None:
        write_weather_csv(columns, names, out_path, header_comments=(
            f"source=weather-archive lat={latitude} lon={longitude}",))
    return covs
