import math
from datetime import datetime, timezone

import numpy as np
import pytest

from gridbench.errors import (BadValue, DegenerateActuals, NearZeroActual,
                              ShapeMismatch, TooShort)
from gridbench.metrics import (MetricsReport, compute_report, mape, mse_pct,
                               nmae, signed_tails, temperature_variability)
from gridbench.series import HourlySeries


# ------------------------------------------------------------ naive oracles


def naive_mse_pct(y, yhat):
    se = 0.0
    for a, b in zip(y, yhat):
        se += (a - b) ** 2
    return 100.0 * math.sqrt(se / len(y)) / (sum(y) / len(y))


def naive_mape(y, yhat):
    total = 0.0
    for a, b in zip(y, yhat):
        total += abs(a - b) / abs(a)
    return 100.0 * total / len(y)


def naive_nmae(y, yhat):
    num = sum(abs(a - b) for a, b in zip(y, yhat))
    den = sum(abs(a) for a in y)
    return 100.0 * num / den


def naive_tails(y, yhat):
    e = sorted(100.0 * (b - a) / (a + 1e-6) for a, b in zip(y, yhat))
    out = []
    for q in (0.005, 0.995):
        rank = q * (len(e) - 1)
        lo = int(math.floor(rank))
        hi = min(lo + 1, len(e) - 1)
        frac = rank - lo
        out.append(e[lo] + frac * (e[hi] - e[lo]))
    return tuple(out)


# ------------------------------------------------------------------ examples


def test_mse_pct_example():
    assert mse_pct([100.0, 100.0], [110.0, 90.0]) == pytest.approx(10.0)


def test_mse_pct_perfect():
    assert mse_pct([5.0, 7.0], [5.0, 7.0]) == 0.0


def test_mse_pct_scale_invariant():
    y = np.array([90.0, 120.0, 105.0])
    yhat = np.array([100.0, 110.0, 95.0])
    assert mse_pct(7 * y, 7 * yhat) == pytest.approx(mse_pct(y, yhat), rel=1e-12)


def test_mse_pct_degenerate():
    with pytest.raises(DegenerateActuals):
        mse_pct([-1.0, 1.0], [0.0, 0.0])


def test_mape_example():
    assert mape([100.0, 100.0], [110.0, 90.0]) == pytest.approx(10.0)


def test_mape_zero_actual_refused():
    with pytest.raises(NearZeroActual):
        mape([100.0, 0.0], [100.0, 1.0])


def test_mape_scale_invariant():
    y = np.array([90.0, 120.0, 105.0])
    yhat = np.array([100.0, 110.0, 95.0])
    assert mape(7 * y, 7 * yhat) == pytest.approx(mape(y, yhat), rel=1e-12)


def test_nmae_example():
    assert nmae([0.0, 2.0], [1.0, 1.0]) == pytest.approx(100.0)


def test_nmae_sign_flip_invariant():
    y = np.array([-3.0, 2.0, 5.0])
    yhat = np.array([-2.0, 2.5, 4.0])
    assert nmae(-y, -yhat) == pytest.approx(nmae(y, yhat), rel=1e-12)


def test_nmae_degenerate():
    with pytest.raises(DegenerateActuals):
        nmae([0.0, 0.0], [1.0, 1.0])


def test_length_mismatch():
    with pytest.raises(ShapeMismatch):
        mse_pct([1.0], [1.0, 2.0])


def test_tails_rank_interpolation():
    # errors exactly 1..200 percent: p05 at rank 0.995 between 1 and 2
    y = np.full(200, 100.0)
    yhat = y * (1.0 + np.arange(1, 201) / 100.0)
    p05, p995 = signed_tails(y, yhat)
    assert p05 == pytest.approx(1.995, abs=1e-4)
    assert p995 == pytest.approx(199.005, abs=1e-4)


def test_tails_symmetric_set():
    e = np.array([1.0, 3.0, 7.0, 12.0])
    y = np.full(8, 100.0)
    yhat = y + np.concatenate([e, -e])
    p05, p995 = signed_tails(y, yhat)
    assert p05 == pytest.approx(-p995, rel=1e-9)


def test_tails_uniform_overprediction():
    y = np.linspace(500.0, 1500.0, 50)
    p05, p995 = signed_tails(y, 1.1 * y)
    assert p05 == pytest.approx(10.0, abs=1e-3)
    assert p995 == pytest.approx(10.0, abs=1e-3)


def test_tails_too_short():
    with pytest.raises(TooShort):
        signed_tails([1.0], [1.0])


def test_sigma_t_examples():
    start = datetime(2022, 1, 3, tzinfo=timezone.utc)
    const = HourlySeries("g", start, np.full(10, 20.0))
    assert temperature_variability(const) == 0.0
    pair = HourlySeries("g", start, np.array([0.0, 2.0]))
    assert temperature_variability(pair) == pytest.approx(1.0)
    shifted = HourlySeries("g", start, np.array([5.0, 7.0]))
    assert temperature_variability(shifted) == pytest.approx(1.0)
    with pytest.raises(TooShort):
        temperature_variability(HourlySeries("g", start, np.array([1.0])))


# ------------------------------------------------------- brute-force parity


def test_metrics_match_naive_loops():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        y = rng.uniform(50.0, 1500.0, n)
        yhat = y * rng.uniform(0.8, 1.2, n)
        assert mse_pct(y, yhat) == pytest.approx(naive_mse_pct(y, yhat), rel=1e-9)
        assert mape(y, yhat) == pytest.approx(naive_mape(y, yhat), rel=1e-9)
        assert nmae(y, yhat) == pytest.approx(naive_nmae(y, yhat), rel=1e-9)
        got = signed_tails(y, yhat)
        want = naive_tails(y, yhat)
        assert got[0] == pytest.approx(want[0], rel=1e-9, abs=1e-12)
        assert got[1] == pytest.approx(want[1], rel=1e-9, abs=1e-12)


# -------------------------------------------------------------------- report


def test_compute_report_fields():
    rng = np.random.default_rng(3)
    y = rng.uniform(800.0, 1200.0, 100)
    yhat = y * rng.uniform(0.9, 1.1, 100)
    rep = compute_report(y, yhat, context=("synth", "lstm", 24, "temporal"))
    assert rep.n == 100
    assert rep.y_bar == pytest.approx(y.mean())
    assert rep.p05 <= rep.p995
    assert rep.context == ("synth", "lstm", 24, "temporal")


def test_report_rejects_inverted_tails():
    with pytest.raises(BadValue):
        MetricsReport(mse_pct=1.0, mape=1.0, nmae=1.0, p05=2.0, p995=-2.0,
                      n=10, y_bar=100.0)


def test_report_rejects_nonfinite():
    with pytest.raises(BadValue):
        MetricsReport(mse_pct=float("nan"), mape=1.0, nmae=1.0, p05=-1.0,
                      p995=1.0, n=10, y_bar=100.0)
