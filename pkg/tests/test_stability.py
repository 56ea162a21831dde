import csv
import json

import numpy as np
import pytest

from rklpricer.stability import (
    WindowTooSmallError,
    amplification,
    real_extent,
    region_stats,
    scan,
    scan_region,
    stats_json,
    stats_record,
    table_row,
)


@pytest.mark.parametrize("scheme", ["RKL", "RKC"])
def test_amplification_at_origin_is_one(scheme):
    assert amplification(scheme, 7, 0.0 if scheme == "RKL" else 0.1, 0.0) == 1.0


def test_two_stage_value():
    assert amplification("RKL", 2, 0.0, -2.0) == pytest.approx(1.0, abs=1e-15)


def test_real_interval_of_eleven_stages():
    beta = real_extent("RKL", 11, 0.0)
    z = np.linspace(-beta, 0.0, 5001)
    assert np.all(np.abs(amplification("RKL", 11, 0.0, z)) <= 1 + 1e-12)


def test_unknown_scheme():
    with pytest.raises(ValueError):
        amplification("ROCK", 5, 0.0, 0.0)


@pytest.fixture(scope="module")
def rkl7():
    return scan_region("RKL", 7, 0.0, resolution=(400, 201))


def test_raster_conjugate_symmetric(rkl7):
    # the window is symmetric so row j mirrors row ny - 1 - j
    np.testing.assert_allclose(rkl7.damping, rkl7.damping[::-1], rtol=0, atol=1e-13 * rkl7.damping.max())


def test_real_endpoint_within_one_cell():
    beta = real_extent("RKL", 7, 0.0)
    sc = scan_region("RKL", 7, 0.0, resolution=(2000, 1001))
    mid = sc.ny // 2
    assert abs(sc.im[mid]) < 1e-12
    stable_re = sc.re[sc.stable[mid]]
    cell = sc.re[1] - sc.re[0]
    assert abs(stable_re.min() + beta) <= cell


def test_real_interval_fully_stable_up_to_bound():
    for s in (3, 7, 21):
        beta = real_extent("RKL", s, 0.0)
        z = np.linspace(-beta, 0.0, 20001)
        assert np.all(np.abs(amplification("RKL", s, 0.0, z)) <= 1 + 1e-12)


def test_small_window_raises():
    sc = scan("RKL", 7, 0.0, (-5.0, 0.1, -1.0, 1.0), 100, 50)
    with pytest.raises(WindowTooSmallError):
        region_stats(sc)


def test_csv_and_json_export(tmp_path, rkl7):
    small = scan("RKL", 3, 0.0, (-9.0, 0.5, -3.0, 3.0), 6, 4)
    path = tmp_path / "raster.csv"
    small.write_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["re", "im", "damping", "stable"]
    assert len(rows) == 1 + 6 * 4
    # imaginary part is the outer loop
    assert float(rows[1][1]) == float(rows[6][1])
    assert float(rows[1][0]) < float(rows[2][0])
    rec = json.loads(stats_json(stats_record(rkl7)))
    assert set(rec) == {"scheme", "s", "eps", "area", "area_ratio", "avg_damping"}
    assert rec["area_ratio"] == 1.0


def test_shift_shrinks_region():
    row = table_row("RKL", 7, 20.0, resolution=(600, 300))
    assert 0.0 < row["area_ratio"] < 1.0


@pytest.mark.slow
def test_statistics_stable_under_resolution_doubling():
    base = table_row("RKL", 7, 20.0)
    fine = table_row("RKL", 7, 20.0, resolution=(4000, 2000))
    assert abs(base["area_ratio"] - fine["area_ratio"]) <= 0.01
    assert abs(base["avg_damping"] - fine["avg_damping"]) <= 0.01
