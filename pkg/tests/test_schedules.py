from __future__ import annotations

import math

import numpy as np
import pytest

from hypothesis import given, strategies as st

from gapsub import (
    ConfigError,
    ConvergenceSeries,
    ErrorSchedule,
    GapSchedule,
    ScheduleRangeError,
    ValidationError,
    geometric_grid,
    linear_grid,
    sublinearity_report,
)


# ---------------------------------------------------------------- gap rules


def test_constant_gap():
    s = GapSchedule.constant(3)
    assert s.value(1) == 3
    assert list(s.values([1, 10, 1000])) == [3, 3, 3]
    assert list(GapSchedule.zero().values([1, 5])) == [0, 0]


def test_ceil_log_values():
    s = GapSchedule("ceil_log")
    # ceil(log2(1+n)) by hand: n=1 -> 1, n=3 -> 2, n=7 -> 3, n=8 -> ceil(log2 9) = 4
    assert s.value(1) == 1
    assert s.value(3) == 2
    assert s.value(7) == 3
    assert s.value(8) == 4
    assert s.value(2**20 - 1) == 20


def test_ceil_power_values():
    s = GapSchedule("ceil_power", {"alpha": 0.5, "scale": 2.0})
    assert s.value(4) == 4  # ceil(2 * 2)
    assert s.value(5) == math.ceil(2.0 * math.sqrt(5.0))
    with pytest.raises(ConfigError):
        GapSchedule("ceil_power", {"alpha": 1.0})
    with pytest.raises(ConfigError):
        GapSchedule("ceil_power", {"alpha": 0.5, "scale": -1.0})


def test_table_gap_range():
    s = GapSchedule.from_table([0, 1, 2])
    assert s.value(1) == 0 and s.value(3) == 2
    with pytest.raises(ScheduleRangeError):
        s.value(4)
    with pytest.raises(ScheduleRangeError):
        s.values([0])  # indices start at 1
    with pytest.raises(ConfigError):
        GapSchedule.from_table([])
    with pytest.raises(ConfigError):
        GapSchedule("table", {"values": [1, -2]})


def test_unknown_rule_rejected():
    with pytest.raises(ConfigError):
        GapSchedule("squared", {})
    with pytest.raises(ConfigError):
        ErrorSchedule("squared", {})


def test_values_match_scalar_loop():
    for s in (
        GapSchedule("ceil_log"),
        GapSchedule("ceil_power", {"alpha": 0.7, "scale": 1.5}),
        GapSchedule.constant(2),
    ):
        ns = np.arange(1, 60)
        vec = s.values(ns)
        assert [s.value(int(n)) for n in ns] == vec.tolist()


def test_max_over_multiples():
    s = GapSchedule("ceil_log")
    r, K = 7, 5
    expected = max(s.value(k * r) for k in range(1, K + 1))
    assert s.max_over_multiples(r, K) == expected


def test_gap_json_round_trip():
    s = GapSchedule("ceil_power", {"alpha": 0.5, "scale": 3.0})
    s2 = GapSchedule.from_json(s.to_json())
    assert s2 == s
    with pytest.raises(ConfigError):
        GapSchedule.from_json({"params": {}})


# -------------------------------------------------------------- error rules


def test_error_constant_and_power():
    r = ErrorSchedule.constant(1.5)
    assert r.value(10) == 1.5
    p = ErrorSchedule("scaled_power", {"alpha": 0.5, "scale": 2.0})
    assert abs(p.value(9) - 6.0) < 1e-12
    with pytest.raises(ConfigError):
        ErrorSchedule("scaled_power", {"alpha": 1.5})
    with pytest.raises(ConfigError):
        ErrorSchedule.constant(-1.0)


def test_error_from_function_not_serializable():
    r = ErrorSchedule.from_function(lambda ns: ns.astype(float) * 0.0, label="zero")
    assert r.value(5) == 0.0
    assert not r.position_dependent
    with pytest.raises(ConfigError):
        r.to_json()


def test_error_function_shape_checked():
    r = ErrorSchedule.from_function(lambda ns: np.zeros(ns.size + 1))
    with pytest.raises(ValidationError):
        r.values([1, 2])


def test_error_hook_is_position_dependent():
    r = ErrorSchedule.from_hook(lambda symbols, j, n: 0.0)
    assert r.position_dependent
    with pytest.raises(ConfigError):
        r.value(3)
    with pytest.raises(ConfigError):
        r.to_json()


def test_error_table():
    r = ErrorSchedule.from_table([0.5, 0.25])
    assert r.value(2) == 0.25
    with pytest.raises(ScheduleRangeError):
        r.value(3)


# ---------------------------------------------------------- sublinearity


def test_sublinearity_constant_passes():
    rep = sublinearity_report(GapSchedule.constant(5), N=1000, threshold=0.1)
    assert rep.looks_sublinear
    assert rep.max_ratio == 5 / 500  # worst point is the window start
    assert rep.window == (500, 1000)


def test_sublinearity_sqrt_window_max():
    """ceil(sqrt(n))/n over [5000, 10000] peaks just past a square."""
    rep = sublinearity_report(
        GapSchedule("ceil_power", {"alpha": 0.5}), N=10000, threshold=0.1
    )
    ns = np.arange(5000, 10001)
    ratios = np.ceil(np.sqrt(ns)) / ns
    assert rep.looks_sublinear
    assert abs(rep.max_ratio - ratios.max()) < 1e-15
    assert rep.argmax_n == int(ns[np.argmax(ratios)])


def test_sublinearity_linear_table_fails():
    tab = GapSchedule.from_table(list(range(0, 40)))
    rep = sublinearity_report(tab, N=39, threshold=0.1)
    assert not rep.looks_sublinear


# ------------------------------------------------------- convergence series


def test_series_validation():
    with pytest.raises(ValidationError):
        ConvergenceSeries([], [])
    with pytest.raises(ValidationError):
        ConvergenceSeries([1, 1], [0.0, 0.0])
    with pytest.raises(ValidationError):
        ConvergenceSeries([2, 1], [0.0, 0.0])
    with pytest.raises(ValidationError):
        ConvergenceSeries([1, 2], [0.0, np.nan])
    with pytest.raises(ValidationError):
        ConvergenceSeries([1, 2], [0.0, np.inf])
    # -inf is a legal value
    s = ConvergenceSeries([1, 2], [0.0, -np.inf])
    assert s.terminal == -np.inf


def test_series_running_extremes_and_terminal():
    s = ConvergenceSeries([1, 2, 3, 4], [1.0, 3.0, 2.0, 2.5])
    assert s.terminal == 2.5
    assert s.running_max().tolist() == [1.0, 3.0, 3.0, 3.0]
    assert s.running_min().tolist() == [1.0, 1.0, 1.0, 1.0]
    assert len(s) == 4


def test_tail_oscillation():
    s = ConvergenceSeries([10, 40, 80, 100], [9.0, 1.0, 1.5, 1.25])
    # tail is n >= 50: values 1.5 and 1.25
    assert abs(s.tail_oscillation() - 0.25) < 1e-15
    single = ConvergenceSeries([5], [1.0])
    assert single.tail_oscillation() is None
    flat = ConvergenceSeries([50, 100], [-np.inf, -np.inf])
    assert flat.tail_oscillation() == 0.0


def test_series_csv_round_trip_exact(tmp_path):
    vals = [1 / 3, -np.inf, 0.1 + 0.2]  # repr must round-trip these bit for bit
    s = ConvergenceSeries([1, 5, 9], vals)
    path = tmp_path / "s.csv"
    s.to_csv(path)
    t = ConvergenceSeries.from_csv(path)
    assert t.ns.tolist() == s.ns.tolist()
    assert t.values.tolist() == s.values.tolist()
    with open(path) as fh:
        assert fh.readline().strip() == "n,value"


def test_series_csv_header_checked(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("index,value\n1,0.0\n")
    with pytest.raises(ConfigError):
        ConvergenceSeries.from_csv(path)


# ------------------------------------------------------------------- grids


def test_geometric_grid_ends_at_N():
    g = geometric_grid(1000)
    assert g[-1] == 1000
    assert g[0] == 1
    assert (np.diff(g) > 0).all()
    assert geometric_grid(1).tolist() == [1]


def test_linear_grid_appends_N():
    assert linear_grid(10, 3).tolist() == [3, 6, 9, 10]
    assert linear_grid(9, 3).tolist() == [3, 6, 9]
    assert linear_grid(2, 5).tolist() == [2]
    with pytest.raises(ConfigError):
        linear_grid(10, 0)


@given(st.integers(min_value=1, max_value=10**6), st.floats(min_value=1.01, max_value=3.0))
def test_geometric_grid_properties(N, ratio):
    g = geometric_grid(N, ratio=ratio)
    assert g[-1] == N
    assert g[0] >= 1
    assert (np.diff(g) > 0).all()
