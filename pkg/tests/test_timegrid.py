import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfsynth.errors import AlignmentError, BoundaryError, GapError, OrderingError, ValidationError
from mfsynth.timegrid import (
    MixedFrequencyPanel,
    PeriodIndex,
    PeriodSplit,
    SimulationConfig,
    build_regressor_vector,
    first_feasible_quarter,
    load_panel,
    regressor_matrix,
    save_panel,
    simulate_panel,
    split_periods,
)


def write_series(path, start, values, step=1):
    lines = ["date,value"]
    y, m = start
    for v in values:
        lines.append(f"{dt.date(y, m, 1).isoformat()},{v}")
        m += step
        while m > 12:
            m -= 12
            y += 1
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def two_quarter_files(tmp_path):
    target = write_series(tmp_path / "gdp.csv", (1970, 1), [0.5, 0.7], step=3)
    ind = write_series(tmp_path / "ip.csv", (1970, 1), [1, 2, 3, 4, 5, 6])
    return target, ind


def test_load_direct_alignment(two_quarter_files):
    panel = load_panel(two_quarter_files[0], [two_quarter_files[1]], ratio=3)
    assert (panel.T, panel.J, panel.ratio) == (2, 1, 3)
    assert panel.target.tolist() == [0.5, 0.7]
    assert list(panel.labels) == ["ip"]
    assert panel.lead_months(0) == 0


def test_load_extra_months_become_leads(tmp_path):
    target = write_series(tmp_path / "gdp.csv", (1970, 1), [0.5, 0.7], step=3)
    ind = write_series(tmp_path / "ip.csv", (1970, 1), range(1, 9))
    panel = load_panel(target, [ind])
    assert panel.T == 2
    assert panel.lead_months(0) == 2


def test_load_missing_month_is_gap_error(tmp_path):
    target = write_series(tmp_path / "gdp.csv", (1970, 1), [0.5, 0.7], step=3)
    rows = ["date,value"] + [f"1970-{m:02d}-01,{m}" for m in (1, 3, 4, 5, 6)]
    (tmp_path / "ip.csv").write_text("\n".join(rows) + "\n")
    with pytest.raises(GapError, match="1970-02-01"):
        load_panel(target, [tmp_path / "ip.csv"])


def test_load_rejects_unordered_and_misaligned(tmp_path):
    target = write_series(tmp_path / "gdp.csv", (1970, 1), [0.5, 0.7], step=3)
    rows = ["date,value", "1970-02-01,1", "1970-01-01,2"]
    (tmp_path / "bad.csv").write_text("\n".join(rows) + "\n")
    with pytest.raises(OrderingError):
        load_panel(target, [tmp_path / "bad.csv"])
    late = write_series(tmp_path / "late.csv", (1970, 2), range(5))
    with pytest.raises(AlignmentError):
        load_panel(target, [late])
    long = write_series(tmp_path / "long.csv", (1970, 1), range(9))
    with pytest.raises(AlignmentError):
        load_panel(target, [long])


def test_save_load_round_trip_is_exact(tmp_path):
    panel, _ = simulate_panel(SimulationConfig(T=12, J=2, loadings=(0.4, 0.6), lead_months=1), seed=3)
    tpath, ipaths = save_panel(panel, tmp_path)
    back = load_panel(tpath, ipaths, labels=panel.labels)
    assert np.array_equal(back.target, panel.target)
    for a, b in zip(back.indicators, panel.indicators):
        assert np.array_equal(a, b)


def test_panel_arrays_are_read_only():
    panel = MixedFrequencyPanel([1.0, 2.0], [np.arange(6.0)], ["a"], 3)
    with pytest.raises(ValueError):
        panel.target[0] = 5.0
    with pytest.raises(ValueError):
        panel.indicators[0][0] = 5.0


def test_quarter_labels():
    panel = MixedFrequencyPanel(np.zeros(40), [np.zeros(120)], ["a"], 3, start=(1970, 1))
    assert panel.quarter_label(1) == "1970Q1"
    assert panel.quarter_label(34) == "1978Q2"
    assert panel.quarter_of("1978Q3") == 35


@pytest.fixture
def eight_month_panel():
    # v1..v6 over quarters 1-2, v7 and v8 in quarter 3
    return MixedFrequencyPanel([0.0, 0.0, 0.0], [np.arange(1.0, 9.0)], ["z"], 3)


def test_no_lead_window_is_previous_quarter(eight_month_panel):
    vec = build_regressor_vector(eight_month_panel, 0, 3, lead=0)
    assert vec.values.tolist() == [6.0, 5.0, 4.0]


def test_two_month_lead_window(eight_month_panel):
    vec = build_regressor_vector(eight_month_panel, 0, 3, lead=2)
    assert vec.values.tolist() == [8.0, 7.0, 6.0]
    assert vec.lead == 2


def test_window_boundaries(eight_month_panel):
    with pytest.raises(BoundaryError):
        build_regressor_vector(eight_month_panel, 0, 1, lead=0)
    with pytest.raises(ValidationError):
        build_regressor_vector(eight_month_panel, 0, 3, lead=3)
    panel = MixedFrequencyPanel([0.0, 0.0], [np.arange(1.0, 7.0)], ["z"], 3)
    with pytest.raises(BoundaryError):
        build_regressor_vector(panel, 0, 3, lead=1)


@given(lead=st.integers(0, 2), t=st.integers(2, 30))
def test_window_ends_at_last_available_month(lead, t):
    z = np.arange(1.0, 3 * 31 + 1)
    panel = MixedFrequencyPanel(np.zeros(31), [z], ["z"], 3)
    vec = build_regressor_vector(panel, 0, t, lead)
    newest = (t - 1) * 3 + lead  # 1-based month number
    assert vec.values.tolist() == [newest, newest - 1, newest - 2]


@given(lead=st.integers(0, 2), lags=st.integers(1, 7))
def test_first_feasible_quarter_is_tight(lead, lags):
    t = first_feasible_quarter(3, lead, lags)
    assert (t - 1) * 3 + lead - lags >= 0
    assert t == 1 or (t - 2) * 3 + lead - lags < 0


def test_regressor_matrix_stacks_windows(eight_month_panel):
    M = regressor_matrix(eight_month_panel, 0, [2, 3], lead=0)
    assert M.tolist() == [[3.0, 2.0, 1.0], [6.0, 5.0, 4.0]]


def test_paper_split_has_hundred_test_quarters():
    panel = MixedFrequencyPanel(np.zeros(184), [np.zeros(552)], ["z"], 3, start=(1970, 1))
    split = PeriodSplit(panel.quarter_of("1978Q2"), panel.quarter_of("1990Q4"), panel.quarter_of("2015Q4"))
    train, calib, test = split_periods(panel, split)
    assert len(test) == 100
    assert panel.quarter_label(test[0]) == "1991Q1"
    assert panel.quarter_label(calib[0]) == "1978Q3"
    assert panel.quarter_label(train[-1]) == "1978Q2"


def test_minimal_split():
    panel = MixedFrequencyPanel(np.zeros(3), [np.zeros(9)], ["z"], 3)
    assert [list(r) for r in split_periods(panel, PeriodSplit(1, 2, 3))] == [[1], [2], [3]]


def test_split_validation():
    with pytest.raises(ValidationError):
        PeriodSplit(5, 5, 10)
    with pytest.raises(ValidationError):
        PeriodSplit(0, 2, 3)
    panel = MixedFrequencyPanel(np.zeros(3), [np.zeros(9)], ["z"], 3)
    with pytest.raises(ValidationError):
        split_periods(panel, PeriodSplit(1, 2, 4))


def test_split_accepts_period_indices():
    split = PeriodSplit(PeriodIndex(4, 0), PeriodIndex(8, 0), PeriodIndex(12, 0))
    assert (split.calib_start, split.test_start) == (5, 9)


def test_simulation_is_deterministic():
    cfg = SimulationConfig(T=30, J=2, loadings=(0.5, 0.5))
    a, ta = simulate_panel(cfg, 11)
    b, tb = simulate_panel(cfg, 11)
    assert np.array_equal(a.target, b.target)
    assert all(np.array_equal(x, y) for x, y in zip(a.indicators, b.indicators))
    assert np.array_equal(ta.loadings, tb.loadings)
    c, _ = simulate_panel(cfg, 12)
    assert not np.array_equal(a.target, c.target)


def test_simulation_counts():
    panel, truth = simulate_panel(SimulationConfig(T=120, J=3, ratio=3), seed=7)
    assert len(panel.target) == 120
    assert [len(z) for z in panel.indicators] == [360, 360, 360]
    assert truth.design.shape == (120, 3)


@pytest.mark.parametrize("signal_lead", [None, 0, 2])
def test_zero_noise_target_reproducible_from_truth(signal_lead):
    cfg = SimulationConfig(T=25, J=2, loadings=(0.3, 0.7), intercept=1.5, noise_sd=0.0, signal_lead=signal_lead)
    panel, truth = simulate_panel(cfg, seed=2)
    assert np.array_equal(panel.target, truth.signal())
    assert np.allclose(panel.target, 1.5 + truth.design @ np.array([0.3, 0.7]), atol=1e-12)


def test_quarter_mean_design_matches_indicators():
    panel, truth = simulate_panel(SimulationConfig(T=10, J=2, loadings=(1.0, 0.0)), seed=4)
    for j in range(2):
        assert np.allclose(truth.design[:, j], panel.indicators[j].reshape(10, 3).mean(axis=1))


def test_lead_aligned_design_matches_windows():
    cfg = SimulationConfig(T=10, J=1, loadings=(1.0,), signal_lead=2)
    panel, truth = simulate_panel(cfg, seed=4)
    for t in range(first_feasible_quarter(3, 2), 11):
        assert np.isclose(truth.design[t - 1, 0], build_regressor_vector(panel, 0, t, 2).values.mean())


def test_time_varying_loadings():
    path = np.tile([0.2, 0.8], (20, 1))
    path[10:] = [0.9, 0.1]
    panel, truth = simulate_panel(SimulationConfig(T=20, J=2, loadings=path, noise_sd=0.0), seed=1)
    assert np.array_equal(truth.loadings, path)
    assert np.allclose(panel.target, np.sum(truth.design * path, axis=1))


@pytest.mark.parametrize(
    "kwargs",
    [dict(T=0), dict(J=0), dict(ratio=0), dict(noise_sd=-1.0), dict(loadings=(1.0, 2.0)), dict(factor_share=1.5)],
)
def test_simulation_rejects_bad_dimensions(kwargs):
    with pytest.raises(ValidationError):
        simulate_panel(SimulationConfig(**kwargs), seed=0)
