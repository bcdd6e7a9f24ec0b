import io

import numpy as np
import pandas as pd
import pytest

from behavnk.data import (
    InstrumentSpec,
    TimeSeriesPanel,
    apply_transforms,
    build_instruments,
    load_panel,
    packaged_panel_path,
)
from behavnk.errors import DataError


def _csv(text):
    return io.StringIO(text.strip() + "\n")


def test_load_well_formed_file():
    panel = load_panel(_csv("""
date,x,pi,i
1980Q1,1.0,2.0,3.0
1980Q2,1.5,2.5,3.5
1980Q3,2.0,3.0,4.0
1980Q4,2.5,3.5,4.5
"""))
    assert len(panel) == 4
    assert panel.column("x").tolist() == [1.0, 1.5, 2.0, 2.5]


def test_duplicate_quarter_is_named():
    with pytest.raises(DataError, match="1980Q2"):
        load_panel(_csv("""
date,x
1980Q1,1.0
1980Q2,2.0
1980Q2,3.0
"""))


def test_unparseable_dates_raise():
    with pytest.raises(DataError, match="unparseable"):
        load_panel(_csv("date,x\nnot-a-date,1.0"))


def test_iso_dates_map_to_quarters():
    panel = load_panel(_csv("""
date,x
1980-01-01,1.0
1980-04-01,2.0
"""))
    assert isinstance(panel.dates, pd.PeriodIndex)
    assert str(panel.dates[0]) == "1980Q1"


def test_missing_requested_column_raises():
    with pytest.raises(DataError, match="missing requested"):
        load_panel(_csv("date,x\n1980Q1,1.0"), columns=("x", "pi"))


def test_unrequested_missing_values_are_kept():
    panel = load_panel(_csv("""
date,x,pi
1980Q1,1.0,2.0
1980Q2,1.5,
1980Q3,2.0,3.0
"""), columns=("x",))
    assert len(panel) == 3  # pi not requested, its gap is irrelevant


def test_edge_missing_rows_dropped_with_count():
    with pytest.warns(UserWarning, match="dropped 1 rows"):
        panel = load_panel(_csv("""
date,x,pi
1980Q1,1.0,
1980Q2,1.5,2.5
1980Q3,2.0,3.0
"""), columns=("x", "pi"))
    assert len(panel) == 2


def test_interior_missing_rows_leave_a_gap_error():
    with pytest.warns(UserWarning, match="dropped 1 rows"):
        with pytest.raises(DataError, match="gap"):
            load_panel(_csv("""
date,x,pi
1980Q1,1.0,2.0
1980Q2,,2.5
1980Q3,2.0,3.0
"""), columns=("x", "pi"))


def test_packaged_panel_window_has_219_quarters():
    panel = load_panel(packaged_panel_path(), columns=("x", "pi", "i"),
                       window=("1962Q2", "2016Q4"))
    assert len(panel) == 219


def test_round_trip_is_bit_exact(tmp_path):
    panel = load_panel(packaged_panel_path())
    out = tmp_path / "copy.csv"
    panel.to_csv(out)
    again = load_panel(out)
    assert np.array_equal(panel.frame.to_numpy(), again.frame.to_numpy())
    assert list(panel.dates) == list(again.dates)


# ---------------------------------------------------------------------------
# Transforms


def _toy_panel(n=40):
    t = np.arange(n, dtype=float)
    frame = pd.DataFrame(
        {"x": 3.0 + 0.5 * t, "pi": np.exp(0.01 * t), "i": 2.0 + np.sin(t)},
        index=pd.RangeIndex(1, n + 1),
    )
    return TimeSeriesPanel(frame)


def test_demean_centers_exactly():
    out = apply_transforms(_toy_panel(), {"i": "demean"})
    assert abs(out.column("i").mean()) < 1e-12


def test_linear_detrend_kills_linear_series():
    out = apply_transforms(_toy_panel(), {"x": "linear_detrend"})
    assert np.max(np.abs(out.column("x"))) < 1e-10


def test_log_diff_of_exponential_is_constant():
    out = apply_transforms(_toy_panel(), {"pi": "log_diff"})
    np.testing.assert_allclose(out.column("pi"), 0.01, atol=1e-12)
    assert len(out) == 39  # one leading row trimmed


def test_log_diff_rejects_nonpositive():
    panel = _toy_panel().with_column("bad", np.linspace(-1, 1, 40))
    with pytest.raises(DataError, match="positive"):
        apply_transforms(panel, {"bad": "log_diff"})


def test_lag_pipeline_shortens_sample():
    out = apply_transforms(_toy_panel(), {"x": "lag(3)"})
    assert len(out) == 37
    np.testing.assert_allclose(out.column("x")[0], 3.0)  # x_1 shifted to row 4


def test_pipeline_applies_left_to_right():
    out = apply_transforms(_toy_panel(), {"x": "demean|lag(1)"})
    first = _toy_panel().column("x")
    expected = (first - first.mean())[:-1]
    np.testing.assert_allclose(out.column("x"), expected, atol=1e-12)


def test_unknown_transform_rejected():
    with pytest.raises(DataError, match="unknown transform"):
        apply_transforms(_toy_panel(), {"x": "quadratic_detrend"})


# ---------------------------------------------------------------------------
# Instruments


def test_is_layout_has_seven_columns():
    spec = InstrumentSpec.parse("const, x:1-3, rr:1-3")
    assert spec.n_columns == 7
    assert spec.include_constant
    assert spec.max_lag == 3


def test_nkpc_layout_has_seven_columns():
    spec = InstrumentSpec.parse("pi:1-4, labor_share:1-3")
    assert spec.n_columns == 7
    assert not spec.include_constant
    assert spec.max_lag == 4


def test_lag_zero_is_identity():
    panel = _toy_panel(10)
    Z = build_instruments(panel, "x:0")
    np.testing.assert_array_equal(Z["x"].to_numpy(), panel.column("x"))


def test_constant_column_first():
    Z = build_instruments(_toy_panel(10), "const, x:1-2")
    assert list(Z.columns) == ["const", "x_lag1", "x_lag2"]
    assert np.all(Z["const"].to_numpy() == 1.0)


def test_instrument_dates_are_strictly_lagged():
    # Encode the date ordinal as a column; lagged entries must carry t - lag.
    n = 12
    frame = pd.DataFrame({"stamp": np.arange(1, n + 1, dtype=float)},
                         index=pd.RangeIndex(1, n + 1))
    Z = build_instruments(TimeSeriesPanel(frame), "stamp:1-3")
    for lag in (1, 2, 3):
        col = Z[f"stamp_lag{lag}"]
        np.testing.assert_array_equal(col.to_numpy(), np.asarray(Z.index) - lag)
        assert np.all(col.to_numpy() <= np.asarray(Z.index) - 1)


def test_insufficient_sample_raises():
    with pytest.raises(DataError, match="insufficient sample"):
        build_instruments(_toy_panel(3), "x:1-5")
