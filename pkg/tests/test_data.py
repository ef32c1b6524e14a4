import logging

import numpy as np
import pytest

from ersecov.data import (
    MissingPolicy,
    ReturnsPanel,
    load_returns_csv,
    panel_summary,
    rolling_correlation_report,
    save_returns_csv,
    synthesize_panel,
)
from ersecov.errors import IngestError, PanelMismatchError
from ersecov.synthetic import random_market


def _dates(T, start=196907):
    out, y, m = [], start // 100, start % 100
    for _ in range(T):
        out.append(f"{y:04d}{m:02d}")
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def _panel(x, name="p", start=196907):
    x = np.asarray(x, dtype=float)
    return ReturnsPanel(_dates(len(x), start), [f"a{j}" for j in range(x.shape[1])], x, name=name)


class TestLoad:
    def test_drops_asset_over_threshold(self, write_csv):
        rows = []
        for i, d in enumerate(_dates(20)):
            rows.append([d, 1.0 + i, -99.99 if i < 11 else 0.5, 2.0 - i])
        panel = load_returns_csv(write_csv("three.csv", ["date", "A", "B", "C"], rows))
        assert panel.assets == ("A", "C")
        assert panel.dropped == ("B",)
        assert "B" in panel.provenance

    def test_exactly_at_threshold_is_kept(self, write_csv):
        rows = [[d, 1.0 + i, -99.99 if i < 10 else 0.5] for i, d in enumerate(_dates(20))]
        panel = load_returns_csv(write_csv("tie.csv", ["date", "A", "B"], rows))
        assert panel.assets == ("A", "B")
        assert np.all(panel.returns[:10, 1] == 0.0)

    def test_no_missing_passes_through(self, write_csv, rng):
        body = np.round(rng.normal(size=(15, 4)), 4)
        rows = [[d, *r] for d, r in zip(_dates(15), body)]
        panel = load_returns_csv(write_csv("clean.csv", ["date", "w", "x", "y", "z"], rows))
        np.testing.assert_array_equal(panel.returns, body)
        assert panel.dropped == ()

    def test_few_missing_become_zero(self, write_csv):
        rows = []
        for i, d in enumerate(_dates(12)):
            c = -99.99 if i in (2, 5, 9) else 3.0 + i
            rows.append([d, 1.0 * i, 2.0 + i, c])
        panel = load_returns_csv(write_csv("c.csv", ["date", "A", "B", "C"], rows))
        assert "C" in panel.assets
        col = panel.returns[:, 2]
        assert list(np.flatnonzero(col == 0.0)) == [2, 5, 9]
        assert col[0] == 3.0

    def test_other_marker_and_custom_policy(self, write_csv):
        rows = [[d, -999, 1.0 + i, 2.0 * i] for i, d in enumerate(_dates(5))]
        path = write_csv("m.csv", ["date", "A", "B", "C"], rows)
        assert load_returns_csv(path, MissingPolicy(max_missing_per_asset=4)).assets == ("B", "C")
        filled = load_returns_csv(path, MissingPolicy(fill_value=-1.0))
        assert np.all(filled.returns[:, 0] == -1.0)

    def test_malformed_cell_reports_coordinates(self, write_csv):
        rows = [[d, 1.0, 2.0] for d in _dates(4)]
        rows[2][2] = "abc"
        with pytest.raises(IngestError, match=r"row 4, column 3"):
            load_returns_csv(write_csv("bad.csv", ["date", "A", "B"], rows))

    def test_non_monotone_dates(self, write_csv):
        rows = [["197001", 1, 2], ["197003", 2, 3], ["197002", 3, 1]]
        with pytest.raises(IngestError, match="increasing"):
            load_returns_csv(write_csv("order.csv", ["date", "A", "B"], rows))

    def test_too_few_survivors(self, write_csv):
        rows = [[d, -99.99, 1.0 + i] for i, d in enumerate(_dates(12))]
        with pytest.raises(IngestError, match="survive"):
            load_returns_csv(write_csv("one.csv", ["date", "A", "B"], rows),
                             MissingPolicy(max_missing_per_asset=3))

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(IngestError, match="cannot read"):
            load_returns_csv(tmp_path / "absent.csv")

    def test_bad_date_label(self, write_csv):
        with pytest.raises(IngestError, match="YYYYMM"):
            load_returns_csv(write_csv("d.csv", ["date", "A", "B"], [["1970-01", 1, 2], ["197002", 2, 1]]))

    def test_reload_is_idempotent(self, tmp_path, rng):
        panel = _panel(rng.normal(size=(30, 5)) * 4.0, name="orig")
        path = tmp_path / "orig.csv"
        save_returns_csv(panel, path)
        once = load_returns_csv(path)
        save_returns_csv(once, tmp_path / "again.csv")
        twice = load_returns_csv(tmp_path / "again.csv")
        assert once.equals(panel)
        assert twice.equals(once)

    def test_dropped_plus_surviving_equals_raw(self, write_csv, rng):
        for trial in range(10):
            n_raw = int(rng.integers(3, 9))
            counts = rng.integers(0, 20, size=n_raw)
            counts[:2] = 0
            T = 24
            body = rng.normal(size=(T, n_raw))
            for j, c in enumerate(counts):
                body[rng.choice(T, size=c, replace=False), j] = -99.99
            rows = [[d, *r] for d, r in zip(_dates(T), body)]
            header = ["date"] + [f"c{j}" for j in range(n_raw)]
            panel = load_returns_csv(write_csv(f"r{trial}.csv", header, rows))
            assert len(panel.dropped) + panel.n_assets == n_raw
            assert len(panel.dropped) == int(np.sum(counts > 10))


class TestPanel:
    def test_rejects_duplicates_and_small(self):
        with pytest.raises(IngestError, match="duplicate"):
            ReturnsPanel(["197001", "197002"], ["a", "a"], np.ones((2, 2)))
        with pytest.raises(IngestError, match="at least 2"):
            ReturnsPanel(["197001", "197002"], ["a"], np.ones((2, 1)))
        with pytest.raises(IngestError, match="non-finite"):
            ReturnsPanel(["197001", "197002"], ["a", "b"], [[1, np.nan], [0, 1]])

    def test_window_and_select(self, rng):
        p = _panel(rng.normal(size=(10, 4)))
        w = p.window(2, 7)
        assert w.dates == p.dates[2:7]
        np.testing.assert_array_equal(w.returns, p.returns[2:7])
        s = p.select([3, 1])
        assert s.assets == ("a3", "a1")
        np.testing.assert_array_equal(s.returns, p.returns[:, [3, 1]])


class TestSynthesize:
    def test_two_panels_of_25(self, rng):
        a = _panel(rng.normal(size=(40, 25)), name="left")
        b = _panel(rng.normal(size=(40, 25)), name="right")
        out = synthesize_panel([a, b])
        assert out.n_assets == 50 and out.n_periods == 40
        assert len(set(out.assets)) == 50
        np.testing.assert_array_equal(out.returns[:, 25:], b.returns)

    def test_surviving_counts_add_up(self, write_csv, rng):
        # three 100-column files with 4, 1 and 1 columns over the missing limit
        panels = []
        for name, bad in (("size", 4), ("value", 1), ("mom", 1)):
            body = rng.normal(size=(30, 100))
            body[:11, :bad] = -99.99
            rows = [[d, *r] for d, r in zip(_dates(30), body)]
            header = ["date"] + [f"P{j}" for j in range(100)]
            panels.append(load_returns_csv(write_csv(f"{name}.csv", header, rows)))
        assert [p.n_assets for p in panels] == [96, 99, 99]
        assert synthesize_panel(panels).n_assets == 294

    def test_single_panel_identity(self, rng):
        p = _panel(rng.normal(size=(12, 3)), name="solo")
        out = synthesize_panel([p])
        assert out.assets == tuple(f"solo:{a}" for a in p.assets)
        np.testing.assert_array_equal(out.returns, p.returns)
        assert out.dates == p.dates

    def test_date_mismatch_reports_position(self, rng):
        a = _panel(rng.normal(size=(12, 3)), name="a")
        shifted = list(a.dates)
        shifted[5:] = _dates(7, start=199901)
        b = ReturnsPanel(shifted, a.assets, a.returns, name="b")
        with pytest.raises(PanelMismatchError, match="position 5"):
            synthesize_panel([a, b])


class TestRollingCorrelation:
    def test_comoving_pair(self, rng):
        f = rng.normal(size=30)
        recs = rolling_correlation_report(_panel(np.column_stack([f, 3 * f + 1])), 10)
        assert len(recs) == 20
        for r in recs:
            assert r.mean_corr == pytest.approx(1.0, abs=1e-12)
            assert r.min_corr == pytest.approx(1.0, abs=1e-12)

    def test_opposite_pair(self, rng):
        f = rng.normal(size=30)
        recs = rolling_correlation_report(_panel(np.column_stack([f, -f])), 12)
        assert all(r.mean_corr == pytest.approx(-1.0) and r.min_corr == pytest.approx(-1.0)
                   for r in recs)

    def test_record_uses_trailing_rows(self, rng):
        x = rng.normal(size=(25, 3))
        p = _panel(x)
        recs = rolling_correlation_report(p, 8)
        assert recs[0].date == p.dates[8]
        C = np.corrcoef(x[5:13], rowvar=False)
        off = C[np.triu_indices(3, 1)]
        assert recs[5].mean_corr == pytest.approx(off.mean(), abs=1e-12)
        assert recs[5].min_corr == pytest.approx(off.min(), abs=1e-12)

    def test_one_factor_market_stays_positive(self):
        market = random_market(20, np.random.default_rng(3))
        panel = market.simulate(360, np.random.default_rng(4))
        recs = rolling_correlation_report(panel, 120)
        assert len(recs) == 240
        assert min(r.min_corr for r in recs) > 0
        for r in recs:
            assert -1 <= r.min_corr <= r.mean_corr <= 1

    def test_constant_asset_is_flagged(self, rng, caplog):
        x = rng.normal(size=(20, 3))
        x[:12, 2] = 1.5
        with caplog.at_level(logging.WARNING):
            recs = rolling_correlation_report(_panel(x), 10)
        assert recs[0].flagged and np.isfinite(recs[0].mean_corr)
        assert not recs[-1].flagged
        assert "zero variance" in caplog.text

    def test_window_range(self, rng):
        p = _panel(rng.normal(size=(10, 2)))
        with pytest.raises(ValueError):
            rolling_correlation_report(p, 1)
        with pytest.raises(ValueError):
            rolling_correlation_report(p, 11)


def test_summary_identical_columns(rng):
    f = rng.normal(size=20)
    s = panel_summary(_panel(np.column_stack([f, f])))
    assert s["mean_correlation"] == pytest.approx(1.0)
    assert s["n_assets"] == 2 and s["n_months"] == 20
