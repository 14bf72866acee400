"""Sweep grids, figure datasets, threshold search, and the flatness optimizer."""

import numpy as np
import pytest

from echomem import (
    SweepGrid,
    SweepResult,
    ThresholdError,
    config_fingerprint,
    derived_quantities,
    evaluate_sweep,
    figure_dataset,
    find_threshold,
    matched_network,
    optimize_flatness,
    q1_of_delta,
    retune_broadening,
    spectral_efficiency,
)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError, match="at least two points"):
            SweepGrid(parameter="x", lower=0.0, upper=1.0, count=1)
        with pytest.raises(ValueError, match="below upper"):
            SweepGrid(parameter="x", lower=1.0, upper=1.0)
        with pytest.raises(ValueError, match="unknown grid scale"):
            SweepGrid(parameter="x", lower=0.1, upper=1.0, scale="cubic")

    def test_values_linear_and_log(self):
        lin = SweepGrid(parameter="x", lower=0.0, upper=1.0, count=5)
        np.testing.assert_allclose(lin.values(), [0.0, 0.25, 0.5, 0.75, 1.0])
        log = SweepGrid(parameter="x", lower=0.1, upper=10.0, count=3, scale="log")
        np.testing.assert_allclose(log.values(), [0.1, 1.0, 10.0], rtol=1e-12)

    def test_result_column_lengths_checked(self):
        with pytest.raises(ValueError, match="unequal lengths"):
            SweepResult(columns={"a": np.zeros(3), "b": np.zeros(2)}, units={})


class TestEvaluate:
    def test_matches_serial_map_in_order(self):
        grid = SweepGrid(parameter="w", lower=0.0, upper=2.0, count=41, metric="sq")
        res = evaluate_sweep(grid, lambda x: x * x, unit="ref")
        np.testing.assert_array_equal(res.columns["w"], grid.values())
        np.testing.assert_array_equal(res.columns["sq"], grid.values() ** 2)
        assert res.units == {"w": "ref", "sq": "1"}
        assert res.config_hash

    def test_fingerprint_is_order_insensitive(self):
        a = config_fingerprint([("x", 1.0), ("y", 2)])
        b = config_fingerprint([("y", 2), ("x", 1.0)])
        assert a == b and len(a) == 64
        assert a != config_fingerprint([("x", 1.5), ("y", 2)])


class TestFigureDatasets:
    def test_response_family_layout(self):
        ds = figure_dataset("fig1b")
        assert list(ds.columns) == ["nu", "z2_m0", "z2_m2", "z2_m4", "z2_m8", "z2_m16"]
        assert all(v.size == 4001 for v in ds.columns.values())
        i0 = np.argmin(np.abs(ds.columns["nu"]))
        for key in ds.columns:
            if key != "nu":
                assert ds.columns[key][i0] == pytest.approx(1.0, abs=1e-9)
        # each curve records the matched broadening it was computed at
        assert ds.metadata["delta_in_m0"] == pytest.approx(0.5)
        assert ds.metadata["delta_in_m4"] == pytest.approx(0.4)

    def test_broadening_family_layout(self):
        ds = figure_dataset("fig2")
        assert list(ds.columns) == ["nu", "z2_x0p25", "z2_x0p5", "z2_x1", "z2_x2", "z2_x4"]
        i0 = np.argmin(np.abs(ds.columns["nu"]))
        # retuning holds the absorption matching, so every curve peaks at one;
        # what the off-matched multipliers lose is the width of the flat band
        flat = {
            key: int(np.sum(ds.columns[key] >= 0.9999)) for key in ds.columns if key != "nu"
        }
        assert ds.columns["z2_x4"][i0] == pytest.approx(1.0, abs=1e-9)
        assert flat["z2_x1"] > max(v for k, v in flat.items() if k != "z2_x1")

    def test_self_mode_family_is_long_form(self):
        ds = figure_dataset("fig3a")
        n = ds.columns["tau"].size
        assert ds.columns["delta_in"].size == n and ds.columns["phi"].size == n
        assert n == 41 * 201

    def test_efficiency_curve_monotone(self):
        ds = figure_dataset("fig4")
        q1 = ds.columns["Q1"]
        assert q1.size == 201
        assert np.all(np.diff(q1) > 0)
        assert q1[0] == pytest.approx(0.15809167446173245, rel=1e-9)
        assert q1[-1] == pytest.approx(0.9999910162543881, rel=1e-9)

    def test_dataset_regeneration_is_bitwise_stable(self):
        a = figure_dataset("fig1b")
        b = figure_dataset("fig1b")
        assert a.config_hash == b.config_hash
        for key in a.columns:
            np.testing.assert_array_equal(a.columns[key], b.columns[key])

    def test_unknown_figure(self):
        with pytest.raises(ValueError, match="unknown figure id"):
            figure_dataset("fig9")


class TestThreshold:
    def test_already_above_at_first_point(self):
        assert find_threshold([1.0, 2.0], [0.5, 0.9], 0.3) == 1.0

    def test_linear_interpolation(self):
        assert find_threshold([0.0, 1.0, 2.0], [0.0, 0.5, 1.0], 0.75) == pytest.approx(1.5)

    def test_never_reached(self):
        with pytest.raises(ThresholdError, match="never reaches"):
            find_threshold([0.0, 1.0], [0.1, 0.2], 0.9)

    def test_refined_transfer_threshold_golden(self):
        grid = np.linspace(5.0, 6.0, 11)
        vals = [q1_of_delta(d) for d in grid]
        x = find_threshold(grid, vals, 0.9999, fn=q1_of_delta)
        assert x == pytest.approx(5.46886628290887, rel=1e-6)


class TestFlatness:
    NET = matched_network(0)

    def test_retune_preserves_absorption_rate(self):
        out = retune_broadening(self.NET, 1.7)
        assert out.memory.delta_in == 1.7
        assert derived_quantities(out).gamma_tot == pytest.approx(1.0, rel=1e-12)
        assert spectral_efficiency(out, 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_optimum_lands_on_matched_broadening(self):
        res = optimize_flatness(self.NET, (0.25, 0.75))
        assert res.optimum == pytest.approx(0.5, rel=0.02)
        assert not res.multimodal
        assert res.bandwidth > 0.1

    def test_loose_level_drags_optimum_off_matching(self):
        # at a soft 0.99 level the widest band sits visibly above the
        # quartic-flatness point; the default level keeps the two aligned
        res = optimize_flatness(self.NET, (0.25, 0.75), level=0.99)
        assert abs(res.optimum - 0.5) / 0.5 > 0.05
        assert res.bandwidth > 0.3

    def test_degenerate_range_is_point_evaluation(self):
        res = optimize_flatness(self.NET, (0.5, 0.5))
        assert res.optimum == 0.5
        assert res.bandwidth == pytest.approx(0.11823448060636413, rel=1e-9)
        assert not res.multimodal
