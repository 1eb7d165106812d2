"""Synthetic samples, raster scans and precision experiments."""

import hashlib
import json
import math

import numpy as np
import pytest

from homscope.acquisition import AcquisitionConfig
from homscope.errors import InsufficientDataError, ParameterError
from homscope.model import DIFFERENTIAL, InterferenceParams, delay_from_thickness
from homscope.scene import (
    SampleMap,
    ket_mask,
    make_ket_sample,
    raster_scan,
    single_pixel_sweep,
    step_experiment,
    step_statistics,
)

# regression fixture for the glyph generator
KET_PIXELS = 874
KET_SHA256 = "4ffff067bd637351f6289403e15bc97069e5665afce172d0b2ade013b1d45359"


class TestSampleMap:
    def test_ket_default(self):
        s = make_ket_sample()
        assert s.height_m.shape == (27, 78)
        assert sorted(np.unique(s.height_m)) == [0.0, 4.6e-6]
        assert s.refractive_index == 1.58
        assert 0.2 < np.mean(s.height_m > 0) < 0.8

    def test_ket_frozen(self):
        mask = ket_mask()
        assert mask.sum() == KET_PIXELS
        assert hashlib.sha256(mask.tobytes()).hexdigest() == KET_SHA256

    def test_ket_resampled(self):
        mask = ket_mask((54, 156))
        assert 0.2 < mask.mean() < 0.8

    def test_zero_step_uniform(self):
        s = make_ket_sample(0.0)
        assert np.all(s.height_m == 0)
        with pytest.raises(ParameterError):
            make_ket_sample(-1e-6)

    def test_validation(self):
        with pytest.raises(ParameterError):
            SampleMap(np.array([[1e-6, -1e-9]]))
        with pytest.raises(ParameterError):
            SampleMap(np.zeros((0, 3)))
        with pytest.raises(ParameterError):
            SampleMap(np.zeros((2, 2)), refractive_index=0.5)

    def test_round_trip(self, tmp_path):
        s = SampleMap(np.array([[0.0, 1.5e-6], [3e-6, 1e-7]]), 1.45, 5e-6, 2e-15)
        s.save(tmp_path / "h.csv")
        back = SampleMap.load(tmp_path / "h.csv")
        np.testing.assert_array_equal(back.height_m, s.height_m)
        assert back.sidecar() == s.sidecar()

    def test_unknown_sidecar_key(self, tmp_path):
        make_ket_sample().save(tmp_path / "k.csv")
        (tmp_path / "k.json").write_text(json.dumps({"refractive_index": 1.5, "tilt": 3}))
        with pytest.raises(ParameterError):
            SampleMap.load(tmp_path / "k.csv")

    def test_delays(self):
        s = SampleMap(np.array([[0.0, 4.6e-6]]), substrate_delay_s=1e-15)
        np.testing.assert_allclose(s.delays(), [[1e-15, 1e-15 + 24.23e-15]], rtol=1e-3)
        np.testing.assert_allclose(s.delays(DIFFERENTIAL)[0, 1] - 1e-15, 8.90e-15, rtol=1e-3)


def small_ket(step=4.6e-6):
    heights = np.zeros((6, 10))
    heights[1:5, 3:7] = step
    return SampleMap(heights)


class TestRasterScan:
    def test_shape_and_metadata(self, tmp_path):
        img = raster_scan(small_ket(), InterferenceParams(), AcquisitionConfig(seed=3), lock_quadrature=True)
        assert img.shape == (6, 10)
        assert img.depth_m.shape == (6, 10)
        assert img.metadata["scan_order"] == "row-major"
        assert img.metadata["convention"] == "paper_nd"
        assert img.status_counts() == {"ok": 60}
        paths = img.save(tmp_path)
        for name in ("depth_m.csv", "sigma_m.csv", "fringe_index.csv", "metadata.json", "depth.pgm"):
            assert (tmp_path / name).is_file()
        assert (tmp_path / "depth.pgm").read_bytes().startswith(b"P5\n10 6\n65535\n")
        assert set(paths) == {"depth", "sigma", "fringe", "graymap", "metadata"}

    def test_recovers_step(self):
        img = raster_scan(small_ket(), InterferenceParams(), AcquisitionConfig(seed=4), lock_quadrature=True)
        stats = step_statistics(img, small_ket())
        assert stats["step_estimate_m"] == pytest.approx(4.6e-6, abs=4 * stats["step_stderr_m"])

    def test_zero_dwell_non_identifiable(self):
        img = raster_scan(small_ket(), InterferenceParams(), AcquisitionConfig(dwell_s=0.0), lock_quadrature=True)
        assert img.status_counts() == {"non_identifiable": 60}
        assert np.all(np.isnan(img.depth_m))

    def test_ambiguity_recorded_not_raised(self):
        par = InterferenceParams(7.4e12, 1e-9, 0.95, 0.0)
        window = (-1.2 / 7.4e12, 1.2 / 7.4e12)
        img = raster_scan(small_ket(1e-6), par, AcquisitionConfig(seed=1), search_window=window)
        assert img.status_counts().get("ambiguous", 0) > 0

    def test_wide_sample_warns(self):
        with pytest.warns(UserWarning, match="half-period"):
            raster_scan(small_ket(30e-6), InterferenceParams(), AcquisitionConfig(dwell_s=0.01))

    def test_independent_of_thread_count(self, monkeypatch):
        par, cfg = InterferenceParams(), AcquisitionConfig(seed=8)
        monkeypatch.setenv("HOMSCOPE_THREADS", "1")
        a = raster_scan(small_ket(), par, cfg, lock_quadrature=True)
        monkeypatch.setenv("HOMSCOPE_THREADS", "4")
        b = raster_scan(small_ket(), par, cfg, lock_quadrature=True)
        np.testing.assert_array_equal(a.depth_m, b.depth_m)
        np.testing.assert_array_equal(a.sigma_m, b.sigma_m)

    def test_substrate_offset_invariance(self):
        par, cfg = InterferenceParams(), AcquisitionConfig(seed=21)
        base = small_ket()
        shifted = SampleMap(base.height_m, substrate_delay_s=7e-15)
        a = step_statistics(raster_scan(base, par, cfg, lock_quadrature=True), base)
        b = step_statistics(raster_scan(shifted, par, cfg, lock_quadrature=True), shifted)
        tol = 3 * math.hypot(a["step_stderr_m"], b["step_stderr_m"])
        assert a["step_estimate_m"] == pytest.approx(b["step_estimate_m"], abs=tol)

    def test_flat_sample(self):
        flat = SampleMap(np.zeros((20, 40)))
        img = raster_scan(flat, InterferenceParams(), AcquisitionConfig(seed=2), lock_quadrature=True)
        depths = img.depth_m.ravel()
        per_pixel = depths.std(ddof=1)
        stats = step_statistics(img, flat)
        assert stats["step_true_m"] == 0.0
        assert abs(stats["step_estimate_m"]) < 4 * stats["step_stderr_m"]
        assert stats["two_step_precision_m"] == pytest.approx(math.sqrt(2) * per_pixel, rel=0.1)

    @pytest.mark.slow
    def test_flat_bias_at_scale(self):
        flat = SampleMap(np.zeros((100, 100)))
        img = raster_scan(flat, InterferenceParams(), AcquisitionConfig(seed=6), lock_quadrature=True)
        depths = img.depth_m.ravel()
        assert abs(depths.mean()) < 0.1 * depths.std(ddof=1)


class TestExperiments:
    def test_single_pixel_per_step(self):
        with pytest.raises(InsufficientDataError):
            step_experiment(4.6e-6, [7.4e12], 1)

    def test_empty_detunings(self):
        with pytest.raises(ParameterError):
            step_experiment(4.6e-6, [], 10)

    def test_step_precision_improves(self):
        res = step_experiment(4.6e-6, [3.4e12, 7.4e12], 150, config=AcquisitionConfig(seed=5))
        assert res[1].sigma_d_m < res[0].sigma_d_m
        assert np.std(res[1].depths_s1_m) < np.std(res[0].depths_s1_m)
        for r in res:
            assert r.step_estimate_m == pytest.approx(4.6e-6, abs=0.2e-6)
            assert len(r.depths_s1_m) == len(r.depths_s2_m) == 150

    def test_sweep_tracks_crb(self):
        rows = single_pixel_sweep([3.4e12, 7.4e12], 200, block_size=50, n_pairs=4000)
        for row in rows:
            assert row.n_blocks == 4
            assert 0.85 < row.ratio_to_crb < 1.3
            assert row.delays_s.shape == (200,)
        assert rows[1].n_fisher_total > rows[0].n_fisher_total

    def test_sweep_depth_conversion(self):
        (row,) = single_pixel_sweep([7.4e12], 100, block_size=50, n_pairs=2000)
        expected = row.precision_t_s * 299_792_458.0 / 1.58
        assert row.sigma_d_m == pytest.approx(expected)
        assert delay_from_thickness(row.sigma_d_m, 1.58) == pytest.approx(row.precision_t_s)
