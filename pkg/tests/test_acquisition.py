"""Monte Carlo acquisition and phase-noise models."""

import numpy as np
import pytest
from scipy.optimize import curve_fit

from homscope.acquisition import (
    NO_NOISE,
    AcquisitionConfig,
    PhaseNoiseModel,
    drift_trace,
    pixel_rng,
    sample_dip_scan,
    sample_pixel,
)
from homscope.detectors import DetectorBank, calibrate_tally, normalized_p11, survival_probabilities
from homscope.errors import ParameterError
from homscope.inference import mle_delay
from homscope.model import InterferenceParams, p11, quadrature_delay


def raw_total(t):
    return t.n11_raw + t.n20_raw + t.n02_raw


class TestConfig:
    def test_defaults(self):
        cfg = AcquisitionConfig()
        assert cfg.expected_pairs == pytest.approx(4000)
        assert cfg.transmissions == (0.2, 0.2)

    def test_asymmetric_transmission(self):
        cfg = AcquisitionConfig(transmission=(0.5, 0.1))
        assert cfg.expected_pairs == pytest.approx(2e5 * 0.5 * 0.05)
        assert cfg.to_dict()["transmission"] == [0.5, 0.1]

    def test_with_expected_pairs(self):
        assert AcquisitionConfig().with_expected_pairs(1e4).expected_pairs == pytest.approx(1e4)

    @pytest.mark.parametrize(
        "kwargs", [{"pair_rate_hz": 0}, {"dwell_s": -1}, {"transmission": 0}, {"transmission": 1.5}, {"seed": -1}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            AcquisitionConfig(**kwargs)

    def test_noise_validation(self):
        with pytest.raises(ParameterError):
            PhaseNoiseModel("brownian")
        with pytest.raises(ParameterError):
            PhaseNoiseModel("random_walk", -1.0)
        assert not PhaseNoiseModel("random_walk", 0.0).active
        assert not PhaseNoiseModel("none", 5.0).active

    def test_noise_detuning_scaling(self):
        noise = PhaseNoiseModel("random_walk_with_hops", 1.0, 2.0, 0.5, reference_detuning_hz=2e12)
        scaled = noise.at_detuning(4e12)
        assert scaled.diffusion_rad2_per_s == pytest.approx(4.0)
        assert scaled.hop_magnitude_rad == pytest.approx(1.0)
        assert scaled.hop_rate_hz == 2.0
        assert PhaseNoiseModel("random_walk", 1.0).at_detuning(9e12).diffusion_rad2_per_s == 1.0


class TestSamplePixel:
    def test_reproducible(self):
        par, cfg = InterferenceParams(), AcquisitionConfig(seed=42)
        a = sample_pixel(10e-15, par, cfg, rng=pixel_rng(42, 3))
        b = sample_pixel(10e-15, par, cfg, rng=pixel_rng(42, 3))
        np.testing.assert_array_equal(a.coincidences, b.coincidences)
        np.testing.assert_array_equal(a.singles, b.singles)
        c = sample_pixel(10e-15, par, cfg, rng=pixel_rng(42, 4))
        assert not np.array_equal(a.coincidences, c.coincidences)

    def test_perfect_dip_has_no_n11(self):
        par = InterferenceParams(7.4e12, 1e-12, 1.0, 0.0)
        for seed in range(5):
            tally = sample_pixel(0.0, par, AcquisitionConfig(seed=seed))
            assert tally.n11_raw == 0
            assert tally.n20_raw + tally.n02_raw > 0

    def test_zero_visibility_fractions(self):
        # raw N11 : N20 : N02 = 1/2 : 3/16 : 3/16 before normalisation
        par = InterferenceParams(visibility=0.0)
        cfg = AcquisitionConfig(transmission=1.0, dwell_s=1.0, seed=1)
        tally = sample_pixel(0.0, par, cfg)
        n = raw_total(tally)
        expected = np.array([0.5, 3 / 16, 3 / 16]) / (0.5 + 3 / 8)
        got = np.array([tally.n11_raw, tally.n20_raw, tally.n02_raw]) / n
        np.testing.assert_allclose(got, expected, atol=4 * np.sqrt(0.25 / n))

    def test_mean_survival(self):
        # mean classified coincidences match rate*dwell*T^2*sum_k P_k s_k to 1 %
        par = InterferenceParams()
        bank = DetectorBank((0.9, 0.7, 0.8, 1.0, 0.6, 0.9, 1.0, 0.5))
        cfg = AcquisitionConfig()
        t = 20e-15
        s = survival_probabilities(bank)
        p = p11(t, par)
        expected = cfg.expected_pairs * (p * s["11"] + 0.5 * (1 - p) * (s["20"] + s["02"]))
        totals = [raw_total(sample_pixel(t, par, cfg, bank, rng=pixel_rng(9, i))) for i in range(100)]
        assert np.mean(totals) == pytest.approx(expected, rel=0.01)

    def test_singles_include_lone_photons(self):
        cfg = AcquisitionConfig(transmission=0.2, seed=3)
        tally = sample_pixel(1e-9, InterferenceParams(), cfg)
        lam = cfg.pair_rate_hz * cfg.dwell_s
        # every surviving photon clicks once at unit efficiency, minus collisions
        expected = lam * 2 * 0.2 - cfg.expected_pairs * 0.5 * 0.25
        assert tally.singles.sum() == pytest.approx(expected, rel=0.02)

    def test_dark_counts_only_in_singles(self):
        bank = DetectorBank(dark_count_rate_hz=1e4)
        cfg = AcquisitionConfig(seed=4)
        dark = sample_pixel(1e-9, InterferenceParams(), cfg, bank)
        clean = sample_pixel(1e-9, InterferenceParams(), cfg)
        assert raw_total(dark) == raw_total(clean)
        assert dark.singles.sum() > clean.singles.sum() + 30_000

    def test_zero_dwell(self):
        tally = sample_pixel(0.0, InterferenceParams(), AcquisitionConfig(dwell_s=0.0))
        assert raw_total(tally) == 0 and tally.singles.sum() == 0

    def test_convergence_rate(self):
        # |p_hat - p| shrinks as N^-1/2
        par = InterferenceParams()
        t = 30e-15
        p = p11(t, par)
        sizes = np.array([1e3, 1e4, 1e5])
        rmse = []
        for n in sizes:
            cfg = AcquisitionConfig().with_expected_pairs(n)
            errs = [
                normalized_p11(calibrate_tally(sample_pixel(t, par, cfg, rng=pixel_rng(17, i)), np.ones(8))) - p
                for i in range(200)
            ]
            rmse.append(np.sqrt(np.mean(np.square(errs))))
        slope = np.polyfit(np.log(sizes), np.log(rmse), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.1)


class TestDipScan:
    def test_empty_grid(self):
        with pytest.raises(ParameterError):
            sample_dip_scan([], InterferenceParams(), AcquisitionConfig())

    def test_zero_dwell_gives_empty_tallies(self):
        tallies = sample_dip_scan([0.0, 1e-15], InterferenceParams(), AcquisitionConfig(dwell_s=0.0))
        assert all(raw_total(t) == 0 for t in tallies)

    def test_degenerate_chi_square(self):
        par = InterferenceParams(0.0, 1e-12, 0.9, 0.0, True)
        delays = np.linspace(-0.7e-12, 0.7e-12, 41)
        cfg = AcquisitionConfig(seed=12).with_expected_pairs(2e4)
        tallies = sample_dip_scan(delays, par, cfg)
        chi2 = 0.0
        for t, raw in zip(delays, tallies):
            n11, nb = raw.n11_raw, raw.n20_raw + raw.n02_raw
            m = n11 + nb
            p = p11(t, par)
            # raw anti-bunching fraction q is binomial; p_hat = f(q) undoes the 3/4 loss
            q = p / (p + 0.75 * (1 - p))
            slope = (1 / 0.75) / (q + (1 - q) / 0.75) ** 2
            var = slope**2 * q * (1 - q) / m
            chi2 += (n11 / (n11 + nb / 0.75) - p) ** 2 / var
        dof = len(delays)
        assert chi2 < dof + 4 * np.sqrt(2 * dof)

    def test_beat_period_fit(self):
        par = InterferenceParams(7.4e12, 1e-12, 0.95, 0.0)
        delays = np.linspace(-400e-15, 400e-15, 161)
        cfg = AcquisitionConfig(seed=5).with_expected_pairs(2e4)
        est = np.array([
            normalized_p11(calibrate_tally(t, np.ones(8))) for t in sample_dip_scan(delays, par, cfg)
        ])
        def model(t, nu, a):
            return 0.5 * (1 - a * np.clip(1 - np.abs(2 * t / 1e-12), 0, None) * np.cos(2 * np.pi * nu * t))

        (nu, _), _ = curve_fit(model, delays, est, p0=(7.0e12, 0.9))
        assert 1 / nu == pytest.approx(135.1e-15, rel=0.01)


class TestDrift:
    def test_none_is_constant(self):
        _, phase = drift_trace(NO_NOISE, 1.0, 0.01)
        assert np.all(phase == 0)

    def test_brownian_variance(self):
        noise = PhaseNoiseModel("random_walk", 0.3)
        ends = np.array([drift_trace(noise, 2.0, 0.05, seed=s)[1][-1] for s in range(10_000)])
        assert np.var(ends) == pytest.approx(0.3 * 2.0, rel=0.05)

    def test_no_hops_is_continuous(self):
        noise = PhaseNoiseModel("random_walk_with_hops", 1e-4, 0.0, 1.0)
        _, phase = drift_trace(noise, 10.0, 0.01, seed=1)
        assert np.max(np.abs(np.diff(phase))) < 0.01

    def test_hops_are_discrete(self):
        noise = PhaseNoiseModel("random_walk_with_hops", 0.0, 5.0, 0.7)
        _, phase = drift_trace(noise, 10.0, 0.01, seed=2)
        jumps = np.diff(phase)
        assert np.any(jumps != 0)
        np.testing.assert_allclose(np.round(jumps / 0.7), jumps / 0.7, atol=1e-9)

    def test_bad_step(self):
        with pytest.raises(ParameterError):
            drift_trace(NO_NOISE, 1.0, 0.0)

    def test_precision_degrades_with_diffusion(self):
        par = InterferenceParams()
        t0 = quadrature_delay(par)
        cfg = AcquisitionConfig()
        sds = []
        for diffusion in (0.0, 0.1, 1.0, 10.0):
            noise = PhaseNoiseModel("random_walk", diffusion)
            est = [
                mle_delay(calibrate_tally(sample_pixel(t0, par, cfg, noise=noise, rng=pixel_rng(3, i)), np.ones(8)), par).delay_s
                for i in range(200)
            ]
            sds.append(np.std(est))
        assert sds[0] < sds[2] < sds[3]
        assert sds[1] < sds[3]
