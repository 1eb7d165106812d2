"""Interference probabilities and unit conversions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homscope.errors import ParameterError
from homscope.model import (
    DIFFERENTIAL,
    PAPER_ND,
    SPEED_OF_LIGHT,
    InterferenceParams,
    OpticalSample,
    branch_window,
    delay_from_sample,
    delay_from_thickness,
    detuning_from_wavelengths,
    fringe_half_period_path,
    fringe_index,
    outcome_probabilities,
    p11,
    p11_degenerate,
    p11_derivative,
    p11_two_colour,
    quadrature_delay,
    quadrature_phase,
    thickness_from_delay,
)

FS = 1e-15


def degenerate(alpha=1.0, tau=100 * FS):
    return InterferenceParams(0.0, tau, alpha, 0.0, True)


def two_colour(dnu=7.4e12, alpha=1.0, tau=1e-12, phi=0.0):
    return InterferenceParams(dnu, tau, alpha, phi, False)


visibilities = st.floats(0.0, 1.0)
widths = st.floats(10 * FS, 5e-12)
detunings = st.floats(0.0, 40e12)
phases = st.floats(-math.pi, math.pi)


class TestParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"visibility": 1.2},
            {"visibility": -0.1},
            {"temporal_width_s": 0.0},
            {"detuning_hz": -1.0},
            {"degenerate": True},  # default detuning is nonzero
            {"phase_rad": math.inf},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            InterferenceParams(**kwargs)

    def test_parameter_error_is_value_error(self):
        with pytest.raises(ValueError):
            InterferenceParams(visibility=2.0)

    def test_sample_validation(self):
        with pytest.raises(ParameterError):
            OpticalSample(-1e-6, 1.5)
        with pytest.raises(ParameterError):
            OpticalSample(1e-6, 0.9)


class TestDegenerate:
    def test_zero_delay_perfect_dip(self):
        assert p11_degenerate(0.0, degenerate()) == 0.0

    def test_envelope_edge(self):
        assert p11_degenerate(50 * FS, degenerate()) == pytest.approx(0.5, abs=1e-15)

    def test_quarter_width(self):
        # 1/2 * [1 - (1 - 2*25/100)] = 0.25
        assert p11_degenerate(25 * FS, degenerate()) == pytest.approx(0.25, abs=1e-14)

    def test_outside_envelope(self):
        t = np.array([-300, -51, 51, 1e4]) * FS
        np.testing.assert_array_equal(p11_degenerate(t, degenerate(0.7)), 0.5)

    def test_wrong_model(self):
        with pytest.raises(ParameterError):
            p11_degenerate(0.0, two_colour())
        with pytest.raises(ParameterError):
            p11_two_colour(0.0, degenerate())


class TestTwoColour:
    def test_zero_delay(self):
        assert p11_two_colour(0.0, two_colour(dnu=3e12)) == 0.0

    def test_half_beat_period(self):
        # cos(pi) = -1 and envelope 1 - 2*67.57/1000
        t = 67.57 * FS
        expected = 0.5 * (1.0 + (1.0 - 2 * 67.57 / 1000) * -math.cos(2 * math.pi * 7.4e12 * t))
        assert p11_two_colour(t, two_colour()) == pytest.approx(expected, rel=1e-12)
        assert p11_two_colour(t, two_colour()) == pytest.approx(0.9324, abs=1e-4)

    def test_beat_period(self):
        par = two_colour(dnu=5e12, tau=50e-12)
        t = np.linspace(-2e-12, 2e-12, 101)
        shifted = p11(t + 1 / 5e12, par)
        env_ratio = (1 - 2 * np.abs(t + 1 / 5e12) / 50e-12) / (1 - 2 * np.abs(t) / 50e-12)
        np.testing.assert_allclose(shifted - 0.5, (p11(t, par) - 0.5) * env_ratio, atol=1e-12)

    def test_reduces_to_degenerate(self):
        t = np.linspace(-80 * FS, 80 * FS, 10_000)
        a = p11_two_colour(t, InterferenceParams(0.0, 100 * FS, 0.8, 0.0, False))
        b = p11_degenerate(t, degenerate(0.8))
        assert np.max(np.abs(a - b)) <= 1e-12


class TestInvariants:
    @given(st.floats(-3e-12, 3e-12), visibilities, widths, detunings, phases)
    def test_normalisation_and_bounds(self, t, alpha, tau, dnu, phi):
        par = InterferenceParams(dnu, tau, alpha, phi)
        out = outcome_probabilities(t, par)
        assert abs(out.p11 + out.p20 + out.p02 - 1.0) <= 1e-12
        assert out.p20 == out.p02
        lo, hi = 0.5 * (1 - alpha), 0.5 * (1 + alpha)
        assert lo - 1e-15 <= out.p11 <= hi + 1e-15
        if abs(2 * t / tau) >= 1:
            assert out.p11 == pytest.approx(0.5, abs=1e-15)

    @given(st.floats(0, 3e-12), visibilities, widths, detunings)
    def test_even_at_zero_phase(self, t, alpha, tau, dnu):
        par = InterferenceParams(dnu, tau, alpha, 0.0)
        assert p11(t, par) == pytest.approx(p11(-t, par), abs=1e-14)

    def test_outcome_examples(self):
        np.testing.assert_allclose(outcome_probabilities(0.0, degenerate()).as_array(), [0, 0.5, 0.5])
        out = outcome_probabilities(25 * FS, degenerate())
        np.testing.assert_allclose(out.as_array(), [0.25, 0.375, 0.375], atol=1e-14)
        out = outcome_probabilities(1e-9, degenerate())
        np.testing.assert_allclose(out.as_array(), [0.5, 0.25, 0.25])

    @given(st.floats(-0.49e-12, 0.49e-12).filter(lambda t: abs(t) > 1e-17), visibilities, detunings, phases)
    def test_derivative_matches_difference(self, t, alpha, dnu, phi):
        par = InterferenceParams(dnu, 1e-12, alpha, phi)
        h = 1e-21
        fd = (p11(t + h, par) - p11(t - h, par)) / (2 * h)
        scale = 1.0 / 1e-12 + 2 * math.pi * dnu
        assert p11_derivative(t, par) == pytest.approx(fd, abs=1e-5 * scale)

    def test_derivative_at_apex(self):
        # the one-sided slopes are +-2/tau * alpha/2; their mean is zero
        assert p11_derivative(0.0, degenerate()) == 0.0


class TestConversions:
    def test_detuning_examples(self):
        assert detuning_from_wavelengths(808e-9, 16e-9) == pytest.approx(7.35e12, rel=1e-3)
        assert detuning_from_wavelengths(808e-9, 65.6e-9) == pytest.approx(30.1e12, rel=1e-2)
        assert detuning_from_wavelengths(808e-9, 0.0) == 0.0

    def test_detuning_errors(self):
        with pytest.raises(ParameterError):
            detuning_from_wavelengths(0.0, 1e-9)
        with pytest.raises(ParameterError):
            detuning_from_wavelengths(808e-9, -1e-9)

    def test_half_period_path(self):
        assert fringe_half_period_path(7.4e12) == pytest.approx(20.26e-6, rel=1e-3)
        assert fringe_half_period_path(3.4e12) == pytest.approx(44.1e-6, rel=1e-3)
        assert fringe_half_period_path(2e12) == pytest.approx(0.5 * fringe_half_period_path(1e12))
        with pytest.raises(ParameterError):
            fringe_half_period_path(0.0)

    def test_delay_examples(self):
        s = OpticalSample(4.6e-6, 1.58)
        assert delay_from_sample(s) == pytest.approx(24.23e-15, rel=1e-3)
        assert delay_from_sample(s, DIFFERENTIAL) == pytest.approx(8.90e-15, rel=1e-3)
        assert delay_from_sample(OpticalSample(0.0, 1.58)) == 0.0
        with pytest.raises(ParameterError):
            delay_from_thickness(1e-6, 1.5, convention="bogus")

    @given(st.floats(0, 1e-3), st.floats(1.0001, 4.0), st.sampled_from([PAPER_ND, DIFFERENTIAL]))
    def test_round_trip(self, d, n, convention):
        t = delay_from_sample(OpticalSample(d, n), convention)
        assert thickness_from_delay(t, n, 1.0, convention) == pytest.approx(d, rel=1e-12, abs=1e-300)

    def test_delay_is_nd_over_c(self):
        assert delay_from_thickness(1.0, 2.0) == 2.0 / SPEED_OF_LIGHT


class TestWorkingPoint:
    @given(st.floats(0.5e12, 30e12), st.floats(-40e-15, 40e-15))
    @settings(max_examples=50)
    def test_quadrature_phase(self, dnu, tc):
        par = two_colour(dnu=dnu, tau=1e-9, phi=quadrature_phase(dnu, tc))
        assert p11(tc, par) == pytest.approx(0.5, abs=1e-9)
        assert p11_derivative(tc, par) > 0
        lo, hi = branch_window(par, fringe_index(tc, par))
        assert lo <= tc <= hi
        assert tc - lo == pytest.approx(hi - tc, rel=1e-6)

    def test_quadrature_delay(self):
        # a wide envelope keeps p11 at the quadrature exactly 1/2
        par = two_colour(phi=0.3, tau=1.0)
        assert p11(quadrature_delay(par), par) == pytest.approx(0.5, abs=1e-12)
        assert quadrature_delay(degenerate()) == 25 * FS

    def test_branch_windows(self):
        par = two_colour()
        lo, hi = branch_window(par, 0)
        assert (lo, hi) == (0.0, pytest.approx(0.5 / 7.4e12))
        assert branch_window(par, -1)[1] == pytest.approx(0.0, abs=1e-30)
        assert branch_window(degenerate(), 0) == (0.0, 50 * FS)
        assert branch_window(degenerate(), -1) == (-50 * FS, 0.0)
        assert fringe_index(-1e-15, degenerate()) == -1
        assert fringe_index(30e-15, par) == 0
        assert fringe_index(80e-15, par) == 1

