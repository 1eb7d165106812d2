"""Closed-form HOM interference probabilities and delay/thickness conversions.

All delays are in seconds, frequencies in hertz and lengths in metres.  The
probability functions accept scalars or numpy arrays for the delay and
broadcast accordingly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError

SPEED_OF_LIGHT = 299_792_458.0

PAPER_ND = "paper_nd"
DIFFERENTIAL = "differential_n_minus_medium"
CONVENTIONS = (PAPER_ND, DIFFERENTIAL)


@dataclass(frozen=True)
class InterferenceParams:
    """Parameters of the two-photon interference pattern.

    ``visibility`` and ``temporal_width_s`` are not reported for the original
    apparatus; the defaults (0.95, 1 ps) are assumptions and every artifact that
    depends on them records the values used.
    """

    detuning_hz: float = 7.4e12
    temporal_width_s: float = 1e-12
    visibility: float = 0.95
    phase_rad: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ParameterError(f"visibility must lie in [0, 1], got {self.visibility}")
        if not self.temporal_width_s > 0.0:
            raise ParameterError(f"temporal_width_s must be > 0, got {self.temporal_width_s}")
        if not self.detuning_hz >= 0.0:
            raise ParameterError(f"detuning_hz must be >= 0, got {self.detuning_hz}")
        if self.degenerate and self.detuning_hz != 0.0:
            raise ParameterError("degenerate photons require detuning_hz == 0")
        if not math.isfinite(self.phase_rad):
            raise ParameterError("phase_rad must be finite")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class OutcomeProbabilities:
    """Probabilities of one photon per output (p11) or both in arm C / arm D."""

    p11: float
    p20: float
    p02: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p11, self.p20, self.p02])


@dataclass(frozen=True)
class OpticalSample:
    thickness_m: float
    refractive_index: float
    medium_index: float = 1.0

    def __post_init__(self):
        if self.thickness_m < 0:
            raise ParameterError(f"thickness_m must be >= 0, got {self.thickness_m}")
        if self.refractive_index < 1:
            raise ParameterError(f"refractive_index must be >= 1, got {self.refractive_index}")


def envelope(t, width):
    """Triangular dip envelope max(0, 1 - |2t/width|)."""
    return np.clip(1.0 - np.abs(2.0 * np.asarray(t, dtype=float) / width), 0.0, None)


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def p11_degenerate(t, params: InterferenceParams):
    """Anti-bunching probability of the triangular dip of degenerate photons."""
    if not params.degenerate:
        raise ParameterError("p11_degenerate needs params.degenerate = True")
    p = 0.5 * (1.0 - params.visibility * envelope(t, params.temporal_width_s))
    return _scalar_or_array(p)


def p11_two_colour(t, params: InterferenceParams):
    """Anti-bunching probability of the two-colour beat pattern.

    The triangular envelope is modulated by ``cos(2*pi*detuning*t + phase)``.
    """
    if params.degenerate:
        raise ParameterError("p11_two_colour needs params.degenerate = False")
    return p11_with_phase(t, params, params.phase_rad)


def p11_with_phase(t, params: InterferenceParams, phase_rad):
    """Two-colour p11 with the interferometer phase replaced by ``phase_rad``.

    ``phase_rad`` may be an array (one phase per photon pair).
    """
    if params.degenerate:
        return p11_degenerate(t, params)
    t = np.asarray(t, dtype=float)
    fringe = np.cos(2.0 * math.pi * params.detuning_hz * t + np.asarray(phase_rad, dtype=float))
    p = 0.5 * (1.0 - params.visibility * envelope(t, params.temporal_width_s) * fringe)
    return _scalar_or_array(p)


def p11(t, params: InterferenceParams):
    """Anti-bunching probability from whichever dip model ``params`` selects."""
    if params.degenerate:
        return p11_degenerate(t, params)
    return p11_two_colour(t, params)


def p11_derivative(t, params: InterferenceParams):
    """Analytic d(p11)/dt.

    At the envelope apex (t = 0) the mean of the one-sided derivatives is
    returned; outside the envelope the derivative is zero.
    """
    t = np.asarray(t, dtype=float)
    width = params.temporal_width_s
    inside = np.abs(2.0 * t / width) < 1.0
    env = envelope(t, width)
    d_env = np.where(inside, -2.0 / width * np.sign(t), 0.0)
    if params.degenerate:
        d = -0.5 * params.visibility * d_env
    else:
        omega = 2.0 * math.pi * params.detuning_hz
        arg = omega * t + params.phase_rad
        d = -0.5 * params.visibility * (d_env * np.cos(arg) - env * omega * np.sin(arg))
    return _scalar_or_array(d)


def outcome_probabilities(t: float, params: InterferenceParams) -> OutcomeProbabilities:
    p = float(p11(t, params))
    bunch = 0.5 * (1.0 - p)
    return OutcomeProbabilities(p, bunch, bunch)


def outcome_arrays(t, params: InterferenceParams):
    """Vectorised (p11, p20, p02) for an array of delays."""
    p = np.asarray(p11(t, params), dtype=float)
    bunch = 0.5 * (1.0 - p)
    return p, bunch, bunch


def detuning_from_wavelengths(center_wavelength_m: float, delta_wavelength_m: float) -> float:
    """First-order frequency detuning for a wavelength split about ``center``."""
    if center_wavelength_m <= 0:
        raise ParameterError("center wavelength must be positive")
    if delta_wavelength_m < 0:
        raise ParameterError("wavelength separation must be >= 0")
    return SPEED_OF_LIGHT * delta_wavelength_m / center_wavelength_m**2


def fringe_period_delay(detuning_hz: float) -> float:
    if detuning_hz <= 0:
        raise ParameterError("fringe period is undefined at zero detuning")
    return 1.0 / detuning_hz


def half_period_delay(detuning_hz: float) -> float:
    return 0.5 * fringe_period_delay(detuning_hz)


def fringe_half_period_path(detuning_hz: float) -> float:
    """Half of the beat period expressed as optical path length, c / (2 dnu)."""
    return SPEED_OF_LIGHT * half_period_delay(detuning_hz)


def quadrature_phase(detuning_hz: float, delay_s: float) -> float:
    """Interferometer phase that puts ``delay_s`` on a rising quadrature point.

    With this phase p11 equals 1/2 at ``delay_s`` and increases with delay.
    """
    phi = 0.5 * math.pi - 2.0 * math.pi * detuning_hz * delay_s
    return math.remainder(phi, 2.0 * math.pi)


def quadrature_delay(params: InterferenceParams) -> float:
    """Delay of the rising quadrature point inside fringe branch 0."""
    if params.degenerate or params.detuning_hz == 0:
        return params.temporal_width_s / 4.0
    return (0.5 * math.pi - params.phase_rad) / (2.0 * math.pi * params.detuning_hz)


def branch_window(params: InterferenceParams, index: int = 0) -> tuple[float, float]:
    """Delay interval of fringe branch ``index``.

    Branch k covers fringe phases [k*pi, (k+1)*pi], over which p11 is monotone.
    For degenerate photons branch 0 is the positive half of the dip and branch
    -1 the negative half.
    """
    if params.degenerate or params.detuning_hz == 0:
        half = params.temporal_width_s / 2.0
        return (0.0, half) if index >= 0 else (-half, 0.0)
    omega = 2.0 * math.pi * params.detuning_hz
    lo = (index * math.pi - params.phase_rad) / omega
    return lo, lo + math.pi / omega


def fringe_index(delay_s: float, params: InterferenceParams) -> int:
    if params.degenerate or params.detuning_hz == 0:
        return 0 if delay_s >= 0 else -1
    arg = 2.0 * math.pi * params.detuning_hz * delay_s + params.phase_rad
    return int(math.floor(arg / math.pi))


def _index_difference(refractive_index, medium_index, convention):
    if convention == PAPER_ND:
        return refractive_index
    if convention == DIFFERENTIAL:
        return refractive_index - medium_index
    raise ParameterError(f"unknown delay convention {convention!r}; expected one of {CONVENTIONS}")


def delay_from_thickness(thickness_m, refractive_index, medium_index=1.0, convention=PAPER_ND):
    k = _index_difference(refractive_index, medium_index, convention)
    return _scalar_or_array(np.asarray(thickness_m, dtype=float) * k / SPEED_OF_LIGHT)


def thickness_from_delay(delay_s, refractive_index, medium_index=1.0, convention=PAPER_ND):
    k = _index_difference(refractive_index, medium_index, convention)
    if k <= 0:
        raise ParameterError("index contrast must be positive to convert delay to thickness")
    return _scalar_or_array(np.asarray(delay_s, dtype=float) * SPEED_OF_LIGHT / k)


def delay_from_sample(sample: OpticalSample, convention: str = PAPER_ND) -> float:
    """Delay added by a slab: n*d/c, or (n - n_medium)*d/c for the differential convention."""
    return delay_from_thickness(
        sample.thickness_m, sample.refractive_index, sample.medium_index, convention
    )
