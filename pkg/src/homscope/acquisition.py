"""Monte Carlo generation of per-pixel coincidence data.

Pairs arrive as a Poisson process.  Each pair picks an outcome from the
interference model at the phase it sees, loses photons to the lumped
transmission, and is routed through the detector bank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .detectors import CoincidenceTally, DetectorBank, detect_codes
from .errors import ParameterError
from .model import InterferenceParams, p11, p11_with_phase

NOISE_KINDS = ("none", "random_walk", "random_walk_with_hops")


@dataclass(frozen=True)
class AcquisitionConfig:
    """Per-pixel acquisition settings.

    ``transmission`` is the per-photon survival before the detector bank.  It
    may be a single value or one value per input path.  The default, 0.2,
    makes the default rate and dwell deliver about 4000 pairs to the bank.
    """

    pair_rate_hz: float = 2e5
    dwell_s: float = 0.5
    transmission: float | tuple = 0.2
    seed: int = 0

    def __post_init__(self):
        if not self.pair_rate_hz > 0:
            raise ParameterError("pair_rate_hz must be > 0")
        if not self.dwell_s >= 0:
            raise ParameterError("dwell_s must be >= 0")
        for t in self.transmissions:
            if not 0 < t <= 1:
                raise ParameterError(f"transmission must lie in (0, 1], got {t}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    @property
    def transmissions(self) -> tuple[float, float]:
        t = self.transmission
        if np.ndim(t) == 0:
            return float(t), float(t)
        a, b = t
        return float(a), float(b)

    @property
    def expected_pairs(self) -> float:
        """Mean number of pairs whose two photons both reach the detector bank."""
        ta, tb = self.transmissions
        return self.pair_rate_hz * self.dwell_s * ta * tb

    def with_expected_pairs(self, n_pairs: float) -> "AcquisitionConfig":
        """Same dwell and transmission, pair rate rescaled to deliver ``n_pairs``."""
        ta, tb = self.transmissions
        rate = n_pairs / (self.dwell_s * ta * tb)
        return AcquisitionConfig(rate, self.dwell_s, self.transmission, self.seed)

    def to_dict(self) -> dict:
        t = self.transmission
        return {
            "pair_rate_hz": self.pair_rate_hz,
            "dwell_s": self.dwell_s,
            "transmission": t if np.ndim(t) == 0 else list(t),
            "seed": int(self.seed),
        }


@dataclass(frozen=True)
class PhaseNoiseModel:
    """Stochastic drift of the interferometer phase.

    ``diffusion_rad2_per_s`` is the random-walk rate.  When
    ``reference_detuning_hz`` is set, the diffusion and hop size are quoted at
    that detuning and scale with detuning, as for path-length noise (phase
    proportional to detuning times path error).  Otherwise they are
    detuning-independent.
    """

    kind: str = "none"
    diffusion_rad2_per_s: float = 0.0
    hop_rate_hz: float = 0.0
    hop_magnitude_rad: float = 0.0
    reference_detuning_hz: float | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        for name in ("diffusion_rad2_per_s", "hop_rate_hz", "hop_magnitude_rad"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.reference_detuning_hz is not None and not self.reference_detuning_hz > 0:
            raise ParameterError("reference_detuning_hz must be > 0")

    @property
    def active(self) -> bool:
        if self.kind == "none":
            return False
        hops = self.kind == "random_walk_with_hops" and self.hop_rate_hz > 0
        return self.diffusion_rad2_per_s > 0 or hops

    def at_detuning(self, detuning_hz: float) -> "PhaseNoiseModel":
        """Noise with rates expressed at ``detuning_hz``."""
        if self.reference_detuning_hz is None:
            return self
        s = detuning_hz / self.reference_detuning_hz
        return PhaseNoiseModel(
            self.kind, self.diffusion_rad2_per_s * s * s, self.hop_rate_hz,
            self.hop_magnitude_rad * s, None,
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "diffusion_rad2_per_s": self.diffusion_rad2_per_s,
            "hop_rate_hz": self.hop_rate_hz,
            "hop_magnitude_rad": self.hop_magnitude_rad,
            "reference_detuning_hz": self.reference_detuning_hz,
        }


NO_NOISE = PhaseNoiseModel()


def pixel_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for pixel ``index``, unaffected by scheduling order."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(index),)))


def _phase_increments(noise: PhaseNoiseModel, dt: np.ndarray, rng) -> np.ndarray:
    steps = np.zeros(len(dt))
    if noise.kind == "none":
        return steps
    if noise.diffusion_rad2_per_s > 0:
        steps += rng.standard_normal(len(dt)) * np.sqrt(noise.diffusion_rad2_per_s * dt)
    if noise.kind == "random_walk_with_hops" and noise.hop_rate_hz > 0:
        n_hops = rng.poisson(noise.hop_rate_hz * dt)
        # net displacement of n independent +-1 hops
        ups = rng.binomial(n_hops, 0.5)
        steps += (2 * ups - n_hops) * noise.hop_magnitude_rad
    return steps


def drift_trace(
    noise: PhaseNoiseModel, duration_s: float, step_s: float, seed: int = 0,
    detuning_hz: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Phase drift sampled on a regular time grid; returns ``(times, phase)``.

    The trace starts at zero phase.  The ensemble variance of a pure random
    walk after time T is ``diffusion * T``.
    """
    if not step_s > 0:
        raise ParameterError("step_s must be > 0")
    if detuning_hz is not None:
        noise = noise.at_detuning(detuning_hz)
    n = int(math.floor(duration_s / step_s + 1e-9))
    times = np.arange(n + 1) * step_s
    rng = np.random.default_rng(seed)
    phase = np.concatenate([[0.0], np.cumsum(_phase_increments(noise, np.full(n, step_s), rng))])
    return times, phase


def _sample_codes(p: np.ndarray | float, n: int, rng) -> np.ndarray:
    u = rng.random(n)
    bunch = p + 0.5 * (1.0 - p)
    codes = np.full(n, kernels.CODE_02, dtype=np.int8)
    codes[u < bunch] = kernels.CODE_20
    codes[u < p] = kernels.CODE_11_A_TO_C
    codes[u < 0.5 * p] = kernels.CODE_11_A_TO_D
    return codes


def sample_pixel(
    t_true: float,
    params: InterferenceParams,
    config: AcquisitionConfig,
    bank: DetectorBank | None = None,
    noise: PhaseNoiseModel = NO_NOISE,
    rng: np.random.Generator | None = None,
) -> CoincidenceTally:
    """Simulate one acquisition window at delay ``t_true``.

    Photon loss is applied by Poisson thinning.  Pairs with both photons
    transmitted go through the full detection kernel.  Pairs with a single
    surviving photon can only add singles, so those singles are drawn as
    per-channel Poisson counts.  A lone photon leaves either arm with
    probability 1/2 whatever the interference.
    """
    bank = bank or DetectorBank()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    lam = config.pair_rate_hz * config.dwell_s
    ta, tb = config.transmissions

    n_both = rng.poisson(lam * ta * tb)
    if noise.active and n_both:
        local = noise.at_detuning(params.detuning_hz)
        arrivals = np.sort(rng.random(n_both)) * config.dwell_s
        dt = np.diff(arrivals, prepend=0.0)
        phase = params.phase_rad + np.cumsum(_phase_increments(local, dt, rng))
        p = np.broadcast_to(p11_with_phase(float(t_true), params, phase), (n_both,))
    else:
        p = float(p11(t_true, params))
    codes = _sample_codes(p, n_both, rng)
    coinc, singles = detect_codes(codes, bank, rng)

    lone = lam * (ta * (1.0 - tb) + (1.0 - ta) * tb)
    r = np.asarray(bank.splitter_ratios).reshape(8)
    eff = np.asarray(bank.efficiencies)
    singles = singles + rng.poisson(lone * 0.5 * r * eff)
    dark = np.asarray(bank.dark_count_rate_hz) * config.dwell_s
    if np.any(dark > 0):
        singles = singles + rng.poisson(dark)
    return CoincidenceTally(coinc, singles.astype(np.int64), config.dwell_s)


def sample_pairs(
    n_pairs: int,
    t_true: float,
    params: InterferenceParams,
    bank: DetectorBank,
    transmission=(1.0, 1.0),
    rng: np.random.Generator | None = None,
) -> CoincidenceTally:
    """Send exactly ``n_pairs`` emitted pairs through explicit per-photon loss.

    Used for calibration runs where the number of pairs is fixed.
    """
    rng = rng if rng is not None else np.random.default_rng()
    codes = _sample_codes(float(p11(t_true, params)), int(n_pairs), rng)
    coinc, singles = detect_codes(codes, bank, rng, transmission)
    return CoincidenceTally(coinc, singles, 0.0)


def sample_dip_scan(
    delays,
    params: InterferenceParams,
    config: AcquisitionConfig,
    bank: DetectorBank | None = None,
    noise: PhaseNoiseModel = NO_NOISE,
) -> list[CoincidenceTally]:
    """Independent :func:`sample_pixel` at every delay of ``delays``."""
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    if delays.size == 0:
        raise ParameterError("delay grid is empty")
    return [
        sample_pixel(t, params, config, bank, noise, pixel_rng(config.seed, i))
        for i, t in enumerate(delays)
    ]
