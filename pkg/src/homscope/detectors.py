"""Multiplexed quasi-photon-number-resolving detection and Klyshko calibration.

Each beamsplitter output is spread over four binary detectors by a 1x4 fibre
splitter.  Detectors 1-4 watch arm D and detectors 5-8 watch arm C, so

* one click in 1-4 and one in 5-8 is an anti-bunching event (N11),
* two clicks inside 1-4 is a bunching event in arm D (N02),
* two clicks inside 5-8 is a bunching event in arm C (N20).

Two photons landing on the same binary detector give a single click, which
is the intrinsic collision loss of the bunching terms (1/4 for a uniform
splitter).

Channels are 1-based in the public API and 0-based inside arrays.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import CalibrationError, ParameterError

N_CHANNELS = 8
CHUNK_PAIRS = 1 << 20

UNIFORM_SPLIT = (0.25, 0.25, 0.25, 0.25)


class Coincidence(str, enum.Enum):
    N11 = "N11"
    N02 = "N02"
    N20 = "N20"
    INVALID = "invalid"


def classify_coincidence(i: int, j: int) -> Coincidence:
    """Category of a two-detector coincidence between 1-based channels i and j."""
    for ch in (i, j):
        if not 1 <= ch <= N_CHANNELS:
            raise ParameterError(f"detector channel must be in 1..8, got {ch}")
    if i == j:
        return Coincidence.INVALID
    arm_i, arm_j = (i - 1) // 4, (j - 1) // 4
    if arm_i != arm_j:
        return Coincidence.N11
    return Coincidence.N02 if arm_i == 0 else Coincidence.N20


@dataclass(frozen=True)
class DetectorBank:
    efficiencies: tuple = (1.0,) * N_CHANNELS
    splitter_ratios: tuple = (UNIFORM_SPLIT, UNIFORM_SPLIT)
    dark_count_rate_hz: tuple = (0.0,) * N_CHANNELS

    def __post_init__(self):
        eff = tuple(float(e) for e in self.efficiencies)
        if len(eff) != N_CHANNELS:
            raise ParameterError("a detector bank needs exactly 8 efficiencies")
        if any(not 0.0 <= e <= 1.0 for e in eff):
            raise ParameterError(f"efficiencies must lie in [0, 1], got {eff}")
        ratios = tuple(tuple(float(r) for r in bank) for bank in self.splitter_ratios)
        if len(ratios) != 2 or any(len(bank) != 4 for bank in ratios):
            raise ParameterError("splitter_ratios must be two lists of four ratios")
        for bank in ratios:
            if any(r < 0 for r in bank) or abs(sum(bank) - 1.0) > 1e-12:
                raise ParameterError(f"splitter ratios must be >= 0 and sum to 1, got {bank}")
        dark = self.dark_count_rate_hz
        if np.ndim(dark) == 0:
            dark = (float(dark),) * N_CHANNELS
        dark = tuple(float(d) for d in dark)
        if len(dark) != N_CHANNELS or any(d < 0 for d in dark):
            raise ParameterError("dark_count_rate_hz must be 8 non-negative rates")
        object.__setattr__(self, "efficiencies", eff)
        object.__setattr__(self, "splitter_ratios", ratios)
        object.__setattr__(self, "dark_count_rate_hz", dark)

    @property
    def cumulative_ratios(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.splitter_ratios), axis=1)[:, :3]

    def collision_probability(self, arm: int) -> float:
        """Chance that two photons in one arm hit the same detector (arm 0 = D, 1 = C)."""
        r = np.asarray(self.splitter_ratios[arm])
        return float(np.sum(r * r))

    def to_dict(self) -> dict:
        return {
            "efficiencies": list(self.efficiencies),
            "splitter_ratios": [list(r) for r in self.splitter_ratios],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectorBank":
        unknown = set(doc) - {"efficiencies", "splitter_ratios", "dark_count_rate_hz"}
        if unknown:
            raise ParameterError(f"unknown detector keys: {sorted(unknown)}")
        kwargs = {}
        for key in ("efficiencies", "splitter_ratios", "dark_count_rate_hz"):
            if key in doc:
                kwargs[key] = doc[key]
        return cls(**kwargs)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "DetectorBank":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class CoincidenceTally:
    """Coincidence counts of one acquisition window.

    ``coincidences`` is an 8x8 upper-triangular matrix of two-channel click
    counts (0-based channels, row < column).  The ``*_cal`` fields stay
    ``None`` until :func:`calibrate_tally` fills them.
    """

    coincidences: np.ndarray = field(default_factory=lambda: np.zeros((8, 8), dtype=np.int64))
    singles: np.ndarray = field(default_factory=lambda: np.zeros(8, dtype=np.int64))
    window_s: float = 0.0
    n11_cal: float | None = None
    n20_cal: float | None = None
    n02_cal: float | None = None

    @property
    def n11_raw(self) -> int:
        return int(self.coincidences[:4, 4:].sum())

    @property
    def n02_raw(self) -> int:
        return int(np.triu(self.coincidences[:4, :4], 1).sum())

    @property
    def n20_raw(self) -> int:
        return int(np.triu(self.coincidences[4:, 4:], 1).sum())

    @property
    def calibrated(self) -> bool:
        return self.n11_cal is not None

    def counts(self, calibrated: bool = True) -> tuple[float, float, float]:
        """(N11, N20, N02), calibrated when available and requested."""
        if calibrated and self.calibrated:
            return self.n11_cal, self.n20_cal, self.n02_cal
        return float(self.n11_raw), float(self.n20_raw), float(self.n02_raw)

    @property
    def klyshko_matrix(self) -> np.ndarray:
        """4x4 block C_ij, i over detectors 1-4 and j over detectors 5-8."""
        return self.coincidences[:4, 4:].copy()

    def __add__(self, other: "CoincidenceTally") -> "CoincidenceTally":
        return CoincidenceTally(
            self.coincidences + other.coincidences,
            self.singles + other.singles,
            self.window_s + other.window_s,
        )

    @classmethod
    def from_calibrated(cls, n11: float, n20: float, n02: float) -> "CoincidenceTally":
        """Tally carrying only calibrated totals (non-integer values allowed)."""
        return cls(n11_cal=float(n11), n20_cal=float(n20), n02_cal=float(n02))


def survival_probabilities(bank: DetectorBank) -> dict[str, float]:
    """Probability that a pair of each outcome yields a classified coincidence.

    Photon losses before the bank are not included.
    """
    r = np.asarray(bank.splitter_ratios)
    eff = np.asarray(bank.efficiencies).reshape(2, 4)
    w = r * eff
    s_d = w[0].sum() ** 2 - np.sum(w[0] ** 2)
    s_c = w[1].sum() ** 2 - np.sum(w[1] ** 2)
    return {"11": float(w[0].sum() * w[1].sum()), "20": float(s_c), "02": float(s_d)}


def _outcome_codes(outcome: str, n: int, rng) -> np.ndarray:
    if outcome == "11":
        return np.where(rng.random(n) < 0.5, kernels.CODE_11_A_TO_D, kernels.CODE_11_A_TO_C).astype(
            np.int8
        )
    if outcome == "20":
        return np.full(n, kernels.CODE_20, dtype=np.int8)
    if outcome == "02":
        return np.full(n, kernels.CODE_02, dtype=np.int8)
    raise ParameterError(f"outcome must be '11', '20' or '02', got {outcome!r}")


def detect_codes(codes, bank: DetectorBank, rng, transmission=(1.0, 1.0)):
    """Run a batch of pair outcome codes through the bank.

    Returns ``(coincidences, singles)``.  Uniforms are drawn in fixed-size
    chunks so the result depends only on the generator state.
    """
    codes = np.asarray(codes, dtype=np.int8)
    cum = bank.cumulative_ratios
    eff = np.asarray(bank.efficiencies)
    trans = np.asarray(transmission, dtype=np.float64)
    coinc = np.zeros((8, 8), dtype=np.int64)
    singles = np.zeros(8, dtype=np.int64)
    for start in range(0, len(codes), CHUNK_PAIRS):
        chunk = codes[start : start + CHUNK_PAIRS]
        u = rng.random((len(chunk), 6))
        c, s = kernels.detect_pairs(chunk, u, trans, cum, eff)
        coinc += c
        singles += s
    return coinc, singles


def detect_outcomes(outcome: str, n: int, bank: DetectorBank, rng):
    """Send ``n`` pairs of a single outcome through the bank (no pre-bank loss)."""
    return detect_codes(_outcome_codes(outcome, n, rng), bank, rng)


def detect_pair(outcome: str, bank: DetectorBank, rng) -> Coincidence | None:
    """Route one pair of the given outcome; return its classification or None if lost."""
    coinc, _ = detect_outcomes(outcome, 1, bank, rng)
    hit = np.argwhere(coinc)
    if len(hit) == 0:
        return None
    i, j = hit[0]
    return classify_coincidence(int(i) + 1, int(j) + 1)


def klyshko_efficiencies(coincidence_matrix, singles) -> np.ndarray:
    """Klyshko coefficients of all eight channels.

    For i in 1..4, eta_i = 1/4 * sum_j C_ij / (2/3 * S_j) over j in 5..8, and
    the mirrored sum over i in 1..4 for channels 5..8.  The 2/3 is the share
    of singles events that belong to anti-bunched pairs when p11 = 1/2, so the
    input must come from a delay far outside the interference envelope.
    """
    c = np.asarray(coincidence_matrix, dtype=float)
    s = np.asarray(singles, dtype=float)
    if c.shape != (4, 4) or s.shape != (8,):
        raise ParameterError("need a 4x4 coincidence matrix and 8 singles counts")
    for ch in range(8):
        if s[ch] <= 0:
            raise CalibrationError(f"detector {ch + 1} recorded no singles", channel=ch + 1)
    herald = (2.0 / 3.0) * s
    eta_d = 0.25 * np.sum(c / herald[None, 4:], axis=1)
    eta_c = 0.25 * np.sum(c / herald[:4, None], axis=0)
    return np.concatenate([eta_d, eta_c])


def channel_efficiencies(
    coefficients, splitter_ratios=(UNIFORM_SPLIT, UNIFORM_SPLIT), transmission: float = 1.0,
    iterations: int = 50,
) -> np.ndarray:
    """Convert Klyshko coefficients into per-detector efficiencies.

    Under the detection model each coefficient equals ``3/4 * x_i * g``, with
    ``x_i = transmission * r_i * eta_i`` the heralding probability of channel i
    and ``g`` the partner bank's mean of ``1/(1 - x_j/4)``, which accounts for
    two photons of a bunched pair sharing one binary detector.  The pair of
    equations is solved by fixed-point iteration.
    """
    k = np.asarray(coefficients, dtype=float)
    r = np.asarray(splitter_ratios, dtype=float).reshape(8)
    if np.any(r <= 0):
        raise CalibrationError("cannot infer efficiencies for channels with zero splitter ratio")
    x = k / 0.75
    for _ in range(iterations):
        g_d = np.mean(1.0 / (1.0 - x[:4] / 4.0))
        g_c = np.mean(1.0 / (1.0 - x[4:] / 4.0))
        x_new = np.concatenate([k[:4] / (0.75 * g_c), k[4:] / (0.75 * g_d)])
        if np.allclose(x_new, x, rtol=1e-15, atol=0):
            x = x_new
            break
        x = x_new
    return x / (transmission * r)


def calibrate_tally(raw: CoincidenceTally, efficiencies, splitter_ratios=None) -> CoincidenceTally:
    """Loss-corrected counts.

    Every channel-pair count is divided by the product of its two detector
    efficiencies.  Bunching totals are further divided by ``1 - sum(r_k^2)``,
    the chance that two photons in one arm hit distinct detectors (3/4 for a
    uniform splitter).
    """
    eff = np.asarray(efficiencies, dtype=float)
    if eff.shape != (8,):
        raise ParameterError("need 8 efficiencies")
    bad = np.flatnonzero(eff <= 0)
    if len(bad):
        raise CalibrationError(
            f"detector {bad[0] + 1} has non-positive efficiency", channel=int(bad[0]) + 1
        )
    ratios = np.asarray(splitter_ratios if splitter_ratios is not None else (UNIFORM_SPLIT,) * 2)
    weights = 1.0 / np.outer(eff, eff)
    c = np.asarray(raw.coincidences, dtype=float) * weights
    miss_d = 1.0 - np.sum(ratios[0] ** 2)
    miss_c = 1.0 - np.sum(ratios[1] ** 2)
    return replace(
        raw,
        n11_cal=float(c[:4, 4:].sum()),
        n02_cal=float(np.triu(c[:4, :4], 1).sum() / miss_d),
        n20_cal=float(np.triu(c[4:, 4:], 1).sum() / miss_c),
    )


def normalized_p11(calibrated: CoincidenceTally) -> float:
    """Anti-bunching fraction N11 / (N11 + N02 + N20) of the calibrated counts."""
    if not calibrated.calibrated:
        raise ParameterError("tally has not been calibrated")
    total = calibrated.n11_cal + calibrated.n02_cal + calibrated.n20_cal
    if total <= 0:
        raise CalibrationError("calibrated tally is empty")
    return calibrated.n11_cal / total


def p11_standard_error(calibrated: CoincidenceTally) -> float:
    """Poisson standard error of :func:`normalized_p11` by the delta method.

    Each calibrated total is treated as a raw Poisson count times a single
    effective weight.
    """
    a = calibrated.n11_cal
    b = calibrated.n20_cal + calibrated.n02_cal
    var_a = a * a / calibrated.n11_raw if calibrated.n11_raw else 0.0
    var_b = 0.0
    for cal, raw in ((calibrated.n20_cal, calibrated.n20_raw), (calibrated.n02_cal, calibrated.n02_raw)):
        if raw:
            var_b += cal * cal / raw
    total = a + b
    return float(np.sqrt((b * b * var_a + a * a * var_b) / total**4))
