"""Synthetic samples, raster scans and the imaging/precision experiments."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .acquisition import NO_NOISE, AcquisitionConfig, PhaseNoiseModel, pixel_rng, sample_pixel
from .detectors import DetectorBank, calibrate_tally
from .errors import AmbiguityError, NonIdentifiableError, ParameterError
from .formats import read_matrix, write_json, write_matrix, write_pgm16
from .inference import (
    PixelEstimate,
    block_precision,
    fisher_information,
    mle_delay,
    two_step_precision,
)
from .model import (
    PAPER_ND,
    InterferenceParams,
    delay_from_thickness,
    fringe_index,
    half_period_delay,
    quadrature_delay,
    quadrature_phase,
    thickness_from_delay,
)
from .parallel import ordered_map

KET_GRID = (27, 78)
KET_STEP_M = 4.6e-6
SU8_INDEX = 1.58

# Strokes of the "|KET>" glyph as (x0, y0, x1, y1) in pixel units of the 78x27 grid.
_KET_STROKES = (
    (4, 1, 4, 25),
    (11, 3, 11, 23), (21, 3, 12, 13), (12, 13, 21, 23),
    (28, 3, 28, 23), (28, 4, 37, 4), (28, 13, 35, 13), (28, 22, 37, 22),
    (42, 4, 56, 4), (49, 4, 49, 23),
    (63, 1, 72, 13), (72, 13, 63, 25),
)
_KET_STROKE_WIDTH = 4.0


@dataclass
class SampleMap:
    """Film thickness per pixel on a transparent substrate.

    ``height_m`` has shape (height_px, width_px).  ``substrate_delay_s`` is the
    delay seen at zero film thickness, set by the reference arm length.
    """

    height_m: np.ndarray
    refractive_index: float = SU8_INDEX
    pixel_pitch_m: float = 15e-6
    substrate_delay_s: float = 0.0
    medium_index: float = 1.0

    def __post_init__(self):
        self.height_m = np.atleast_2d(np.asarray(self.height_m, dtype=float))
        if self.height_m.size == 0:
            raise ParameterError("sample map must have at least one pixel")
        if np.any(self.height_m < 0) or not np.all(np.isfinite(self.height_m)):
            raise ParameterError("heights must be finite and >= 0")
        if self.refractive_index < 1:
            raise ParameterError("refractive_index must be >= 1")

    @property
    def height_px(self) -> int:
        return self.height_m.shape[0]

    @property
    def width_px(self) -> int:
        return self.height_m.shape[1]

    def delays(self, convention: str = PAPER_ND) -> np.ndarray:
        return self.substrate_delay_s + delay_from_thickness(
            self.height_m, self.refractive_index, self.medium_index, convention
        )

    def sidecar(self) -> dict:
        return {
            "refractive_index": self.refractive_index,
            "pixel_pitch_m": self.pixel_pitch_m,
            "substrate_delay_s": self.substrate_delay_s,
            "medium_index": self.medium_index,
        }

    def save(self, csv_path) -> None:
        """Heights as a CSV matrix plus a JSON sidecar next to it."""
        csv_path = Path(csv_path)
        write_matrix(csv_path, self.height_m)
        write_json(csv_path.with_suffix(".json"), self.sidecar())

    @classmethod
    def load(cls, csv_path) -> "SampleMap":
        csv_path = Path(csv_path)
        meta = {}
        side = csv_path.with_suffix(".json")
        if side.exists():
            meta = json.loads(side.read_text())
            unknown = set(meta) - set(cls(np.zeros((1, 1))).sidecar())
            if unknown:
                raise ParameterError(f"unknown sample sidecar keys: {sorted(unknown)}")
        return cls(read_matrix(csv_path), **meta)


def _segment_distance(xx, yy, x0, y0, x1, y1):
    dx, dy = x1 - x0, y1 - y0
    length2 = dx * dx + dy * dy
    s = np.clip(((xx - x0) * dx + (yy - y0) * dy) / length2, 0.0, 1.0) if length2 else 0.0
    return np.hypot(xx - (x0 + s * dx), yy - (y0 + s * dy))


def ket_mask(grid: tuple[int, int] = KET_GRID) -> np.ndarray:
    """Boolean "|KET>" glyph, drawn on the 27x78 layout and resampled to ``grid``."""
    rows, cols = grid
    base_rows, base_cols = KET_GRID
    yy, xx = np.mgrid[0:rows, 0:cols].astype(float)
    yy = (yy + 0.5) * base_rows / rows - 0.5
    xx = (xx + 0.5) * base_cols / cols - 0.5
    mask = np.zeros(grid, dtype=bool)
    for stroke in _KET_STROKES:
        mask |= _segment_distance(xx, yy, *stroke) <= _KET_STROKE_WIDTH / 2.0
    return mask


def make_ket_sample(
    step_height_m: float = KET_STEP_M,
    n: float = SU8_INDEX,
    grid: tuple[int, int] = KET_GRID,
    substrate_delay_s: float = 0.0,
    pixel_pitch_m: float = 15e-6,
) -> SampleMap:
    """Two-level film: ``step_height_m`` on the glyph, bare substrate elsewhere."""
    if step_height_m < 0:
        raise ParameterError("step height must be >= 0")
    heights = np.where(ket_mask(grid), float(step_height_m), 0.0)
    return SampleMap(heights, n, pixel_pitch_m, substrate_delay_s)


@dataclass
class DepthImage:
    estimates: list
    shape: tuple
    metadata: dict = field(default_factory=dict)

    def _grid(self, attr, dtype=float) -> np.ndarray:
        return np.array([getattr(e, attr) for e in self.estimates], dtype=dtype).reshape(self.shape)

    @property
    def depth_m(self) -> np.ndarray:
        return self._grid("depth_m")

    @property
    def delay_s(self) -> np.ndarray:
        return self._grid("delay_s")

    @property
    def sigma_m(self) -> np.ndarray:
        m = self.metadata
        return thickness_from_delay(
            self._grid("sigma_s"), m["refractive_index"], m["medium_index"], m["convention"]
        )

    @property
    def fringe_index(self) -> np.ndarray:
        return self._grid("fringe_index", dtype=np.int64)

    @property
    def status(self) -> np.ndarray:
        return np.array([e.status for e in self.estimates]).reshape(self.shape)

    def status_counts(self) -> dict:
        values, counts = np.unique([e.status for e in self.estimates], return_counts=True)
        return {str(v): int(c) for v, c in zip(values, counts)}

    def save(self, directory) -> dict:
        """Write depth/sigma/fringe CSV matrices, a PGM preview and metadata JSON."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "depth": out / "depth_m.csv",
            "sigma": out / "sigma_m.csv",
            "fringe": out / "fringe_index.csv",
            "graymap": out / "depth.pgm",
            "metadata": out / "metadata.json",
        }
        write_matrix(paths["depth"], self.depth_m)
        write_matrix(paths["sigma"], self.sigma_m)
        write_matrix(paths["fringe"], self.fringe_index)
        write_pgm16(paths["graymap"], self.depth_m)
        write_json(paths["metadata"], {**self.metadata, "status_counts": self.status_counts()})
        return {k: str(v) for k, v in paths.items()}


def _estimate_pixel(t_true, index, params, config, bank, noise, efficiencies, fit_kwargs):
    tally = sample_pixel(t_true, params, config, bank, noise, pixel_rng(config.seed, index))
    cal = calibrate_tally(tally, efficiencies, bank.splitter_ratios)
    try:
        return mle_delay(cal, params, **fit_kwargs)
    except NonIdentifiableError:
        return PixelEstimate.failed("non_identifiable", cal.n11_cal + cal.n20_cal + cal.n02_cal)
    except AmbiguityError as exc:
        return PixelEstimate.failed("ambiguous", candidates=exc.candidates)


def raster_scan(
    sample: SampleMap,
    params: InterferenceParams,
    config: AcquisitionConfig,
    bank: DetectorBank | None = None,
    noise: PhaseNoiseModel = NO_NOISE,
    *,
    efficiencies=None,
    convention: str = PAPER_ND,
    lock_quadrature: bool = False,
    fringe_hint: int | None = None,
    search_window=None,
) -> DepthImage:
    """Scan every pixel in row-major order and estimate its depth.

    With ``lock_quadrature`` the interferometer phase is set so the middle of
    the map's delay range sits on a quadrature point.  By default the fit is
    confined to the fringe branch holding that middle delay.  Calibration
    uses ``efficiencies`` (default: the bank's true values).  Pixel failures
    are recorded in the image, not raised.
    """
    bank = bank or DetectorBank()
    delays = sample.delays(convention)
    mid = 0.5 * (delays.min() + delays.max())
    if lock_quadrature and not params.degenerate:
        params = replace(params, phase_rad=quadrature_phase(params.detuning_hz, mid))
    if not params.degenerate and params.detuning_hz > 0:
        if np.ptp(delays) > half_period_delay(params.detuning_hz):
            warnings.warn("sample delay range exceeds one fringe half-period; expect ambiguity")
    if fringe_hint is None and search_window is None:
        fringe_hint = fringe_index(mid, params)
    eff = np.asarray(efficiencies if efficiencies is not None else bank.efficiencies, dtype=float)
    fit_kwargs = dict(
        search_window=search_window,
        fringe_hint=fringe_hint,
        refractive_index=sample.refractive_index,
        medium_index=sample.medium_index,
        convention=convention,
        reference_delay_s=sample.substrate_delay_s,
    )
    flat = delays.ravel()

    def work(i):
        return _estimate_pixel(flat[i], i, params, config, bank, noise, eff, fit_kwargs)

    estimates = ordered_map(work, range(flat.size))
    metadata = {
        "detuning_hz": params.detuning_hz,
        "interference": params.to_dict(),
        "dwell_s": config.dwell_s,
        "seed": int(config.seed),
        "convention": convention,
        "refractive_index": sample.refractive_index,
        "medium_index": sample.medium_index,
        "substrate_delay_s": sample.substrate_delay_s,
        "pixel_pitch_m": sample.pixel_pitch_m,
        "scan_order": "row-major",
        "fringe_hint": fringe_hint,
    }
    return DepthImage(estimates, delays.shape, metadata)


def step_statistics(image: DepthImage, sample: SampleMap) -> dict:
    """Recovered step between the two height levels of ``sample``.

    A flat sample is split into its first and second half in scan order, so
    the step estimate should vanish.  Maps with more than two levels only get
    pixel counts.
    """
    heights = sample.height_m.ravel()
    levels = np.unique(heights)
    est = np.array(image.estimates, dtype=object)
    ok = np.array([e.ok for e in est])
    stats = {"levels_m": levels.tolist(), "n_pixels": int(heights.size), "n_ok": int(ok.sum())}
    if len(levels) == 1:
        half = heights.size // 2
        low_mask = np.zeros(heights.size, dtype=bool)
        low_mask[:half] = True
        high_mask = ~low_mask
        true_step = 0.0
    elif len(levels) == 2:
        low_mask = heights == levels[0]
        high_mask = ~low_mask
        true_step = float(levels[1] - levels[0])
    else:
        return stats
    s2 = [e for e, m in zip(est, low_mask) if m]
    s1 = [e for e, m in zip(est, high_mask) if m]
    d1 = np.array([e.depth_m for e in s1 if e.ok])
    d2 = np.array([e.depth_m for e in s2 if e.ok])
    if len(d1) == 0 or len(d2) == 0:
        return stats
    step = float(d1.mean() - d2.mean())
    stats.update(
        step_true_m=true_step,
        step_estimate_m=step,
        step_bias_m=step - true_step,
        step_stderr_m=float(math.sqrt(d1.var(ddof=1) / len(d1) + d2.var(ddof=1) / len(d2)))
        if len(d1) > 1 and len(d2) > 1
        else math.nan,
        mean_depth_s1_m=float(d1.mean()),
        mean_depth_s2_m=float(d2.mean()),
        n_s1=int(len(d1)),
        n_s2=int(len(d2)),
    )
    if len(d1) > 1 and len(d2) > 1:
        stats["two_step_precision_m"] = two_step_precision(s1, s2)
    return stats


def _derived_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(k),)).generate_state(1, np.uint64)[0])


@dataclass
class StepResult:
    detuning_hz: float
    sigma_d_m: float
    sigma_t_s: float
    step_estimate_m: float
    n_fisher_total: float
    crb_sigma_t_s: float
    depths_s1_m: np.ndarray
    depths_s2_m: np.ndarray


def step_experiment(
    step_height_m: float,
    detunings,
    pixels_per_step: int,
    params: InterferenceParams | None = None,
    config: AcquisitionConfig | None = None,
    bank: DetectorBank | None = None,
    noise: PhaseNoiseModel = NO_NOISE,
    *,
    refractive_index: float = SU8_INDEX,
    convention: str = PAPER_ND,
) -> list[StepResult]:
    """Two-step precision versus detuning.

    For each detuning, ``pixels_per_step`` pixels on the film (S1) and on bare
    substrate (S2) are scanned with the phase locked so that the two levels
    straddle a quadrature point symmetrically about zero delay.
    """
    detunings = [float(d) for d in detunings]
    if not detunings:
        raise ParameterError("need at least one detuning")
    params = params or InterferenceParams()
    config = config or AcquisitionConfig()
    step_delay = delay_from_thickness(step_height_m, refractive_index, 1.0, convention)
    heights = np.zeros((2, int(pixels_per_step)))
    heights[1] = step_height_m
    sample = SampleMap(heights, refractive_index, substrate_delay_s=-0.5 * step_delay)
    results = []
    for k, dnu in enumerate(detunings):
        local = replace(params, detuning_hz=dnu)
        cfg = replace(config, seed=_derived_seed(config.seed, k))
        image = raster_scan(
            sample, local, cfg, bank, noise, convention=convention, lock_quadrature=True
        )
        s2, s1 = image.estimates[:pixels_per_step], image.estimates[pixels_per_step:]
        sigma_d = two_step_precision(s1, s2)
        sigma_t = two_step_precision(s1, s2, attr="delay_s")
        d1 = np.array([e.depth_m for e in s1 if e.ok])
        d2 = np.array([e.depth_m for e in s2 if e.ok])
        locked = replace(local, phase_rad=quadrature_phase(dnu, 0.0))
        n_used = np.mean([e.n_pairs_used for e in image.estimates if e.ok])
        info = [n_used * fisher_information(t, locked) for t in (-0.5 * step_delay, 0.5 * step_delay)]
        results.append(
            StepResult(
                dnu, sigma_d, sigma_t, float(d1.mean() - d2.mean()), float(np.mean(info)),
                math.sqrt(sum(1.0 / i for i in info)), d1, d2,
            )
        )
    return results


@dataclass
class SweepRow:
    detuning_hz: float
    n_fisher_total: float
    precision_t_s: float
    precision_err_t_s: float
    crb_sigma_t_s: float
    sigma_d_m: float
    n_blocks: int
    delays_s: np.ndarray

    @property
    def ratio_to_crb(self) -> float:
        return self.precision_t_s / self.crb_sigma_t_s


def single_pixel_sweep(
    detunings,
    n_repeats: int = 500,
    params: InterferenceParams | None = None,
    config: AcquisitionConfig | None = None,
    noise: PhaseNoiseModel = NO_NOISE,
    *,
    n_pairs: float = 1e4,
    block_size: int = 50,
    bank: DetectorBank | None = None,
    refractive_index: float = SU8_INDEX,
    convention: str = PAPER_ND,
) -> list[SweepRow]:
    """Repeated estimation on one pixel at the quadrature point, per detuning.

    The pair rate is rescaled so each repeat sees ``n_pairs`` pairs on average
    over the configured dwell.  Precision is the mean standard deviation of
    blocks of ``block_size`` repeats, with the spread across blocks as error bar.
    """
    params = params or InterferenceParams()
    config = (config or AcquisitionConfig()).with_expected_pairs(n_pairs)
    bank = bank or DetectorBank()
    eff = np.asarray(bank.efficiencies)
    rows = []
    for k, dnu in enumerate(detunings):
        local = replace(params, detuning_hz=float(dnu))
        t_true = quadrature_delay(local)
        seed = _derived_seed(config.seed, k)
        fit_kwargs = dict(refractive_index=refractive_index, convention=convention)

        def work(r):
            tally = sample_pixel(t_true, local, config, bank, noise, pixel_rng(seed, r))
            return mle_delay(calibrate_tally(tally, eff, bank.splitter_ratios), local, **fit_kwargs)

        estimates = ordered_map(work, range(int(n_repeats)))
        precision, err = block_precision(estimates, block_size)
        n_used = float(np.mean([e.n_pairs_used for e in estimates]))
        total = n_used * fisher_information(t_true, local)
        rows.append(
            SweepRow(
                float(dnu), total, precision, err, 1.0 / math.sqrt(total),
                float(thickness_from_delay(precision, refractive_index, 1.0, convention)),
                len(estimates) // block_size, np.array([e.delay_s for e in estimates]),
            )
        )
    return rows
