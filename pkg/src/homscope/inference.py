"""Fisher information, Cramer-Rao bounds and maximum-likelihood delay estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .detectors import CoincidenceTally
from .errors import (
    AmbiguityError,
    InsufficientDataError,
    NonIdentifiableError,
    ParameterError,
    PlanningError,
)
from .model import (
    PAPER_ND,
    InterferenceParams,
    branch_window,
    delay_from_thickness,
    fringe_index,
    outcome_arrays,
    p11,
    p11_derivative,
    quadrature_phase,
    thickness_from_delay,
)

DEFAULT_INDEX = 1.58
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _fisher_terms(probs, derivs):
    """sum_i (dP_i/dt)^2 / P_i, with inf where a zero-probability outcome still moves."""
    total = 0.0
    for p, d in zip(probs, derivs):
        p = np.asarray(p, dtype=float)
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(p > 0, d * d / np.where(p > 0, p, 1.0), np.where(d != 0, np.inf, 0.0))
        total = total + term
    return total


def _default_fd_step(params: InterferenceParams) -> float:
    scale = params.temporal_width_s
    if not params.degenerate and params.detuning_hz > 0:
        scale = min(scale, 1.0 / params.detuning_hz)
    return 1e-6 * scale


def fisher_information(t, params: InterferenceParams, method: str = "analytic", step: float | None = None):
    """Per-pair Fisher information about the delay, in s^-2.

    Sums over the three outcomes {11, 20, 02}.  ``method="finite_difference"``
    replaces the analytic derivatives by central differences with ``step``.
    Where an outcome has zero probability but a nonzero one-sided slope the
    information is unbounded and ``inf`` is returned.
    """
    t = np.asarray(t, dtype=float)
    probs = outcome_arrays(t, params)
    if method == "analytic":
        d = np.asarray(p11_derivative(t, params), dtype=float)
        derivs = (d, -0.5 * d, -0.5 * d)
    elif method == "finite_difference":
        h = step or _default_fd_step(params)
        up = outcome_arrays(t + h, params)
        down = outcome_arrays(t - h, params)
        derivs = tuple((u - w) / (2.0 * h) for u, w in zip(up, down))
    else:
        raise ParameterError(f"unknown method {method!r}")
    info = _fisher_terms(probs, derivs)
    # a probability touching 0 or 1 sits on the envelope apex: one-sided slopes are nonzero
    p = probs[0]
    edge = ((p <= 0) | (p >= 1)) & (params.visibility > 0)
    info = np.where(edge, np.inf, info)
    return float(info) if info.ndim == 0 else info


@dataclass(frozen=True)
class FisherReport:
    fisher_per_pair: float
    n_pairs: float
    total_information: float
    crb_sigma_t: float
    crb_sigma_d: float
    status: str = "ok"  # "ok", "degenerate" (unbounded information) or "uninformative"


def crb_from_information(
    total_information: float, refractive_index: float = DEFAULT_INDEX, medium_index: float = 1.0,
    convention: str = PAPER_ND,
) -> tuple[float, float, str]:
    """(sigma_t, sigma_d, status) for a total Fisher information N*F in s^-2."""
    if math.isinf(total_information):
        return 0.0, 0.0, "degenerate"
    if total_information <= 0:
        return math.inf, math.inf, "uninformative"
    sigma_t = 1.0 / math.sqrt(total_information)
    sigma_d = float(thickness_from_delay(sigma_t, refractive_index, medium_index, convention))
    return sigma_t, sigma_d, "ok"


def crb_report(
    t: float, params: InterferenceParams, n_pairs: float, refractive_index: float = DEFAULT_INDEX,
    medium_index: float = 1.0, convention: str = PAPER_ND,
) -> FisherReport:
    if n_pairs < 1:
        raise ParameterError("n_pairs must be >= 1")
    f = fisher_information(t, params)
    total = math.inf if math.isinf(f) else n_pairs * f
    sigma_t, sigma_d, status = crb_from_information(total, refractive_index, medium_index, convention)
    return FisherReport(f, float(n_pairs), total, sigma_t, sigma_d, status)


@dataclass(frozen=True)
class PixelEstimate:
    delay_s: float
    sigma_s: float
    depth_m: float
    fringe_index: int
    log_likelihood: float
    n_pairs_used: float
    status: str = "ok"
    candidates: tuple = field(default=(), compare=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @classmethod
    def failed(cls, status: str, n_pairs_used: float = 0.0, candidates=()) -> "PixelEstimate":
        nan = math.nan
        return cls(nan, nan, nan, 0, nan, n_pairs_used, status, tuple(candidates))


def log_likelihood(t, n11: float, n_bunch: float, params: InterferenceParams):
    """Multinomial log-likelihood sum_i N_i log P_i(t), up to a t-independent constant.

    Both bunching outcomes share one probability, so only their sum matters.
    """
    p = np.asarray(p11(t, params), dtype=float)
    with np.errstate(divide="ignore"):
        ll = np.zeros_like(p)
        if n11:
            ll = ll + n11 * np.log(p)
        if n_bunch:
            ll = ll + n_bunch * np.log(0.5 * (1.0 - p))
    return float(ll) if ll.ndim == 0 else ll


def _golden_max(f, a: float, b: float, tol: float) -> float:
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _local_maxima(values: np.ndarray) -> np.ndarray:
    left = np.concatenate([[-np.inf], values[:-1]])
    right = np.concatenate([values[1:], [-np.inf]])
    idx = np.flatnonzero((values > left) & (values >= right) & np.isfinite(values))
    return idx


def fringe_period(params: InterferenceParams) -> float:
    if params.degenerate or params.detuning_hz == 0:
        return params.temporal_width_s
    return 1.0 / params.detuning_hz


def mle_delay(
    tally: CoincidenceTally,
    params: InterferenceParams,
    search_window: tuple[float, float] | None = None,
    *,
    fringe_hint: int | None = None,
    grid_step: float | None = None,
    tol: float | None = None,
    refractive_index: float = DEFAULT_INDEX,
    medium_index: float = 1.0,
    convention: str = PAPER_ND,
    reference_delay_s: float = 0.0,
    ambiguity_nats: float = 2.0,
) -> PixelEstimate:
    """Maximum-likelihood delay from a (preferably calibrated) tally.

    A dense grid (default step: half fringe period / 400) locates the best
    branch, then golden-section search refines it to ``tol`` (default 1e-6 of
    the fringe period).  The default window is fringe branch 0, or the branch
    named by ``fringe_hint``.  ``sigma_s`` comes from the observed information
    (negative second difference of the log-likelihood) at the optimum.
    ``depth_m`` converts ``delay - reference_delay_s`` to thickness.

    Raises NonIdentifiableError for empty or single-outcome tallies and for a
    flat likelihood, and AmbiguityError when the window holds more than one
    local optimum within ``ambiguity_nats`` of the best and no hint picks a
    branch.
    """
    n11, n20, n02 = tally.counts()
    nb = n20 + n02
    total = n11 + nb
    if total <= 0:
        raise NonIdentifiableError("tally holds no coincidences")
    if sum(1 for n in (n11, n20, n02) if n > 0) < 2:
        raise NonIdentifiableError("all coincidences fall in one outcome")
    if params.visibility == 0:
        raise NonIdentifiableError("zero visibility: the likelihood does not depend on delay")

    period = fringe_period(params)
    if search_window is None:
        lo, hi = branch_window(params, fringe_hint or 0)
    else:
        lo, hi = map(float, search_window)
        if fringe_hint is not None:
            b_lo, b_hi = branch_window(params, fringe_hint)
            lo, hi = max(lo, b_lo), min(hi, b_hi)
    if not hi > lo:
        raise ParameterError("empty search window")

    step = grid_step or period / 800.0
    n_grid = int(math.ceil((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, n_grid)
    ll = log_likelihood(grid, n11, nb, params)
    finite = ll[np.isfinite(ll)]
    if finite.size == 0 or np.ptp(finite) <= 1e-12 * (1.0 + abs(finite.max())):
        raise NonIdentifiableError("likelihood is flat over the search window")

    peaks = _local_maxima(ll)
    peaks = peaks[np.argsort(-ll[peaks])]
    # the envelope slope makes branch ends slightly non-monotone; such edge bumps sit
    # far below the optimum, while a genuine fringe alias nearly ties with it
    peaks = peaks[ll[peaks] >= ll[peaks[0]] - ambiguity_nats]
    candidates = [(float(grid[i]), float(ll[i])) for i in peaks]
    if len(peaks) > 1:
        raise AmbiguityError(
            f"{len(peaks)} likelihood maxima in window [{lo:.6g}, {hi:.6g}] s; give a fringe hint",
            candidates,
        )
    best = peaks[0]

    def f(t):
        return log_likelihood(t, n11, nb, params)

    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, n_grid - 1)]
    t_hat = _golden_max(f, a, b, tol or 1e-6 * period)
    ll_hat = f(t_hat)

    h = step / 4.0
    curvature = (f(t_hat + h) - 2.0 * ll_hat + f(t_hat - h)) / (h * h)
    info = -curvature
    if not (math.isfinite(info) and info > 0):
        info = total * fisher_information(t_hat, params)
    sigma = 1.0 / math.sqrt(info) if info > 0 else math.inf

    depth = float(
        thickness_from_delay(t_hat - reference_delay_s, refractive_index, medium_index, convention)
    )
    return PixelEstimate(
        float(t_hat), sigma, depth, fringe_index(t_hat, params), float(ll_hat), float(total)
    )


def _values(estimates, attr: str) -> np.ndarray:
    out = []
    for e in estimates:
        if isinstance(e, PixelEstimate):
            if e.ok:
                out.append(getattr(e, attr))
        else:
            out.append(float(e))
    return np.asarray(out, dtype=float)


def two_step_precision(estimates_s1, estimates_s2, attr: str = "depth_m") -> float:
    """sqrt(var(S1) + var(S2)) with unbiased sample variances.

    Accepts PixelEstimate lists (failed pixels are skipped) or plain numbers.
    """
    s1 = _values(estimates_s1, attr)
    s2 = _values(estimates_s2, attr)
    if len(s1) < 2 or len(s2) < 2:
        raise InsufficientDataError("each step needs at least two estimates")
    return math.sqrt(np.var(s1, ddof=1) + np.var(s2, ddof=1))


def block_precision(estimates, block_size: int = 50, attr: str = "delay_s") -> tuple[float, float]:
    """Mean of per-block standard deviations and their spread across blocks."""
    values = _values(estimates, attr)
    n_blocks = len(values) // block_size
    if block_size < 2 or n_blocks < 2:
        raise InsufficientDataError(
            f"need at least two blocks of {block_size}, got {len(values)} estimates"
        )
    blocks = values[: n_blocks * block_size].reshape(n_blocks, block_size)
    sds = blocks.std(axis=1, ddof=1)
    return float(sds.mean()), float(sds.std(ddof=1))


@dataclass(frozen=True)
class ScanPass:
    detuning_hz: float
    n_pairs: float
    dwell_s: float
    expected_sigma_m: float
    half_period_depth_m: float


@dataclass(frozen=True)
class ScanPlan:
    passes: tuple
    target_sigma_m: float
    prior_range_m: float

    def to_dict(self) -> dict:
        return {
            "prior_range_m": self.prior_range_m,
            "target_sigma_m": self.target_sigma_m,
            "passes": [p.__dict__ for p in self.passes],
        }


def quadrature_information(detuning_hz: float, params: InterferenceParams) -> float:
    """Per-pair information at the rising quadrature point centred on zero delay."""
    local = replace(params, detuning_hz=detuning_hz, phase_rad=quadrature_phase(detuning_hz, 0.0))
    return fisher_information(0.0, local)


def plan_coarse_to_fine(
    prior_range_m: float,
    target_sigma_m: float,
    params: InterferenceParams | None = None,
    *,
    pairs_budget: float = 4000.0,
    pairs_dwell_s: float = 0.5,
    min_pairs: float = 100.0,
    max_detuning_hz: float = 30.1e12,
    refractive_index: float = DEFAULT_INDEX,
    medium_index: float = 1.0,
    convention: str = PAPER_ND,
    max_passes: int = 8,
) -> ScanPlan:
    """Sequence of detunings that reaches ``target_sigma_m`` without fringe ambiguity.

    The first pass uses the largest detuning whose half-period (as depth)
    still covers ``prior_range_m``.  If ``pairs_budget`` pairs per pixel do not
    reach the target there, each following pass uses the largest detuning
    whose half-period exceeds five times the previous pass's depth sigma.  The
    final pass's pair count is cut to what the target needs (not below
    ``min_pairs``).  ``pairs_dwell_s`` is the dwell that yields
    ``pairs_budget`` pairs and converts pair counts to dwell times.
    """
    if not target_sigma_m > 0:
        raise ParameterError("target_sigma_m must be > 0")
    if prior_range_m < 0:
        raise ParameterError("prior_range_m must be >= 0")
    params = params or InterferenceParams()

    def depth(delay):
        return float(thickness_from_delay(delay, refractive_index, medium_index, convention))

    def sigma_d(dnu, n):
        return depth(1.0 / math.sqrt(n * quadrature_information(dnu, params)))

    span = delay_from_thickness(prior_range_m, refractive_index, medium_index, convention)
    dnu = max_detuning_hz if span <= 0 else min(max_detuning_hz, 1.0 / (2.0 * span))
    passes = []
    for _ in range(max_passes):
        half_depth = depth(0.5 / dnu)
        best = sigma_d(dnu, pairs_budget)
        if best <= target_sigma_m:
            n = max(min_pairs, math.ceil(pairs_budget * (best / target_sigma_m) ** 2))
            n = min(n, pairs_budget)
            dwell = pairs_dwell_s * n / pairs_budget
            passes.append(ScanPass(dnu, n, dwell, sigma_d(dnu, n), half_depth))
            return ScanPlan(tuple(passes), target_sigma_m, prior_range_m)
        passes.append(ScanPass(dnu, pairs_budget, pairs_dwell_s, best, half_depth))
        limit = delay_from_thickness(5.0 * best, refractive_index, medium_index, convention)
        next_dnu = min(max_detuning_hz, (1.0 - 1e-9) / (2.0 * limit))
        if next_dnu <= dnu * (1.0 + 1e-9):
            break
        dnu = next_dnu
    raise PlanningError(
        f"target {target_sigma_m:.3g} m unreachable; best achievable {best:.3g} m", best_sigma_m=best
    )
