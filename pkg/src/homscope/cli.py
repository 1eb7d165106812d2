"""Command-line front end: ``homscope {dip,image,precision,calibrate,plan}``.

Every command reads an optional JSON run configuration (schema in
``homscope/data/runconfig.schema.json``, also shipped under ``docs/``), writes
CSV/JSON artifacts to the output directory and exits with

    0  success
    2  invalid configuration or arguments
    3  unusable data (empty calibration, too few estimates)
    4  infeasible request (planning target out of reach)

Relative paths inside a configuration file are resolved against the file's
directory.  Results depend only on the configuration and its seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, kernels
from .acquisition import (
    AcquisitionConfig,
    PhaseNoiseModel,
    pixel_rng,
    sample_dip_scan,
    sample_pairs,
)
from .detectors import (
    DetectorBank,
    calibrate_tally,
    channel_efficiencies,
    klyshko_efficiencies,
    normalized_p11,
    p11_standard_error,
)
from .errors import (
    CalibrationError,
    HomscopeError,
    InsufficientDataError,
    NonIdentifiableError,
    ParameterError,
    PlanningError,
)
from .formats import write_json, write_table
from .inference import plan_coarse_to_fine
from .model import PAPER_ND, InterferenceParams, p11, quadrature_phase
from .scene import (
    SU8_INDEX,
    SampleMap,
    make_ket_sample,
    raster_scan,
    single_pixel_sweep,
    step_experiment,
    step_statistics,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INFEASIBLE = 0, 2, 3, 4


class ConfigError(Exception):
    """Invalid run configuration or command-line arguments (exit 2)."""


def load_schema() -> dict:
    text = resources.files("homscope").joinpath("data/runconfig.schema.json").read_text()
    return json.loads(text)


def validate_document(doc) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"  {where}: {err.message}")
        raise ConfigError("configuration does not match the schema:\n" + "\n".join(lines))


@dataclass
class RunConfig:
    """Validated, fully resolved run configuration."""

    params: InterferenceParams
    quadrature_lock: bool
    acquisition: AcquisitionConfig
    bank: DetectorBank
    noise: PhaseNoiseModel
    calibration_efficiencies: tuple | None
    sample: dict
    precision: dict
    convention: str
    refractive_index: float
    output_dir: Path
    seed: int
    base_dir: Path = field(default=Path("."))

    @classmethod
    def from_document(cls, doc: dict, base_dir=".", output_dir=None) -> "RunConfig":
        validate_document(doc)
        base = Path(base_dir)
        inter = dict(doc.get("interference", {}))
        phase = inter.pop("phase_rad", "quadrature")
        lock = phase == "quadrature"
        try:
            params = InterferenceParams(**inter, phase_rad=0.0 if lock else float(phase))
            seed = int(doc.get("seed", 0))
            acq = doc.get("acquisition", {})
            if isinstance(acq.get("transmission"), list):
                acq = {**acq, "transmission": tuple(acq["transmission"])}
            acquisition = AcquisitionConfig(**acq, seed=seed)
            bank = DetectorBank.from_dict(doc.get("detectors", {}))
            noise = PhaseNoiseModel(**doc.get("noise", {}))
        except (ParameterError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        cal = None
        if "calibration_file" in doc:
            path = base / doc["calibration_file"]
            if not path.is_file():
                raise ConfigError(f"calibration_file not found: {path}")
            try:
                cal = DetectorBank.from_json(path).efficiencies
            except (ParameterError, ValueError, KeyError) as exc:
                raise ConfigError(f"bad calibration_file {path}: {exc}") from exc
        sample = dict(doc.get("sample", {}))
        if "path" in sample:
            sample["path"] = str(base / sample["path"])
            if not Path(sample["path"]).is_file():
                raise ConfigError(f"sample file not found: {sample['path']}")
        precision = {
            "step_height_m": 4.6e-6,
            "pixels_per_step": 500,
            "n_repeats": 500,
            "n_pairs": 1e4,
            "block_size": 50,
            "histogram_bins": 40,
            **doc.get("precision", {}),
        }
        out = Path(output_dir) if output_dir else base / doc.get("output_dir", "homscope_out")
        return cls(
            params, lock, acquisition, bank, noise, cal, sample, precision,
            doc.get("convention", PAPER_ND), float(doc.get("refractive_index", SU8_INDEX)),
            out, seed, base,
        )

    @classmethod
    def load(cls, path=None, output_dir=None) -> "RunConfig":
        if path is None:
            return cls.from_document({}, ".", output_dir)
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_document(doc, path.parent, output_dir)

    @property
    def efficiencies(self) -> np.ndarray:
        eff = self.calibration_efficiencies or self.bank.efficiencies
        return np.asarray(eff, dtype=float)

    def resolved(self) -> dict:
        """The configuration with every default filled in, for provenance."""
        inter = self.params.to_dict()
        if self.quadrature_lock:
            inter["phase_rad"] = "quadrature"
        return {
            "interference": inter,
            "acquisition": {k: v for k, v in self.acquisition.to_dict().items() if k != "seed"},
            "detectors": self.bank.to_dict(),
            "calibration_efficiencies": (
                list(self.calibration_efficiencies) if self.calibration_efficiencies else None
            ),
            "noise": self.noise.to_dict(),
            "sample": self.sample,
            "precision": self.precision,
            "convention": self.convention,
            "refractive_index": self.refractive_index,
            "seed": self.seed,
            "kernel_backend": kernels.BACKEND,
            "version": __version__,
        }


def _parse_detunings(values) -> list[float]:
    out = []
    for v in values or []:
        for part in str(v).split(","):
            if part.strip():
                try:
                    out.append(float(part))
                except ValueError as exc:
                    raise ConfigError(f"bad detuning {part!r}") from exc
    if not out:
        raise ConfigError("--detunings needs at least one value")
    if any(d <= 0 for d in out):
        raise ConfigError("detunings must be > 0")
    return out


def _delay_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected LO_S,HI_S") from exc
    if not hi >= lo:
        raise argparse.ArgumentTypeError("need LO_S <= HI_S")
    return lo, hi


def _prepare_output(cfg: RunConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


def cmd_dip(args, cfg: RunConfig) -> int:
    params = cfg.params
    if args.degenerate:
        params = replace(params, degenerate=True, detuning_hz=0.0, phase_rad=0.0)
    elif args.two_colour:
        params = replace(params, degenerate=False)
        if params.detuning_hz == 0:
            raise ConfigError("--two-colour needs interference.detuning_hz > 0")
    if cfg.quadrature_lock and not params.degenerate:
        params = replace(params, phase_rad=quadrature_phase(params.detuning_hz, 0.0))
    if args.points < 1:
        raise ConfigError("--points must be >= 1")
    if args.delay_range:
        lo, hi = args.delay_range
    else:
        lo, hi = -0.75 * params.temporal_width_s, 0.75 * params.temporal_width_s
    delays = np.array([lo]) if args.points == 1 else np.linspace(lo, hi, args.points)

    tallies = sample_dip_scan(delays, params, cfg.acquisition, cfg.bank, cfg.noise)
    rows = []
    for t, raw in zip(delays, tallies):
        cal = calibrate_tally(raw, cfg.efficiencies, cfg.bank.splitter_ratios)
        try:
            est, err = normalized_p11(cal), p11_standard_error(cal)
        except InsufficientDataError:
            est = err = math.nan
        rows.append((t, p11(t, params), est, raw.n11_raw, raw.n20_raw, raw.n02_raw, err))
    out = _prepare_output(cfg)
    columns = ["delay_s", "p11_model", "p11_est", "n11", "n20", "n02", "sigma"]
    write_table(out / "dip.csv", columns, rows)
    doc = cfg.resolved()
    doc["interference"] = {**params.to_dict(), "quadrature_lock": cfg.quadrature_lock}
    write_json(out / "dip.json", {"command": "dip", "config": doc, "points": len(rows)})
    print(f"wrote {out / 'dip.csv'} ({len(rows)} rows)")
    return EXIT_OK


def _load_sample(cfg: RunConfig, path=None) -> SampleMap:
    spec = dict(cfg.sample)
    if path is not None:
        spec = {"path": str(path)}
    if "path" in spec:
        p = Path(spec["path"])
        if not p.is_file():
            raise ConfigError(f"sample file not found: {p}")
        try:
            return SampleMap.load(p)
        except (ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad sample file {p}: {exc}") from exc
    try:
        return make_ket_sample(
            spec.get("step_height_m", 4.6e-6),
            spec.get("refractive_index", cfg.refractive_index),
            tuple(spec.get("grid", (27, 78))),
            spec.get("substrate_delay_s", 0.0),
            spec.get("pixel_pitch_m", 15e-6),
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_image(args, cfg: RunConfig) -> int:
    sample = _load_sample(cfg, args.sample)
    image = raster_scan(
        sample, cfg.params, cfg.acquisition, cfg.bank, cfg.noise,
        efficiencies=cfg.efficiencies, convention=cfg.convention,
        lock_quadrature=cfg.quadrature_lock,
    )
    out = _prepare_output(cfg)
    paths = image.save(out)
    sample.save(out / "sample_height_m.csv")
    stats = step_statistics(image, sample)
    counts = image.status_counts()
    summary = {
        "command": "image",
        "config": cfg.resolved(),
        "shape": list(image.shape),
        "status_counts": counts,
        "ambiguous_pixels": counts.get("ambiguous", 0),
        "non_identifiable_pixels": counts.get("non_identifiable", 0),
        "step": stats,
        "artifacts": {k: Path(v).name for k, v in paths.items()},
    }
    write_json(out / "summary.json", summary)
    step = stats.get("step_estimate_m")
    msg = f"step estimate {step:.6g} m" if step is not None else "no step estimate"
    print(f"wrote depth image to {out}; {msg}; status {counts}")
    return EXIT_OK


def _histogram_rows(s1, s2, bins):
    both = np.concatenate([s1, s2])
    edges = np.histogram_bin_edges(both, bins=bins)
    h1, _ = np.histogram(s1, edges)
    h2, _ = np.histogram(s2, edges)
    return [(edges[i], edges[i + 1], h1[i], h2[i]) for i in range(bins)]


def cmd_precision(args, cfg: RunConfig) -> int:
    detunings = _parse_detunings(args.detunings)
    prec = cfg.precision
    out = _prepare_output(cfg)
    params = replace(cfg.params, degenerate=False)
    columns = [
        "detuning_hz", "n_fisher_total_per_s2", "sigma_t_s", "sigma_t_err_s", "sigma_d_m",
        "crb_sigma_t_s", "ratio_to_crb", "blocks",
    ]
    rows = []
    bins = int(prec["histogram_bins"])
    if args.mode == "step":
        results = step_experiment(
            prec["step_height_m"], detunings, int(prec["pixels_per_step"]), params,
            cfg.acquisition, cfg.bank, cfg.noise,
            refractive_index=cfg.refractive_index, convention=cfg.convention,
        )
        for r in results:
            rows.append((
                r.detuning_hz, r.n_fisher_total, r.sigma_t_s, math.nan, r.sigma_d_m,
                r.crb_sigma_t_s, r.sigma_t_s / r.crb_sigma_t_s, 0,
            ))
            write_table(
                out / f"histogram_{r.detuning_hz:.6g}_hz.csv",
                ["bin_lo_m", "bin_hi_m", "count_s1", "count_s2"],
                _histogram_rows(r.depths_s1_m, r.depths_s2_m, bins),
            )
    else:
        results = single_pixel_sweep(
            detunings, int(prec["n_repeats"]), params, cfg.acquisition, cfg.noise,
            n_pairs=float(prec["n_pairs"]), block_size=int(prec["block_size"]), bank=cfg.bank,
            refractive_index=cfg.refractive_index, convention=cfg.convention,
        )
        for r in results:
            rows.append((
                r.detuning_hz, r.n_fisher_total, r.precision_t_s, r.precision_err_t_s, r.sigma_d_m,
                r.crb_sigma_t_s, r.ratio_to_crb, r.n_blocks,
            ))
            counts, edges = np.histogram(r.delays_s, bins=bins)
            write_table(
                out / f"histogram_{r.detuning_hz:.6g}_hz.csv",
                ["bin_lo_s", "bin_hi_s", "count"],
                [(edges[i], edges[i + 1], counts[i]) for i in range(bins)],
            )
    write_table(out / "precision.csv", columns, rows)
    write_json(
        out / "precision.json",
        {"command": "precision", "mode": args.mode, "detunings_hz": detunings,
         "config": cfg.resolved()},
    )
    print(f"wrote {out / 'precision.csv'} ({len(rows)} rows)")
    return EXIT_OK


def cmd_calibrate(args, cfg: RunConfig) -> int:
    if args.pairs < 0:
        raise ConfigError("--pairs must be >= 0")
    params = cfg.params
    far = 10.0 * params.temporal_width_s
    rng = pixel_rng(cfg.seed, 0)
    raw = sample_pairs(args.pairs, far, params, cfg.bank, cfg.acquisition.transmissions, rng)
    coefficients = klyshko_efficiencies(raw.klyshko_matrix, raw.singles)
    # at large delay each arm receives photon a or b with equal odds
    transmission = float(np.mean(cfg.acquisition.transmissions))
    eff = channel_efficiencies(coefficients, cfg.bank.splitter_ratios, transmission)
    out = _prepare_output(cfg)
    calibrated = DetectorBank(
        tuple(float(np.clip(e, 0.0, 1.0)) for e in eff), cfg.bank.splitter_ratios
    )
    calibrated.to_json(out / "calibration.json")
    write_json(
        out / "calibration_report.json",
        {
            "command": "calibrate",
            "pairs": int(args.pairs),
            "delay_s": far,
            "klyshko_coefficients": coefficients,
            "efficiencies": eff,
            "singles": raw.singles,
            "coincidences": raw.klyshko_matrix,
            "config": cfg.resolved(),
        },
    )
    print("efficiencies " + " ".join(f"{e:.4f}" for e in eff))
    return EXIT_OK


def cmd_plan(args, cfg: RunConfig) -> int:
    acq = cfg.acquisition
    budget = args.pairs_budget if args.pairs_budget is not None else acq.expected_pairs
    dwell = acq.dwell_s * budget / acq.expected_pairs
    out = _prepare_output(cfg)
    try:
        plan = plan_coarse_to_fine(
            args.prior_range, args.target_sigma, replace(cfg.params, degenerate=False),
            pairs_budget=budget, pairs_dwell_s=dwell, max_detuning_hz=args.max_detuning,
            refractive_index=cfg.refractive_index, convention=cfg.convention,
        )
    except PlanningError as exc:
        write_json(
            out / "plan.json",
            {"command": "plan", "feasible": False, "best_sigma_m": exc.best_sigma_m,
             "config": cfg.resolved()},
        )
        print(f"infeasible: best achievable sigma {exc.best_sigma_m:.4g} m", file=sys.stderr)
        return EXIT_INFEASIBLE
    write_json(
        out / "plan.json",
        {"command": "plan", "feasible": True, **plan.to_dict(), "config": cfg.resolved()},
    )
    for p in plan.passes:
        print(f"{p.detuning_hz:.4g} Hz  dwell {p.dwell_s:.4g} s  sigma {p.expected_sigma_m:.4g} m")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homscope", description="Two-colour HOM depth microscopy simulator"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="run configuration JSON")
    common.add_argument("-o", "--output-dir", help="overrides output_dir from the config")
    sub = parser.add_subparsers(dest="command", required=True)

    dip = sub.add_parser("dip", parents=[common], help="simulate an interference trace")
    model = dip.add_mutually_exclusive_group()
    model.add_argument("--degenerate", action="store_true")
    model.add_argument("--two-colour", "--two-color", dest="two_colour", action="store_true")
    dip.add_argument(
        "--delay-range", type=_delay_range, metavar="LO_S,HI_S",
        help="delay grid limits in s, e.g. --delay-range=-4e-13,4e-13",
    )
    dip.add_argument("--points", type=int, default=201)
    dip.set_defaults(func=cmd_dip)

    image = sub.add_parser("image", parents=[common], help="raster-scan a sample")
    image.add_argument("sample", nargs="?", help="height-map CSV (default: config or KET glyph)")
    image.set_defaults(func=cmd_image)

    prec = sub.add_parser("precision", parents=[common], help="precision versus detuning")
    prec.add_argument("--mode", choices=("step", "single-pixel"), default="step")
    prec.add_argument("--detunings", nargs="*", default=None, help="Hz; space or comma separated")
    prec.set_defaults(func=cmd_precision)

    cal = sub.add_parser("calibrate", parents=[common], help="Klyshko calibration run")
    cal.add_argument("--pairs", type=int, default=1_000_000)
    cal.set_defaults(func=cmd_calibrate)

    plan = sub.add_parser("plan", parents=[common], help="coarse-to-fine detuning plan")
    plan.add_argument("--prior-range", type=float, required=True, help="depth range, m")
    plan.add_argument("--target-sigma", type=float, required=True, help="depth sigma, m")
    plan.add_argument("--pairs-budget", type=float, help="pairs per pixel per pass")
    plan.add_argument("--max-detuning", type=float, default=30.1e12, help="Hz")
    plan.set_defaults(func=cmd_plan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = RunConfig.load(args.config, args.output_dir)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InsufficientDataError, NonIdentifiableError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PlanningError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParameterError, HomscopeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
