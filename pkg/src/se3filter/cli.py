"""Command-line entry points: ``simulate``, ``run`` and ``eval``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import CheiralityError
from .integrate import run_sequence
from .io import (
    DEFAULTS,
    FILTER_KEYS,
    OPTIONAL_KEYS,
    SIM_KEYS,
    ConfigError,
    DataError,
    FrameRecord,
    atomic_write,
    compose,
    convert,
    filter_config,
    format_csv,
    increments,
    read_config,
    read_observations,
    read_poses,
    write_observations,
    write_poses,
)
from .synth import NoiseSpec, TwistSchedule, gen_observations, gen_scene, increment_errors

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

RESULT_COLUMNS = ("frame", "rot_err_deg", "trans_err_m", "mean_residual", "n_used_points")


@dataclass
class RunReport:
    records: list = field(default_factory=list)

    @property
    def has_errors(self) -> bool:
        return bool(self.records) and self.records[0].rot_err_deg is not None

    def summary(self) -> dict:
        if not self.has_errors:
            return {}
        rot = np.array([r.rot_err_deg for r in self.records])
        trans = np.array([r.trans_err_m for r in self.records])
        return {
            "mean_rot_err_deg": float(rot.mean()),
            "max_rot_err_deg": float(rot.max()),
            "mean_trans_err_m": float(trans.mean()),
            "max_trans_err_m": float(trans.max()),
        }

    def to_csv(self) -> str:
        if self.has_errors:
            header = RESULT_COLUMNS
            rows = [(r.frame, r.rot_err_deg, r.trans_err_m, r.mean_residual, r.n_used_points)
                    for r in self.records]
        else:
            header = ("frame", "mean_residual", "n_used_points")
            rows = [(r.frame, r.mean_residual, r.n_used_points) for r in self.records]
        return format_csv(header, rows)


def build_report(frames, est_incs, stats, gt_poses=None) -> RunReport:
    """Per-frame records; errors compare estimated increments with those of ``gt_poses``."""
    report = RunReport()
    errs = None
    if gt_poses is not None:
        errs = [increment_errors(a, b) for a, b in zip(est_incs, increments(gt_poses))]
    for i, (frame, (res, n)) in enumerate(zip(frames, stats)):
        rec = FrameRecord(frame=frame, mean_residual=res, n_used_points=n)
        if errs is not None:
            rec.rot_err_deg, rec.trans_err_m = errs[i]
        report.records.append(rec)
    return report


def _add_setting_flags(p: argparse.ArgumentParser, keys) -> None:
    for key in keys:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, metavar="V")


def _settings(args, required) -> dict:
    """Defaults, overlaid by the config file (which must be complete), then flags."""
    values = dict(DEFAULTS)
    if args.config is not None:
        values.update(read_config(args.config, required))
    for key in DEFAULTS:
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = convert(key, raw)
    return values


def _filter(batches, values):
    cfg = filter_config(values)
    est_incs, stats, _ = run_sequence(batches, cfg)
    for i, E in enumerate(est_incs):
        if not np.all(np.isfinite(E)):
            raise FloatingPointError(f"frame {batches[i].frame}: estimate diverged")
    return est_incs, stats


def _print_summary(report: RunReport, out) -> None:
    s = report.summary()
    n = len(report.records)
    if s:
        print(f"{n} frames; mean rot err {s['mean_rot_err_deg']:.6g} deg, "
              f"mean trans err {s['mean_trans_err_m']:.6g} m; written to {out}")
    else:
        print(f"{n} frames; written to {out}")


def cmd_simulate(args) -> int:
    values = _settings(args, FILTER_KEYS + SIM_KEYS)
    out = Path(args.out_dir)
    try:
        schedule = TwistSchedule.with_jumps(
            [f for f in values["discontinuity_frames"] if 1 < f <= values["frames"]])
        scene = gen_scene(values["points"], (values["depth_min"], values["depth_max"]),
                          seed=values["seed"])
        noise = NoiseSpec(values["sigma"], values["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if values["frames"] < 1:
        raise ConfigError("frames must be >= 1")
    batches, truth = gen_observations(schedule, scene, values["frames"], noise)
    gt_poses = compose(truth)
    est_incs, stats = _filter(batches, values)
    report = build_report([b.frame for b in batches], est_incs, stats, gt_poses)
    out.mkdir(parents=True, exist_ok=True)
    write_observations(out / "obs.txt", batches)
    write_poses(out / "gt_poses.txt", gt_poses)
    write_poses(out / "est_poses.txt", compose(est_incs))
    atomic_write(out / "results.csv", report.to_csv())
    _print_summary(report, out)
    return EXIT_OK


def cmd_run(args) -> int:
    values = _settings(args, FILTER_KEYS)
    filter_config(values)  # fail on bad config before touching data
    batches = read_observations(args.obs)
    if not batches:
        raise DataError(f"{args.obs}: no frames")
    gt_poses = None
    if args.gt_poses is not None:
        gt_poses = read_poses(args.gt_poses)
        if len(gt_poses) != len(batches) + 1:
            raise DataError(f"{args.gt_poses}: expected {len(batches) + 1} pose lines "
                            f"for {len(batches)} frames, got {len(gt_poses)}")
    est_incs, stats = _filter(batches, values)
    report = build_report([b.frame for b in batches], est_incs, stats, gt_poses)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write(out, report.to_csv())
    if args.est_poses is not None:
        write_poses(args.est_poses, compose(est_incs))
    _print_summary(report, out)
    return EXIT_OK


def cmd_eval(args) -> int:
    gt, est = read_poses(args.gt), read_poses(args.est)
    if len(gt) != len(est):
        raise DataError(f"pose files differ in length: {len(gt)} vs {len(est)}")
    if args.burn_in < 0:
        raise ConfigError("burn-in must be >= 0")
    errs = [increment_errors(a, b) for a, b in zip(increments(est), increments(gt))]
    rows = [(f, r, t) for f, (r, t) in enumerate(errs, 1) if f > args.burn_in]
    if rows:
        mean = ("mean", float(np.mean([r[1] for r in rows])), float(np.mean([r[2] for r in rows])))
    else:
        mean = ("mean", "nan", "nan")
    atomic_write(args.out, format_csv(("frame", "rot_err_deg", "trans_err_m"), rows + [mean]))
    print(f"{len(rows)} frames evaluated; mean rot err {mean[1]} deg, "
          f"mean trans err {mean[2]} m; written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="se3filter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic sequence and filter it")
    p.add_argument("--config", default=None, help="key = value settings file")
    p.add_argument("--out-dir", default=".", help="directory for the output files")
    _add_setting_flags(p, FILTER_KEYS + SIM_KEYS + OPTIONAL_KEYS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="filter an observation file")
    p.add_argument("--obs", required=True, help="observation file")
    p.add_argument("--config", default=None, help="key = value settings file")
    p.add_argument("--out", default="results.csv", help="per-frame CSV report")
    p.add_argument("--est-poses", default=None, help="write estimated poses here")
    p.add_argument("--gt-poses", default=None, help="ground-truth poses for error columns")
    _add_setting_flags(p, FILTER_KEYS + OPTIONAL_KEYS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="per-frame increment errors between two pose files")
    p.add_argument("--gt", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--out", default="metrics.csv")
    p.add_argument("--burn-in", type=int, default=10, help="frames skipped at the start")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheiralityError, FloatingPointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
