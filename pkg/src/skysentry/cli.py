"""Command-line interface.

Exit codes: 0 success, 2 configuration problems (bad files, missing fields),
3 runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, SkySentryError
from .geometry import curve_to_json, fit_calib, read_calib_samples
from .pipeline import bench, load_config, run_scenario, write_outputs
from .synthsky import (
    dump_ground_truth,
    frame_filename,
    load_scenario,
    render_frame,
    write_pgm,
)


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario).scaled(args.scale)
    dump = Path(args.dump_frames) if args.dump_frames else None
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)
    n = scenario.n_frames
    for k in range(n):
        t = scenario.frame_time(k)
        for cam in scenario.cameras:
            frame = render_frame(scenario, cam.id, t)
            if dump is not None:
                write_pgm(dump / frame_filename(cam.id, k), frame.pixels)
    if dump is not None:
        dump_ground_truth(scenario, dump / "truth.jsonl")
        print(f"wrote {n} frames x {len(scenario.cameras)} cameras to {dump}")
    else:
        print(f"rendered {n} frames x {len(scenario.cameras)} cameras (not saved)")
    return 0


def _run_and_report(config, frames_dir=None) -> int:
    result = run_scenario(config, frames_dir=frames_dir)
    outdir = config.output_dir
    paths = write_outputs(result, outdir, webhook=config.turbine_webhook)
    if config.figures:
        from .report import save_run_figures, write_posterior_csvs

        save_run_figures(result.detail, result.metrics, outdir / "figures")
        write_posterior_csvs(result.detail, outdir / "tracks")
    m = result.metrics
    print(f"frames: {m.n_frames}  detections: {m.n_detections}  "
          f"confirmed tracks: {m.n_tracks_confirmed}")
    recall = f"{m.recall:.3f}" if m.recall is not None else "NA"
    precision = f"{m.precision:.3f}" if m.precision is not None else "NA"
    print(f"recall: {recall}  precision: {precision}")
    print(f"commands: {m.n_stop} STOP / {m.n_run} RUN")
    print(f"throughput: {result.fps:.2f} fps (wall)")
    print(f"outputs in {outdir}: " + ", ".join(p.name for p in paths.values()))
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    return _run_and_report(config)


def _cmd_replay(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    frames_dir = Path(args.frames_dir)
    if not frames_dir.is_dir():
        raise ConfigError(f"frames directory not found: {frames_dir}")
    return _run_and_report(config, frames_dir=frames_dir)


def _apply_overrides(config, args) -> None:
    if getattr(args, "out", None):
        config.output_dir = Path(args.out)
    if getattr(args, "workers", None):
        config.workers = args.workers
    if getattr(args, "turbine_webhook", None):
        config.turbine_webhook = Path(args.turbine_webhook)
    if getattr(args, "no_figures", False):
        config.figures = False
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed


def _cmd_fit_calib(args) -> int:
    samples = read_calib_samples(args.samples)
    curve = fit_calib(samples)
    text = curve_to_json(curve)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.figure:
        from .report import save_calib_figure

        save_calib_figure(samples, curve, Path(args.figure))
    return 0


def _cmd_bench(args) -> int:
    config = load_config(args.config)
    _apply_overrides(args=args, config=config)
    report = bench(config, args.seconds)
    for line in report.lines():
        print(line)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        payload = {
            "frames": report.frames,
            "wall_s": report.wall_s,
            "fps": report.fps,
            "stage_seconds": report.stage_seconds,
            "frame_rate_target_hz": report.frame_rate_target_hz,
            "meets_target": report.meets_target,
            "resolution": report.resolution,
            "host": report.host,
        }
        (outdir / "bench.json").write_text(json.dumps(payload, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skysentry",
        description="Deterministic sky-surveillance simulation and evaluation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a scenario's frames and ground truth")
    p.add_argument("scenario", help="scenario JSON path")
    p.add_argument("--dump-frames", metavar="DIR", help="write PGM frames and truth.jsonl here")
    p.add_argument("--scale", type=float, default=1.0, help="resolution scale factor")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("run", help="run the full pipeline on a config")
    p.add_argument("config", help="pipeline config JSON path")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--workers", type=int, help="worker threads")
    p.add_argument("--seed", type=int, help="seed override")
    p.add_argument("--turbine-webhook", metavar="PATH", help="append commands to this file")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("replay", help="run the pipeline over pre-rendered frames")
    p.add_argument("frames_dir", help="directory of cam<id>_f<k>.pgm frames")
    p.add_argument("config", help="pipeline config JSON path")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--workers", type=int, help="worker threads")
    p.add_argument("--seed", type=int, help="seed override")
    p.add_argument("--turbine-webhook", metavar="PATH", help="append commands to this file")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("fit-calib", help="fit the size/distance curve to CSV samples")
    p.add_argument("samples", help="CSV with header distance_m,diag_px")
    p.add_argument("--out", help="write fitted curve JSON here")
    p.add_argument("--figure", help="write a samples+fit figure here")
    p.set_defaults(fn=_cmd_fit_calib)

    p = sub.add_parser("bench", help="measure wall-clock pipeline throughput")
    p.add_argument("config", help="pipeline config JSON path")
    p.add_argument("--seconds", type=float, required=True, help="scenario seconds to process")
    p.add_argument("--out", help="write bench.json here")
    p.add_argument("--workers", type=int, help="worker threads")
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (SkySentryError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
