"""Command-line entry point.

Subcommands: simulate, run, evaluate, place-mesh. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import fileio, pipeline, placement, synthetic
from .config import PipelineConfig, load_config
from .evaluation import evaluate_ate

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    p = _Parser(prog="dynslam", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render a synthetic dataset")
    sim.add_argument("scene", help="YAML scene description")
    sim.add_argument("out_dir", help="output dataset directory")

    run = sub.add_parser("run", help="run the full pipeline on a dataset")
    run.add_argument("dataset", help="TUM-style dataset directory")
    run.add_argument("detections", help="detection file")
    run.add_argument("out_dir", help="output directory")
    run.add_argument("--config", help="key=value configuration file")
    run.add_argument("--no-filter", action="store_true",
                     help="bypass outlier filtering (ablation mode)")
    run.add_argument("--no-fusion", action="store_true",
                     help="skip map fusion")
    for f in dataclasses.fields(PipelineConfig):
        run.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}",
                         metavar="VALUE", help=f"override config key {f.name}")

    ev = sub.add_parser("evaluate", help="absolute trajectory error")
    ev.add_argument("estimated", help="estimated trajectory (TUM format)")
    ev.add_argument("groundtruth", help="ground-truth trajectory (TUM format)")
    ev.add_argument("--max-dt", type=float, default=0.02,
                    help="timestamp association tolerance, seconds")
    ev.add_argument("--csv", help="write per-frame error table here")
    ev.add_argument("--no-align", action="store_true",
                    help="skip rigid trajectory alignment")

    pm = sub.add_parser("place-mesh", help="place a human mesh in the world")
    pm.add_argument("mesh", help="input OBJ mesh, origin at the waist")
    pm.add_argument("track", help="track file with world center points")
    pm.add_argument("poses", help="camera trajectory (TUM format)")
    pm.add_argument("frame_index", type=int, help="index into the track")
    pm.add_argument("out", help="output OBJ path")
    return p


def _overrides(args) -> dict:
    out = {}
    for key, value in vars(args).items():
        if key.startswith("cfg_") and value is not None:
            out[key[4:]] = value
    return out


def _cmd_simulate(args) -> int:
    scene = synthetic.load_scene(args.scene)
    synthetic.generate_sequence(scene, args.out_dir)
    print(f"wrote {len(scene.frame_times())} frames to {args.out_dir}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    k = pipeline.intrinsics_from_metadata(args.dataset)
    groups = fileio.read_detections(args.detections)
    frames = fileio.read_tum_sequence(args.dataset, cfg.depth_scale)
    result = pipeline.run_pipeline(frames, groups, k, cfg,
                                   use_filter=not args.no_filter,
                                   fuse=not args.no_fusion)
    pipeline.write_outputs(result, args.out_dir)
    print(f"processed {len(result.trajectory)} frames "
          f"({result.divergent_frames} divergent), "
          f"{len(result.tracks)} tracks, {len(result.cloud)} map points")
    return 0


def _cmd_evaluate(args) -> int:
    est = fileio.read_trajectory(args.estimated)
    gt = fileio.read_trajectory(args.groundtruth)
    result = evaluate_ate(est, gt, max_dt=args.max_dt, align=not args.no_align)
    print(f"{result.rmse:.6f}")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("timestamp,error_m\n")
            for t, e in zip(result.times, result.errors):
                f.write(f"{t:.6f},{e:.9f}\n")
    return 0


def _cmd_place_mesh(args) -> int:
    mesh = fileio.read_obj(args.mesh)
    track = fileio.read_track(args.track)
    traj = fileio.read_trajectory(args.poses)
    if not 0 <= args.frame_index < len(track):
        print(f"frame index {args.frame_index} out of range "
              f"(track has {len(track)} points)", file=sys.stderr)
        return EXIT_DATA
    stamp, p_w = track[args.frame_index]
    # camera rotation of the trajectory pose nearest in time
    i = int(np.argmin(np.abs(traj.times - stamp)))
    T = placement.human_to_world(traj.poses[i].rotation, p_w)
    fileio.write_obj(placement.transform_mesh(mesh, T), args.out)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "run": _cmd_run,
    "evaluate": _cmd_evaluate,
    "place-mesh": _cmd_place_mesh,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except fileio.FileFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except np.linalg.LinAlgError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
