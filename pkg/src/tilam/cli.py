"""Command line harness around the library.

Five subcommands: simulate (world and truth generation), run (one mode,
one seed), compare (paired modes over N seeds), converge (initial-offset
study) and export (PLY/CSV dumps of scans and map). Every command writes
its artifacts into --out and prints the key results to stdout.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_run_config, save_config_yaml
from .ekf import write_ekf_log
from .errors import (DegenerateConfiguration, DegeneratePatch, EmptyMarkers,
                     GimbalLock, InsufficientSamples, NoCorrespondences,
                     NonPositiveInnovationCovariance)
from .geometry import RigidTransform
from .pipeline import (ALL_MODES, RunResult, convergence_study,
                       format_comparison, format_convergence, format_stats,
                       plan_route, run_mode, scan_at_pose, scan_tick_indices,
                       write_text)
from .registration import append_alignment_log, merge_maps
from .report import (plot_comparison, plot_convergence, plot_errors, plot_map,
                     plot_trajectory)
from .scan import save_cloud_csv, save_ply
from .sensor_sim import save_trajectory_csv

log = logging.getLogger(__name__)

_PACKAGE_ERRORS = (DegenerateConfiguration, DegeneratePatch, EmptyMarkers,
                   GimbalLock, InsufficientSamples, NoCorrespondences,
                   NonPositiveInnovationCovariance)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _write_run_artifacts(out: Path, result: RunResult) -> None:
    save_trajectory_csv(out / "trajectory_truth.csv", result.times, result.truth)
    save_trajectory_csv(out / "trajectory_estimate.csv", result.times,
                        result.estimate)
    write_text(out / "stats.txt", format_stats(result))
    plot_trajectory(out / "trajectory.png", result)
    plot_errors(out / "errors.png", result)
    if result.alignments:
        for i, rec in enumerate(result.alignments):
            append_alignment_log(out / "alignments.csv", rec.scan_index,
                                 rec.result, rec.angles, header=(i == 0))
    if result.global_map is not None:
        save_ply(out / "map.ply", result.global_map.cloud, result.global_map.labels)
        plot_map(out / "map.png", result.global_map, result)
    if result.states:
        write_ekf_log(out / "ekf_log.csv", result.times, result.states,
                      result.innovations)


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    path, poses, times = plan_route(cfg)
    truth = np.array([p.as_vector() for p in poses])
    save_trajectory_csv(out / "trajectory_truth.csv", times, truth)
    save_config_yaml(cfg, out / "config_resolved.yaml")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(4)[3])
    labeled = scan_at_pose(cfg, poses[0], truth[0], rng)
    save_ply(out / "scan_000.ply", labeled.cloud, labeled.labels)
    plot_map(out / "world.png", labeled)
    print(f"route of {len(times) - 1} ticks over {cfg.path_length:g} m "
          f"written to {out}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    result = run_mode(cfg, args.mode, cfg.seed)
    _write_run_artifacts(out, result)
    print(format_stats(result))
    print(f"artifacts written to {out}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    seeds = [cfg.seed + k for k in range(args.seeds)]
    by_mode = {m: [] for m in ALL_MODES}
    blocks = []
    for seed in seeds:
        results = {m: run_mode(cfg, m, seed) for m in ALL_MODES}
        for m in ALL_MODES:
            by_mode[m].append(results[m])
        blocks.append(format_comparison(results))
    mean_d = {m: float(np.mean([r.stats.mean_d for r in by_mode[m]]))
              for m in ALL_MODES}
    total = {m: float(np.mean([r.timing.total_s for r in by_mode[m]]))
             for m in ALL_MODES}
    ordering = (mean_d["tilam"] < mean_d["icp_slam"] < mean_d["dead_reckoning"])
    summary = [
        f"seeds: {len(seeds)}",
        f"base_seed: {seeds[0]}",
        f"mean_d_tilam_m: {mean_d['tilam']:.9g}",
        f"mean_d_icp_slam_m: {mean_d['icp_slam']:.9g}",
        f"mean_d_dead_reckoning_m: {mean_d['dead_reckoning']:.9g}",
        f"total_compute_tilam_s: {total['tilam']:.9g}",
        f"total_compute_icp_slam_s: {total['icp_slam']:.9g}",
        f"error_ordering_ok: {int(ordering)}",
    ]
    if total["tilam"] > 0:
        summary.append("time_ratio_baseline_over_tilam: "
                       f"{total['icp_slam'] / total['tilam']:.9g}")
    text = "\n".join(summary) + "\n\n" + "\n\n".join(blocks)
    write_text(out / "stats_compare.txt", text)
    plot_comparison(out / "compare.png", by_mode)
    print("\n".join(summary))
    print(f"artifacts written to {out}")
    return 0


def _cmd_converge(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    records = convergence_study(cfg, cfg.seed)
    text = format_convergence(records)
    write_text(out / "convergence.csv", text)
    plot_convergence(out / "convergence.png", records, cfg.convergence.threshold)
    print(text)
    print(f"artifacts written to {out}")
    return 0


def _cmd_export(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    _, poses, times = plan_route(cfg)
    truth = np.array([p.as_vector() for p in poses])
    save_trajectory_csv(out / "trajectory_truth.csv", times, truth)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(4)[3])
    ticks = scan_tick_indices(cfg, cfg.tilam_scan_spacing)
    global_map = None
    identity = RigidTransform(np.eye(3), np.zeros(3))
    for k, tick in enumerate(ticks):
        labeled = scan_at_pose(cfg, poses[tick], truth[tick], rng)
        save_ply(out / f"scan_{k:03d}.ply", labeled.cloud, labeled.labels)
        save_cloud_csv(out / f"scan_{k:03d}.csv", labeled.cloud, labeled.labels)
        global_map = labeled if global_map is None else \
            merge_maps(global_map, labeled, identity, cfg.icp.voxel_size)
    if global_map is not None:
        save_ply(out / "map.ply", global_map.cloud, global_map.labels)
    print(f"{len(ticks)} truth-placed scans and the merged map written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilam",
        description="Terrain-inclination-aided localization and mapping "
                    "on synthetic inclined terrain.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, metavar="FILE",
                        help="YAML run configuration (defaults when omitted)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
    common.add_argument("--out", default="tilam_out", metavar="DIR",
                        help="output directory (default: tilam_out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="generate the world, truth route and anchor scan")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("run", parents=[common], help="one mode, one seed")
    p.add_argument("--mode", choices=["tilam", "icp", "dr"], default="tilam",
                   help="localization mode (default: tilam)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", parents=[common],
                       help="paired runs of all modes over N seeds")
    p.add_argument("--seeds", type=int, default=3, metavar="N",
                   help="number of consecutive seeds (default: 3)")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("converge", parents=[common],
                       help="initial-offset convergence study")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("export", parents=[common],
                       help="dump truth-placed scans and map as PLY/CSV")
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _PACKAGE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
