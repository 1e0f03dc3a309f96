"""End-to-end runs over synthetic terrain.

Plans the route, draws paired sensor streams, and drives the three
localization modes (inclination-aided filter, scan-matching baseline,
raw odometry) on identical noise so their errors are directly
comparable. Also hosts the error markers, the compute-time bookkeeping
and the initial-offset convergence study.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RunConfig
from .ekf import (ControlInput, EkfState, MeasurementNoise, ProcessNoise,
                  dead_reckon_interval, run_interval)
from .errors import EmptyMarkers, NoCorrespondences
from .geometry import (Pose6D, RigidTransform, apply_transform, build_rotation,
                       rotation_to_euler, wrap_angle)
from .registration import IcpResult, icp_align, merge_maps
from .scan import (FRAME_WORLD, LabeledCloud, PointCloud, cloud_to_world,
                   separate_ground)
from .sensor_sim import (body_rates, simulate_scan, step_robot, terrain_attitude,
                         terrain_height)
from .terrain_model import (PlannedPath, extract_patches, fit_inclination_model,
                            inclination_samples)

log = logging.getLogger(__name__)

MODE_TILAM = "tilam"
MODE_ICP = "icp_slam"
MODE_DR = "dead_reckoning"
ALL_MODES = (MODE_TILAM, MODE_ICP, MODE_DR)


@dataclass
class TimingStats:
    """Wall-clock split between pose propagation and scan matching."""

    localization_s: float = 0.0
    localization_calls: int = 0
    localization_ticks: int = 0
    matching_s: float = 0.0
    matching_calls: int = 0

    @property
    def total_s(self) -> float:
        return self.localization_s + self.matching_s

    @property
    def localization_per_tick_s(self) -> float:
        return self.localization_s / self.localization_ticks \
            if self.localization_ticks else 0.0

    @property
    def localization_per_call_s(self) -> float:
        return self.localization_s / self.localization_calls \
            if self.localization_calls else 0.0

    @property
    def matching_per_call_s(self) -> float:
        return self.matching_s / self.matching_calls if self.matching_calls else 0.0


@dataclass
class ErrorStats:
    """Position error sampled at evenly spaced marker times."""

    marker_times: np.ndarray
    mean_axis: np.ndarray
    var_axis: np.ndarray
    mean_d: float
    var_d: float


@dataclass
class AlignmentRecord:
    scan_index: int
    result: IcpResult
    angles: np.ndarray


@dataclass
class RunResult:
    mode: str
    seed: int
    times: np.ndarray
    truth: np.ndarray
    estimate: np.ndarray
    stats: ErrorStats
    timing: TimingStats
    scan_ticks: list = field(default_factory=list)
    global_map: LabeledCloud | None = None
    alignments: list = field(default_factory=list)
    innovations: np.ndarray | None = None
    states: list = field(default_factory=list)


@dataclass
class ConvergenceRecord:
    offset: np.ndarray
    period: float
    converged: bool
    times: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float).reshape(3)


@dataclass
class SensorStreams:
    """Per-tick noisy readings plus the scanner's private generator."""

    v_meas: np.ndarray
    omega_meas: np.ndarray
    imu_angles: np.ndarray
    scan_rng: np.random.Generator


def plan_route(cfg: RunConfig) -> tuple[PlannedPath, list[Pose6D], np.ndarray]:
    """Integrate the commanded route over the terrain.

    The robot holds constant forward speed; the yaw rate follows the heading
    profile by its chain rule in odometer distance. Returns the planned path
    polyline, the true pose per tick and the tick times.
    """
    v, dt = cfg.speed, cfg.dt
    n = int(round(cfg.path_length / (v * dt)))
    times = np.arange(n + 1) * dt
    x0, y0 = cfg.path.start
    theta0 = float(cfg.path.heading_at(0.0))
    z0 = float(terrain_height(cfg.terrain, x0, y0))
    a0, p0 = terrain_attitude(cfg.terrain, x0, y0, theta0)
    poses = [Pose6D(np.array([x0, y0, z0]), theta0, a0, p0)]
    for i in range(n):
        s = i * v * dt
        yaw_rate = float(cfg.path.turn_rate_at(s, v))
        poses.append(step_robot(cfg.terrain, poses[-1], v, yaw_rate, dt))
    xy = np.array([p.position[:2] for p in poses])
    heading = np.array([p.theta for p in poses])
    arc = np.arange(n + 1) * v * dt
    return PlannedPath(xy, heading, arc), poses, times


def make_streams(cfg: RunConfig, poses: list[Pose6D], seed: int) -> SensorStreams:
    """Draw one run's worth of sensor noise from independent child streams.

    The child order is fixed, so every mode sees identical encoder, gyro
    and attitude noise for a given seed regardless of how many scans it
    takes. Zero sigmas give exact readings.
    """
    n = len(poses) - 1
    enc, gyro, imu, scan = (np.random.default_rng(s)
                            for s in np.random.SeedSequence(seed).spawn(4))
    v_meas = cfg.speed + enc.normal(0.0, cfg.noise.encoder_vel_sigma, n)
    omega = np.array([body_rates(poses[i], poses[i + 1], cfg.dt) for i in range(n)])
    omega_meas = omega + gyro.normal(0.0, cfg.noise.gyro_sigma, (n, 3))
    truth_angles = np.array([p.angles for p in poses[1:]])
    imu_angles = wrap_angle(truth_angles
                            + imu.normal(0.0, cfg.noise.imu_angle_sigma, (n, 3)))
    return SensorStreams(v_meas, omega_meas, imu_angles, scan)


def scan_tick_indices(cfg: RunConfig, spacing: float) -> list[int]:
    """Ticks where the robot stops to scan: odometer multiples of spacing."""
    n = int(round(cfg.path_length / (cfg.speed * cfg.dt)))
    ticks = []
    k = 0
    while k * spacing <= cfg.path_length + 1e-9:
        tick = int(round(k * spacing / (cfg.speed * cfg.dt)))
        if tick > n:
            break
        ticks.append(tick)
        k += 1
    return ticks


def _identity() -> RigidTransform:
    return RigidTransform(np.eye(3), np.zeros(3))


def _controls(streams: SensorStreams, dt: float, start: int, end: int) -> list:
    return [ControlInput(np.array([streams.v_meas[i], 0.0, 0.0]),
                         streams.omega_meas[i], dt) for i in range(start, end)]


def scan_at_pose(cfg: RunConfig, truth_pose: Pose6D, est_mean: np.ndarray,
             rng: np.random.Generator,
             timing: TimingStats | None = None) -> LabeledCloud:
    """Simulate a scan at the true pose, place it at the estimated one.

    Simulating the rays stands in for the physical sensor and stays off
    the clock; separating ground from structure is pipeline work and is
    billed to the matching phase when timing is given.
    """
    cloud, _ = simulate_scan(cfg.terrain, cfg.obstacles, cfg.scanner, truth_pose, rng)
    est_pose = Pose6D(est_mean[0:3].copy(), est_mean[3], est_mean[4], est_mean[5])
    world = cloud_to_world(cloud, est_pose, cfg.scanner.mount_offset)
    t0 = time.perf_counter()
    labeled = separate_ground(world, cfg.separation)
    if timing is not None:
        timing.matching_s += time.perf_counter() - t0
    return labeled


def _crop_to_coverage(src_pts: np.ndarray, dst_pts: np.ndarray) -> np.ndarray:
    """Keep source points inside the target's bounding box, with slack.

    The scan reaches well past the mapped region, and structure out there
    has no true counterpart: it can only latch onto whichever mapped
    neighbor happens to sit nearby and drag the fit.
    """
    lo = dst_pts.min(axis=0) - 0.5
    hi = dst_pts.max(axis=0) + 0.5
    return src_pts[np.all((src_pts >= lo) & (src_pts <= hi), axis=1)]


def _align_to_map(cfg: RunConfig, labeled: LabeledCloud, global_map: LabeledCloud,
                  est_mean: np.ndarray, with_ground: bool = False):
    """Match a placed scan against the map and correct pose and points.

    Trunks and other upright structure lock down the horizontal fit;
    with_ground additionally matches the terrain-labeled overlap band,
    which pins height and tilt far better than cylinder walls do. Falls
    back to the identity correction when either side offers nothing to
    match.
    """
    src_parts = []
    dst_parts = []
    trunk_src = labeled.non_terrain_points()
    trunk_dst = global_map.non_terrain_points()
    if len(trunk_src) and len(trunk_dst):
        kept = _crop_to_coverage(trunk_src, trunk_dst)
        src_parts.append(kept if len(kept) >= 50 else trunk_src)
        dst_parts.append(trunk_dst)
    if with_ground:
        ground_src = labeled.terrain_points()
        ground_dst = global_map.terrain_points()
        if len(ground_src) and len(ground_dst):
            kept = _crop_to_coverage(ground_src, ground_dst)
            # A thin overlap band is expected here; an empty one means
            # the strips do not meet and ground would only add junk pairs.
            if len(kept) >= 50:
                src_parts.append(kept)
                dst_parts.append(ground_dst)
    if not src_parts:
        log.warning("scan matching skipped: nothing to match")
        return None, labeled, est_mean
    src = PointCloud(np.vstack(src_parts), FRAME_WORLD)
    dst = PointCloud(np.vstack(dst_parts), FRAME_WORLD)
    try:
        result = icp_align(src, dst, _identity(), cfg.icp)
    except NoCorrespondences:
        log.warning("scan matching skipped: no usable correspondences")
        return None, labeled, est_mean
    # Refine with a gate a couple of voxels wide. The wide first pass
    # pulls the pose in from odometry-sized errors but keeps enough
    # mismatched pairs to tilt the answer by a degree or two, and that
    # residual attitude error feeds straight back into the filter.
    try:
        fine = icp_align(src, dst, result.transform,
                         replace(cfg.icp, max_correspondence_dist=0.2))
        result = IcpResult(
            fine.transform, fine.final_mse,
            result.iterations + fine.iterations,
            fine.converged, result.elapsed + fine.elapsed,
            np.concatenate([result.mse_history, fine.mse_history]))
    except NoCorrespondences:
        log.warning("alignment refinement skipped, keeping coarse fit")
    corr = result.transform
    moved = apply_transform(corr, labeled.cloud.points)
    corrected = LabeledCloud(
        PointCloud(moved, FRAME_WORLD, labeled.cloud.scanline_breaks.copy()),
        labeled.labels.copy())
    rot = corr.rotation @ build_rotation(est_mean[3], est_mean[4], est_mean[5])
    theta, alpha, phi = rotation_to_euler(rot)
    pos = corr.rotation @ est_mean[0:3] + corr.translation
    mean = np.array([pos[0], pos[1], pos[2], theta, alpha, phi])
    return result, corrected, mean


def _noise_matrices(cfg: RunConfig) -> tuple[ProcessNoise, MeasurementNoise, np.ndarray]:
    q = ProcessNoise(np.diag([cfg.ekf.q_pos] * 3 + [cfg.ekf.q_ang] * 3))
    rm = MeasurementNoise(np.eye(3) * cfg.ekf.rm_angle_sigma ** 2)
    p0 = np.diag([cfg.ekf.p0_pos_sigma ** 2] * 3 + [cfg.ekf.p0_ang_sigma ** 2] * 3)
    return q, rm, p0


def run_tilam(cfg: RunConfig, seed: int | None = None) -> RunResult:
    """Inclination-aided run: filter between scans, match scans to the map."""
    seed = cfg.seed if seed is None else seed
    path, poses, times = plan_route(cfg)
    truth = np.array([p.as_vector() for p in poses])
    streams = make_streams(cfg, poses, seed)
    n = len(poses) - 1
    ticks = scan_tick_indices(cfg, cfg.tilam_scan_spacing)
    q, rm, p0 = _noise_matrices(cfg)
    timing = TimingStats()
    innovations = np.full((n, 3), np.nan)
    alignments = []
    global_map = None

    state = EkfState(truth[0].copy(), p0)
    states = [state]
    for j, tick in enumerate(ticks):
        labeled = scan_at_pose(cfg, poses[tick], state.mean, streams.scan_rng,
                               timing)
        if global_map is None:
            global_map = labeled
        else:
            result, corrected, mean = _align_to_map(cfg, labeled, global_map, state.mean)
            if result is not None:
                timing.matching_s += result.elapsed
                timing.matching_calls += 1
                angles = np.array(rotation_to_euler(result.transform.rotation))
                alignments.append(AlignmentRecord(j, result, angles))
                # Re-seed the belief at the matched pose. The covariance
                # restarts too: what the coast accumulated describes the
                # pre-correction mean, and its stale cross terms would let
                # the next interval's innovations shove the fresh pose
                # around far harder than its actual error warrants.
                state = EkfState(mean, p0.copy())
                states[-1] = state
                labeled = corrected
            t0 = time.perf_counter()
            global_map = merge_maps(global_map, labeled, _identity(),
                                    cfg.icp.voxel_size)
            timing.matching_s += time.perf_counter() - t0
        end = ticks[j + 1] if j + 1 < len(ticks) else n
        if end <= tick:
            continue
        t0 = time.perf_counter()
        s0 = path.arc_length[tick]
        window = path.window(s0, min(path.arc_length[end], s0 + cfg.model.fit_reach))
        patches = extract_patches(window, labeled, cfg.model.patch_length,
                                  cfg.model.half_width)
        model = fit_inclination_model(inclination_samples(patches), cfg.model.window)
        # The maps are only as level as the pose the scan was placed at,
        # and a constant attitude error in them turns into a steady
        # innovation bias the filter integrates all interval long. The
        # robot is standing still right here and its tilt sensing is
        # absolute, so one reading pins the maps back to the world frame.
        # The first scan is placed at the known start pose; there is no
        # placement error to cancel and the reading would only push its
        # own noise into an otherwise sound map.
        if j > 0:
            model.attitude_offset = wrap_angle(
                streams.imu_angles[tick] - model.evaluate(state.mean[0:3]))
        controls = _controls(streams, cfg.dt, tick, end)
        interval_states, nu = run_interval(state, controls,
                                           streams.imu_angles[tick:end], model, q, rm)
        timing.localization_s += time.perf_counter() - t0
        timing.localization_calls += 1
        timing.localization_ticks += end - tick
        states.extend(interval_states[1:])
        innovations[tick:end] = nu
        state = interval_states[-1]

    estimate = np.array([s.mean for s in states])
    stats = compute_error_stats(times, estimate, truth, cfg.markers)
    return RunResult(MODE_TILAM, seed, times, truth, estimate, stats, timing,
                     ticks, global_map, alignments, innovations, states)


def run_icp_slam(cfg: RunConfig, seed: int | None = None) -> RunResult:
    """Scan-matching baseline: odometry between scans, twice as many scans."""
    seed = cfg.seed if seed is None else seed
    _, poses, times = plan_route(cfg)
    truth = np.array([p.as_vector() for p in poses])
    streams = make_streams(cfg, poses, seed)
    n = len(poses) - 1
    ticks = scan_tick_indices(cfg, cfg.baseline_scan_spacing)
    timing = TimingStats()
    alignments = []
    global_map = None

    mean = truth[0].copy()
    estimate = np.zeros((n + 1, 6))
    estimate[0] = mean
    for j, tick in enumerate(ticks):
        labeled = scan_at_pose(cfg, poses[tick], mean, streams.scan_rng, timing)
        if global_map is None:
            global_map = labeled
        else:
            result, corrected, new_mean = _align_to_map(cfg, labeled, global_map,
                                                        mean, with_ground=True)
            if result is not None:
                timing.matching_s += result.elapsed
                timing.matching_calls += 1
                angles = np.array(rotation_to_euler(result.transform.rotation))
                alignments.append(AlignmentRecord(j, result, angles))
                mean = new_mean
                estimate[tick] = mean
                labeled = corrected
            t0 = time.perf_counter()
            global_map = merge_maps(global_map, labeled, _identity(),
                                    cfg.icp.voxel_size)
            timing.matching_s += time.perf_counter() - t0
        end = ticks[j + 1] if j + 1 < len(ticks) else n
        if end <= tick:
            continue
        t0 = time.perf_counter()
        means = dead_reckon_interval(mean, _controls(streams, cfg.dt, tick, end))
        timing.localization_s += time.perf_counter() - t0
        timing.localization_calls += 1
        timing.localization_ticks += end - tick
        estimate[tick + 1:end + 1] = means[1:]
        mean = means[-1].copy()

    stats = compute_error_stats(times, estimate, truth, cfg.markers)
    return RunResult(MODE_ICP, seed, times, truth, estimate, stats, timing,
                     ticks, global_map, alignments)


def run_dead_reckoning(cfg: RunConfig, seed: int | None = None) -> RunResult:
    """Odometry-only run: integrate noisy controls, never look outside."""
    seed = cfg.seed if seed is None else seed
    _, poses, times = plan_route(cfg)
    truth = np.array([p.as_vector() for p in poses])
    streams = make_streams(cfg, poses, seed)
    n = len(poses) - 1
    timing = TimingStats()
    t0 = time.perf_counter()
    estimate = dead_reckon_interval(truth[0].copy(), _controls(streams, cfg.dt, 0, n))
    timing.localization_s = time.perf_counter() - t0
    timing.localization_calls = 1
    timing.localization_ticks = n
    stats = compute_error_stats(times, estimate, truth, cfg.markers)
    return RunResult(MODE_DR, seed, times, truth, estimate, stats, timing, [])


_RUNNERS = {MODE_TILAM: run_tilam, MODE_ICP: run_icp_slam, MODE_DR: run_dead_reckoning}
_MODE_ALIASES = {"tilam": MODE_TILAM, "icp": MODE_ICP, "icp_slam": MODE_ICP,
                 "dr": MODE_DR, "dead_reckoning": MODE_DR}


def canonical_mode(name: str) -> str:
    try:
        return _MODE_ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown mode {name!r}") from None


def run_mode(cfg: RunConfig, mode: str, seed: int | None = None) -> RunResult:
    return _RUNNERS[canonical_mode(mode)](cfg, seed)


def compute_error_stats(times: np.ndarray, estimate: np.ndarray,
                        truth: np.ndarray, markers=12) -> ErrorStats:
    """Position error moments at discrete reference markers.

    markers is either a count, placing markers at t_j = j * T / markers for
    j = 1..markers, or an explicit array of marker times. Markers outside
    the run's time span are dropped. Per-axis mean and sample variance
    (ddof 1) plus the same moments of the euclidean error norm. Raises
    EmptyMarkers when no marker lands inside the run.
    """
    if len(times) < 2:
        raise EmptyMarkers("run too short for error markers")
    if np.isscalar(markers):
        count = int(markers)
        if count < 1:
            raise EmptyMarkers("no error markers requested")
        marker_times = (np.arange(count) + 1) * times[-1] / count
    else:
        marker_times = np.asarray(markers, dtype=float).ravel()
    inside = (marker_times >= times[0]) & (marker_times <= times[-1])
    marker_times = marker_times[inside]
    if len(marker_times) == 0:
        raise EmptyMarkers("no error markers inside the run")
    err = np.stack([np.interp(marker_times, times, estimate[:, k] - truth[:, k])
                    for k in range(3)], axis=1)
    mean_axis = err.mean(axis=0)
    d = np.linalg.norm(err, axis=1)
    if len(marker_times) > 1:
        var_axis = err.var(axis=0, ddof=1)
        var_d = float(d.var(ddof=1))
    else:
        var_axis = np.full(3, np.nan)
        var_d = float("nan")
    return ErrorStats(marker_times, mean_axis, var_axis, float(d.mean()), var_d)


def _sustained_below(times: np.ndarray, errors: np.ndarray, threshold: float,
                     sustain: float) -> tuple[float, bool]:
    """First time the error stays under threshold for a full sustain window."""
    if len(times) < 2:
        return float("inf"), False
    dt = times[1] - times[0]
    need = int(round(sustain / dt)) + 1
    below = (errors < threshold).astype(int)
    if need > len(below):
        return float("inf"), False
    runs = np.convolve(below, np.ones(need, dtype=int), mode="valid")
    hits = np.flatnonzero(runs == need)
    if len(hits) == 0:
        return float("inf"), False
    return float(times[hits[0]]), True


def convergence_study(cfg: RunConfig, seed: int | None = None,
                      initial_errors=None) -> list[ConvergenceRecord]:
    """Filter response to initial position offsets over the first interval.

    Each entry of initial_errors is a per-axis offset 3-vector; a bare
    scalar o is shorthand for (o, o, o). The anchor scan is placed at the
    true start pose so the map stays fixed; only the filter mean starts
    displaced. Identical noise is drawn for every offset so the periods
    are comparable.
    """
    seed = cfg.seed if seed is None else seed
    if initial_errors is None:
        initial_errors = cfg.convergence.offsets
    vectors = [np.full(3, float(o)) if np.isscalar(o)
               else np.asarray(o, dtype=float).reshape(3) for o in initial_errors]
    path, poses, times = plan_route(cfg)
    truth = np.array([p.as_vector() for p in poses])
    n = len(poses) - 1
    ticks = scan_tick_indices(cfg, cfg.tilam_scan_spacing)
    end = ticks[1] if len(ticks) > 1 else n
    q, rm, p0 = _noise_matrices(cfg)

    records = []
    for off in vectors:
        streams = make_streams(cfg, poses, seed)
        labeled = scan_at_pose(cfg, poses[0], truth[0], streams.scan_rng)
        window = path.window(0.0, min(path.arc_length[end], cfg.model.fit_reach))
        patches = extract_patches(window, labeled, cfg.model.patch_length,
                                  cfg.model.half_width)
        model = fit_inclination_model(inclination_samples(patches), cfg.model.window)
        mean0 = truth[0].copy()
        mean0[0:3] += off
        state = EkfState(mean0, p0)
        interval_states, _ = run_interval(state, _controls(streams, cfg.dt, 0, end),
                                          streams.imu_angles[0:end], model, q, rm)
        means = np.array([s.mean for s in interval_states])
        errors = np.linalg.norm(means[:, 0:3] - truth[:end + 1, 0:3], axis=1)
        period, converged = _sustained_below(times[:end + 1], errors,
                                             cfg.convergence.threshold,
                                             cfg.convergence.sustain)
        if not converged:
            log.warning("offset %s m did not converge inside the interval",
                        np.array2string(off, precision=3))
        records.append(ConvergenceRecord(off, period, converged,
                                         times[:end + 1].copy(), errors))
    return records


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


def format_stats(result: RunResult) -> str:
    """Flat key: value report of one run."""
    s, t = result.stats, result.timing
    lines = [
        ("mode", result.mode),
        ("seed", result.seed),
        ("ticks", len(result.times) - 1),
        ("scans", len(result.scan_ticks)),
        ("alignments", len(result.alignments)),
        ("markers", len(s.marker_times)),
        ("error_mean_x_m", s.mean_axis[0]),
        ("error_mean_y_m", s.mean_axis[1]),
        ("error_mean_z_m", s.mean_axis[2]),
        ("error_var_x_m2", s.var_axis[0]),
        ("error_var_y_m2", s.var_axis[1]),
        ("error_var_z_m2", s.var_axis[2]),
        ("error_mean_d_m", s.mean_d),
        ("error_var_d_m2", s.var_d),
        ("localization_time_s", t.localization_s),
        ("localization_calls", t.localization_calls),
        ("localization_ticks", t.localization_ticks),
        ("localization_time_per_tick_s", t.localization_per_tick_s),
        ("localization_time_per_call_s", t.localization_per_call_s),
        ("matching_time_s", t.matching_s),
        ("matching_calls", t.matching_calls),
        ("matching_time_per_call_s", t.matching_per_call_s),
        ("total_compute_s", t.total_s),
    ]
    return "\n".join(f"{k}: {v if isinstance(v, str) else _fmt(v)}" for k, v in lines)


def format_comparison(results: dict[str, RunResult]) -> str:
    """Stacked per-mode stats plus baseline-over-filter summary ratios."""
    blocks = [format_stats(results[m]) for m in ALL_MODES if m in results]
    text = "\n\n".join(blocks)
    if MODE_TILAM in results and MODE_ICP in results:
        tilam, icp = results[MODE_TILAM], results[MODE_ICP]
        if tilam.stats.mean_d > 0:
            text += ("\n\nerror_ratio_baseline_over_tilam: "
                     + _fmt(icp.stats.mean_d / tilam.stats.mean_d))
        if tilam.timing.total_s > 0:
            text += ("\ntime_ratio_baseline_over_tilam: "
                     + _fmt(icp.timing.total_s / tilam.timing.total_s))
    return text


def format_convergence(records: list[ConvergenceRecord]) -> str:
    lines = ["offset_x_m,offset_y_m,offset_z_m,period_s,converged"]
    for r in records:
        period = _fmt(r.period) if r.converged else "inf"
        off = ",".join(_fmt(v) for v in r.offset)
        lines.append(f"{off},{period},{int(r.converged)}")
    return "\n".join(lines)


def write_text(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text + "\n")
