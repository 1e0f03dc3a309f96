"""Synthetic inclined terrain, obstacles and a turntable laser scanner.

The terrain is a tilted plane plus smooth radial bumps, obstacles are
vertical cylinders standing on the surface. Scans ray-march the heightfield
(2 cm steps, bisection refined to 1 mm) and intersect cylinders in closed
form. All randomness flows through numpy Generators handed in by the caller,
so identical seeds give bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose6D, build_rotation, euler_rate_matrix, wrap_angle
from .scan import FRAME_LASER, PointCloud, polar_to_laser_frame

TAG_SURFACE = 0
TAG_OBSTACLE = 1

MARCH_STEP = 0.02
BISECT_TOL = 0.001


@dataclass
class TerrainField:
    """Heightfield: base gradient plane plus cos^2 bumps (x, y, amp, radius)."""

    gradient: np.ndarray = field(default_factory=lambda: np.zeros(2))
    bumps: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    seed: int = 0

    def __post_init__(self):
        self.gradient = np.asarray(self.gradient, dtype=float).reshape(2)
        self.bumps = np.asarray(self.bumps, dtype=float).reshape(-1, 4)
        if len(self.bumps) and np.any(np.abs(self.bumps[:, 2]) > 0.5):
            raise ValueError("bump amplitude above 0.5 m")


@dataclass
class ObstacleSet:
    """Vertical cylinders (x, y, radius, height) rooted on the terrain."""

    cylinders: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    def __post_init__(self):
        self.cylinders = np.asarray(self.cylinders, dtype=float).reshape(-1, 4)


@dataclass
class ScannerConfig:
    horizontal_fov: float = np.pi
    vertical_fov: float = np.deg2rad(80.0)
    # Elevation of the middle of the vertical sweep.  Aiming the window
    # below the horizon shrinks the blind ring around the robot's feet.
    vertical_center: float = np.deg2rad(-25.0)
    angular_resolution: float = np.deg2rad(0.5)
    # Turntable step between scan lines.  Finer than the in-line step: the
    # line direction rules the slope test's baseline (coarse is robust)
    # while cross-line density rules far-field terrain coverage.
    turntable_resolution: float = np.deg2rad(0.25)
    max_range: float = 10.0
    range_noise_sigma: float = 0.003
    # Scanner on a short mast at the rear edge of the deck. Rear, so the
    # unscanned disc under the sensor falls behind the robot instead of
    # punching a hole in the coverage right where the next leg begins;
    # high, because every ray's ground reach scales with height and the
    # grazing angle at a given range improves with it.
    mount_offset: np.ndarray = field(default_factory=lambda: np.array([-0.25, 0.0, 0.75]))

    def __post_init__(self):
        self.mount_offset = np.asarray(self.mount_offset, dtype=float).reshape(3)
        lo = self.vertical_center - 0.5 * self.vertical_fov
        hi = self.vertical_center + 0.5 * self.vertical_fov
        if lo < -np.pi / 2 or hi > np.pi / 2:
            raise ValueError(
                f"vertical sweep [{lo:.3f}, {hi:.3f}] rad leaves the upper hemisphere"
            )


@dataclass
class NoiseConfig:
    imu_angle_sigma: float = 0.005
    encoder_vel_sigma: float = 0.005
    gyro_sigma: float = 0.01
    seed: int = 0


def terrain_height(field: TerrainField, x, y):
    """Surface height, vectorized over x and y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = field.gradient[0] * x + field.gradient[1] * y
    for bx, by, amp, rad in field.bumps:
        r = np.hypot(x - bx, y - by)
        inside = r < rad
        h = h + np.where(inside, amp * np.cos(np.pi * r / (2.0 * rad)) ** 2, 0.0)
    return h


def terrain_slopes(field: TerrainField, x, y):
    """Analytic (dh/dx, dh/dy), vectorized."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gx = np.full(np.broadcast(x, y).shape, field.gradient[0])
    gy = np.full(np.broadcast(x, y).shape, field.gradient[1])
    for bx, by, amp, rad in field.bumps:
        dx, dy = x - bx, y - by
        r = np.hypot(dx, dy)
        inside = (r < rad) & (r > 1e-12)
        dr = np.where(inside, -amp * (np.pi / (2.0 * rad)) * np.sin(np.pi * r / rad), 0.0)
        safe = np.where(r > 1e-12, r, 1.0)
        gx = gx + dr * dx / safe
        gy = gy + dr * dy / safe
    return gx, gy


def terrain_attitude(field: TerrainField, x: float, y: float,
                     heading: float) -> tuple[float, float]:
    """Pitch and roll of a robot resting on the surface at a given heading.

    Pitch is the slope angle along the heading (positive climbing), roll the
    lateral slope with positive values dropping the right side.
    """
    gx, gy = terrain_slopes(field, x, y)
    ct, st = np.cos(heading), np.sin(heading)
    slope_fwd = gx * ct + gy * st
    slope_left = -gx * st + gy * ct
    alpha = np.arctan(slope_fwd)
    phi = np.arctan(slope_left * np.cos(alpha))
    return float(alpha), float(phi)


def _cylinder_ranges(obstacles: ObstacleSet, field: TerrainField,
                     origin: np.ndarray, dirs: np.ndarray,
                     max_range: float) -> np.ndarray:
    """Smallest positive ray parameter hitting any cylinder wall, inf if none."""
    n = len(dirs)
    best = np.full(n, np.inf)
    if len(obstacles.cylinders) == 0:
        return best
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    a = dx * dx + dy * dy
    for cx, cy, radius, height in obstacles.cylinders:
        z_base = float(terrain_height(field, cx, cy))
        ox, oy = origin[0] - cx, origin[1] - cy
        b = 2.0 * (ox * dx + oy * dy)
        c = ox * ox + oy * oy - radius * radius
        disc = b * b - 4.0 * a * c
        ok = (disc >= 0.0) & (a > 1e-12)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        denom = np.where(ok, 2.0 * a, 1.0)
        for t in ((-b - sq) / denom, (-b + sq) / denom):
            z = origin[2] + t * dz
            hit = ok & (t > 1e-6) & (t <= max_range) & (z >= z_base) & (z <= z_base + height)
            best = np.where(hit & (t < best), t, best)
    return best


def _terrain_ranges(field: TerrainField, origin: np.ndarray, dirs: np.ndarray,
                    caps: np.ndarray) -> np.ndarray:
    """First terrain crossing per ray by marching, inf if none before the cap.

    Only the interval where the ray can meet the surface is walked: outside
    the band base-plane distance in [min bump dip, max bump rise] the height
    difference cannot change sign.
    """
    n = len(dirs)
    gx, gy = field.gradient
    a = origin[2] - gx * origin[0] - gy * origin[1]
    b = dirs[:, 2] - gx * dirs[:, 0] - gy * dirs[:, 1]
    if len(field.bumps):
        b_hi = float(np.sum(np.clip(field.bumps[:, 2], 0.0, None)))
        b_lo = float(np.sum(np.clip(field.bumps[:, 2], None, 0.0)))
    else:
        b_hi = b_lo = 0.0

    t_lo = np.zeros(n)
    t_hi = np.array(caps, dtype=float)
    neg = b < -1e-12
    pos = b > 1e-12
    flat = ~neg & ~pos
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = np.where(neg, (b_hi - a) / b, t_lo)
        t_hi = np.where(neg, np.minimum((b_lo - a) / b, t_hi), t_hi)
        t_lo = np.where(pos, np.maximum((b_lo - a) / b, 0.0), t_lo)
        t_hi = np.where(pos, np.minimum((b_hi - a) / b, t_hi), t_hi)
    empty = (pos & (a > b_hi)) | (flat & ((a > b_hi) | (a < b_lo)))
    t_lo = np.clip(t_lo - MARCH_STEP, 0.0, None)
    t_hi = np.minimum(t_hi + MARCH_STEP, caps)
    empty |= t_lo >= t_hi

    def height_diff(idx, t):
        p = origin[None, :] + t[:, None] * dirs[idx]
        return p[:, 2] - terrain_height(field, p[:, 0], p[:, 1])

    alive = np.flatnonzero(~empty)
    t_prev = t_lo[alive]
    f_prev = height_diff(alive, t_prev)
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)
    # points already below the surface at the window start count as immediate hits
    below = f_prev <= 0.0
    if np.any(below):
        sel = alive[below]
        lo[sel] = hi[sel] = t_prev[below]
        alive, t_prev, f_prev = alive[~below], t_prev[~below], f_prev[~below]
    while len(alive):
        t_next = np.minimum(t_prev + MARCH_STEP, t_hi[alive])
        f_next = height_diff(alive, t_next)
        crossed = f_next <= 0.0
        if np.any(crossed):
            sel = alive[crossed]
            lo[sel] = t_prev[crossed]
            hi[sel] = t_next[crossed]
        done = crossed | (t_next >= t_hi[alive] - 1e-12)
        keep = ~done
        alive, t_prev, f_prev = alive[keep], t_next[keep], f_next[keep]

    hit = np.flatnonzero(~np.isnan(lo))
    ranges = np.full(n, np.inf)
    if len(hit):
        lo_h, hi_h = lo[hit], hi[hit]
        for _ in range(6):
            mid = 0.5 * (lo_h + hi_h)
            above = height_diff(hit, mid) > 0.0
            lo_h = np.where(above, mid, lo_h)
            hi_h = np.where(above, hi_h, mid)
        ranges[hit] = 0.5 * (lo_h + hi_h)
    return ranges


def simulate_scan(field: TerrainField, obstacles: ObstacleSet,
                  config: ScannerConfig, pose: Pose6D,
                  rng: np.random.Generator) -> tuple[PointCloud, np.ndarray]:
    """Scan the scene from a pose. Returns (laser-frame cloud, origin tags).

    One scan line per turntable step, elevation sweeping bottom to top.
    Rays without a hit inside max_range are omitted. Gaussian noise perturbs
    ranges only; tags record the true surface of origin per point.
    """
    n_gamma = int(round(config.vertical_fov / config.angular_resolution)) + 1
    n_phi = int(round(config.horizontal_fov / config.turntable_resolution)) + 1
    gammas = np.linspace(
        config.vertical_center - config.vertical_fov / 2.0,
        config.vertical_center + config.vertical_fov / 2.0,
        n_gamma,
    )
    phis = np.linspace(0.0, config.horizontal_fov, n_phi)
    gg = np.tile(gammas, n_phi)
    pp = np.repeat(phis, n_gamma)
    dirs_laser = polar_to_laser_frame(1.0, gg, pp)

    rot = build_rotation(pose.theta, pose.alpha, pose.phi)
    origin = rot @ config.mount_offset + pose.position
    dirs_world = dirs_laser @ rot.T

    t_cyl = _cylinder_ranges(obstacles, field, origin, dirs_world, config.max_range)
    caps = np.minimum(t_cyl + MARCH_STEP, config.max_range)
    t_terr = _terrain_ranges(field, origin, dirs_world, caps)

    t_hit = np.minimum(t_terr, t_cyl)
    valid = t_hit <= config.max_range
    tags = np.where(t_cyl < t_terr, TAG_OBSTACLE, TAG_SURFACE).astype(np.uint8)

    ranges = t_hit[valid]
    if config.range_noise_sigma > 0.0:
        ranges = ranges + rng.normal(0.0, config.range_noise_sigma, size=len(ranges))
        ranges = np.clip(ranges, 1e-3, None)
    points = dirs_laser[valid] * ranges[:, None]

    counts = valid.reshape(n_phi, n_gamma).sum(axis=1)
    counts = counts[counts > 0]
    breaks = np.concatenate([[0], np.cumsum(counts)[:-1]]) if len(counts) else np.zeros(0, int)
    return PointCloud(points, FRAME_LASER, breaks.astype(int)), tags[valid]


def step_robot(field: TerrainField, pose: Pose6D, forward_speed: float,
               yaw_rate: float, dt: float) -> Pose6D:
    """Advance one control step along the surface.

    Moves forward_speed * dt along the current body x axis, re-projects z
    onto the terrain, integrates yaw and refreshes pitch/roll from the
    surface tangent at the new position.
    """
    rot = build_rotation(pose.theta, pose.alpha, pose.phi)
    new_pos = pose.position + forward_speed * dt * rot[:, 0]
    theta = float(wrap_angle(pose.theta + yaw_rate * dt))
    z = float(terrain_height(field, new_pos[0], new_pos[1]))
    alpha, phi = terrain_attitude(field, new_pos[0], new_pos[1], theta)
    return Pose6D(np.array([new_pos[0], new_pos[1], z]), theta, alpha, phi)


def imu_measurement(pose: Pose6D, noise: NoiseConfig,
                    rng: np.random.Generator) -> np.ndarray:
    """Noisy absolute attitude reading (theta, alpha, phi)."""
    return wrap_angle(pose.angles + rng.normal(0.0, noise.imu_angle_sigma, 3))


def body_rates(prev: Pose6D, curr: Pose6D, dt: float) -> np.ndarray:
    """Body angular velocity whose Euler integration reproduces the step."""
    rates = wrap_angle(curr.angles - prev.angles) / dt
    e = euler_rate_matrix(prev.alpha, prev.phi)
    return np.linalg.solve(e, rates)


def save_trajectory_csv(path, times: np.ndarray, states: np.ndarray) -> None:
    """Write t,x,y,z,theta,alpha,phi rows."""
    with open(path, "w") as fh:
        fh.write("t,x,y,z,theta,alpha,phi\n")
        for t, row in zip(times, states):
            vals = ",".join(format(float(v), ".9g") for v in row)
            fh.write(f"{format(float(t), '.9g')},{vals}\n")


def load_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a trajectory CSV. Returns (times, states (N, 6))."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:7]
