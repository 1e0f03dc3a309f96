"""Scan geometry, ground separation and point cloud file formats.

A scan is organized in scan lines: one vertical sweep of the 2D laser per
turntable step, points ordered by elevation within the line. Clouds carry the
line structure as start indices so the slope filter can walk each line in
scanning order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose6D, build_rotation

FRAME_LASER = "laser"
FRAME_ROBOT = "robot"
FRAME_WORLD = "world"

LABEL_TERRAIN = 0
LABEL_NON_TERRAIN = 1


@dataclass
class RawScanPoint:
    """One polar return: range, elevation angle, turntable azimuth."""

    range: float
    gamma: float
    turntable_angle: float

    def __post_init__(self):
        if self.range < 0:
            raise ValueError("range must be non-negative")
        if not -np.pi / 2 <= self.gamma <= np.pi / 2:
            raise ValueError("gamma outside [-pi/2, pi/2]")
        if not 0.0 <= self.turntable_angle <= np.pi:
            raise ValueError("turntable angle outside [0, pi]")


@dataclass
class PointCloud:
    """Cartesian points with a frame tag and scan line start indices."""

    points: np.ndarray
    frame: str = FRAME_LASER
    scanline_breaks: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.scanline_breaks = np.asarray(self.scanline_breaks, dtype=int)
        if len(self.points) and len(self.scanline_breaks) == 0:
            self.scanline_breaks = np.array([0])

    def __len__(self) -> int:
        return len(self.points)

    def scanlines(self):
        """Yield (start, end) index pairs, one per scan line."""
        breaks = self.scanline_breaks
        for i, start in enumerate(breaks):
            end = breaks[i + 1] if i + 1 < len(breaks) else len(self.points)
            yield int(start), int(end)


@dataclass
class LabeledCloud:
    """A cloud plus a terrain / non-terrain label per point."""

    cloud: PointCloud
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if len(self.labels) != len(self.cloud):
            raise ValueError("one label per point required")

    def terrain_points(self) -> np.ndarray:
        return self.cloud.points[self.labels == LABEL_TERRAIN]

    def non_terrain_points(self) -> np.ndarray:
        return self.cloud.points[self.labels == LABEL_NON_TERRAIN]


@dataclass
class SeparationConfig:
    """Thresholds of the elevation-difference / slope ground filter."""

    limit_dz: float = 0.35
    limit_slope: float = 2.50


def polar_to_laser_frame(ranges, gammas, turntable_angles) -> np.ndarray:
    """Convert polar returns to Cartesian laser-frame points.

    x = R cos(gamma) sin(phi_t), y = R cos(gamma) cos(phi_t), z = R sin(gamma).
    Accepts scalars or arrays, returns (..., 3).
    """
    r = np.asarray(ranges, dtype=float)
    g = np.asarray(gammas, dtype=float)
    p = np.asarray(turntable_angles, dtype=float)
    cg = np.cos(g)
    return np.stack([r * cg * np.sin(p), r * cg * np.cos(p), r * np.sin(g)], axis=-1)


def cloud_to_world(cloud: PointCloud, scan_pose: Pose6D,
                   mount_offset: np.ndarray) -> PointCloud:
    """Place a laser-frame cloud in the world.

    The laser axes are parallel to the body axes, displaced by mount_offset,
    so each point maps to R @ (p + offset) + position.
    """
    rot = build_rotation(scan_pose.theta, scan_pose.alpha, scan_pose.phi)
    off = np.asarray(mount_offset, dtype=float).reshape(3)
    pts = (cloud.points + off) @ rot.T + scan_pose.position
    return PointCloud(pts, FRAME_WORLD, cloud.scanline_breaks.copy())


def separate_ground(cloud: PointCloud, config: SeparationConfig) -> LabeledCloud:
    """Split a cloud into terrain and non-terrain points.

    Walks each scan line in order and compares every point against the most
    recent terrain-labeled point of the line: terrain iff the elevation jump
    stays under limit_dz and the absolute slope under limit_slope. The first
    point of a line seeds it as terrain; a pair closer than 1e-9 m in the
    horizontal plane has no usable slope and the point stays non-terrain.
    """
    pts = cloud.points
    labels = np.full(len(pts), LABEL_NON_TERRAIN, dtype=np.uint8)
    for start, end in cloud.scanlines():
        if end <= start:
            continue
        labels[start] = LABEL_TERRAIN
        ref = start
        for i in range(start + 1, end):
            dx = pts[i, 0] - pts[ref, 0]
            dy = pts[i, 1] - pts[ref, 1]
            horiz = np.hypot(dx, dy)
            if horiz < 1e-9:
                continue
            dz = pts[i, 2] - pts[ref, 2]
            if abs(dz) < config.limit_dz and abs(dz / horiz) < config.limit_slope:
                labels[i] = LABEL_TERRAIN
                ref = i
    return LabeledCloud(cloud, labels)


def _format_float(v: float) -> str:
    return format(float(v), ".9g")


def save_ply(path, cloud: PointCloud, labels: np.ndarray | None = None) -> None:
    """Write an ASCII PLY file (x y z, optional uchar label)."""
    pts = cloud.points
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        if labels is not None:
            fh.write("property uchar label\n")
        fh.write("end_header\n")
        for i, p in enumerate(pts):
            row = " ".join(_format_float(v) for v in p)
            if labels is not None:
                row += f" {int(labels[i])}"
            fh.write(row + "\n")


def load_ply(path) -> tuple[PointCloud, np.ndarray | None]:
    """Read an ASCII PLY written by save_ply. Returns (cloud, labels or None)."""
    with open(path) as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise ValueError("not a PLY file")
        n = 0
        has_label = False
        while True:
            line = fh.readline()
            if not line:
                raise ValueError("truncated PLY header")
            line = line.strip()
            if line.startswith("element vertex"):
                n = int(line.split()[-1])
            elif line == "property uchar label":
                has_label = True
            elif line == "end_header":
                break
        pts = np.zeros((n, 3))
        labels = np.zeros(n, dtype=np.uint8) if has_label else None
        for i in range(n):
            parts = fh.readline().split()
            pts[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
            if has_label:
                labels[i] = int(parts[3])
    return PointCloud(pts, FRAME_WORLD), labels


def save_cloud_csv(path, cloud: PointCloud, labels: np.ndarray | None = None) -> None:
    """Write x,y,z[,label] rows with 9 significant digits."""
    with open(path, "w") as fh:
        fh.write("x,y,z,label\n" if labels is not None else "x,y,z\n")
        for i, p in enumerate(cloud.points):
            row = ",".join(_format_float(v) for v in p)
            if labels is not None:
                row += f",{int(labels[i])}"
            fh.write(row + "\n")


def load_cloud_csv(path) -> tuple[PointCloud, np.ndarray | None]:
    """Read a cloud CSV written by save_cloud_csv."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        has_label = "label" in header
        pts = []
        labels = []
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            pts.append([float(parts[0]), float(parts[1]), float(parts[2])])
            if has_label:
                labels.append(int(parts[3]))
    cloud = PointCloud(np.array(pts).reshape(-1, 3), FRAME_WORLD)
    return cloud, (np.array(labels, dtype=np.uint8) if has_label else None)
