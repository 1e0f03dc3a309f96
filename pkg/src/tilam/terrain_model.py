"""Terrain inclination model fit from triangular patches along a path.

Patches are laid along the planned route over the terrain-labeled points of
a scan. Each patch yields a (yaw, pitch, roll) sample at a known position;
sliding-window regressions turn the samples into three piecewise-linear maps
yaw(x), pitch(y), roll(z) that later serve as the localization measurement
model. Paths that double back on an axis fall back to arc-length keying.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegeneratePatch, InsufficientSamples
from .geometry import wrap_angle
from .scan import LabeledCloud

log = logging.getLogger(__name__)

COVERAGE_RADIUS = 0.5
COVERAGE_MIN_POINTS = 3
IDW_NEIGHBORS = 8
# Mean distance of the IDW stencil beyond which a vertex counts as
# extrapolated rather than interpolated (one-sided neighbors give the
# weighting nothing to balance against).
COVERAGE_MEAN_DIST = 0.18
# Vertex height error grows with how far the stencil has to reach, and
# over one short patch chord it turns into angle noise at 1/patch_length
# radians per meter. Strip ends where the stencils reach past this are
# angle junk even when they clear the coverage gate, and worse, they set
# the edge knots; trim them off instead of letting them in.
MARGINAL_SPREAD = 0.25 * COVERAGE_MEAN_DIST
# A stencil can be dense yet sit wholly on one side of its vertex, as
# happens right at the blind ring's rim: interpolation there is really
# extrapolation off a slope. Cap how far the stencil centroid may sit
# from the vertex it serves.
STENCIL_LEAN = 0.5 * COVERAGE_MEAN_DIST
CONSTANT_AXIS_RANGE = 0.01


@dataclass
class PlannedPath:
    """Route polyline: xy waypoints, headings and cumulative arc length."""

    xy: np.ndarray
    heading: np.ndarray
    arc_length: np.ndarray

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.heading = np.asarray(self.heading, dtype=float).reshape(-1)
        self.arc_length = np.asarray(self.arc_length, dtype=float).reshape(-1)
        if not (len(self.xy) == len(self.heading) == len(self.arc_length)):
            raise ValueError("waypoint arrays must share a length")
        if np.any(np.diff(self.arc_length) <= 0):
            raise ValueError("arc length must increase strictly")

    def window(self, s_from: float, s_to: float) -> "PlannedPath":
        """Sub-path covering [s_from, s_to] of the arc length."""
        keep = (self.arc_length >= s_from - 1e-9) & (self.arc_length <= s_to + 1e-9)
        if keep.sum() < 2:
            raise ValueError("window too narrow for this path")
        return PlannedPath(self.xy[keep], self.heading[keep], self.arc_length[keep])


@dataclass
class TriPatch:
    """Right triangle on the ground: B at the path, A ahead, C to the left."""

    b: np.ndarray
    c: np.ndarray
    a: np.ndarray
    # worst mean stencil distance over the three vertices, for edge trimming
    stencil_spread: float = 0.0

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).reshape(3)
        self.c = np.asarray(self.c, dtype=float).reshape(3)
        self.a = np.asarray(self.a, dtype=float).reshape(3)


@dataclass
class InclinationSample:
    """Attitude sample attached to a patch base position."""

    position: np.ndarray
    theta: float
    alpha: float
    phi: float
    # stencil spread inherited from the source patch; the fit uses it as
    # an inverse noise scale
    spread: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)


def patch_angles(patch: TriPatch) -> tuple[float, float, float]:
    """Yaw, pitch and roll encoded by one triangular patch.

    Yaw follows the horizontal direction B to A. Pitch is asin of the rise
    over the full B-A distance, roll comes from the lateral rise through
    asin(sin(beta) / cos(alpha)). The asin argument is clamped to [-1, 1]
    when interpolation noise pushes it outside.
    """
    ab = patch.a - patch.b
    cb = patch.c - patch.b
    ba = float(np.linalg.norm(ab))
    bc = float(np.linalg.norm(cb))
    if ba < 1e-6 or bc < 1e-6:
        raise DegeneratePatch("patch edge shorter than 1e-6 m")
    theta = float(np.arctan2(ab[1], ab[0]))
    alpha = float(np.arcsin(np.clip(ab[2] / ba, -1.0, 1.0)))
    beta = float(np.arcsin(np.clip(cb[2] / bc, -1.0, 1.0)))
    arg = np.sin(beta) / np.cos(alpha)
    if abs(arg) > 1.0:
        log.warning("roll argument %.4f outside [-1, 1], clamped", arg)
        arg = np.clip(arg, -1.0, 1.0)
    phi = float(np.arcsin(arg))
    return theta, alpha, phi


def _interp_along(path: PlannedPath, u_horiz: np.ndarray, u: float) -> np.ndarray:
    x = np.interp(u, u_horiz, path.xy[:, 0])
    y = np.interp(u, u_horiz, path.xy[:, 1])
    return np.array([x, y])


def extract_patches(path: PlannedPath, cloud: LabeledCloud,
                    patch_length: float = 0.15,
                    half_width: float = 0.2) -> list[TriPatch]:
    """Lay patches along the path, interpolating vertex heights from terrain.

    Vertex z comes from inverse-distance weighting of the 8 nearest terrain
    points in the horizontal plane. A patch is skipped (and reported) when a
    vertex has fewer than 3 terrain points within 0.5 m or when its stencil
    sits too far away on average to interpolate rather than extrapolate.
    """
    terrain = cloud.terrain_points()
    steps = np.linalg.norm(np.diff(path.xy, axis=0), axis=1)
    u_horiz = np.concatenate([[0.0], np.cumsum(steps)])
    total = u_horiz[-1]
    if total < patch_length or len(terrain) < COVERAGE_MIN_POINTS:
        return []

    tree = cKDTree(terrain[:, :2])

    # Consecutive patches share base vertices, so interpolate each strip
    # point once: bases at every step plus one sideways point per patch.
    n_p = int((total + 1e-9 - patch_length) // patch_length) + 1
    u_base = np.minimum(np.arange(n_p + 1) * patch_length, total)
    base_xy = np.column_stack([np.interp(u_base, u_horiz, path.xy[:, 0]),
                               np.interp(u_base, u_horiz, path.xy[:, 1])])
    seg = base_xy[1:] - base_xy[:-1]
    heading = np.arctan2(seg[:, 1], seg[:, 0])
    c_xy = base_xy[:-1] + half_width * np.column_stack([-np.sin(heading),
                                                        np.cos(heading)])

    pts = np.vstack([base_xy, c_xy])
    k = min(IDW_NEIGHBORS, len(terrain))
    dist, idx = tree.query(pts, k=k)
    dist, idx = dist.reshape(len(pts), k), idx.reshape(len(pts), k)
    spread = dist.mean(axis=1)
    lean = np.linalg.norm(terrain[idx, :2].mean(axis=1) - pts, axis=1)
    # The 3rd-nearest neighbor inside the coverage radius is the same
    # test as "at least 3 points within it".
    ok = (dist[:, COVERAGE_MIN_POINTS - 1] <= COVERAGE_RADIUS) \
        & (spread <= COVERAGE_MEAN_DIST) & (lean <= STENCIL_LEAN)
    w = 1.0 / np.maximum(dist, 1e-12)
    z = np.sum(w * terrain[idx, 2], axis=1) / np.sum(w, axis=1)
    exact = dist[:, 0] < 1e-12
    z[exact] = terrain[idx[exact, 0], 2]
    verts = np.column_stack([pts, z])

    patches: list[TriPatch] = []
    skipped = 0
    for i in range(n_p):
        b, a, c = i, i + 1, n_p + 1 + i
        if ok[b] and ok[a] and ok[c]:
            patches.append(TriPatch(verts[b], verts[c], verts[a],
                                    max(spread[b], spread[c], spread[a])))
        else:
            skipped += 1
    trimmed = 0
    while patches and patches[-1].stencil_spread > MARGINAL_SPREAD:
        patches.pop()
        trimmed += 1
    while patches and patches[0].stencil_spread > MARGINAL_SPREAD:
        patches.pop(0)
        trimmed += 1
    if skipped or trimmed:
        log.warning("dropped patches: %d sparse, %d marginal at strip ends",
                    skipped, trimmed)
    return patches


def inclination_samples(patches: list[TriPatch]) -> list[InclinationSample]:
    """Angle samples for a patch list.

    Each sample sits at the midpoint of the patch's forward edge: the
    chord angles belong to the middle of the chord, and pinning them to
    the base vertex instead would shift every map by half a patch.
    """
    out = []
    for p in patches:
        theta, alpha, phi = patch_angles(p)
        out.append(InclinationSample(0.5 * (p.b + p.a), theta, alpha, phi,
                                     spread=p.stencil_spread))
    return out


def _monotone_direction(values: np.ndarray) -> int:
    """+1 / -1 when values are monotone up to 2% backtracking, else 0."""
    span = float(values.max() - values.min())
    if span < 1e-12:
        return 1
    d = np.diff(values)
    sign = 1.0 if values[-1] >= values[0] else -1.0
    backtrack = float(np.sum(np.clip(-d * sign, 0.0, None)))
    return int(sign) if backtrack <= 0.02 * span else 0


# Keep every KNOT_STRIDE-th blended sample as a knot. Adjacent samples sit
# a patch apart, so per-sample knots would turn fit noise into steep
# slope wiggles of alternating sign; wider segments keep slopes honest.
KNOT_STRIDE = 4


def _fit_piecewise(xs: np.ndarray, ys: np.ndarray, window: int,
                   ws: np.ndarray | None = None) -> np.ndarray:
    """Sliding-window least squares blended into piecewise-linear knots.

    Every window of `window` consecutive samples gets its own line; each
    sample is smoothed by averaging the lines that cover it, and the
    smoothed curve is thinned to every KNOT_STRIDE-th sample (endpoints
    always kept). `ws` are inverse noise scales per sample (polyfit's
    weighting convention).
    """
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    ws = np.ones_like(xs) if ws is None else ws[order]
    n = len(xs)

    def line(xw, yw, ww):
        if xw.max() - xw.min() < 1e-12:
            return 0.0, float(np.average(yw, weights=ww * ww))
        slope, icept = np.polyfit(xw, yw, 1, w=ww)
        return float(slope), float(icept)

    if n <= window:
        s, b = line(xs, ys, ws)
        knot_x = np.array([xs[0], xs[-1]])
        knot_y = s * knot_x + b
    else:
        m = n - window + 1
        lines = [line(xs[j:j + window], ys[j:j + window], ws[j:j + window])
                 for j in range(m)]
        blended = np.empty(n)
        for i in range(n):
            lo, hi = max(0, i - window + 1), min(i, m - 1)
            vals = [s * xs[i] + b for s, b in lines[lo:hi + 1]]
            blended[i] = np.mean(vals)
        idx = list(range(0, n, KNOT_STRIDE))
        if idx[-1] != n - 1:
            idx.append(n - 1)
        knot_x = xs[idx]
        knot_y = blended[idx]
    keep = np.concatenate([[True], np.diff(knot_x) > 1e-12])
    return np.column_stack([knot_x[keep], knot_y[keep]])


def _knot_value(knots: np.ndarray, x) -> np.ndarray:
    return np.interp(x, knots[:, 0], knots[:, 1])


def _segment_slope(knots: np.ndarray, i: int) -> float:
    dx = knots[i + 1, 0] - knots[i, 0]
    return float((knots[i + 1, 1] - knots[i, 1]) / dx) if dx > 1e-12 else 0.0


def _knot_slope(knots: np.ndarray, x: float) -> float:
    """Map derivative at x; zero outside the knot span.

    Evaluation clamps to the nearest support endpoint out there, so the
    map really is flat beyond its ends and any other slope would promise
    the filter innovation changes that can never arrive.
    """
    xs = knots[:, 0]
    if len(xs) < 2 or x < xs[0] or x > xs[-1]:
        return 0.0
    i = int(np.clip(np.searchsorted(xs, x) - 1, 0, len(xs) - 2))
    return _segment_slope(knots, i)


@dataclass
class TerrainInclinationModel:
    """Piecewise-linear maps position -> (yaw, pitch, roll).

    In axis mode the maps read yaw(x), pitch(y), roll(z). When the path is
    not monotone along some axis every map is keyed by path arc length
    instead and queries are projected onto the sample polyline first.
    """

    mode: str
    yaw_knots: np.ndarray
    pitch_knots: np.ndarray
    roll_knots: np.ndarray
    path_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    path_s: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reparameterized: bool = False
    # Constant shift added to every query. The fitted shape is only as
    # level as the pose the source scan was placed at; a tilt reading
    # taken while the robot stands at the scan stop pins the maps back
    # to the world frame.
    attitude_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def _keys(self, position: np.ndarray):
        p = np.asarray(position, dtype=float).reshape(3)
        if self.mode == "axis":
            return p[0], p[1], p[2], None
        s, tangent = self._project(p)
        return s, s, s, tangent

    def _project(self, p: np.ndarray) -> tuple[float, np.ndarray]:
        pts = self.path_points
        if len(pts) == 1:
            return float(self.path_s[0]), np.zeros(3)
        a, b = pts[:-1], pts[1:]
        seg = b - a
        seg_len2 = np.einsum("ij,ij->i", seg, seg)
        t = np.clip(np.einsum("ij,ij->i", p - a, seg) / np.maximum(seg_len2, 1e-18), 0.0, 1.0)
        proj = a + t[:, None] * seg
        d2 = np.einsum("ij,ij->i", p - proj, p - proj)
        i = int(np.argmin(d2))
        t_i = t[i]
        # Past either end the clamped projection would freeze s at the
        # boundary and the slope rules at the knot edges could never fire,
        # so extend the end segments as infinite lines instead.
        if (i == 0 and t_i == 0.0) or (i == len(seg) - 1 and t_i == 1.0):
            t_i = float(np.dot(p - a[i], seg[i]) / max(seg_len2[i], 1e-18))
        s = self.path_s[i] + t_i * (self.path_s[i + 1] - self.path_s[i])
        tangent = seg[i] / max(np.sqrt(seg_len2[i]), 1e-12)
        return float(s), tangent

    def evaluate(self, position: np.ndarray) -> np.ndarray:
        """Predicted (yaw, pitch, roll), clamped to the fitted support."""
        kx, ky, kz, _ = self._keys(position)
        yaw = wrap_angle(_knot_value(self.yaw_knots, kx) + self.attitude_offset[0])
        pitch = _knot_value(self.pitch_knots, ky) + self.attitude_offset[1]
        roll = _knot_value(self.roll_knots, kz) + self.attitude_offset[2]
        return np.array([float(yaw), float(pitch), float(roll)])

    def gradient(self, position: np.ndarray) -> np.ndarray:
        """3x3 Jacobian of evaluate wrt position; see _knot_slope for edges."""
        kx, ky, kz, tangent = self._keys(position)
        slopes = np.array([
            _knot_slope(self.yaw_knots, kx),
            _knot_slope(self.pitch_knots, ky),
            _knot_slope(self.roll_knots, kz),
        ])
        if self.mode == "axis":
            return np.diag(slopes)
        return np.outer(slopes, tangent)


def fit_inclination_model(samples: list[InclinationSample],
                          window: int = 5) -> TerrainInclinationModel:
    """Fit the three inclination maps from ordered path samples.

    Yaw samples are unwrapped before regression so headings crossing the
    +-pi seam fit cleanly. Raises InsufficientSamples below two samples or
    when the samples have no spatial spread at all.
    """
    if len(samples) < 2:
        raise InsufficientSamples("need at least two inclination samples")
    pos = np.array([s.position for s in samples])
    yaw = np.unwrap(np.array([s.theta for s in samples]))
    pitch = np.array([s.alpha for s in samples])
    roll = np.array([s.phi for s in samples])
    # Angle noise tracks stencil reach; the additive floor is the part
    # that never goes away (range noise through a short chord), so clean
    # samples lead the fit without silencing the rest.
    wts = 1.0 / (np.array([s.spread for s in samples]) + 0.02)

    steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    ranges = pos.max(axis=0) - pos.min(axis=0)
    if np.all(ranges < CONSTANT_AXIS_RANGE) and arc[-1] < CONSTANT_AXIS_RANGE:
        raise InsufficientSamples("samples have no spatial spread")

    arc_mode = False
    for axis in range(3):
        if ranges[axis] >= CONSTANT_AXIS_RANGE and _monotone_direction(pos[:, axis]) == 0:
            arc_mode = True
            break

    def fit_axis(values: np.ndarray, angles: np.ndarray) -> np.ndarray:
        if values.max() - values.min() < CONSTANT_AXIS_RANGE:
            v = float(np.mean(values))
            return np.array([[v, float(np.average(angles, weights=wts * wts))]])
        return _fit_piecewise(values, angles, window, ws=wts)

    if arc_mode:
        log.warning("path not monotone along an axis, keying maps by arc length")
        if np.any(steps <= 1e-12):
            keep = np.concatenate([[True], steps > 1e-12])
            pos, yaw, pitch, roll = pos[keep], yaw[keep], pitch[keep], roll[keep]
            wts = wts[keep]
            arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pos, axis=0), axis=1))])
        return TerrainInclinationModel(
            mode="arc",
            yaw_knots=fit_axis(arc, yaw),
            pitch_knots=fit_axis(arc, pitch),
            roll_knots=fit_axis(arc, roll),
            path_points=pos,
            path_s=arc,
            reparameterized=True,
        )
    return TerrainInclinationModel(
        mode="axis",
        yaw_knots=fit_axis(pos[:, 0], yaw),
        pitch_knots=fit_axis(pos[:, 1], pitch),
        roll_knots=fit_axis(pos[:, 2], roll),
    )


def evaluate_model(model: TerrainInclinationModel, position: np.ndarray) -> np.ndarray:
    return model.evaluate(position)


def dump_model_csv(path, model: TerrainInclinationModel) -> None:
    """Write the knot tables (and the projection polyline in arc mode)."""
    with open(path, "w") as fh:
        fh.write(f"# mode: {model.mode}\n")
        off = model.attitude_offset
        if np.any(off != 0.0):
            fh.write(f"# offset: {format(off[0], '.9g')} "
                     f"{format(off[1], '.9g')} {format(off[2], '.9g')}\n")
        fh.write("map,knot,angle\n")
        for name, knots in (("yaw", model.yaw_knots), ("pitch", model.pitch_knots),
                            ("roll", model.roll_knots)):
            for kx, ky in knots:
                fh.write(f"{name},{format(kx, '.9g')},{format(ky, '.9g')}\n")
        if model.mode == "arc":
            for axis, name in enumerate(("path_x", "path_y", "path_z")):
                for s, v in zip(model.path_s, model.path_points[:, axis]):
                    fh.write(f"{name},{format(s, '.9g')},{format(v, '.9g')}\n")


def load_model_csv(path) -> TerrainInclinationModel:
    """Rebuild a model written by dump_model_csv."""
    mode = "axis"
    offset = np.zeros(3)
    rows: dict[str, list[tuple[float, float]]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# mode:"):
                mode = line.split(":", 1)[1].strip()
                continue
            if line.startswith("# offset:"):
                offset = np.array([float(v) for v in line.split(":", 1)[1].split()])
                continue
            if not line or line.startswith("map,"):
                continue
            name, kx, ky = line.split(",")
            rows.setdefault(name, []).append((float(kx), float(ky)))
    knots = {k: np.array(v) for k, v in rows.items()}
    if mode == "arc":
        s = knots["path_x"][:, 0]
        pts = np.column_stack([knots["path_x"][:, 1], knots["path_y"][:, 1],
                               knots["path_z"][:, 1]])
        return TerrainInclinationModel("arc", knots["yaw"], knots["pitch"],
                                       knots["roll"], pts, s, reparameterized=True,
                                       attitude_offset=offset)
    return TerrainInclinationModel("axis", knots["yaw"], knots["pitch"],
                                   knots["roll"], attitude_offset=offset)
