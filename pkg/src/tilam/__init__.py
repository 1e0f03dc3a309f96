"""Terrain-inclination-aided localization and mapping on synthetic terrain.

The package couples an attitude-measuring EKF, whose measurement map is a
piecewise-linear terrain inclination model fitted from labeled laser
clouds, with ICP scan alignment into a growing global map. A simulator
with analytic inclined terrain provides ground truth for every experiment.
"""

from .config import (ConvergenceConfig, EkfConfig, ModelConfig, PathSpec,
                     RunConfig, default_run_config, load_run_config)
from .ekf import (ControlInput, EkfState, MeasurementNoise, ProcessNoise,
                  dead_reckon_interval, innovation, predict, run_interval, update)
from .errors import (DegenerateConfiguration, DegeneratePatch, EmptyMarkers,
                     GimbalLock, InsufficientSamples, NoCorrespondences,
                     NonPositiveInnovationCovariance)
from .geometry import (Pose6D, RigidTransform, apply_transform, build_rotation,
                       compose_transform, euler_rate_matrix, invert_transform,
                       pose_to_transform, rotation_to_euler, wrap_angle)
from .pipeline import (ConvergenceRecord, ErrorStats, RunResult, TimingStats,
                       compute_error_stats, convergence_study, plan_route,
                       run_dead_reckoning, run_icp_slam, run_mode, run_tilam)
from .registration import (IcpConfig, IcpResult, KdTree, estimate_rigid_transform,
                           icp_align, merge_maps, reduce_points)
from .scan import (LabeledCloud, PointCloud, RawScanPoint, SeparationConfig,
                   cloud_to_world, polar_to_laser_frame, separate_ground)
from .sensor_sim import (NoiseConfig, ObstacleSet, ScannerConfig, TerrainField,
                         simulate_scan, terrain_attitude, terrain_height)
from .terrain_model import (InclinationSample, PlannedPath, TerrainInclinationModel,
                            TriPatch, extract_patches, fit_inclination_model,
                            inclination_samples, patch_angles)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceConfig", "EkfConfig", "ModelConfig", "PathSpec", "RunConfig",
    "default_run_config", "load_run_config",
    "ControlInput", "EkfState", "MeasurementNoise", "ProcessNoise",
    "dead_reckon_interval", "innovation", "predict", "run_interval", "update",
    "DegenerateConfiguration", "DegeneratePatch", "EmptyMarkers", "GimbalLock",
    "InsufficientSamples", "NoCorrespondences", "NonPositiveInnovationCovariance",
    "Pose6D", "RigidTransform", "apply_transform", "build_rotation",
    "compose_transform", "euler_rate_matrix", "invert_transform",
    "pose_to_transform", "rotation_to_euler", "wrap_angle",
    "ConvergenceRecord", "ErrorStats", "RunResult", "TimingStats",
    "compute_error_stats", "convergence_study", "plan_route",
    "run_dead_reckoning", "run_icp_slam", "run_mode", "run_tilam",
    "IcpConfig", "IcpResult", "KdTree", "estimate_rigid_transform", "icp_align",
    "merge_maps", "reduce_points",
    "LabeledCloud", "PointCloud", "RawScanPoint", "SeparationConfig",
    "cloud_to_world", "polar_to_laser_frame", "separate_ground",
    "NoiseConfig", "ObstacleSet", "ScannerConfig", "TerrainField",
    "simulate_scan", "terrain_attitude", "terrain_height",
    "InclinationSample", "PlannedPath", "TerrainInclinationModel", "TriPatch",
    "extract_patches", "fit_inclination_model", "inclination_samples",
    "patch_angles",
]
