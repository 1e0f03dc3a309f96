"""Extended Kalman filter over (x, y, z, yaw, pitch, roll).

Prediction integrates body velocity and angular rate through the attitude
kinematics with one Euler step per control tick. The measurement is the
IMU attitude triple predicted from the terrain inclination model at the
current position estimate, so attitude readings correct position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveInnovationCovariance
from .geometry import (build_rotation, euler_rate_derivatives, euler_rate_matrix,
                       rotation_derivatives, wrap_angle)
from .terrain_model import TerrainInclinationModel


@dataclass
class EkfState:
    """Mean (x, y, z, theta, alpha, phi) with its 6x6 covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(6)
        self.cov = np.asarray(self.cov, dtype=float).reshape(6, 6)


@dataclass
class ControlInput:
    """Body-frame velocity, body angular rate and the step duration."""

    v_body: np.ndarray
    omega_body: np.ndarray
    dt: float

    def __post_init__(self):
        self.v_body = np.asarray(self.v_body, dtype=float).reshape(3)
        self.omega_body = np.asarray(self.omega_body, dtype=float).reshape(3)
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class ProcessNoise:
    q: np.ndarray = field(default_factory=lambda: np.eye(6) * 1e-6)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(6, 6)


@dataclass
class MeasurementNoise:
    rm: np.ndarray = field(default_factory=lambda: np.eye(3) * np.deg2rad(0.5) ** 2)

    def __post_init__(self):
        self.rm = np.asarray(self.rm, dtype=float).reshape(3, 3)


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def predict(state: EkfState, control: ControlInput,
            noise: ProcessNoise) -> EkfState:
    """One Euler step of the motion model with its linearized covariance."""
    x = state.mean
    theta, alpha, phi = x[3], x[4], x[5]
    rot = build_rotation(theta, alpha, phi)
    e = euler_rate_matrix(alpha, phi)
    dt = control.dt

    mean = x.copy()
    mean[0:3] += dt * (rot @ control.v_body)
    mean[3:6] = wrap_angle(x[3:6] + dt * (e @ control.omega_body))

    dr_dt, dr_da, dr_dp = rotation_derivatives(theta, alpha, phi)
    de_da, de_dp = euler_rate_derivatives(alpha, phi)
    f = np.eye(6)
    f[0:3, 3] = dt * (dr_dt @ control.v_body)
    f[0:3, 4] = dt * (dr_da @ control.v_body)
    f[0:3, 5] = dt * (dr_dp @ control.v_body)
    f[3:6, 4] += dt * (de_da @ control.omega_body)
    f[3:6, 5] += dt * (de_dp @ control.omega_body)

    cov = _symmetrize(f @ state.cov @ f.T + noise.q)
    return EkfState(mean, cov)


def innovation(state: EkfState, measured_angles: np.ndarray,
               model: TerrainInclinationModel) -> np.ndarray:
    """Wrapped attitude innovation against the model prediction."""
    predicted = model.evaluate(state.mean[0:3])
    return wrap_angle(np.asarray(measured_angles) - predicted)


def update(state: EkfState, measured_angles: np.ndarray,
           model: TerrainInclinationModel,
           noise: MeasurementNoise) -> EkfState:
    """Fuse one IMU attitude measurement through the inclination model.

    The innovation covariance is Cholesky-checked; on failure the state
    covariance is re-symmetrized and the update retried once before
    NonPositiveInnovationCovariance is raised. The covariance update uses
    the Joseph form, which keeps the result symmetric positive semidefinite.
    """
    h = np.zeros((3, 6))
    h[:, 0:3] = model.gradient(state.mean[0:3])
    nu = innovation(state, measured_angles, model)

    cov = state.cov
    for attempt in range(2):
        s = h @ cov @ h.T + noise.rm
        try:
            np.linalg.cholesky(_symmetrize(s))
            break
        except np.linalg.LinAlgError:
            if attempt == 1:
                raise NonPositiveInnovationCovariance(
                    "innovation covariance not positive definite")
            cov = _symmetrize(cov)

    k = np.linalg.solve(s, h @ cov).T
    mean = state.mean + k @ nu
    mean[3:6] = wrap_angle(mean[3:6])
    ikh = np.eye(6) - k @ h
    new_cov = _symmetrize(ikh @ cov @ ikh.T + k @ noise.rm @ k.T)
    return EkfState(mean, new_cov)


def run_interval(initial: EkfState, controls: list[ControlInput],
                 imu_angles: np.ndarray, model: TerrainInclinationModel,
                 process_noise: ProcessNoise, measurement_noise: MeasurementNoise,
                 ) -> tuple[list[EkfState], np.ndarray]:
    """Alternate predict and update over one drive interval.

    Returns the state trajectory (initial state included) and the per-tick
    innovations. The final state is what seeds the next scan alignment.
    """
    imu_angles = np.asarray(imu_angles, dtype=float).reshape(len(controls), 3)
    states = [initial]
    innovations = np.zeros((len(controls), 3))
    state = initial
    for i, control in enumerate(controls):
        state = predict(state, control, process_noise)
        innovations[i] = innovation(state, imu_angles[i], model)
        state = update(state, imu_angles[i], model, measurement_noise)
        states.append(state)
    return states, innovations


def dead_reckon_interval(initial_mean: np.ndarray,
                         controls: list[ControlInput]) -> np.ndarray:
    """Mean-only propagation used by the odometry baseline. Returns (N+1, 6)."""
    out = np.zeros((len(controls) + 1, 6))
    out[0] = initial_mean
    x = np.array(initial_mean, dtype=float)
    for i, control in enumerate(controls):
        rot = build_rotation(x[3], x[4], x[5])
        e = euler_rate_matrix(x[4], x[5])
        x[0:3] += control.dt * (rot @ control.v_body)
        x[3:6] = wrap_angle(x[3:6] + control.dt * (e @ control.omega_body))
        out[i + 1] = x
    return out


def write_ekf_log(path, times: np.ndarray, states: list[EkfState],
                  innovations: np.ndarray) -> None:
    """CSV log: time, mean, covariance diagonal and innovation per tick."""
    cols = ("t,x,y,z,theta,alpha,phi,var_x,var_y,var_z,var_theta,var_alpha,"
            "var_phi,innov_yaw,innov_pitch,innov_roll")
    with open(path, "w") as fh:
        fh.write(cols + "\n")
        for i, (t, st) in enumerate(zip(times, states)):
            innov = innovations[i - 1] if i > 0 else np.full(3, np.nan)
            vals = np.concatenate([[t], st.mean, np.diag(st.cov), innov])
            fh.write(",".join(format(float(v), ".9g") for v in vals) + "\n")
