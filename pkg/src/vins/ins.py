"""Strapdown mechanization and error-state extended Kalman filter.

State: position, velocity, body-to-world quaternion, accelerometer and gyro
biases, with a 15x15 covariance over the error state
(dp, dv, dtheta, db_a, db_g). The attitude error is body-frame
(q_true = q_est * exp(dtheta)), and the quaternion is reset after every
update. Measurement updates use the Joseph form, so the covariance stays
symmetric positive semidefinite and its trace never increases.

Updates supported: zero-velocity (ZUPT), scalar pseudo-speed on the norm of
the velocity, and absolute position fixes. The filter is forward-only and a
strictly sequential state machine; run one tracking session per thread.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ImuSample, Quaternion, Vec3, quat_from_rate, quat_mul, quat_to_matrix
from .datapipe import ImuSequence, PoseTrack
from .errors import (
    BadArguments,
    BadDt,
    EmptyFile,
    InsufficientOverlap,
    InsufficientSamples,
    MalformedRow,
)
from .net.model import ModelParams, predict

EPS_SPEED = 1e-3  # m/s; below this the pseudo-speed Jacobian is undefined


@dataclass(frozen=True)
class FilterConfig:
    gravity: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, -9.81))
    # process noise densities (continuous-time)
    accel_noise_density: float = 0.05  # m/s^2/sqrt(Hz)
    gyro_noise_density: float = 0.005  # rad/s/sqrt(Hz)
    accel_bias_walk: float = 0.01  # m/s^2 * sqrt(Hz) random walk of b_a
    gyro_bias_walk: float = 0.001  # rad/s * sqrt(Hz) random walk of b_g
    # initial uncertainty (standard deviations)
    sigma0_pos: float = 0.05  # m
    sigma0_vel: float = 0.1  # m/s
    sigma0_att: float = 0.02  # rad
    sigma0_accel_bias: float = 0.3  # m/s^2
    sigma0_gyro_bias: float = 0.05  # rad/s
    # measurement noises
    sigma_zupt: float = 0.02  # m/s
    sigma_fix: float = 0.05  # m
    # pseudo-speed noise schedule: tighter when the (clamped) speed is small
    pseudo_sigma_low: float = 0.15  # m/s, below low_speed_threshold
    pseudo_sigma_high: float = 0.5  # m/s, otherwise
    low_speed_threshold: float = 0.2  # m/s
    pseudo_period: float = 1.0  # s between pseudo-speed updates
    speed_clamp: tuple[float, float] = (0.0, math.inf)
    # gravity-direction (inclinometer) updates from the low-passed
    # accelerometer; bounds tilt drift while moving. Heading is untouched
    # (the Jacobian's null space is the gravity axis).
    gravity_update: bool = True
    gravity_period: float = 0.5  # s
    gravity_window_seconds: float = 2.0  # averaging window for the direction
    sigma_gravity: float = 0.08  # direction noise (unitless, ~5 degrees)
    gravity_gate: float = 0.2  # accept when | |mean acc| - g | < gate * g
    # fix-point interpolation mode: position fixes anchor position without
    # repairing velocity/attitude/biases through cross-covariances
    fix_position_only: bool = False
    # below this prior speed the pseudo-speed Jacobian direction is noise;
    # fall back to ZUPT semantics or skip (see update_pseudo_speed)
    eps_speed: float = EPS_SPEED
    # stationarity detector
    zupt_window_seconds: float = 0.5
    zupt_std_gyro: float = 0.03  # rad/s
    zupt_std_acc: float = 0.12  # m/s^2
    zupt_mean_gyro: float = 0.05  # rad/s
    # cap on how often detected ZUPTs are applied; limits the damage of a
    # misfiring detector around motion onset
    zupt_min_interval: float = 0.1  # s

    def __post_init__(self):
        positive = (
            self.accel_noise_density, self.gyro_noise_density,
            self.accel_bias_walk, self.gyro_bias_walk,
            self.sigma_zupt, self.sigma_fix,
            self.pseudo_sigma_low, self.pseudo_sigma_high, self.pseudo_period,
        )
        if any(v <= 0 for v in positive):
            raise BadArguments("all noise parameters must be > 0")


@dataclass
class NavState:
    """Filter mean and error-state covariance."""

    p: np.ndarray  # (3,) m, world
    v: np.ndarray  # (3,) m/s, world
    q: Quaternion  # body-to-world
    b_a: np.ndarray  # (3,) m/s^2
    b_g: np.ndarray  # (3,) rad/s
    P: np.ndarray  # (15, 15)

    def copy(self) -> NavState:
        return NavState(self.p.copy(), self.v.copy(), self.q, self.b_a.copy(),
                        self.b_g.copy(), self.P.copy())


@dataclass(frozen=True)
class SpeedMeasurement:
    t: float
    s: float  # m/s, >= 0 after clamping
    sigma: float

    def __post_init__(self):
        if self.s < 0 or self.sigma <= 0:
            raise BadArguments("speed must be >= 0 and sigma > 0")


@dataclass(frozen=True)
class PositionFix:
    t: float
    p: Vec3
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise BadArguments("fix sigma must be > 0")


# --- speed sources -----------------------------------------------------------


@dataclass(frozen=True)
class ConstantSpeed:
    """Fixed pseudo-speed baseline (0.75 m/s unless configured otherwise)."""

    speed: float = 0.75
    sigma: float = 1.0


@dataclass(frozen=True)
class RegressedSpeed:
    """Speed predicted by the network on the trailing IMU window."""

    params: ModelParams
    window_seconds: float = 2.0


@dataclass(frozen=True)
class CallbackSpeed:
    """Arbitrary speed function of (t, trailing 6xL window); test stub hook."""

    fn: Callable[[float, np.ndarray], float]
    window_seconds: float = 2.0


SpeedSource = ConstantSpeed | RegressedSpeed | CallbackSpeed | None


def make_initial_state(p: Vec3, q: Quaternion, cfg: FilterConfig) -> NavState:
    P = np.zeros((15, 15))
    P[0:3, 0:3] = cfg.sigma0_pos**2 * np.eye(3)
    P[3:6, 3:6] = cfg.sigma0_vel**2 * np.eye(3)
    P[6:9, 6:9] = cfg.sigma0_att**2 * np.eye(3)
    P[9:12, 9:12] = cfg.sigma0_accel_bias**2 * np.eye(3)
    P[12:15, 12:15] = cfg.sigma0_gyro_bias**2 * np.eye(3)
    return NavState(p.as_array(), np.zeros(3), q.normalized(), np.zeros(3), np.zeros(3), P)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def propagate(state: NavState, imu: ImuSample, dt: float, cfg: FilterConfig) -> NavState:
    """Advance the state over dt using one IMU sample (taken at the interval start).

    Orientation integrates the exact rate exponential; the specific force is
    rotated with the mid-step orientation, and position uses the
    0.5*a*dt^2 term, so smooth trajectories are reproduced to second order.
    """
    if not 0.0 < dt < 0.1:
        raise BadDt(f"dt={dt} outside (0, 0.1) s")
    omega = imu.gyro - Vec3.from_array(state.b_g)
    a_body = (imu.acc - Vec3.from_array(state.b_a)).as_array()
    g = cfg.gravity.as_array()

    q_mid = quat_mul(state.q, quat_from_rate(omega, 0.5 * dt))
    q_new = quat_mul(state.q, quat_from_rate(omega, dt)).normalized()
    a_world = quat_to_matrix(q_mid) @ a_body + g
    p_new = state.p + state.v * dt + 0.5 * a_world * dt * dt
    v_new = state.v + a_world * dt

    R = quat_to_matrix(state.q)
    F = np.eye(15)
    F[0:3, 3:6] = np.eye(3) * dt
    F[3:6, 6:9] = -R @ _skew(a_body) * dt
    F[3:6, 9:12] = -R * dt
    F[6:9, 6:9] -= _skew(omega.as_array()) * dt
    F[6:9, 12:15] = -np.eye(3) * dt
    Qd = np.zeros((15, 15))
    Qd[3:6, 3:6] = cfg.accel_noise_density**2 * dt * np.eye(3)
    Qd[6:9, 6:9] = cfg.gyro_noise_density**2 * dt * np.eye(3)
    Qd[9:12, 9:12] = cfg.accel_bias_walk**2 * dt * np.eye(3)
    Qd[12:15, 12:15] = cfg.gyro_bias_walk**2 * dt * np.eye(3)
    P_new = F @ state.P @ F.T + Qd
    P_new = 0.5 * (P_new + P_new.T)
    return NavState(p_new, v_new, q_new, state.b_a.copy(), state.b_g.copy(), P_new)


def _apply_update(state: NavState, H: np.ndarray, innovation: np.ndarray,
                  R_meas: np.ndarray, gain_rows: slice | None = None) -> NavState:
    """Joseph-form EKF update followed by error injection and quaternion reset.

    With gain_rows, the Kalman gain is zeroed outside that slice
    (Schmidt-style considered states) before the Joseph update; the Joseph
    form stays a valid covariance for any gain, and the trace still cannot
    increase. Used where an innovation carries no reliable information
    about the remaining states.
    """
    P = state.P
    S = H @ P @ H.T + R_meas
    K = np.linalg.solve(S.T, H @ P.T).T  # P H^T S^-1
    if gain_rows is not None:
        masked = np.zeros_like(K)
        masked[gain_rows] = K[gain_rows]
        K = masked
    dx = K @ innovation
    IKH = np.eye(15) - K @ H
    P_new = IKH @ P @ IKH.T + K @ R_meas @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    q_new = quat_mul(state.q, quat_from_rate(Vec3.from_array(dx[6:9]), 1.0)).normalized()
    return NavState(
        state.p + dx[0:3], state.v + dx[3:6], q_new,
        state.b_a + dx[9:12], state.b_g + dx[12:15], P_new,
    )


def update_zupt(state: NavState, cfg: FilterConfig) -> NavState:
    """Zero-velocity update: h(x) = v, z = 0."""
    H = np.zeros((3, 15))
    H[:, 3:6] = np.eye(3)
    return _apply_update(state, H, -state.v, cfg.sigma_zupt**2 * np.eye(3))


def update_pseudo_speed(state: NavState, meas: SpeedMeasurement,
                        eps_speed: float = EPS_SPEED) -> NavState:
    """Scalar update on the velocity norm: h(x) = ||v||, Jacobian v^T/||v||.

    Degenerate prior speeds (below eps_speed) fall back to ZUPT semantics
    when the measurement also says "stationary", and are skipped otherwise
    since the Jacobian direction is undefined at v = 0.
    """
    vn = float(np.linalg.norm(state.v))
    if vn < eps_speed:
        if meas.s <= eps_speed:
            H = np.zeros((3, 15))
            H[:, 3:6] = np.eye(3)
            return _apply_update(state, H, -state.v, meas.sigma**2 * np.eye(3),
                                 gain_rows=slice(0, 6))
        return state.copy()
    H = np.zeros((1, 15))
    H[0, 3:6] = state.v / vn
    innovation = np.array([meas.s - vn])
    return _apply_update(state, H, innovation, np.array([[meas.sigma**2]]),
                         gain_rows=slice(0, 6))


def update_position_fix(state: NavState, fix: PositionFix,
                        position_only: bool = False) -> NavState:
    """Linear position update: h(x) = p.

    With position_only the fix anchors position without repairing the other
    states through cross-covariances (fix-point interpolation mode); the
    position posterior itself is identical to the full update's.
    """
    H = np.zeros((3, 15))
    H[:, 0:3] = np.eye(3)
    innovation = fix.p.as_array() - state.p
    return _apply_update(state, H, innovation, fix.sigma**2 * np.eye(3),
                         gain_rows=slice(0, 3) if position_only else None)


def update_gravity(state: NavState, mean_acc: np.ndarray, cfg: FilterConfig) -> NavState:
    """Tilt update from the averaged specific-force direction.

    While the sensor is quasi-steady on average, the low-passed accelerometer
    points opposite to gravity; comparing its direction with the prediction
    R(q)^T * up observes roll and pitch (heading lies in the null space).
    """
    norm = float(np.linalg.norm(mean_acc))
    if norm < 1e-6:
        return state.copy()
    z = mean_acc / norm
    up = -cfg.gravity.as_array()
    up /= np.linalg.norm(up)
    pred = quat_to_matrix(state.q).T @ up
    H = np.zeros((3, 15))
    H[:, 6:9] = _skew(pred)
    return _apply_update(state, H, z - pred, cfg.sigma_gravity**2 * np.eye(3))


def zupt_detect(recent: list[ImuSample], cfg: FilterConfig) -> bool:
    """True iff the trailing window looks stationary.

    Conditions: stddev of the gyro norm below zupt_std_gyro, stddev of the
    accelerometer norm below zupt_std_acc, and mean gyro norm below
    zupt_mean_gyro.
    """
    if len(recent) < 2 or recent[-1].t - recent[0].t < cfg.zupt_window_seconds - 1e-9:
        raise InsufficientSamples(
            f"need >= {cfg.zupt_window_seconds} s of samples for the detector"
        )
    acc_n = np.array([s.acc.norm() for s in recent])
    gyro_n = np.array([s.gyro.norm() for s in recent])
    return _zupt_from_norms(acc_n, gyro_n, cfg)


def _zupt_from_norms(acc_n: np.ndarray, gyro_n: np.ndarray, cfg: FilterConfig) -> bool:
    return bool(
        np.std(gyro_n) < cfg.zupt_std_gyro
        and np.std(acc_n) < cfg.zupt_std_acc
        and np.mean(gyro_n) < cfg.zupt_mean_gyro
    )


@dataclass(frozen=True)
class Trajectory:
    """Timestamped state means from one tracking session."""

    t: np.ndarray  # (n,)
    p: np.ndarray  # (n, 3)
    v: np.ndarray  # (n, 3)
    q: np.ndarray  # (n, 4), scalar-first

    def __len__(self) -> int:
        return len(self.t)


def dead_reckon(imu: ImuSequence, init: NavState, cfg: FilterConfig) -> Trajectory:
    """Pure mechanization, no updates; the round-trip oracle path."""
    return run_tracker(imu, [], None, cfg, initial_state=init, enable_zupt=False)


def _speed_measurement(source: SpeedSource, t: float, window: np.ndarray | None,
                       cfg: FilterConfig) -> SpeedMeasurement | None:
    if isinstance(source, ConstantSpeed):
        return SpeedMeasurement(t, source.speed, source.sigma)
    if window is None:
        return None  # not enough trailing samples yet
    if isinstance(source, RegressedSpeed):
        raw = predict(source.params, window)
    else:
        raw = source.fn(t, window)
    s = min(max(float(raw), cfg.speed_clamp[0]), cfg.speed_clamp[1])
    sigma = cfg.pseudo_sigma_low if s < cfg.low_speed_threshold else cfg.pseudo_sigma_high
    return SpeedMeasurement(t, s, sigma)


def run_tracker(
    imu: ImuSequence,
    fixes: list[PositionFix],
    speed_source: SpeedSource,
    cfg: FilterConfig,
    initial_pose=None,
    initial_state: NavState | None = None,
    enable_zupt: bool = True,
    on_event: Callable[[str, float, NavState], None] | None = None,
) -> Trajectory:
    """Run the full event loop over an IMU sequence.

    Per sample: propagate, ZUPT when the detector fires, pseudo-speed update
    every cfg.pseudo_period from the chosen source (regressed/callback
    sources predict on the trailing window and apply at its end), and a
    position fix at each fix time. The initial position is taken from
    ``initial_pose``, else from the first fix; ``on_event`` is called after
    every propagate/update with (kind, t, state) for invariant checking.
    """
    fixes = sorted(fixes, key=lambda f: f.t)
    if initial_state is not None:
        state = initial_state.copy()
    else:
        if initial_pose is not None:
            p0, q0 = initial_pose.p, initial_pose.q
        elif fixes:
            p0, q0 = fixes[0].p, Quaternion.identity()
        else:
            p0, q0 = Vec3(0.0, 0.0, 0.0), Quaternion.identity()
        state = make_initial_state(p0, q0, cfg)

    n = len(imu)
    acc_n = np.linalg.norm(imu.acc, axis=1)
    gyro_n = np.linalg.norm(imu.gyro, axis=1)
    zupt_len = max(2, int(round(cfg.zupt_window_seconds * imu.nominal_rate)))

    if isinstance(speed_source, (RegressedSpeed, CallbackSpeed)):
        win_len = int(round(speed_source.window_seconds * imu.nominal_rate))
    else:
        win_len = 0

    out_t = np.empty(n)
    out_p = np.empty((n, 3))
    out_v = np.empty((n, 3))
    out_q = np.empty((n, 4))
    grav_len = max(2, int(round(cfg.gravity_window_seconds * imu.nominal_rate)))
    g_mag = cfg.gravity.norm()
    fix_i = 0
    next_speed_t = float(imu.t[0]) + cfg.pseudo_period
    next_grav_t = float(imu.t[0]) + cfg.gravity_window_seconds
    last_zupt_t = -math.inf

    def emit(kind: str, t: float) -> None:
        if on_event is not None:
            on_event(kind, t, state)

    for i in range(n):
        t = float(imu.t[i])
        if i > 0:
            state = propagate(state, imu[i - 1], t - float(imu.t[i - 1]), cfg)
            emit("propagate", t)
        if (
            enable_zupt
            and i >= zupt_len - 1
            and t - last_zupt_t >= cfg.zupt_min_interval - 1e-9
            and _zupt_from_norms(
                acc_n[i - zupt_len + 1 : i + 1], gyro_n[i - zupt_len + 1 : i + 1], cfg
            )
        ):
            state = update_zupt(state, cfg)
            last_zupt_t = t
            emit("zupt", t)
        if cfg.gravity_update and t >= next_grav_t - 1e-9 and i + 1 >= grav_len:
            mean_acc = imu.acc[i - grav_len + 1 : i + 1].mean(axis=0)
            if abs(np.linalg.norm(mean_acc) - g_mag) < cfg.gravity_gate * g_mag:
                state = update_gravity(state, mean_acc, cfg)
                emit("gravity", t)
            next_grav_t += cfg.gravity_period
        if speed_source is not None and t >= next_speed_t - 1e-9:
            window = imu.channels(i - win_len + 1, i + 1) if 0 < win_len <= i + 1 else None
            meas = _speed_measurement(speed_source, t, window, cfg)
            if meas is not None:
                state = update_pseudo_speed(state, meas, cfg.eps_speed)
                emit("pseudo_speed", t)
            next_speed_t += cfg.pseudo_period
        while fix_i < len(fixes) and fixes[fix_i].t <= t + 1e-9:
            state = update_position_fix(state, fixes[fix_i], cfg.fix_position_only)
            emit("fix", t)
            fix_i += 1
        out_t[i] = t
        out_p[i] = state.p
        out_v[i] = state.v
        out_q[i] = (state.q.w, state.q.x, state.q.y, state.q.z)
    return Trajectory(out_t, out_p, out_v, out_q)


def trajectory_rmse(traj: Trajectory, truth: PoseTrack) -> float:
    """RMSE of the 3-D position error at truth timestamps."""
    mask = (truth.t >= traj.t[0] - 1e-9) & (truth.t <= traj.t[-1] + 1e-9)
    if not mask.any():
        raise InsufficientOverlap("trajectory and truth do not overlap in time")
    ts = truth.t[mask]
    est = np.column_stack([np.interp(ts, traj.t, traj.p[:, k]) for k in range(3)])
    err = est - truth.p[mask]
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


def fixes_from_track(track: PoseTrack, every_seconds: float = 17.0,
                     sigma: float = 0.05) -> list[PositionFix]:
    """Sample sparse position fixes from a reference track."""
    if every_seconds <= 0:
        raise BadArguments("every_seconds must be > 0")
    fixes = []
    t = float(track.t[0])
    while t <= track.t[-1] + 1e-9:
        i = int(np.argmin(np.abs(track.t - t)))
        fixes.append(PositionFix(float(track.t[i]), Vec3.from_array(track.p[i]), sigma))
        t += every_seconds
    return fixes


# --- CSV interfaces ----------------------------------------------------------

TRAJECTORY_HEADER = ["t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz"]
FIXES_HEADER = ["t", "px", "py", "pz", "sigma"]


def save_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for i in range(len(traj)):
            w.writerow([repr(float(x)) for x in (traj.t[i], *traj.p[i], *traj.v[i], *traj.q[i])])


def save_fixes_csv(fixes: list[PositionFix], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIXES_HEADER)
        for f in fixes:
            w.writerow([repr(float(x)) for x in (f.t, f.p.x, f.p.y, f.p.z, f.sigma)])


def load_fixes_csv(path) -> list[PositionFix]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: empty file") from None
        if [c.strip() for c in header] != FIXES_HEADER:
            raise MalformedRow(path, 1, f"expected header {','.join(FIXES_HEADER)}")
        fixes = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise MalformedRow(path, line_no, f"expected 5 fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise MalformedRow(path, line_no, "cannot parse field") from None
            fixes.append(PositionFix(vals[0], Vec3(*vals[1:4]), vals[4]))
    if not fixes:
        raise EmptyFile(f"{path}: no data rows")
    return fixes
