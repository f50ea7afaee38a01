"""Synthetic trajectory and IMU generation.

Trajectories are defined in closed form (position, velocity, acceleration,
orientation, and body angular rate all analytic), so the derived IMU is an
exact inverse of the strapdown mechanization: acc = R(q)^T (p'' - g) and
gyro is the body rate extracted from the quaternion derivative. Feeding the
derived IMU back through dead reckoning must reproduce the trajectory — the
central oracle property used by the filter tests.

The gait model is a sinusoidal vertical specific-force oscillation plus a
matching body-pitch swing: crude, but enough to defeat the stationarity
detector during walking and to give the network a learnable
amplitude/frequency-to-speed relationship.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import MotionLabel, MotionMode, Quaternion, Vec3, quat_mul, quat_to_matrix
from .datapipe import ImuSequence, PoseTrack, Window, extract_windows
from .errors import BadSpec

SWING_RAD_PER_AMP = 0.02  # body-pitch swing amplitude per m/s^2 of gait amplitude


@dataclass(frozen=True)
class Stationary:
    duration: float


@dataclass(frozen=True)
class StraightWalk:
    speed: float
    duration: float
    gait_freq: float = 1.9  # Hz
    gait_amp: float = 0.0  # m/s^2, vertical specific-force oscillation
    ramp_seconds: float = 0.0  # smoothstep spin-up/spin-down at both ends; 0 = constant speed
    heading: float = 0.0  # rad, world yaw of the walking direction


@dataclass(frozen=True)
class Circle:
    radius: float
    angular_rate: float  # rad/s
    duration: float


@dataclass(frozen=True)
class Composite:
    segments: tuple = ()


Motion = Stationary | StraightWalk | Circle | Composite


@dataclass(frozen=True)
class TrajectorySpec:
    motion: Motion
    sample_rate: float = 100.0
    seed: int = 0


@dataclass(frozen=True)
class NoiseSpec:
    """White-noise densities (per sqrt(Hz)) plus constant sensor biases."""

    accel_density: float = 0.0  # m/s^2/sqrt(Hz)
    gyro_density: float = 0.0  # rad/s/sqrt(Hz)
    accel_bias: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 0.0))
    gyro_bias: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 0.0))
    seed: int = 0

    def __post_init__(self):
        if self.accel_density < 0 or self.gyro_density < 0:
            raise BadSpec("noise densities must be >= 0")


@dataclass(frozen=True)
class MotionState:
    """Closed-form kinematic state at one instant."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    q: Quaternion
    omega_body: np.ndarray


def _smoothstep(u: float) -> tuple[float, float, float]:
    """(r, r', r'') of the 3u^2 - 2u^3 ramp, clamped outside [0, 1]."""
    if u <= 0.0:
        return 0.0, 0.0, 0.0
    if u >= 1.0:
        return 1.0, 0.0, 0.0
    return 3 * u * u - 2 * u**3, 6 * u - 6 * u * u, 6 - 12 * u


def _smoothstep_integral(u: float) -> float:
    """Integral of the ramp from 0 to u (u clamped to [0, 1] handled by caller)."""
    return u**3 - 0.5 * u**4


def _validate_motion(motion: Motion) -> None:
    if isinstance(motion, Stationary):
        if motion.duration <= 0:
            raise BadSpec("duration must be > 0")
    elif isinstance(motion, StraightWalk):
        if motion.duration <= 0 or motion.speed < 0:
            raise BadSpec("duration must be > 0 and speed >= 0")
        if motion.gait_amp > 0 and motion.gait_freq <= 0:
            raise BadSpec("gait_freq must be > 0 when gait_amp > 0")
        if motion.ramp_seconds < 0:
            raise BadSpec("ramp_seconds must be >= 0")
        if motion.ramp_seconds > 0 and motion.duration < 2 * motion.ramp_seconds:
            raise BadSpec("duration must cover the ramp at both ends")
    elif isinstance(motion, Circle):
        if motion.duration <= 0 or motion.radius <= 0 or motion.angular_rate == 0:
            raise BadSpec("circle needs duration > 0, radius > 0, angular_rate != 0")
    elif isinstance(motion, Composite):
        if not motion.segments:
            raise BadSpec("composite needs at least one segment")
        for seg in motion.segments:
            if isinstance(seg, Composite):
                raise BadSpec("composite segments cannot nest")
            _validate_motion(seg)
    else:
        raise BadSpec(f"unknown motion {motion!r}")


def motion_duration(motion: Motion) -> float:
    if isinstance(motion, Composite):
        return sum(motion_duration(s) for s in motion.segments)
    return motion.duration


def _eval_stationary(_seg: Stationary, _t: float) -> MotionState:
    z = np.zeros(3)
    return MotionState(z, z.copy(), z.copy(), Quaternion.identity(), z.copy())


def _ramp_envelope(t: float, duration: float, tr: float) -> tuple[float, float, float]:
    """(e, e', e'') of a smoothstep rise over tr seconds at both segment ends."""
    if tr <= 0:
        return 1.0, 0.0, 0.0
    if t < tr:
        r, rp, rpp = _smoothstep(t / tr)
        return r, rp / tr, rpp / tr**2
    if t > duration - tr:
        r, rp, rpp = _smoothstep(max(0.0, (duration - t) / tr))
        return r, -rp / tr, rpp / tr**2
    return 1.0, 0.0, 0.0


def _speed_profile(seg: StraightWalk, t: float) -> tuple[float, float, float, float]:
    """(envelope, envelope', envelope'', distance) of the ramped speed profile."""
    tr = seg.ramp_seconds
    if tr <= 0:
        return 1.0, 0.0, 0.0, seg.speed * t
    r, rdot, rddot = _ramp_envelope(t, seg.duration, tr)
    if t < tr:
        dist = seg.speed * tr * _smoothstep_integral(t / tr)
    elif t > seg.duration - tr:
        u = max(0.0, (seg.duration - t) / tr)
        dist = seg.speed * (seg.duration - tr) - seg.speed * tr * _smoothstep_integral(u)
    else:
        dist = seg.speed * (t - 0.5 * tr)
    return r, rdot, rddot, dist


def _eval_walk(seg: StraightWalk, t: float) -> MotionState:
    h = np.array([math.cos(seg.heading), math.sin(seg.heading), 0.0])
    r, rdot, rddot, dist = _speed_profile(seg, t)
    p = dist * h
    v = seg.speed * r * h
    a = seg.speed * rdot * h

    q_heading = Quaternion(math.cos(seg.heading / 2), 0.0, 0.0, math.sin(seg.heading / 2))
    omega = np.zeros(3)
    if seg.gait_amp > 0:
        # the gait engages faster than the speed ramps: the very first step
        # already shakes the IMU, which keeps the stationarity detector honest
        e, edot, eddot = _ramp_envelope(t, seg.duration, seg.ramp_seconds / 3.0)
        w = 2 * math.pi * seg.gait_freq
        amp = seg.gait_amp / (w * w)
        s, c = math.sin(w * t), math.cos(w * t)
        p = p + np.array([0.0, 0.0, -amp * e * s])
        v = v + np.array([0.0, 0.0, -amp * (edot * s + e * w * c)])
        a = a + np.array([0.0, 0.0, -amp * (eddot * s + 2 * edot * w * c) + seg.gait_amp * e * s])
        # body-pitch arm swing with the same envelope; body rate is about body y
        phi_amp = SWING_RAD_PER_AMP * seg.gait_amp
        phi = phi_amp * e * s
        phidot = phi_amp * (edot * s + e * w * c)
        q_swing = Quaternion(math.cos(phi / 2), 0.0, math.sin(phi / 2), 0.0)
        q = quat_mul(q_heading, q_swing)
        omega = np.array([0.0, phidot, 0.0])
    else:
        q = q_heading
    return MotionState(p, v, a, q, omega)


def _eval_circle(seg: Circle, t: float) -> MotionState:
    w = seg.angular_rate
    th = w * t
    r = seg.radius
    p = np.array([r * math.sin(th), r * (1.0 - math.cos(th)), 0.0])
    v = np.array([r * w * math.cos(th), r * w * math.sin(th), 0.0])
    a = np.array([-r * w * w * math.sin(th), r * w * w * math.cos(th), 0.0])
    q = Quaternion(math.cos(th / 2), 0.0, 0.0, math.sin(th / 2))
    return MotionState(p, v, a, q, np.array([0.0, 0.0, w]))


def _eval_segment(seg, t: float) -> MotionState:
    if isinstance(seg, Stationary):
        return _eval_stationary(seg, t)
    if isinstance(seg, StraightWalk):
        return _eval_walk(seg, t)
    if isinstance(seg, Circle):
        return _eval_circle(seg, t)
    raise BadSpec(f"unknown segment {seg!r}")


def eval_motion(motion: Motion, t: float) -> MotionState:
    """Kinematic state at time t. Composite chains positions segment to segment."""
    if not isinstance(motion, Composite):
        return _eval_segment(motion, t)
    offset = np.zeros(3)
    for i, seg in enumerate(motion.segments):
        d = seg.duration
        last = i == len(motion.segments) - 1
        if t <= d or last:
            st = _eval_segment(seg, min(t, d) if not last else t)
            return MotionState(st.p + offset, st.v, st.a, st.q, st.omega_body)
        offset = offset + _eval_segment(seg, d).p
        t -= d
    raise BadSpec("empty composite")  # unreachable; validated earlier


def _sample_times(motion: Motion, rate: float) -> np.ndarray:
    duration = motion_duration(motion)
    n = int(round(duration * rate))
    # linspace so the last sample lands exactly on the duration
    return np.linspace(0.0, duration, n + 1)


def gen_truth(spec: TrajectorySpec) -> PoseTrack:
    """Sample the analytic pose at the spec's rate."""
    _validate_motion(spec.motion)
    if spec.sample_rate <= 0:
        raise BadSpec("sample_rate must be > 0")
    ts = _sample_times(spec.motion, spec.sample_rate)
    p = np.empty((len(ts), 3))
    q = np.empty((len(ts), 4))
    for i, t in enumerate(ts):
        st = eval_motion(spec.motion, float(t))
        p[i] = st.p
        qq = st.q.normalized()
        q[i] = (qq.w, qq.x, qq.y, qq.z)
    return PoseTrack(ts, p, q, nominal_rate=spec.sample_rate)


def derive_imu(spec: TrajectorySpec, gravity: Vec3 = Vec3(0.0, 0.0, -9.81)) -> ImuSequence:
    """Exact inverse mechanization: specific force R^T (p'' - g) and body rate."""
    _validate_motion(spec.motion)
    if spec.sample_rate <= 0:
        raise BadSpec("sample_rate must be > 0")
    ts = _sample_times(spec.motion, spec.sample_rate)
    g = gravity.as_array()
    acc = np.empty((len(ts), 3))
    gyro = np.empty((len(ts), 3))
    for i, t in enumerate(ts):
        st = eval_motion(spec.motion, float(t))
        acc[i] = quat_to_matrix(st.q).T @ (st.a - g)
        gyro[i] = st.omega_body
    return ImuSequence(ts, acc, gyro, nominal_rate=spec.sample_rate)


def add_noise(imu: ImuSequence, noise: NoiseSpec) -> ImuSequence:
    """Per-sample Gaussian noise with variance density^2 * rate, plus biases."""
    rng = np.random.default_rng(noise.seed)
    sig_a = noise.accel_density * math.sqrt(imu.nominal_rate)
    sig_g = noise.gyro_density * math.sqrt(imu.nominal_rate)
    acc = imu.acc + noise.accel_bias.as_array() + sig_a * rng.standard_normal(imu.acc.shape)
    gyro = imu.gyro + noise.gyro_bias.as_array() + sig_g * rng.standard_normal(imu.gyro.shape)
    return ImuSequence(imu.t.copy(), acc, gyro, imu.nominal_rate)


def motion_labels(motion: Motion) -> list[MotionLabel]:
    """Per-segment motion-mode spans (stationary -> static, moving -> walking)."""
    segments = motion.segments if isinstance(motion, Composite) else (motion,)
    labels = []
    t = 0.0
    for seg in segments:
        mode = MotionMode.STATIC if isinstance(seg, Stationary) else MotionMode.WALKING
        labels.append(MotionLabel(mode, t, t + seg.duration))
        t += seg.duration
    return labels


def gen_training_set(
    specs: list[TrajectorySpec],
    noise: NoiseSpec | None = None,
    window_seconds: float = 2.0,
    stride_seconds: float = 1.0,
    randomize: bool = True,
    seed: int = 0,
) -> list[Window]:
    """Noisy IMU windows labeled from the noise-free analytic trajectories."""
    windows: list[Window] = []
    for i, spec in enumerate(specs):
        truth = gen_truth(spec)
        imu = derive_imu(spec)
        if noise is not None:
            imu = add_noise(imu, NoiseSpec(
                noise.accel_density,
                noise.gyro_density,
                noise.accel_bias,
                noise.gyro_bias,
                seed=noise.seed + i,
            ))
        windows.extend(
            extract_windows(
                imu,
                truth,
                window_seconds=window_seconds,
                stride_seconds=stride_seconds,
                randomize=randomize,
                seed=seed + i,
                labels=motion_labels(spec.motion),
            )
        )
    return windows
