"""Ingestion, time alignment, window extraction, folds, and speed statistics.

File formats (UTF-8, LF, '.' decimal separator):

* ``imu.csv``   header ``t,ax,ay,az,gx,gy,gz`` — seconds, m/s^2, rad/s
* ``pose.csv``  header ``t,px,py,pz,qw,qx,qy,qz`` — meters and unit quaternion
* ``labels.csv`` header ``t_start,t_end,mode`` with mode in
  {static,walking,stairs,elevator,escalator}
* window cache: one binary record per window, little-endian f64, layout
  ``[t0, tT, label_speed, mode_id, 6*L data row-major]`` (mode_id -1 when
  the window carries no mode label)

Loaders and extractors are pure functions of their inputs; window lists are
immutable after construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import ImuSample, MotionLabel, MotionMode, PoseSample, Quaternion, Vec3
from .errors import (
    BadArguments,
    EmptyFile,
    EmptyInput,
    GapTooLarge,
    InsufficientOverlap,
    MalformedRow,
    NonMonotoneTime,
    OutOfRange,
)

IMU_HEADER = ["t", "ax", "ay", "az", "gx", "gy", "gz"]
POSE_HEADER = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"]
LABELS_HEADER = ["t_start", "t_end", "mode"]

MAX_GAP_PERIODS = 5.0  # reject sequences with gaps beyond this multiple of the nominal period
QUAT_NORM_TOL = 1e-6  # ingest tolerance on |q| - 1


@dataclass(frozen=True)
class ImuSequence:
    """Strictly increasing IMU samples at a nominal rate (default 100 Hz)."""

    t: np.ndarray  # (n,)
    acc: np.ndarray  # (n, 3)
    gyro: np.ndarray  # (n, 3)
    nominal_rate: float = 100.0

    def __post_init__(self):
        if len(self.t) == 0:
            raise EmptyInput("IMU sequence has no samples")
        dt = np.diff(self.t)
        if len(dt) and dt.min() <= 0:
            i = int(np.argmax(dt <= 0))
            raise NonMonotoneTime(f"non-increasing timestamp at sample {i + 1}")
        max_gap = MAX_GAP_PERIODS / self.nominal_rate
        if len(dt) and dt.max() >= max_gap:
            i = int(np.argmax(dt >= max_gap))
            raise GapTooLarge(
                f"gap of {dt.max():.4f} s at sample {i + 1} exceeds {max_gap:.4f} s"
            )

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> ImuSample:
        return ImuSample(
            float(self.t[i]), Vec3.from_array(self.acc[i]), Vec3.from_array(self.gyro[i])
        )

    @staticmethod
    def from_samples(samples: list[ImuSample], nominal_rate: float = 100.0) -> ImuSequence:
        t = np.array([s.t for s in samples], dtype=np.float64)
        acc = np.array([[s.acc.x, s.acc.y, s.acc.z] for s in samples], dtype=np.float64)
        gyro = np.array([[s.gyro.x, s.gyro.y, s.gyro.z] for s in samples], dtype=np.float64)
        return ImuSequence(t, acc.reshape(-1, 3), gyro.reshape(-1, 3), nominal_rate)

    def channels(self, i0: int, i1: int) -> np.ndarray:
        """6 x (i1-i0) slab: rows acc x,y,z then gyro x,y,z."""
        return np.concatenate([self.acc[i0:i1].T, self.gyro[i0:i1].T], axis=0).copy()


@dataclass(frozen=True)
class PoseTrack:
    """Strictly increasing ground-truth poses at a nominal rate (default 60 Hz)."""

    t: np.ndarray  # (n,)
    p: np.ndarray  # (n, 3)
    q: np.ndarray  # (n, 4), scalar-first
    nominal_rate: float = 60.0

    def __post_init__(self):
        if len(self.t) == 0:
            raise EmptyInput("pose track has no samples")
        dt = np.diff(self.t)
        if len(dt) and dt.min() <= 0:
            i = int(np.argmax(dt <= 0))
            raise NonMonotoneTime(f"non-increasing timestamp at sample {i + 1}")

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> PoseSample:
        return PoseSample(
            float(self.t[i]),
            Vec3.from_array(self.p[i]),
            Quaternion(*(float(v) for v in self.q[i])),
        )

    @staticmethod
    def from_samples(samples: list[PoseSample], nominal_rate: float = 60.0) -> PoseTrack:
        t = np.array([s.t for s in samples], dtype=np.float64)
        p = np.array([[s.p.x, s.p.y, s.p.z] for s in samples], dtype=np.float64)
        q = np.array([[s.q.w, s.q.x, s.q.y, s.q.z] for s in samples], dtype=np.float64)
        return PoseTrack(t, p.reshape(-1, 3), q.reshape(-1, 4), nominal_rate)


@dataclass(frozen=True)
class Window:
    """Fixed-length 6xL IMU slab with its ground-truth momentary-speed label."""

    data: np.ndarray  # (6, L): rows acc x,y,z then gyro x,y,z
    t0: float
    tT: float
    label_speed: float
    mode: MotionMode | None = None

    def __post_init__(self):
        if self.label_speed < 0:
            raise BadArguments("label_speed must be >= 0")
        if self.data.shape[0] != 6:
            raise BadArguments(f"window data must have 6 rows, got {self.data.shape}")


@dataclass(frozen=True)
class FoldPlan:
    """k-fold assignment of window indices, deterministic per seed."""

    k: int
    assignments: np.ndarray  # (n,) fold index per window index
    seed: int

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def _parse_float(path, line_no, text, what):
    try:
        v = float(text)
    except ValueError:
        raise MalformedRow(path, line_no, f"cannot parse {what} {text!r}") from None
    if not math.isfinite(v):
        raise MalformedRow(path, line_no, f"non-finite {what} {text!r}")
    return v


def _read_rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: empty file") from None
        if [c.strip() for c in first] != header:
            raise MalformedRow(path, 1, f"expected header {','.join(header)}")
        rows = [(i + 2, row) for i, row in enumerate(reader) if row]
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    return rows


def load_imu_csv(path, nominal_rate: float = 100.0) -> ImuSequence:
    """Parse and monotonicity-validate an imu.csv file."""
    rows = _read_rows(path, IMU_HEADER)
    samples = []
    for line_no, row in rows:
        if len(row) != 7:
            raise MalformedRow(path, line_no, f"expected 7 fields, got {len(row)}")
        vals = [_parse_float(path, line_no, c, IMU_HEADER[j]) for j, c in enumerate(row)]
        s = ImuSample(vals[0], Vec3(*vals[1:4]), Vec3(*vals[4:7]))
        try:
            s.validate()
        except ValueError as e:
            raise MalformedRow(path, line_no, str(e)) from None
        samples.append(s)
    return ImuSequence.from_samples(samples, nominal_rate)


def load_pose_csv(path, nominal_rate: float = 60.0) -> PoseTrack:
    """Parse a pose.csv file, checking the quaternion norm on every row."""
    rows = _read_rows(path, POSE_HEADER)
    samples = []
    for line_no, row in rows:
        if len(row) != 8:
            raise MalformedRow(path, line_no, f"expected 8 fields, got {len(row)}")
        vals = [_parse_float(path, line_no, c, POSE_HEADER[j]) for j, c in enumerate(row)]
        q = Quaternion(*vals[4:8])
        if abs(q.norm() - 1.0) > QUAT_NORM_TOL:
            raise MalformedRow(path, line_no, f"quaternion norm {q.norm():.6f} not within {QUAT_NORM_TOL} of 1")
        samples.append(PoseSample(vals[0], Vec3(*vals[1:4]), q.normalized()))
    return PoseTrack.from_samples(samples, nominal_rate)


def load_labels_csv(path) -> list[MotionLabel]:
    """Parse a labels.csv file of motion-mode spans."""
    rows = _read_rows(path, LABELS_HEADER)
    labels = []
    for line_no, row in rows:
        if len(row) != 3:
            raise MalformedRow(path, line_no, f"expected 3 fields, got {len(row)}")
        t0 = _parse_float(path, line_no, row[0], "t_start")
        t1 = _parse_float(path, line_no, row[1], "t_end")
        try:
            mode = MotionMode.from_name(row[2])
        except KeyError:
            raise MalformedRow(path, line_no, f"unknown mode {row[2]!r}") from None
        try:
            labels.append(MotionLabel(mode, t0, t1))
        except ValueError as e:
            raise MalformedRow(path, line_no, str(e)) from None
    return labels


def save_imu_csv(seq: ImuSequence, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IMU_HEADER)
        for i in range(len(seq)):
            w.writerow(
                [repr(float(v)) for v in (seq.t[i], *seq.acc[i], *seq.gyro[i])]
            )


def save_pose_csv(track: PoseTrack, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POSE_HEADER)
        for i in range(len(track)):
            w.writerow(
                [repr(float(v)) for v in (track.t[i], *track.p[i], *track.q[i])]
            )


def interpolate_position(track: PoseTrack, t: float) -> Vec3:
    """Piecewise-linear interpolation of position at time t."""
    if t < track.t[0] or t > track.t[-1]:
        raise OutOfRange(f"t={t} outside [{track.t[0]}, {track.t[-1]}]")
    i = int(np.searchsorted(track.t, t, side="right")) - 1
    if i == len(track) - 1:
        return Vec3.from_array(track.p[-1])
    w = (t - track.t[i]) / (track.t[i + 1] - track.t[i])
    return Vec3.from_array((1.0 - w) * track.p[i] + w * track.p[i + 1])


def label_speed(track: PoseTrack, t0: float, tT: float) -> float:
    """Momentary speed over [t0, tT]: displacement norm divided by elapsed time."""
    if not t0 < tT:
        raise BadArguments(f"need t0 < tT, got [{t0}, {tT}]")
    p0 = interpolate_position(track, t0)
    pT = interpolate_position(track, tT)
    return (pT - p0).norm() / (tT - t0)


def window_speed_stats(
    track: PoseTrack, t0: float, tT: float, sub_dt: float | None = None
) -> tuple[float, float, float]:
    """(min, max, mean) instantaneous speed over [t0, tT].

    Speeds are finite differences of the interpolated position at sub_dt
    spacing (default: the pose sample period).
    """
    if not t0 < tT:
        raise BadArguments(f"need t0 < tT, got [{t0}, {tT}]")
    if sub_dt is None:
        sub_dt = 1.0 / track.nominal_rate
    if sub_dt <= 0:
        raise BadArguments("sub_dt must be > 0")
    n = max(1, int(round((tT - t0) / sub_dt)))
    ts = np.linspace(t0, tT, n + 1)
    pts = np.array([interpolate_position(track, float(t)).as_array() for t in ts])
    speeds = np.linalg.norm(np.diff(pts, axis=0), axis=1) / np.diff(ts)
    return float(speeds.min()), float(speeds.max()), float(speeds.mean())


def _majority_mode(labels: list[MotionLabel] | None, t0: float, t1: float) -> MotionMode | None:
    """Majority-duration mode over [t0, t1]; None when no label overlaps."""
    if not labels:
        return None
    best, best_dur = None, 0.0
    for lab in labels:
        d = lab.duration_within(t0, t1)
        if d > best_dur:
            best, best_dur = lab.mode, d
    return best


def extract_windows(
    imu: ImuSequence,
    track: PoseTrack,
    window_seconds: float = 2.0,
    stride_seconds: float = 1.0,
    randomize: bool = False,
    seed: int = 0,
    labels: list[MotionLabel] | None = None,
) -> list[Window]:
    """Cut labeled 6xL windows from raw IMU samples.

    L = round(window_seconds * nominal_rate). Window starts are snapped to
    the nearest IMU sample; the IMU is never resampled. With
    ``randomize=False`` starts advance by ``stride_seconds`` from the start
    of the overlap (test mode; the default 1 s stride gives 50% overlap for
    2 s windows). With ``randomize=True`` the same number of starts is drawn
    uniformly over the valid range (training mode, deterministic per seed).

    The label is the momentary speed over [t0, t0 + window_seconds] from the
    pose track; the optional mode is the majority-duration motion label.
    """
    L = int(round(window_seconds * imu.nominal_rate))
    if L < 1:
        raise BadArguments("window_seconds too small for the IMU rate")
    if stride_seconds <= 0:
        raise BadArguments("stride_seconds must be > 0")
    if L > len(imu):
        raise InsufficientOverlap(f"window needs {L} samples, sequence has {len(imu)}")
    t_lo = max(float(imu.t[0]), float(track.t[0]))
    # Last admissible start: the label span must stay on the pose track and
    # the window's L samples must fit in the IMU sequence.
    last_start = min(float(track.t[-1]) - window_seconds, float(imu.t[len(imu) - L]))
    if last_start < t_lo - 1e-12:
        raise InsufficientOverlap(
            f"overlap starting at {t_lo} shorter than {window_seconds} s window"
        )
    if randomize:
        n = int(math.floor((last_start - t_lo) / stride_seconds)) + 1
        rng = np.random.default_rng(seed)
        starts = rng.uniform(t_lo, last_start, size=n)
    else:
        starts = np.arange(t_lo, last_start + 1e-9, stride_seconds)

    windows = []
    for ts in starts:
        i0 = int(np.searchsorted(imu.t, ts))
        # snap to the nearest sample, then clamp so L samples fit
        if i0 > 0 and abs(imu.t[i0 - 1] - ts) < abs(imu.t[min(i0, len(imu) - 1)] - ts):
            i0 -= 1
        i0 = min(i0, len(imu) - L)
        while imu.t[i0] < track.t[0] and i0 < len(imu) - L:
            i0 += 1  # snapping moved the start off the pose track
        t0 = float(imu.t[i0])
        tT = t0 + window_seconds
        if t0 < float(track.t[0]) or tT > float(track.t[-1]) + 1e-12:
            continue  # label span not covered by the pose track
        tT = min(tT, float(track.t[-1]))
        windows.append(
            Window(
                data=imu.channels(i0, i0 + L),
                t0=t0,
                tT=tT,
                label_speed=label_speed(track, t0, tT),
                mode=_majority_mode(labels, t0, tT),
            )
        )
    return windows


def kfold_split(n: int, k: int = 10, seed: int = 0) -> FoldPlan:
    """Random permutation partitioned into k near-equal folds."""
    if not (isinstance(n, int) and isinstance(k, int)) or n < k or k < 2:
        raise BadArguments(f"need n >= k >= 2, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    sizes = [n // k + (1 if f < n % k else 0) for f in range(k)]
    pos = 0
    for f, size in enumerate(sizes):
        assignments[perm[pos : pos + size]] = f
        pos += size
    return FoldPlan(k=k, assignments=assignments, seed=seed)


_MODE_NONE_ID = -1.0


def save_windows(windows: list[Window], path) -> None:
    """Binary window cache: per window [t0, tT, label_speed, mode_id, 6*L data]."""
    if not windows:
        raise BadArguments("no windows to save")
    with open(path, "wb") as fh:
        for w in windows:
            mode_id = float(w.mode.value) if w.mode is not None else _MODE_NONE_ID
            rec = np.concatenate(
                [[w.t0, w.tT, w.label_speed, mode_id], w.data.reshape(-1)]
            ).astype("<f8")
            fh.write(rec.tobytes())


def load_windows(path, window_len: int) -> list[Window]:
    """Load a binary window cache written by save_windows.

    The record layout carries no header, so the per-window sample count L
    must be supplied.
    """
    raw = np.fromfile(path, dtype="<f8")
    rec_len = 4 + 6 * window_len
    if raw.size == 0 or raw.size % rec_len != 0:
        raise BadArguments(
            f"file size {raw.size * 8} bytes is not a multiple of the record size for L={window_len}"
        )
    windows = []
    for rec in raw.reshape(-1, rec_len):
        mode = None if rec[3] == _MODE_NONE_ID else MotionMode(int(rec[3]))
        windows.append(
            Window(
                data=rec[4:].reshape(6, window_len).astype(np.float64),
                t0=float(rec[0]),
                tT=float(rec[1]),
                label_speed=float(rec[2]),
                mode=mode,
            )
        )
    return windows
