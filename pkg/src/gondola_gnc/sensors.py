"""Sensor emulation: rate gyro with random-walk bias, and star cameras
returning noisy body-frame unit vectors at fixed rates."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .so3 import exp_rotvec


def _diag_sigma(cov, name):
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3")
    if not np.allclose(cov, np.diag(np.diag(cov))):
        raise ValueError(f"{name} must be diagonal")
    d = np.diag(cov)
    if np.any(d < 0.0):
        raise ValueError(f"{name} must be positive semidefinite")
    return np.sqrt(d)


@dataclass
class GyroModel:
    """Three-axis rate gyro: measurement = rate + bias + white noise, with the
    bias advancing as a random walk after each sample."""

    noise_cov: np.ndarray               # (rad/s)^2 per sample
    bias_walk_cov: np.ndarray           # (rad/s)^2 per sample
    bias: np.ndarray                    # rad/s, current true bias
    rate_hz: float

    def __post_init__(self):
        self._noise_sigma = _diag_sigma(self.noise_cov, "gyro noise_cov")
        self._walk_sigma = _diag_sigma(self.bias_walk_cov, "gyro bias_walk_cov")
        self.bias = np.asarray(self.bias, dtype=float).copy()
        if self.rate_hz <= 0.0:
            raise ValueError("rate_hz must be positive")

    def sample(self, omega_true, rng, rng_walk=None):
        """Biased, noisy rate measurement; advances the bias walk.

        The walk draws from rng_walk when given, so bias randomness can live
        on its own stream.
        """
        if self._noise_sigma.any():
            meas = omega_true + self.bias + self._noise_sigma * rng.standard_normal(3)
        else:
            meas = omega_true + self.bias
        if self._walk_sigma.any():
            walk = rng_walk if rng_walk is not None else rng
            self.bias = self.bias + self._walk_sigma * walk.standard_normal(3)
        return meas


def gyro_sample(omega_true, model, rng):
    return model.sample(omega_true, rng)


@dataclass
class StarCameraModel:
    """Vector sensor toward a known inertial direction at a fixed rate.

    Noise is an exact small random rotation applied to the true body-frame
    direction, so outputs keep unit norm.
    """

    ref_inertial: np.ndarray            # unit vector, inertial frame
    noise_cov: np.ndarray               # rad^2
    rate_hz: float
    phase: float = 0.0

    def __post_init__(self):
        self.ref_inertial = np.asarray(self.ref_inertial, dtype=float)
        if abs(np.linalg.norm(self.ref_inertial) - 1.0) > 1e-12:
            raise ValueError("ref_inertial must be a unit vector")
        self._noise_sigma = _diag_sigma(self.noise_cov, "camera noise_cov")
        if self.rate_hz <= 0.0:
            raise ValueError("rate_hz must be positive")
        self._next_due = self.phase + 1.0 / self.rate_hz

    def sample(self, C_bi_true, rng):
        y = C_bi_true @ self.ref_inertial
        if self._noise_sigma.any():
            y = exp_rotvec(-(self._noise_sigma * rng.standard_normal(3))) @ y
        return y / np.linalg.norm(y)

    def due(self, t):
        """True once per schedule slot when t reaches the next due time."""
        if t >= self._next_due - 1e-9:
            self._next_due += 1.0 / self.rate_hz
            return True
        return False

    def reset_schedule(self):
        self._next_due = self.phase + 1.0 / self.rate_hz


def camera_sample(C_bi_true, cam, rng):
    return cam.sample(C_bi_true, rng)


def camera_due(t, cam):
    return cam.due(t)


def check_observability(y1, y2, tol=1e-6):
    """True when the two reference directions are not collinear."""
    return bool(np.linalg.norm(np.cross(np.asarray(y1, float),
                                        np.asarray(y2, float))) > tol)


@dataclass
class MeasurementStream:
    """Timestamped sensor samples for offline filter replay."""

    gyro_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    gyro: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    camera_t: dict = field(default_factory=dict)      # channel -> (n,) times
    camera: dict = field(default_factory=dict)        # channel -> (n, 3) vectors

    def validate(self):
        for t in (self.gyro_t, *self.camera_t.values()):
            if len(t) > 1 and not np.all(np.diff(t) > 0.0):
                raise ValueError("timestamps must be strictly increasing")

    def to_csv(self, path):
        """Columns: t, channel, v1, v2, v3; rows sorted by time then channel."""
        rows = [(t, "gyro", *v) for t, v in zip(self.gyro_t, self.gyro)]
        for name in sorted(self.camera_t):
            rows.extend((t, name, *v)
                        for t, v in zip(self.camera_t[name], self.camera[name]))
        rows.sort(key=lambda r: (r[0], r[1]))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "channel", "v1", "v2", "v3"])
            for t, name, a, b, c in rows:
                w.writerow([repr(float(t)), name, repr(float(a)),
                            repr(float(b)), repr(float(c))])

    @classmethod
    def from_csv(cls, path):
        gyro_t, gyro = [], []
        cam_t, cam_v = {}, {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                t = float(row["t_s"])
                v = [float(row["v1"]), float(row["v2"]), float(row["v3"])]
                if row["channel"] == "gyro":
                    gyro_t.append(t)
                    gyro.append(v)
                else:
                    cam_t.setdefault(row["channel"], []).append(t)
                    cam_v.setdefault(row["channel"], []).append(v)
        stream = cls(np.array(gyro_t), np.array(gyro),
                     {k: np.array(v) for k, v in cam_t.items()},
                     {k: np.array(v) for k, v in cam_v.items()})
        stream.validate()
        return stream
