"""Scenario configuration: documented key schema, defaults, file loading
with unknown-key rejection, and builders for the simulation models.

Config keys carry explicit units (mass_kg, kp_Nm_s_per_deg, ...) and are
converted to SI radians once, here, at build time. Every key falls back to
the baseline values in defaults.py; the noise section falls back to the
selected low/high profile.
"""

import copy
import json
import math

import numpy as np
import yaml

from . import defaults
from .control import LowPassState, PiGains, RateReference
from .dynamics import DisturbanceModel, InertiaModel
from .errors import ConfigError
from .mekf import MekfTuning
from .sensors import GyroModel, StarCameraModel
from .so3 import exp_rotvec


def default_document():
    """The full config document with baseline values."""
    return {
        "seed": 0,
        "dt_s": defaults.DT_S,
        "noise_profile": "low",
        "body": {
            "mass_kg": defaults.MASS_KG,
            "inertia_kg_m2": [list(row) for row in defaults.INERTIA_KG_M2],
            "com_offset_m": list(defaults.COM_OFFSET_M),
            "gravity_m_s2": list(defaults.GRAVITY_M_S2),
        },
        "disturbance": {
            "damping_diag_Nm_s_per_rad": list(defaults.DAMPING_DIAG_NM_S_PER_RAD),
            "coulomb_level_Nm": defaults.COULOMB_LEVEL_NM,
            "coulomb_smoothing_rad_s": defaults.COULOMB_SMOOTHING_RAD_S,
        },
        "noise": dict(defaults.NOISE_PROFILES["low"]),
        "gyro": {
            "bias0_deg_s": list(defaults.GYRO_BIAS0_DEG_S),
            "rate_hz": None,
        },
        "cameras": {
            "ref1": list(defaults.CAMERA1_REF),
            "ref2": list(defaults.CAMERA2_REF),
            "phase1_s": 0.0,
            "phase2_s": 0.0,
        },
        "controller": {
            "kp_Nm_s_per_deg": defaults.KP_NM_S_PER_DEG,
            "ki_Nm_per_deg": defaults.KI_NM_PER_DEG,
            "lowpass_tau_s": defaults.LOWPASS_TAU_S,
            "torque_limit_Nm": None,
            "use_estimator_rate": False,
        },
        "reference": {
            "ramp_deg_s2": defaults.RAMP_DEG_S2,
            "segments": [list(seg) for seg in defaults.REFERENCE_SEGMENTS],
        },
        "controlled": {
            "duration_s": defaults.CONTROLLED_DURATION_S,
        },
        "free_decay": {
            "duration_s": defaults.FREE_DECAY_DURATION_S,
            "omega0_deg_s": list(defaults.OMEGA0_DEG_S),
            "tilt_deg": defaults.TILT_DEG,
            "tilt_axis": list(defaults.TILT_AXIS),
        },
        "mekf": {
            "att_sigma0_deg": defaults.MEKF_ATT_SIGMA0_DEG,
            "bias_sigma0_deg_s": defaults.MEKF_BIAS_SIGMA0_DEG_S,
            "q_scale": defaults.MEKF_Q_SCALE,
            "r_scale": defaults.MEKF_R_SCALE,
            "init_rotvec_deg": list(defaults.MEKF_INIT_ROTVEC_DEG),
            "init_bias_deg_s": list(defaults.MEKF_INIT_BIAS_DEG_S),
        },
        "metrics": {
            "steady_window_s": list(defaults.STEADY_WINDOW_S),
            "settle_band": defaults.SETTLE_BAND,
            "mekf_steady_after_s": defaults.MEKF_STEADY_AFTER_S,
        },
        "output": {
            "log_every_s": 0.1,
        },
    }


def _merge(base, override, path=""):
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}", key=where)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a mapping", key=where)
            _merge(base[key], value, where)
        else:
            base[key] = value


def _require_positive(doc, dotted):
    node = doc
    for part in dotted.split(".")[:-1]:
        node = node[part]
    key = dotted.split(".")[-1]
    value = node[key]
    if value is None or not np.isscalar(value) or not value > 0:
        raise ConfigError(f"{dotted} must be positive, got {value!r}", key=dotted)


class ScenarioConfig:
    """Resolved configuration plus builders for the model objects."""

    def __init__(self, doc=None):
        base = default_document()
        overrides = copy.deepcopy(doc) if doc else {}
        profile = overrides.get("noise_profile", base["noise_profile"])
        if profile not in ("low", "high", "custom"):
            raise ConfigError(
                f"noise_profile must be low, high, or custom, got {profile!r}",
                key="noise_profile")
        if profile in defaults.NOISE_PROFILES:
            base["noise"] = dict(defaults.NOISE_PROFILES[profile])
        _merge(base, overrides)
        self.doc = base
        self._validate()

    def _validate(self):
        doc = self.doc
        for dotted in ("dt_s", "body.mass_kg", "controlled.duration_s",
                       "free_decay.duration_s", "controller.lowpass_tau_s",
                       "noise.camera1_rate_hz", "noise.camera2_rate_hz",
                       "output.log_every_s", "metrics.mekf_steady_after_s"):
            _require_positive(doc, dotted)
        if not isinstance(doc["seed"], int):
            raise ConfigError("seed must be an integer", key="seed")
        band = doc["metrics"]["settle_band"]
        if not 0.0 < band < 1.0:
            raise ConfigError("metrics.settle_band must be in (0, 1)",
                              key="metrics.settle_band")
        w = doc["metrics"]["steady_window_s"]
        if len(w) != 2 or not w[0] < w[1]:
            raise ConfigError("metrics.steady_window_s must be [t1, t2] with t1 < t2",
                              key="metrics.steady_window_s")
        segs = doc["reference"]["segments"]
        if not segs or any(len(s) != 2 or s[1] <= 0 for s in segs):
            raise ConfigError(
                "reference.segments must be a list of [target_deg_s, duration_s]",
                key="reference.segments")
        rate = doc["gyro"]["rate_hz"]
        if rate is not None:
            period = 1.0 / float(rate)
            steps = period / doc["dt_s"]
            if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
                raise ConfigError(
                    "gyro.rate_hz must divide the step rate 1/dt_s evenly",
                    key="gyro.rate_hz")

    # -- basic accessors -------------------------------------------------

    @property
    def seed(self):
        return self.doc["seed"]

    @property
    def dt(self):
        return float(self.doc["dt_s"])

    @property
    def gyro_dt(self):
        rate = self.doc["gyro"]["rate_hz"]
        return self.dt if rate is None else 1.0 / float(rate)

    @property
    def gyro_decimation(self):
        return int(round(self.gyro_dt / self.dt))

    def with_overrides(self, **top_level):
        doc = copy.deepcopy(self.doc)
        doc.update(top_level)
        return ScenarioConfig(doc)

    def resolved(self):
        return copy.deepcopy(self.doc)

    # -- model builders ---------------------------------------------------

    def build_inertia(self):
        body = self.doc["body"]
        try:
            return InertiaModel(np.array(body["inertia_kg_m2"], dtype=float),
                                float(body["mass_kg"]),
                                np.array(body["com_offset_m"], dtype=float),
                                g_inertial=np.array(body["gravity_m_s2"], dtype=float))
        except ValueError as exc:
            raise ConfigError(f"body: {exc}", key="body") from exc

    def build_disturbance(self, zero_noise=False):
        d = self.doc["disturbance"]
        n = self.doc["noise"]
        dt = self.dt
        if zero_noise:
            torque_cov = np.zeros((3, 3))
            att_cov = np.zeros((3, 3))
        else:
            torque_cov = np.diag(np.array(n["torque_noise_diag_Nm2_s"], float) * dt)
            att_cov = math.radians(n["attitude_noise_deg"]) ** 2 * np.eye(3)
        return DisturbanceModel(
            np.diag(np.array(d["damping_diag_Nm_s_per_rad"], float)),
            float(d["coulomb_level_Nm"]),
            float(d["coulomb_smoothing_rad_s"]),
            torque_cov, att_cov)

    def gyro_covs(self, zero_noise=False):
        """Per-sample gyro noise and bias-walk covariances (rad/s)^2."""
        if zero_noise:
            return np.zeros((3, 3)), np.zeros((3, 3))
        n = self.doc["noise"]
        dt_g = self.gyro_dt
        sg = math.radians(n["gyro_noise_deg_per_sqrt_s"]) ** 2 / dt_g
        sb = math.radians(n["bias_walk_deg_s_per_sqrt_s"]) ** 2 * dt_g
        return sg * np.eye(3), sb * np.eye(3)

    def build_gyro(self, zero_noise=False):
        noise_cov, walk_cov = self.gyro_covs(zero_noise)
        bias0 = np.radians(np.array(self.doc["gyro"]["bias0_deg_s"], float))
        return GyroModel(noise_cov, walk_cov, bias0, 1.0 / self.gyro_dt)

    def camera_noise_cov(self, index, zero_noise=False):
        if zero_noise:
            return np.zeros((3, 3))
        n = self.doc["noise"]
        return math.radians(n[f"camera{index}_noise_deg"]) ** 2 * np.eye(3)

    def build_cameras(self, zero_noise=False):
        n = self.doc["noise"]
        cams = []
        for index in (1, 2):
            ref = np.array(self.doc["cameras"][f"ref{index}"], dtype=float)
            cams.append(StarCameraModel(
                ref / np.linalg.norm(ref),
                self.camera_noise_cov(index, zero_noise),
                float(n[f"camera{index}_rate_hz"]),
                float(self.doc["cameras"][f"phase{index}_s"])))
        return cams

    def build_tuning(self, perfect_init=None):
        """Filter tuning: Q uses the standard error-state discretization
        (gyro block scaled by the gyro period squared).

        Deliberately independent of any zero-noise switch: silencing the
        injected noise leaves the filter's assumed covariances intact.
        """
        m = self.doc["mekf"]
        dt_g = self.gyro_dt
        sg_cov, sb_cov = self.gyro_covs()
        Q = np.zeros((6, 6))
        Q[:3, :3] = m["q_scale"] * sg_cov * dt_g ** 2
        Q[3:, 3:] = m["q_scale"] * sb_cov
        R = np.zeros((6, 6))
        R[:3, :3] = m["r_scale"] * self.camera_noise_cov(1)
        R[3:, 3:] = m["r_scale"] * self.camera_noise_cov(2)
        P0 = np.diag([math.radians(m["att_sigma0_deg"]) ** 2] * 3
                     + [math.radians(m["bias_sigma0_deg_s"]) ** 2] * 3)
        if perfect_init is not None:
            C0, b0 = perfect_init
            C0, b0 = C0.copy(), b0.copy()
        else:
            C0 = exp_rotvec(np.radians(np.array(m["init_rotvec_deg"], float)))
            b0 = np.radians(np.array(m["init_bias_deg_s"], float))
        return MekfTuning(Q, R, P0, C0, b0)

    def update_covs(self):
        """Per-camera measurement covariances assumed by filter updates
        (independent of whether sensor noise is actually injected)."""
        r_scale = self.doc["mekf"]["r_scale"]
        return [r_scale * self.camera_noise_cov(i) for i in (1, 2)]

    def build_controller(self):
        c = self.doc["controller"]
        deg = math.radians(1.0)
        limit = c["torque_limit_Nm"]
        return PiGains(kp=float(c["kp_Nm_s_per_deg"]) / deg,
                       ki=float(c["ki_Nm_per_deg"]) / deg,
                       torque_limit=None if limit is None else float(limit))

    def build_lowpass(self):
        return LowPassState(tau=float(self.doc["controller"]["lowpass_tau_s"]))

    def build_reference(self):
        return RateReference(target=0.0,
                             ramp_rate=math.radians(
                                 self.doc["reference"]["ramp_deg_s2"]))

    def reference_segments(self):
        """[(target rad/s, duration s), ...]"""
        return [(math.radians(t), float(d))
                for t, d in self.doc["reference"]["segments"]]

    def free_decay_initial_state(self):
        fd = self.doc["free_decay"]
        omega0 = np.radians(np.array(fd["omega0_deg_s"], float))
        axis = np.array(fd["tilt_axis"], dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise ConfigError("free_decay.tilt_axis must be nonzero",
                              key="free_decay.tilt_axis")
        tilt = math.radians(fd["tilt_deg"]) * axis / norm
        C0 = exp_rotvec(-tilt)
        return C0, omega0


def load_config(path):
    """Parse a YAML or JSON config file into a ScenarioConfig."""
    with open(path) as fh:
        text = fh.read()
    if not text.strip():
        return ScenarioConfig()
    try:
        if str(path).endswith(".json"):
            doc = json.loads(text)
        else:
            doc = yaml.safe_load(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}: {exc.msg}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else "?"
        raise ConfigError(f"parse error at line {line}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    return ScenarioConfig(doc)
