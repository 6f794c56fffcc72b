"""Named closed-loop scenarios, performance metrics, and Monte Carlo batches.

Two scenarios mirror the simulation campaigns: `controlled` (PI yaw-rate
tracking through a ramped reference profile) and `free_decay` (open-loop
decay with the MEKF running on emulated sensors). Runs are deterministic
functions of (config, seed); batches fan out over seed+i and aggregate
order-independently.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dynamics, so3
from .config import ScenarioConfig
from .errors import (NoRampEndError, UnsettledError, WindowTooShortError)
from .mekf import Mekf, attitude_error
from .rand import NoiseStreams
from .sensors import MeasurementStream


# -- metrics ---------------------------------------------------------------

def compute_overshoot(t, w, target, window):
    """Peak exceedance above the constant target, percent, over [t1, t2].

    Zero when the trace never rises above the target inside the window.
    """
    t1, t2 = window
    mask = (t >= t1) & (t <= t2)
    if not mask.any():
        raise NoRampEndError("overshoot window is empty; profile never "
                             "reached the target")
    peak = w[mask].max() if target > 0 else w[mask].min()
    over = (peak - target) / target * 100.0
    return max(float(over), 0.0)


def compute_settling(t, w, ramp_start, window_end, band_frac, target):
    """Settling time of a ramped command: first time the trace enters the
    band_frac * |target| band around the commanded rate, reported from ramp
    start (the command has no step instant, so timing is ramp-relative).

    Raises Unsettled when the trace never reaches the band inside
    [ramp_start, window_end].
    """
    band = band_frac * abs(target)
    mask = (t >= ramp_start) & (t <= window_end)
    if not mask.any():
        raise NoRampEndError("settling window is empty")
    inside = np.abs(w[mask] - target) <= band
    if not inside.any():
        raise UnsettledError(
            f"trace never reached the {band_frac * 100:.0f}% band around "
            f"{target:g} inside the window")
    tt = t[mask]
    return float(tt[np.flatnonzero(inside)[0]] - ramp_start)


def compute_steady_sigma(t, w, window):
    """Sample standard deviation of w over [t1, t2] (ddof = 1)."""
    t1, t2 = window
    mask = (t >= t1) & (t <= t2)
    n = int(mask.sum())
    if n < 100:
        raise WindowTooShortError(f"steady window holds {n} samples, need >= 100")
    return float(np.std(w[mask], ddof=1))


# -- run containers ---------------------------------------------------------

@dataclass
class RunMetrics:
    overshoot_pct: Optional[float] = None
    settling_time_s: Optional[float] = None
    steady_state_sigma_deg_s: Optional[float] = None
    mekf_angle_mean_deg: Optional[float] = None
    mekf_angle_sigma_deg: Optional[float] = None
    bias_err_mean_deg_s: Optional[list] = None
    bias_err_sigma_deg_s: Optional[list] = None

    def to_dict(self):
        return {
            "overshoot_pct": self.overshoot_pct,
            "settling_time_s": self.settling_time_s,
            "steady_state_sigma_deg_s": self.steady_state_sigma_deg_s,
            "mekf_angle_mean_deg": self.mekf_angle_mean_deg,
            "mekf_angle_sigma_deg": self.mekf_angle_sigma_deg,
            "bias_err_mean_deg_s": self.bias_err_mean_deg_s,
            "bias_err_sigma_deg_s": self.bias_err_sigma_deg_s,
        }

    FIELDS = ("overshoot_pct", "settling_time_s", "steady_state_sigma_deg_s",
              "mekf_angle_mean_deg", "mekf_angle_sigma_deg",
              "bias_err_mean_deg_s", "bias_err_sigma_deg_s")


@dataclass
class ControlledResult:
    """Full-rate closed-loop trace; row k is the state after step k."""

    t: np.ndarray
    omega_true: np.ndarray              # (n, 3) rad/s
    gyro: np.ndarray                    # (n, 3) rad/s
    filt_yaw: np.ndarray                # rad/s, the controller's input
    ref: np.ndarray                     # rad/s
    torque: np.ndarray                  # N m
    integrator: np.ndarray              # N m
    ramp_start: float
    ramp_end: float
    hold_end: float
    target: float                       # rad/s
    max_ortho_defect: float = 0.0
    metrics: Optional[RunMetrics] = None


@dataclass
class FreeDecayResult:
    """Truth, sensor, and filter history of one free-decay run."""

    t: np.ndarray
    omega_true: np.ndarray              # (n, 3) rad/s
    true_rotvec: np.ndarray             # (n, 3) rad, log of the truth attitude
    true_bias: np.ndarray               # (n, 3) rad/s
    gyro: np.ndarray                    # (n, 3) rad/s
    angle_err: np.ndarray               # rad
    dtheta: np.ndarray                  # (n, 3) rad
    bias_err: np.ndarray                # (n, 3) rad/s
    trace_P: np.ndarray
    att_var: np.ndarray                 # mean attitude-block variance, rad^2
    stream: Optional[MeasurementStream] = None
    min_eig_P: float = np.inf
    max_sym_defect: float = 0.0
    max_update_trace_jump: float = -np.inf
    max_ortho_defect: float = 0.0
    convergence_time_s: Optional[float] = None   # first t with error < 0.3 deg
    metrics: Optional[RunMetrics] = None


@dataclass
class BatchSummary:
    """Per-metric mean and sample standard deviation across seeded runs."""

    scenario: str
    n_runs: int
    seeds: list
    stats: dict                          # metric -> {"mean": x, "std": s}
    runs: list = field(default_factory=list)   # RunMetrics per run

    def to_dict(self):
        return {"scenario": self.scenario, "n_runs": self.n_runs,
                "seeds": list(self.seeds), "stats": self.stats,
                "runs": [m.to_dict() for m in self.runs]}


# -- reference profile helpers ----------------------------------------------

def profile_times(config):
    """(ramp_start, ramp_end, hold_end, target) of the first nonzero-target
    segment of the reference profile; all-zero profiles return a degenerate
    zero target spanning the whole run."""
    segments = config.reference_segments()
    ramp_rate = math.radians(config.doc["reference"]["ramp_deg_s2"])
    t0 = 0.0
    prev_target = 0.0
    for target, duration in segments:
        if target != prev_target:
            ramp_time = abs(target - prev_target) / ramp_rate
            if ramp_time > duration:
                raise NoRampEndError(
                    f"segment of {duration} s too short to ramp to "
                    f"{math.degrees(target):.1f} deg/s")
            return t0, t0 + ramp_time, t0 + duration, target
        t0 += duration
    return 0.0, 0.0, t0, 0.0


def _segment_schedule(config, n_steps, dt):
    """Per-segment (end_step, target) pairs covering the run."""
    ends, targets = [], []
    acc = 0.0
    for target, duration in config.reference_segments():
        acc += duration
        ends.append(min(int(round(acc / dt)), n_steps))
        targets.append(target)
    if ends[-1] < n_steps:
        ends[-1] = n_steps
    return np.array(ends, dtype=np.int64), np.array(targets)


# -- scenario loops (pure python reference) ----------------------------------

def run_controlled(config, zero_noise=False, backend="auto"):
    """Closed-loop yaw-rate tracking through the configured reference profile.

    Returns a ControlledResult with RunMetrics computed from the filtered
    measured yaw rate (the quantity the controller regulates).
    """
    if backend == "auto":
        backend = "fast" if not config.doc["controller"]["use_estimator_rate"] \
            else "python"
    if backend == "fast":
        try:
            from . import _kernels
            result = _kernels.controlled_fast(config, zero_noise)
        except (ImportError, NotImplementedError):
            result = _controlled_python(config, zero_noise)
    else:
        result = _controlled_python(config, zero_noise)
    result.metrics = _controlled_metrics(config, result)
    return result


def _controlled_metrics(config, res):
    window = tuple(config.doc["metrics"]["steady_window_s"])
    band = config.doc["metrics"]["settle_band"]
    target_deg = math.degrees(res.target)
    if res.target == 0.0:
        # reference never leaves zero: degenerate metrics
        try:
            sigma = compute_steady_sigma(res.t, np.degrees(res.filt_yaw), window)
        except WindowTooShortError:
            sigma = None
        return RunMetrics(overshoot_pct=0.0, settling_time_s=0.0,
                          steady_state_sigma_deg_s=sigma)
    overshoot = compute_overshoot(res.t, np.degrees(res.filt_yaw), target_deg,
                                  (res.ramp_end, res.hold_end))
    settling = compute_settling(res.t, np.degrees(res.filt_yaw),
                                res.ramp_start, res.hold_end, band, target_deg)
    sigma = compute_steady_sigma(res.t, np.degrees(res.filt_yaw), window)
    return RunMetrics(overshoot_pct=overshoot, settling_time_s=settling,
                      steady_state_sigma_deg_s=sigma)


def _controlled_python(config, zero_noise):
    dt = config.dt
    n = int(round(config.doc["controlled"]["duration_s"] / dt))
    m = config.gyro_decimation
    dt_g = config.gyro_dt

    model = config.build_inertia()
    dist = config.build_disturbance(zero_noise)
    gyro = config.build_gyro(zero_noise)
    gains = config.build_controller()
    lp = config.build_lowpass()
    ref = config.build_reference()
    seg_ends, seg_targets = _segment_schedule(config, n, dt)
    use_est = bool(config.doc["controller"]["use_estimator_rate"])
    streams = NoiseStreams(config.seed)

    filt = None
    if use_est:
        filt = Mekf(config.build_tuning())
        cameras = config.build_cameras(zero_noise)
        cam_covs = config.update_covs()
        cam_refs = [cam.ref_inertial for cam in cameras]

    state = dynamics.RigidBodyState(np.eye(3), np.zeros(3))
    g = gyro.sample(state.omega, streams.gyro, streams.gyro_bias)
    if use_est:
        filt.predict(g, dt_g)  # prime with the t=0 sample

    out = ControlledResult(
        t=dt * np.arange(1, n + 1),
        omega_true=np.empty((n, 3)), gyro=np.empty((n, 3)),
        filt_yaw=np.empty(n), ref=np.empty(n), torque=np.empty(n),
        integrator=np.empty(n), ramp_start=0.0, ramp_end=0.0, hold_end=0.0,
        target=0.0)
    out.ramp_start, out.ramp_end, out.hold_end, out.target = profile_times(config)

    seg = 0
    tau = 0.0
    for k in range(n):
        if k >= seg_ends[seg] and seg + 1 < len(seg_ends):
            seg += 1
        ref.target = seg_targets[seg]
        r = ref.step(dt)

        if k % m == 0:
            if use_est:
                yaw_meas = g[2] - filt.state.b_hat[2]
            else:
                yaw_meas = g[2]
            lp.step(yaw_meas, dt_g)
            tau = gains.step(r, lp.y, dt_g)

        res = dynamics.step(state, model, dist, tau, dt, streams, step_index=k)
        state = res.state

        if (k + 1) % m == 0:
            g = gyro.sample(res.omega_mid, streams.gyro, streams.gyro_bias)
            if use_est:
                filt.predict(g, dt_g)

        if use_est:
            t_next = (k + 1) * dt
            obs = []
            for idx, cam in enumerate(cameras):
                if cam.due(t_next):
                    y_b = cam.sample(state.attitude,
                                     getattr(streams, f"camera{idx + 1}"))
                    obs.append((y_b, cam_refs[idx], cam_covs[idx]))
            if obs:
                filt.update(obs)

        out.omega_true[k] = state.omega
        out.gyro[k] = g
        out.filt_yaw[k] = lp.y
        out.ref[k] = r
        out.torque[k] = tau
        out.integrator[k] = gains.integrator

    out.max_ortho_defect = float(
        np.abs(state.attitude @ state.attitude.T - np.eye(3)).max())
    return out


def run_free_decay(config, zero_noise=False, perfect_init=False,
                   backend="auto", collect_stream=False):
    """Open-loop decay with the MEKF running on the emulated sensors.

    perfect_init starts the filter at the true attitude and true bias (the
    zero-noise exactness configuration).
    """
    if backend in ("auto", "fast"):
        try:
            from . import _kernels
            result = _kernels.free_decay_fast(config, zero_noise, perfect_init,
                                              collect_stream)
        except (ImportError, NotImplementedError):
            result = _free_decay_python(config, zero_noise, perfect_init,
                                        collect_stream)
    else:
        result = _free_decay_python(config, zero_noise, perfect_init,
                                    collect_stream)
    steady_after = config.doc["metrics"]["mekf_steady_after_s"]
    result.metrics = _free_decay_metrics(result, steady_after)
    return result


def _free_decay_metrics(res, steady_after):
    below = np.flatnonzero(np.degrees(res.angle_err) < 0.3)
    res.convergence_time_s = float(res.t[below[0]]) if below.size else None
    mask = res.t > steady_after
    if mask.sum() < 2:
        return RunMetrics()
    angle_deg = np.degrees(res.angle_err[mask])
    bias_deg = np.degrees(res.bias_err[mask])
    return RunMetrics(
        mekf_angle_mean_deg=float(angle_deg.mean()),
        mekf_angle_sigma_deg=float(angle_deg.std(ddof=1)),
        bias_err_mean_deg_s=[float(x) for x in bias_deg.mean(axis=0)],
        bias_err_sigma_deg_s=[float(x) for x in bias_deg.std(axis=0, ddof=1)],
    )


def _free_decay_python(config, zero_noise, perfect_init, collect_stream):
    dt = config.dt
    n = int(round(config.doc["free_decay"]["duration_s"] / dt))
    m = config.gyro_decimation
    dt_g = config.gyro_dt

    model = config.build_inertia()
    dist = config.build_disturbance(zero_noise)
    gyro = config.build_gyro(zero_noise)
    cameras = config.build_cameras(zero_noise)
    cam_covs = config.update_covs()
    C0, omega0 = config.free_decay_initial_state()
    tuning = config.build_tuning(
        perfect_init=(C0, gyro.bias) if perfect_init else None)
    filt = Mekf(tuning)
    streams = NoiseStreams(config.seed)

    state = dynamics.RigidBodyState(C0.copy(), omega0.copy())

    out = FreeDecayResult(
        t=dt * np.arange(1, n + 1),
        omega_true=np.empty((n, 3)), true_rotvec=np.empty((n, 3)),
        true_bias=np.empty((n, 3)), gyro=np.empty((n, 3)),
        angle_err=np.empty(n), dtheta=np.empty((n, 3)),
        bias_err=np.empty((n, 3)), trace_P=np.empty(n), att_var=np.empty(n))

    cam_t = {f"camera{i + 1}": [] for i in range(len(cameras))}
    cam_v = {f"camera{i + 1}": [] for i in range(len(cameras))}
    g = np.zeros(3)

    for k in range(n):
        res = dynamics.step(state, model, dist, 0.0, dt, streams, step_index=k)
        state = res.state
        t_next = (k + 1) * dt

        if (k + 1) % m == 0:
            g = gyro.sample(res.omega_mid, streams.gyro, streams.gyro_bias)
            filt.predict(g, dt_g)

        obs = []
        for idx, cam in enumerate(cameras):
            if cam.due(t_next):
                y_b = cam.sample(state.attitude,
                                 getattr(streams, f"camera{idx + 1}"))
                obs.append((y_b, cam.ref_inertial, cam_covs[idx]))
                if collect_stream:
                    cam_t[f"camera{idx + 1}"].append(t_next)
                    cam_v[f"camera{idx + 1}"].append(y_b)
        if obs:
            tr_before = np.trace(filt.state.P)
            filt.update(obs)
            jump = np.trace(filt.state.P) - tr_before
            out.max_update_trace_jump = max(out.max_update_trace_jump, jump)

        st = filt.state
        rec = attitude_error(st.C_hat, state.attitude, t=t_next,
                             bias_err=st.b_hat - gyro.bias)
        out.omega_true[k] = state.omega
        out.true_rotvec[k] = so3.log_rot(state.attitude)
        out.true_bias[k] = gyro.bias
        out.gyro[k] = g
        out.angle_err[k] = rec.angle
        out.dtheta[k] = rec.dtheta
        out.bias_err[k] = rec.bias_err
        out.trace_P[k] = np.trace(st.P)
        out.att_var[k] = np.trace(st.P[:3, :3]) / 3.0

        if k % 100 == 0 or k == n - 1:
            out.max_sym_defect = max(out.max_sym_defect,
                                     float(np.abs(st.P - st.P.T).max()))
            out.min_eig_P = min(out.min_eig_P,
                                float(np.linalg.eigvalsh(st.P).min()))
            out.max_ortho_defect = max(
                out.max_ortho_defect,
                float(np.abs(st.C_hat @ st.C_hat.T - np.eye(3)).max()),
                float(np.abs(state.attitude @ state.attitude.T - np.eye(3)).max()))

    if collect_stream:
        out.stream = MeasurementStream(
            gyro_t=out.t[m - 1::m].copy(), gyro=out.gyro[m - 1::m].copy(),
            camera_t={k2: np.array(v) for k2, v in cam_t.items() if v},
            camera={k2: np.array(v) for k2, v in cam_v.items() if v})
    return out


# -- Monte Carlo --------------------------------------------------------------

def _one_run(args):
    doc, seed, scenario, zero_noise = args
    config = ScenarioConfig(doc).with_overrides(seed=seed)
    if scenario == "controlled":
        return run_controlled(config, zero_noise=zero_noise).metrics
    return run_free_decay(config, zero_noise=zero_noise).metrics


def monte_carlo(config, n_runs, scenario="controlled", zero_noise=False,
                max_workers=None):
    """Seeded batch: run i uses seed config.seed + i. Aggregation is a pure
    order-independent reduction over the per-run metrics."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = [config.seed + i for i in range(n_runs)]
    jobs = [(config.resolved(), s, scenario, zero_noise) for s in seeds]
    if max_workers is None:
        max_workers = min(n_runs, os.cpu_count() or 1)
    if max_workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            runs = list(pool.map(_one_run, jobs))
    else:
        runs = [_one_run(job) for job in jobs]
    return summarize_batch(scenario, seeds, runs)


def summarize_batch(scenario, seeds, runs):
    stats = {}
    for name in RunMetrics.FIELDS:
        values = [getattr(r, name) for r in runs]
        if any(v is None for v in values):
            continue
        arr = np.array(values, dtype=float)
        mean = arr.mean(axis=0)
        std = arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros_like(mean)
        if arr.ndim == 1:
            stats[name] = {"mean": float(mean), "std": float(std)}
        else:
            stats[name] = {"mean": [float(x) for x in mean],
                           "std": [float(x) for x in std]}
    return BatchSummary(scenario=scenario, n_runs=len(runs), seeds=list(seeds),
                        stats=stats, runs=list(runs))
