"""Multiplicative extended Kalman filter over attitude (DCM) and gyro bias.

The global estimate {C_hat, b_hat} lives on SO(3) x R^3; the filter tracks
the 6x6 covariance of the error state [attitude rotation vector; bias].
Attitude corrections are applied multiplicatively, bias corrections
additively. Vector observations from any number of cameras firing at the
same step are stacked into one update.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularInnovationError
from .so3 import exp_rotvec, log_rot, skew

_EYE6 = np.eye(6)


@dataclass
class MekfState:
    C_hat: np.ndarray                   # 3x3 estimated body-from-inertial
    b_hat: np.ndarray                   # rad/s estimated gyro bias
    P: np.ndarray                       # 6x6 error covariance

    def __post_init__(self):
        self.C_hat = np.asarray(self.C_hat, dtype=float)
        self.b_hat = np.asarray(self.b_hat, dtype=float)
        self.P = np.asarray(self.P, dtype=float)

    def copy(self):
        return MekfState(self.C_hat.copy(), self.b_hat.copy(), self.P.copy())


@dataclass
class MekfTuning:
    Q: np.ndarray                       # 6x6 per-step process noise
    R: np.ndarray                       # 6x6 stacked camera noise
    P0: np.ndarray
    C_hat0: np.ndarray
    b_hat0: np.ndarray

    def __post_init__(self):
        for name in ("Q", "R", "P0"):
            m = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, m)
            if np.linalg.eigvalsh(0.5 * (m + m.T)).min() < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
        self.C_hat0 = np.asarray(self.C_hat0, dtype=float)
        self.b_hat0 = np.asarray(self.b_hat0, dtype=float)

    def initial_state(self):
        return MekfState(self.C_hat0.copy(), self.b_hat0.copy(), self.P0.copy())


@dataclass
class ErrorRecord:
    t: float
    dtheta: np.ndarray                  # rad, log of C_hat C_true^T
    angle: float                        # rad, = ||dtheta||
    bias_err: np.ndarray                # rad/s, b_hat - b_true


def predict(state, omega_meas, dt, Q):
    """Dead-reckoning propagation from one gyro sample.

    C- = exp((-dt (w - b))^x) C, bias held, P = F P F^T + Q with
    F = [[1 - dt w^x, -dt 1], [0, 1]]; P re-symmetrized.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    w = omega_meas - state.b_hat
    C = exp_rotvec(-dt * w) @ state.C_hat
    F = _EYE6.copy()
    F[:3, :3] -= dt * skew(w)
    F[:3, 3:] = -dt * np.eye(3)
    P = F @ state.P @ F.T + Q
    P = 0.5 * (P + P.T)
    return MekfState(C, state.b_hat.copy(), P)


def apply_correction(state, dx):
    """Multiplicative attitude correction, additive bias correction."""
    dx = np.asarray(dx, dtype=float)
    C = exp_rotvec(-dx[:3]) @ state.C_hat
    return MekfState(C, state.b_hat + dx[3:], state.P.copy())


def update(state, obs):
    """Stacked vector-measurement update.

    obs is a list of (y_body, y_inertial, Sigma_n) triples for the cameras
    firing this step. Returns (corrected state, stacked pre-update residual).
    """
    if not obs:
        raise ValueError("obs must be non-empty")
    m = len(obs)
    H = np.zeros((3 * m, 6))
    r = np.empty(3 * m)
    R = np.zeros((3 * m, 3 * m))
    for j, (y_b, y_i, cov) in enumerate(obs):
        y_pred = state.C_hat @ np.asarray(y_i, dtype=float)
        sl = slice(3 * j, 3 * j + 3)
        H[sl, :3] = skew(y_pred)
        r[sl] = np.asarray(y_b, dtype=float) - y_pred
        R[sl, sl] = cov
    P = state.P
    S = H @ P @ H.T + R
    if np.linalg.cond(S) > 1e12:
        raise SingularInnovationError("innovation covariance is ill-conditioned")
    K = np.linalg.solve(S, H @ P).T
    dx = K @ r
    P_new = (_EYE6 - K @ H) @ P
    P_new = 0.5 * (P_new + P_new.T)
    corrected = apply_correction(MekfState(state.C_hat, state.b_hat, P_new), dx)
    return corrected, r


def attitude_error(C_hat, C_true, t=0.0, bias_err=None):
    """Error rotation C_hat C_true^T as a rotation vector and scalar angle.

    The angle is ||log(C_err)||, which agrees with the trace formula
    acos((tr - 1)/2) but keeps full precision near zero where acos has a
    ~1e-8 round-off floor.
    """
    C_err = np.asarray(C_hat, dtype=float) @ np.asarray(C_true, dtype=float).T
    dtheta = log_rot(C_err)
    if bias_err is None:
        bias_err = np.zeros(3)
    return ErrorRecord(t, dtheta, float(np.linalg.norm(dtheta)),
                       np.asarray(bias_err, float))


class Mekf:
    """Stateful wrapper driving the predict/update primitives."""

    def __init__(self, tuning):
        self.tuning = tuning
        self.state = tuning.initial_state()

    def predict(self, omega_meas, dt):
        self.state = predict(self.state, omega_meas, dt, self.tuning.Q)
        return self.state

    def update(self, obs):
        self.state, residual = update(self.state, obs)
        return residual


@dataclass
class FilterTrace:
    """Per-gyro-step filter history plus covariance diagnostics."""

    t: np.ndarray
    angle_err: np.ndarray               # rad
    dtheta: np.ndarray                  # (n, 3) rad
    bias_err: np.ndarray                # (n, 3) rad/s
    trace_P: np.ndarray
    att_var: np.ndarray                 # (n,) mean attitude-block variance, rad^2
    min_eig_P: float = np.inf           # over sampled steps
    max_sym_defect: float = 0.0
    max_update_trace_jump: float = -np.inf   # max tr(P+) - tr(P-) over updates
    max_ortho_defect: float = 0.0       # of C_hat, over sampled steps

    def __len__(self):
        return len(self.t)


def run_filter(stream, tuning, truth, camera_refs, camera_covs,
               true_bias=None, eig_check_every=100):
    """Replay a recorded measurement stream against a truth trajectory.

    Predicts on every gyro sample; all cameras timestamped at that sample
    (within half a gyro period) are stacked into one update. camera_refs and
    camera_covs map channel name -> inertial reference vector / measurement
    covariance used by the filter. Errors are evaluated against the truth
    attitude at the end of each gyro interval; true_bias may be an (n, 3)
    array aligned with the gyro samples, for bias-error records.
    """
    n = len(stream.gyro_t)
    if n == 0:
        raise ValueError("gyro stream is empty")
    dt = stream.gyro_t[1] - stream.gyro_t[0] if n > 1 else 1.0
    cam_idx = {name: 0 for name in stream.camera_t}

    filt = Mekf(tuning)
    out = FilterTrace(
        t=stream.gyro_t.copy(),
        angle_err=np.empty(n), dtheta=np.empty((n, 3)),
        bias_err=np.empty((n, 3)), trace_P=np.empty(n), att_var=np.empty(n),
    )

    for k in range(n):
        t_k = stream.gyro_t[k]
        filt.predict(stream.gyro[k], dt)

        obs = []
        for name in sorted(stream.camera_t):
            times = stream.camera_t[name]
            i = cam_idx[name]
            if i < len(times) and abs(times[i] - t_k) <= 0.5 * dt:
                obs.append((stream.camera[name][i], camera_refs[name],
                            camera_covs[name]))
                cam_idx[name] = i + 1
        if obs:
            tr_before = np.trace(filt.state.P)
            filt.update(obs)
            jump = np.trace(filt.state.P) - tr_before
            out.max_update_trace_jump = max(out.max_update_trace_jump, jump)

        st = filt.state
        C_true = truth.attitude[k + 1] if len(truth.attitude) > n else truth.attitude[k]
        b_true = true_bias[k] if true_bias is not None else np.zeros(3)
        rec = attitude_error(st.C_hat, C_true, t=t_k, bias_err=st.b_hat - b_true)
        out.angle_err[k] = rec.angle
        out.dtheta[k] = rec.dtheta
        out.bias_err[k] = rec.bias_err
        out.trace_P[k] = np.trace(st.P)
        out.att_var[k] = np.trace(st.P[:3, :3]) / 3.0

        if k % eig_check_every == 0 or k == n - 1:
            out.max_sym_defect = max(out.max_sym_defect,
                                     float(np.abs(st.P - st.P.T).max()))
            out.min_eig_P = min(out.min_eig_P,
                                float(np.linalg.eigvalsh(st.P).min()))
            out.max_ortho_defect = max(
                out.max_ortho_defect,
                float(np.abs(st.C_hat @ st.C_hat.T - np.eye(3)).max()))

    return filt.state, out
