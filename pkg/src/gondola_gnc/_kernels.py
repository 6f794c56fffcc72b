"""Jitted scenario loops.

These kernels integrate the full closed-loop step chain (plant RK2 step,
gyro, low-pass + PI controller, MEKF) in compiled code, consuming the same
per-source random streams in the same per-step order as the pure-Python
scenario loops in scenarios.py; an equivalence test pins the two paths
against each other. Covariance eigenvalue and orthogonality diagnostics are
computed in Python from snapshots the kernels return.
"""

import math

import numpy as np
from numba import njit

from . import dynamics
from .rand import NoiseStreams
from .sensors import MeasurementStream

_SNAP_EVERY = 100


@njit(cache=True, inline="always")
def _rodrigues(t0, t1, t2):
    a2 = t0 * t0 + t1 * t1 + t2 * t2
    if a2 < 1e-16:
        s, c = 1.0, 0.5
    else:
        a = np.sqrt(a2)
        s = np.sin(a) / a
        c = (1.0 - np.cos(a)) / a2
    ca = 1.0 - c * a2
    c01, c02, c12 = c * t0 * t1, c * t0 * t2, c * t1 * t2
    s0, s1, s2 = s * t0, s * t1, s * t2
    R = np.empty((3, 3))
    R[0, 0] = ca + c * t0 * t0
    R[0, 1] = c01 - s2
    R[0, 2] = c02 + s1
    R[1, 0] = c01 + s2
    R[1, 1] = ca + c * t1 * t1
    R[1, 2] = c12 - s0
    R[2, 0] = c02 - s1
    R[2, 1] = c12 + s0
    R[2, 2] = ca + c * t2 * t2
    return R


@njit(cache=True, inline="always")
def _m33(A, B):
    C = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            C[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return C


@njit(cache=True, inline="always")
def _m33v(A, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * v[0] + A[i, 1] * v[1] + A[i, 2] * v[2]
    return out


@njit(cache=True, inline="always")
def _cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _project_so3(M):
    U, s, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0.0:
        U2 = U.copy()
        U2[:, 2] = -U2[:, 2]
        R = U2 @ Vt
    return R


@njit(cache=True, inline="always")
def _log_rotvec(C):
    tr = C[0, 0] + C[1, 1] + C[2, 2]
    x = (tr - 1.0) / 2.0
    if x > 1.0:
        x = 1.0
    elif x < -1.0:
        x = -1.0
    angle = np.arccos(x)
    w = np.empty(3)
    w[0] = 0.5 * (C[2, 1] - C[1, 2])
    w[1] = 0.5 * (C[0, 2] - C[2, 0])
    w[2] = 0.5 * (C[1, 0] - C[0, 1])
    if angle < 1e-8:
        return w
    if angle < np.pi - 1e-3:
        ratio = angle / np.sin(angle)
        w[0] *= ratio
        w[1] *= ratio
        w[2] *= ratio
        return w
    # near pi: symmetric-part extraction (rare in these scenarios)
    cos_a = x
    one_minus = 1.0 - cos_a
    a2 = np.empty(3)
    for i in range(3):
        v = (C[i, i] - cos_a) / one_minus
        a2[i] = v if v > 0.0 else 0.0
    k = 0
    if a2[1] > a2[k]:
        k = 1
    if a2[2] > a2[k]:
        k = 2
    axis = np.empty(3)
    axis[k] = np.sqrt(a2[k])
    for i in range(3):
        if i != k:
            axis[i] = 0.5 * (C[k, i] + C[i, k]) / (one_minus * axis[k])
    axis /= np.sqrt(axis[0] ** 2 + axis[1] ** 2 + axis[2] ** 2)
    dot = w[0] * axis[0] + w[1] * axis[1] + w[2] * axis[2]
    if dot < 0.0:
        axis = -axis
    sin_a = np.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
    if sin_a > 1.0:
        sin_a = 1.0
    return axis * (np.pi - np.arcsin(sin_a))


@njit(cache=True, inline="always")
def _plant_step(C, w, tau_piv, dt, I, I_inv, r_skew, mg, dd, c_lvl, c_eps,
                tau_sigma, has_tau_noise, xi_sigma, has_xi_noise,
                gen_torque, gen_att):
    """One RK2 midpoint step; mirrors dynamics.step op for op."""
    if has_tau_noise:
        noise = tau_sigma * gen_torque.standard_normal(3)
    else:
        noise = np.zeros(3)

    g1 = _m33v(C, mg)
    tau1 = _m33v(r_skew, g1) + noise
    tau1 -= dd * w
    tau1[2] += tau_piv - c_lvl * np.tanh(w[2] / c_eps)
    k1 = _m33v(I_inv, tau1 - _cross3(w, _m33v(I, w)))

    wm = w + (0.5 * dt) * k1
    g2 = g1 - (0.5 * dt) * _cross3(w, g1)
    tau2 = _m33v(r_skew, g2) + noise
    tau2 -= dd * wm
    tau2[2] += tau_piv - c_lvl * np.tanh(wm[2] / c_eps)
    k2 = _m33v(I_inv, tau2 - _cross3(wm, _m33v(I, wm)))

    w_new = w + dt * k2
    C_new = _m33(_rodrigues(-dt * wm[0], -dt * wm[1], -dt * wm[2]), C)
    if has_xi_noise:
        xi = xi_sigma * gen_att.standard_normal(3)
        C_new = _m33(_rodrigues(-xi[0], -xi[1], -xi[2]), C_new)
    return C_new, w_new, wm


@njit(cache=True)
def _controlled_kernel(n, dt, m, dt_g,
                       I, I_inv, r_skew, mg, dd, c_lvl, c_eps,
                       tau_sigma, has_tau_noise, xi_sigma, has_xi_noise,
                       g_sigma, has_g_noise, walk_sigma, has_walk, bias0,
                       kp, ki, lp_tau, t_limit, has_limit, ramp_rate,
                       seg_ends, seg_targets, project_every,
                       gen_torque, gen_att, gen_gyro, gen_walk,
                       omega_true, gyro_out, filt_yaw, ref_out,
                       torque_out, integ_out):
    C = np.eye(3)
    w = np.zeros(3)
    bias = bias0.copy()

    # initial gyro sample at t = 0
    if has_g_noise:
        g = w + bias + g_sigma * gen_gyro.standard_normal(3)
    else:
        g = w + bias
    if has_walk:
        bias = bias + walk_sigma * gen_walk.standard_normal(3)

    lp_y = 0.0
    integ = 0.0
    tau = 0.0
    ref = 0.0
    seg = 0
    alpha = dt_g / (lp_tau + dt_g)
    n_seg = len(seg_ends)

    for k in range(n):
        if k >= seg_ends[seg] and seg + 1 < n_seg:
            seg += 1
        target = seg_targets[seg]
        delta = target - ref
        move = ramp_rate * dt
        if abs(delta) <= move:
            ref = target
        else:
            ref += move if delta > 0.0 else -move

        if k % m == 0:
            lp_y += alpha * (g[2] - lp_y)
            e = ref - lp_y
            inc = ki * e * dt_g
            tau_c = kp * e + integ + inc
            if has_limit and abs(tau_c) > t_limit:
                tau_c = t_limit if tau_c > 0.0 else -t_limit
            else:
                integ += inc
            tau = tau_c

        C, w, wm = _plant_step(C, w, tau, dt, I, I_inv, r_skew, mg, dd,
                               c_lvl, c_eps, tau_sigma, has_tau_noise,
                               xi_sigma, has_xi_noise, gen_torque, gen_att)
        if (k + 1) % project_every == 0:
            C = _project_so3(C)

        if (k + 1) % m == 0:
            if has_g_noise:
                g = wm + bias + g_sigma * gen_gyro.standard_normal(3)
            else:
                g = wm + bias
            if has_walk:
                bias = bias + walk_sigma * gen_walk.standard_normal(3)

        omega_true[k, 0] = w[0]
        omega_true[k, 1] = w[1]
        omega_true[k, 2] = w[2]
        gyro_out[k, 0] = g[0]
        gyro_out[k, 1] = g[1]
        gyro_out[k, 2] = g[2]
        filt_yaw[k] = lp_y
        ref_out[k] = ref
        torque_out[k] = tau
        integ_out[k] = integ

    defect = 0.0
    CCt = _m33(C, C.T.copy())
    for i in range(3):
        for j in range(3):
            d = CCt[i, j] - (1.0 if i == j else 0.0)
            if abs(d) > defect:
                defect = abs(d)
    return defect


@njit(cache=True, inline="always")
def _mekf_predict(C_hat, b_hat, P, g, dt_g, Q):
    wt = g - b_hat
    C_hat = _m33(_rodrigues(-dt_g * wt[0], -dt_g * wt[1], -dt_g * wt[2]), C_hat)
    F = np.eye(6)
    F[0, 1] = dt_g * wt[2]
    F[0, 2] = -dt_g * wt[1]
    F[1, 0] = -dt_g * wt[2]
    F[1, 2] = dt_g * wt[0]
    F[2, 0] = dt_g * wt[1]
    F[2, 1] = -dt_g * wt[0]
    F[0, 3] = -dt_g
    F[1, 4] = -dt_g
    F[2, 5] = -dt_g
    P = F @ P @ F.T + Q
    P = 0.5 * (P + P.T)
    return C_hat, P


@njit(cache=True, inline="always")
def _mekf_update(C_hat, b_hat, P, ys, refs, covs, n_obs):
    """Stacked update for n_obs cameras; ys/refs are (2, 3), covs (2, 3, 3)."""
    nr = 3 * n_obs
    H = np.zeros((nr, 6))
    r = np.empty(nr)
    R = np.zeros((nr, nr))
    for j in range(n_obs):
        yp = _m33v(C_hat, refs[j])
        o = 3 * j
        H[o + 0, 1] = -yp[2]
        H[o + 0, 2] = yp[1]
        H[o + 1, 0] = yp[2]
        H[o + 1, 2] = -yp[0]
        H[o + 2, 0] = -yp[1]
        H[o + 2, 1] = yp[0]
        for i in range(3):
            r[o + i] = ys[j, i] - yp[i]
            for i2 in range(3):
                R[o + i, o + i2] = covs[j, i, i2]
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    dx = K @ r
    P = (np.eye(6) - K @ H) @ P
    P = 0.5 * (P + P.T)
    C_hat = _m33(_rodrigues(-dx[0], -dx[1], -dx[2]), C_hat)
    b_hat = b_hat + dx[3:]
    return C_hat, b_hat, P


@njit(cache=True)
def _free_decay_kernel(n, dt, m, dt_g,
                       I, I_inv, r_skew, mg, dd, c_lvl, c_eps,
                       tau_sigma, has_tau_noise, xi_sigma, has_xi_noise,
                       g_sigma, has_g_noise, walk_sigma, has_walk, bias0,
                       C0, w0, C_hat0, b_hat0, P0, Q,
                       cam_steps1, cam_steps2, cam_refs, cam_sigmas,
                       cam_has_noise, cam_covs, project_every,
                       gen_torque, gen_att, gen_gyro, gen_walk,
                       gen_cam1, gen_cam2,
                       omega_true, true_rotvec, true_bias_out, gyro_out,
                       angle_err, dtheta_out, bias_err, trace_P, att_var,
                       cam1_vals, cam2_vals,
                       snap_P, snap_C, snap_Ch):
    C = C0.copy()
    w = w0.copy()
    bias = bias0.copy()
    C_hat = C_hat0.copy()
    b_hat = b_hat0.copy()
    P = P0.copy()

    g = np.zeros(3)
    p1 = 0
    p2 = 0
    n_snap = 0
    max_jump = -np.inf

    ys = np.empty((2, 3))
    refs_buf = np.empty((2, 3))
    covs_buf = np.empty((2, 3, 3))

    for k in range(n):
        C, w, wm = _plant_step(C, w, 0.0, dt, I, I_inv, r_skew, mg, dd,
                               c_lvl, c_eps, tau_sigma, has_tau_noise,
                               xi_sigma, has_xi_noise, gen_torque, gen_att)
        if (k + 1) % project_every == 0:
            C = _project_so3(C)

        if (k + 1) % m == 0:
            if has_g_noise:
                g = wm + bias + g_sigma * gen_gyro.standard_normal(3)
            else:
                g = wm + bias
            if has_walk:
                bias = bias + walk_sigma * gen_walk.standard_normal(3)
            C_hat, P = _mekf_predict(C_hat, b_hat, P, g, dt_g, Q)

        n_obs = 0
        if p1 < len(cam_steps1) and cam_steps1[p1] == k:
            y = _m33v(C, cam_refs[0])
            if cam_has_noise[0]:
                dn = cam_sigmas[0] * gen_cam1.standard_normal(3)
                y = _m33v(_rodrigues(-dn[0], -dn[1], -dn[2]), y)
            y /= np.sqrt(y[0] ** 2 + y[1] ** 2 + y[2] ** 2)
            for i in range(3):
                ys[n_obs, i] = y[i]
                refs_buf[n_obs, i] = cam_refs[0, i]
                for i2 in range(3):
                    covs_buf[n_obs, i, i2] = cam_covs[0, i, i2]
                cam1_vals[p1, i] = y[i]
            p1 += 1
            n_obs += 1
        if p2 < len(cam_steps2) and cam_steps2[p2] == k:
            y = _m33v(C, cam_refs[1])
            if cam_has_noise[1]:
                dn = cam_sigmas[1] * gen_cam2.standard_normal(3)
                y = _m33v(_rodrigues(-dn[0], -dn[1], -dn[2]), y)
            y /= np.sqrt(y[0] ** 2 + y[1] ** 2 + y[2] ** 2)
            for i in range(3):
                ys[n_obs, i] = y[i]
                refs_buf[n_obs, i] = cam_refs[1, i]
                for i2 in range(3):
                    covs_buf[n_obs, i, i2] = cam_covs[1, i, i2]
                cam2_vals[p2, i] = y[i]
            p2 += 1
            n_obs += 1
        if n_obs > 0:
            tr_before = 0.0
            for i in range(6):
                tr_before += P[i, i]
            C_hat, b_hat, P = _mekf_update(C_hat, b_hat, P, ys, refs_buf,
                                           covs_buf, n_obs)
            tr_after = 0.0
            for i in range(6):
                tr_after += P[i, i]
            if tr_after - tr_before > max_jump:
                max_jump = tr_after - tr_before

        C_err = _m33(C_hat, C.T.copy())
        dth = _log_rotvec(C_err)
        rv = _log_rotvec(C)
        omega_true[k, 0] = w[0]
        omega_true[k, 1] = w[1]
        omega_true[k, 2] = w[2]
        true_rotvec[k, 0] = rv[0]
        true_rotvec[k, 1] = rv[1]
        true_rotvec[k, 2] = rv[2]
        true_bias_out[k, 0] = bias[0]
        true_bias_out[k, 1] = bias[1]
        true_bias_out[k, 2] = bias[2]
        gyro_out[k, 0] = g[0]
        gyro_out[k, 1] = g[1]
        gyro_out[k, 2] = g[2]
        angle_err[k] = np.sqrt(dth[0] ** 2 + dth[1] ** 2 + dth[2] ** 2)
        dtheta_out[k, 0] = dth[0]
        dtheta_out[k, 1] = dth[1]
        dtheta_out[k, 2] = dth[2]
        bias_err[k, 0] = b_hat[0] - bias[0]
        bias_err[k, 1] = b_hat[1] - bias[1]
        bias_err[k, 2] = b_hat[2] - bias[2]
        tr = 0.0
        for i in range(6):
            tr += P[i, i]
        trace_P[k] = tr
        att_var[k] = (P[0, 0] + P[1, 1] + P[2, 2]) / 3.0

        if k % _SNAP_EVERY == 0 or k == n - 1:
            for i in range(6):
                for j in range(6):
                    snap_P[n_snap, i, j] = P[i, j]
            for i in range(3):
                for j in range(3):
                    snap_C[n_snap, i, j] = C[i, j]
                    snap_Ch[n_snap, i, j] = C_hat[i, j]
            n_snap += 1

    return max_jump, n_snap


# -- python-side wrappers -----------------------------------------------------


def _plant_args(config, zero_noise):
    model = config.build_inertia()
    dist = config.build_disturbance(zero_noise)
    tau_sigma = (np.sqrt(np.diag(dist.torque_noise_cov))
                 if dist._torque_sqrt is not None else np.zeros(3))
    xi_sigma = (dist._attitude_sigma if dist._attitude_sigma is not None
                else np.zeros(3))
    if dist._damping_diag is None:
        raise NotImplementedError("fast path requires a diagonal damping matrix")
    return dict(
        I=model.inertia, I_inv=model.inertia_inv, r_skew=model._r_skew,
        mg=model._mg_inertial, dd=dist._damping_diag,
        c_lvl=dist.coulomb_level, c_eps=dist.coulomb_smoothing,
        tau_sigma=tau_sigma, has_tau_noise=dist._torque_sqrt is not None,
        xi_sigma=xi_sigma, has_xi_noise=dist._attitude_sigma is not None,
    )


def _gyro_args(config, zero_noise):
    gyro = config.build_gyro(zero_noise)
    return dict(
        g_sigma=gyro._noise_sigma, has_g_noise=bool(gyro._noise_sigma.any()),
        walk_sigma=gyro._walk_sigma, has_walk=bool(gyro._walk_sigma.any()),
        bias0=gyro.bias.copy(),
    )


def controlled_fast(config, zero_noise=False):
    from .scenarios import ControlledResult, _segment_schedule, profile_times

    dt = config.dt
    n = int(round(config.doc["controlled"]["duration_s"] / dt))
    m = config.gyro_decimation
    seg_ends, seg_targets = _segment_schedule(config, n, dt)
    gains = config.build_controller()
    streams = NoiseStreams(config.seed)

    out = ControlledResult(
        t=dt * np.arange(1, n + 1),
        omega_true=np.empty((n, 3)), gyro=np.empty((n, 3)),
        filt_yaw=np.empty(n), ref=np.empty(n), torque=np.empty(n),
        integrator=np.empty(n), ramp_start=0.0, ramp_end=0.0, hold_end=0.0,
        target=0.0)
    out.ramp_start, out.ramp_end, out.hold_end, out.target = profile_times(config)

    p = _plant_args(config, zero_noise)
    gy = _gyro_args(config, zero_noise)
    limit = gains.torque_limit
    defect = _controlled_kernel(
        n, dt, m, config.gyro_dt,
        p["I"], p["I_inv"], p["r_skew"], p["mg"], p["dd"], p["c_lvl"],
        p["c_eps"], p["tau_sigma"], p["has_tau_noise"], p["xi_sigma"],
        p["has_xi_noise"],
        gy["g_sigma"], gy["has_g_noise"], gy["walk_sigma"], gy["has_walk"],
        gy["bias0"],
        gains.kp, gains.ki, float(config.doc["controller"]["lowpass_tau_s"]),
        0.0 if limit is None else float(limit), limit is not None,
        math.radians(config.doc["reference"]["ramp_deg_s2"]),
        seg_ends, seg_targets, dynamics.PROJECT_EVERY,
        streams.torque, streams.attitude, streams.gyro, streams.gyro_bias,
        out.omega_true, out.gyro, out.filt_yaw, out.ref, out.torque,
        out.integrator)
    out.max_ortho_defect = float(defect)
    return out


def _camera_fire_steps(rate_hz, phase, n, dt):
    """Step indices k at which the camera fires (at t = (k+1) dt), matching
    StarCameraModel.due queried once per step."""
    steps = []
    due = phase + 1.0 / rate_hz
    for k in range(n):
        if (k + 1) * dt >= due - 1e-9:
            steps.append(k)
            due += 1.0 / rate_hz
    return np.array(steps, dtype=np.int64)


def free_decay_fast(config, zero_noise=False, perfect_init=False,
                    collect_stream=False):
    from .scenarios import FreeDecayResult

    dt = config.dt
    n = int(round(config.doc["free_decay"]["duration_s"] / dt))
    m = config.gyro_decimation
    dt_g = config.gyro_dt

    C0, omega0 = config.free_decay_initial_state()
    gyro = config.build_gyro(zero_noise)
    tuning = config.build_tuning(
        perfect_init=(C0, gyro.bias) if perfect_init else None)
    cameras = config.build_cameras(zero_noise)
    cam_update_covs = np.array(config.update_covs())
    cam_refs = np.array([cam.ref_inertial for cam in cameras])
    cam_sigmas = np.array([cam._noise_sigma for cam in cameras])
    cam_has_noise = np.array([bool(cam._noise_sigma.any()) for cam in cameras])
    cam_steps1 = _camera_fire_steps(cameras[0].rate_hz, cameras[0].phase, n, dt)
    cam_steps2 = _camera_fire_steps(cameras[1].rate_hz, cameras[1].phase, n, dt)

    streams = NoiseStreams(config.seed)
    p = _plant_args(config, zero_noise)
    gy = _gyro_args(config, zero_noise)

    out = FreeDecayResult(
        t=dt * np.arange(1, n + 1),
        omega_true=np.empty((n, 3)), true_rotvec=np.empty((n, 3)),
        true_bias=np.empty((n, 3)), gyro=np.empty((n, 3)),
        angle_err=np.empty(n), dtheta=np.empty((n, 3)),
        bias_err=np.empty((n, 3)), trace_P=np.empty(n), att_var=np.empty(n))

    n_snap_max = n // _SNAP_EVERY + 2
    snap_P = np.empty((n_snap_max, 6, 6))
    snap_C = np.empty((n_snap_max, 3, 3))
    snap_Ch = np.empty((n_snap_max, 3, 3))
    cam1_vals = np.empty((len(cam_steps1), 3))
    cam2_vals = np.empty((len(cam_steps2), 3))

    max_jump, n_snap = _free_decay_kernel(
        n, dt, m, dt_g,
        p["I"], p["I_inv"], p["r_skew"], p["mg"], p["dd"], p["c_lvl"],
        p["c_eps"], p["tau_sigma"], p["has_tau_noise"], p["xi_sigma"],
        p["has_xi_noise"],
        gy["g_sigma"], gy["has_g_noise"], gy["walk_sigma"], gy["has_walk"],
        gy["bias0"],
        C0, omega0, tuning.C_hat0, tuning.b_hat0, tuning.P0, tuning.Q,
        cam_steps1, cam_steps2, cam_refs, cam_sigmas, cam_has_noise,
        cam_update_covs, dynamics.PROJECT_EVERY,
        streams.torque, streams.attitude, streams.gyro, streams.gyro_bias,
        streams.camera1, streams.camera2,
        out.omega_true, out.true_rotvec, out.true_bias, out.gyro,
        out.angle_err, out.dtheta, out.bias_err, out.trace_P, out.att_var,
        cam1_vals, cam2_vals,
        snap_P, snap_C, snap_Ch)

    out.max_update_trace_jump = float(max_jump)
    for i in range(n_snap):
        P = snap_P[i]
        out.max_sym_defect = max(out.max_sym_defect,
                                 float(np.abs(P - P.T).max()))
        out.min_eig_P = min(out.min_eig_P, float(np.linalg.eigvalsh(P).min()))
        for Cm in (snap_C[i], snap_Ch[i]):
            out.max_ortho_defect = max(
                out.max_ortho_defect,
                float(np.abs(Cm @ Cm.T - np.eye(3)).max()))

    if collect_stream:
        cam_t = {}
        cam_v = {}
        for name, steps, vals in (("camera1", cam_steps1, cam1_vals),
                                  ("camera2", cam_steps2, cam2_vals)):
            if len(steps):
                cam_t[name] = (steps + 1) * dt
                cam_v[name] = vals
        out.stream = MeasurementStream(
            gyro_t=out.t[m - 1::m].copy(), gyro=out.gyro[m - 1::m].copy(),
            camera_t=cam_t, camera=cam_v)
    return out
