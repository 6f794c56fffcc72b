import numpy as np
import pytest

from gondola_gnc import defaults, so3
from gondola_gnc.dynamics import (DisturbanceModel, InertiaModel,
                                  RigidBodyState, run_open_loop)
from gondola_gnc.errors import SingularInnovationError
from gondola_gnc.mekf import (MekfState, MekfTuning, apply_correction,
                              attitude_error, predict, run_filter, update)
from gondola_gnc.sensors import MeasurementStream

DT = 1e-3


def basic_tuning(att_sigma_deg=3.0, bias_sigma=np.radians(0.07)):
    P0 = np.diag([np.radians(att_sigma_deg) ** 2] * 3 + [bias_sigma ** 2] * 3)
    Q = np.diag([1e-12] * 3 + [1e-14] * 3)
    R = np.radians(0.1) ** 2 * np.eye(6)
    return MekfTuning(Q, R, P0, np.eye(3), np.zeros(3))


class TestPredict:
    def test_cancelled_rate_leaves_attitude(self):
        state = MekfState(np.eye(3), np.array([0.01, -0.02, 0.03]),
                          np.zeros((6, 6)))
        Q = np.diag(np.arange(1.0, 7.0) * 1e-8)
        out = predict(state, state.b_hat.copy(), DT, Q)
        np.testing.assert_array_equal(out.C_hat, np.eye(3))
        np.testing.assert_array_equal(out.b_hat, state.b_hat)
        # from P = 0 the propagated covariance is exactly Q
        np.testing.assert_array_equal(out.P, Q)

    def test_zero_q_zero_rate_keeps_attitude_block(self):
        # with an empty bias block, F P F^T returns P unchanged
        P0 = np.diag([1e-4, 2e-4, 3e-4, 0.0, 0.0, 0.0])
        state = MekfState(np.eye(3), np.zeros(3), P0)
        out = predict(state, np.zeros(3), DT, np.zeros((6, 6)))
        np.testing.assert_allclose(out.P, P0, atol=1e-20)

    def test_shared_kinematics_with_truth_propagation(self):
        # pure yaw: the filter driven by perfect rate reproduces the truth
        # attitude step for step (same exponential-map increment)
        model = InertiaModel(np.diag([3800.0, 3800.0, 340.0]), 826.0,
                             [0, 0, -1.94], g_inertial=[0.0, 0.0, 0.0])
        quiet = DisturbanceModel(np.zeros((3, 3)), 0.0, 1e-2,
                                 np.zeros((3, 3)), np.zeros((3, 3)))
        omega = np.array([0.0, 0.0, 0.5])
        traj = run_open_loop(RigidBodyState(np.eye(3), omega), model, quiet,
                             lambda t: 0.0, 0.2, DT, np.random.default_rng(0))
        state = MekfState(np.eye(3), np.zeros(3), np.zeros((6, 6)))
        for k in range(200):
            state = predict(state, traj.omega_mid[k], DT, np.zeros((6, 6)))
        assert so3.rotation_angle(state.C_hat @ traj.attitude[-1].T) < 1e-13

    def test_symmetrized(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((6, 6))
        state = MekfState(np.eye(3), np.zeros(3), A @ A.T + 1e-3 * np.eye(6))
        out = predict(state, np.array([0.1, -0.2, 0.3]), DT, 1e-9 * np.eye(6))
        assert np.abs(out.P - out.P.T).max() == 0.0


class TestUpdate:
    def test_zero_residual_leaves_state(self):
        tuning = basic_tuning()
        state = tuning.initial_state()
        cov = np.radians(0.1) ** 2 * np.eye(3)
        obs = [(np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), cov),
               (np.array([0.0, 0, 1.0]), np.array([0.0, 0, 1.0]), cov)]
        out, r = update(state, obs)
        np.testing.assert_allclose(r, np.zeros(6), atol=1e-15)
        np.testing.assert_allclose(out.C_hat, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(out.b_hat, np.zeros(3), atol=1e-15)
        assert np.trace(out.P) < np.trace(state.P)

    def test_single_camera_leaves_boresight_axis(self):
        # rotation about the measured direction is unobservable: its variance
        # must shrink far less than the orthogonal axes
        tuning = basic_tuning()
        state = tuning.initial_state()
        y = np.array([0.0, 0.0, 1.0])
        out, _ = update(state, [(y, y, np.radians(0.1) ** 2 * np.eye(3))])
        P_att0, P_att1 = state.P[:3, :3], out.P[:3, :3]
        drop_bore = P_att0[2, 2] - P_att1[2, 2]
        drop_orth = P_att0[0, 0] - P_att1[0, 0]
        assert drop_orth > 100.0 * max(drop_bore, 1e-30)

    def test_matches_dense_linear_algebra(self):
        # independent explicit-matrix evaluation of K, dx, P for a 3 deg
        # initial error and two orthogonal exact measurements
        tuning = basic_tuning()
        state = tuning.initial_state()
        err = so3.exp_rotvec(np.radians([1.5, -2.0, 1.8]))
        state.C_hat = err @ np.eye(3)  # truth is identity
        refs = [np.array([1.0, 0, 0]), np.array([0.0, 0, 1.0])]
        cov = np.radians(0.1) ** 2 * np.eye(3)
        obs = [(ref.copy(), ref, cov) for ref in refs]  # perfect measurements

        H = np.zeros((6, 6))
        r = np.empty(6)
        R = np.zeros((6, 6))
        for j, ref in enumerate(refs):
            y_pred = state.C_hat @ ref
            H[3 * j:3 * j + 3, :3] = so3.skew(y_pred)
            r[3 * j:3 * j + 3] = ref - y_pred
            R[3 * j:3 * j + 3, 3 * j:3 * j + 3] = cov
        P = state.P
        K = P @ H.T @ np.linalg.inv(H @ P @ H.T + R)
        dx = K @ r
        C_expected = so3.exp_rotvec(-dx[:3]) @ state.C_hat
        P_expected = (np.eye(6) - K @ H) @ P
        P_expected = 0.5 * (P_expected + P_expected.T)

        out, _ = update(state, obs)
        np.testing.assert_allclose(out.C_hat, C_expected, atol=1e-12)
        np.testing.assert_allclose(out.P, P_expected, atol=1e-15)
        np.testing.assert_allclose(out.b_hat, dx[3:], atol=1e-15)
        # and the correction did shrink the attitude error
        assert so3.rotation_angle(out.C_hat) < so3.rotation_angle(state.C_hat)

    def test_singular_innovation_detected(self):
        state = MekfState(np.eye(3), np.zeros(3), np.zeros((6, 6)))
        y = np.array([1.0, 0, 0])
        with pytest.raises(SingularInnovationError):
            update(state, [(y, y, np.zeros((3, 3)))])

    def test_empty_obs_rejected(self):
        with pytest.raises(ValueError):
            update(basic_tuning().initial_state(), [])


class TestApplyCorrection:
    def test_zero_is_identity(self):
        state = basic_tuning().initial_state()
        out = apply_correction(state, np.zeros(6))
        np.testing.assert_array_equal(out.C_hat, state.C_hat)
        np.testing.assert_array_equal(out.b_hat, state.b_hat)

    def test_exact_correction_zeroes_error(self):
        C_true = so3.exp_rot(np.array([0.0, 1.0, 0.0]), 0.4)
        C_hat = so3.exp_rotvec(np.radians([2.0, -1.0, 0.5])) @ C_true
        state = MekfState(C_hat, np.zeros(3), np.zeros((6, 6)))
        dtheta = so3.log_rot(C_hat @ C_true.T)
        out = apply_correction(state, np.concatenate([dtheta, np.zeros(3)]))
        assert so3.rotation_angle(out.C_hat @ C_true.T) < 1e-12

    def test_bias_part_additive_only(self):
        state = basic_tuning().initial_state()
        dx = np.array([0.0, 0.0, 0.0, 1e-3, -2e-3, 3e-3])
        out = apply_correction(state, dx)
        np.testing.assert_array_equal(out.C_hat, state.C_hat)
        np.testing.assert_allclose(out.b_hat, dx[3:])


class TestAttitudeError:
    def test_exact_match(self):
        C = so3.exp_rot(np.array([1.0, 0, 0]), 0.3)
        rec = attitude_error(C, C)
        assert rec.angle == 0.0

    def test_known_offset(self):
        C = so3.exp_rot(np.array([0.0, 1.0, 0]), 0.7)
        C_hat = so3.exp_rotvec([0.01, 0.0, 0.0]) @ C
        rec = attitude_error(C_hat, C)
        assert rec.angle == pytest.approx(0.01, abs=1e-12)

    def test_angle_consistent_with_trace_formula(self):
        # the acos((tr-1)/2) formula and ||log(C_err)|| agree on random pairs
        rng = np.random.default_rng(2)
        for _ in range(1000):
            a1, a2 = rng.standard_normal(3), rng.standard_normal(3)
            C1 = so3.exp_rot(a1 / np.linalg.norm(a1), rng.uniform(0, np.pi - 0.01))
            C2 = so3.exp_rot(a2 / np.linalg.norm(a2), rng.uniform(0, np.pi - 0.01))
            rec = attitude_error(C1, C2)
            assert abs(rec.angle - np.linalg.norm(rec.dtheta)) < 1e-12
            assert abs(rec.angle - so3.rotation_angle(C1 @ C2.T)) < 1e-9


class TestRunFilter:
    def _truth_and_stream(self, duration=2.0, bias=np.radians([0.05, 0.03, -0.06])):
        model = InertiaModel(defaults.inertia_matrix(), 826.0, [0, 0, -1.94])
        quiet = DisturbanceModel(np.diag([200.0, 200.0, 0.0]), 0.75, 1e-2,
                                 np.zeros((3, 3)), np.zeros((3, 3)))
        state0 = RigidBodyState(np.eye(3), np.radians([-0.5, 0.5, -10.0]))
        traj = run_open_loop(state0, model, quiet, lambda t: 0.0, duration, DT,
                             np.random.default_rng(0))
        n = len(traj.omega_mid)
        stream = MeasurementStream(
            gyro_t=traj.t[1:].copy(),
            gyro=traj.omega_mid + bias,
        )
        return traj, stream

    def test_pure_dead_reckoning_exact(self):
        # no cameras, no noise, perfect init: error stays at round-off
        traj, stream = self._truth_and_stream()
        bias = np.radians([0.05, 0.03, -0.06])
        tuning = MekfTuning(np.zeros((6, 6)), np.eye(6), np.zeros((6, 6)),
                            np.eye(3), bias)
        _, trace = run_filter(stream, tuning, traj, {}, {},
                              true_bias=np.tile(bias, (len(stream.gyro_t), 1)))
        assert trace.angle_err.max() < 1e-9
        assert np.abs(trace.bias_err).max() < 1e-12

    def test_cameras_pull_down_initial_error(self):
        # imperfect init plus exact cameras at 2 and 5 Hz: error collapses
        traj, stream = self._truth_and_stream(duration=3.0)
        n = len(stream.gyro_t)
        refs = {"camera1": np.array([1.0, 0, 0]), "camera2": np.array([0.0, 0, 1.0])}
        covs = {k: np.radians(0.1) ** 2 * np.eye(3) for k in refs}
        cam_t = {"camera1": np.arange(0.5, 3.0, 0.5),
                 "camera2": np.arange(0.2, 3.0, 0.2)}
        cam_v = {}
        for name in refs:
            vecs = []
            for t in cam_t[name]:
                k = int(round(t / DT))
                vecs.append(traj.attitude[k] @ refs[name])
            cam_v[name] = np.array(vecs)
        stream.camera_t, stream.camera = cam_t, cam_v

        bias = np.radians([0.05, 0.03, -0.06])
        P0 = np.diag([np.radians(3.0) ** 2] * 3 + [np.radians(0.07) ** 2] * 3)
        Q = np.diag([np.radians(0.02) ** 2 * DT] * 3
                    + [np.radians(0.001) ** 2 * DT] * 3)
        tuning = MekfTuning(Q, np.radians(0.1) ** 2 * np.eye(6), P0,
                            so3.exp_rotvec(np.radians([10.0, 10.0, 10.0])),
                            np.zeros(3))
        _, trace = run_filter(stream, tuning, traj, refs, covs,
                              true_bias=np.tile(bias, (n, 1)))
        assert trace.angle_err[0] > np.radians(10.0)
        assert trace.angle_err[-1] < np.radians(0.3)
        # information is monotone across updates
        assert trace.max_update_trace_jump <= 1e-12
        # covariance stays symmetric PSD
        assert trace.max_sym_defect < 1e-12
        assert trace.min_eig_P > -1e-9
