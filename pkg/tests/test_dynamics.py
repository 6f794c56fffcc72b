import numpy as np
import pytest

from gondola_gnc import defaults, so3
from gondola_gnc.dynamics import (DisturbanceModel, InertiaModel,
                                  RigidBodyState, angular_momentum_inertial,
                                  coulomb_torque, euler_rate, gravity_torque,
                                  kinetic_energy, run_open_loop, step,
                                  total_torque)
from gondola_gnc.errors import SingularInertiaError
from gondola_gnc.rand import NoiseStreams


def paper_body():
    return InertiaModel(defaults.inertia_matrix(), defaults.MASS_KG,
                        defaults.COM_OFFSET_M)


def quiet_disturbance(damping=(0.0, 0.0, 0.0), coulomb=0.0):
    return DisturbanceModel(np.diag(damping), coulomb,
                            defaults.COULOMB_SMOOTHING_RAD_S,
                            np.zeros((3, 3)), np.zeros((3, 3)))


def paper_disturbance():
    return DisturbanceModel(np.diag(defaults.DAMPING_DIAG_NM_S_PER_RAD),
                            defaults.COULOMB_LEVEL_NM,
                            defaults.COULOMB_SMOOTHING_RAD_S,
                            np.zeros((3, 3)), np.zeros((3, 3)))


class TestInertiaModel:
    def test_asymmetric_rejected(self):
        I = defaults.inertia_matrix()
        I[0, 1] += 1e-6
        with pytest.raises(ValueError):
            InertiaModel(I, 826.0, [0, 0, -1.94])

    def test_indefinite_rejected(self):
        with pytest.raises(SingularInertiaError):
            InertiaModel(np.diag([1.0, 1.0, 0.0]), 826.0, [0, 0, -1.94])

    def test_pendulum_length(self):
        assert paper_body().pendulum_length == pytest.approx(1.94)


class TestGravityTorque:
    def test_aligned_arm_zero(self):
        tau = gravity_torque(np.eye(3), paper_body())
        np.testing.assert_allclose(tau, np.zeros(3), atol=1e-12)

    def test_two_degree_tilt_restoring(self):
        # closed-form pendulum torque m g L sin(2 deg) about x, restoring sign
        model = paper_body()
        tilt = np.radians(2.0)
        C = so3.exp_rotvec(-np.array([tilt, 0.0, 0.0]))
        tau = gravity_torque(C, model)
        expected = -model.mass * 9.81 * model.pendulum_length * np.sin(tilt)
        assert tau[0] == pytest.approx(expected, rel=1e-12)
        np.testing.assert_allclose(tau[1:], [0.0, 0.0], atol=1e-9)

    def test_orthogonal_to_arm(self):
        rng = np.random.default_rng(0)
        model = paper_body()
        for _ in range(20):
            axis = rng.standard_normal(3)
            axis /= np.linalg.norm(axis)
            C = so3.exp_rot(axis, rng.uniform(0, np.pi))
            tau = gravity_torque(C, model)
            scale = max(np.linalg.norm(tau), 1.0)
            assert abs(tau @ model.r_cm) / scale < 1e-9


class TestCoulombTorque:
    def test_zero_rate(self):
        np.testing.assert_array_equal(
            coulomb_torque(0.0, paper_disturbance()), np.zeros(3))

    def test_saturated_level(self):
        d = paper_disturbance()
        tau = coulomb_torque(10.0 * d.coulomb_smoothing, d)
        assert tau[2] == pytest.approx(-0.75 * np.tanh(10.0))

    def test_odd_symmetry(self):
        d = paper_disturbance()
        np.testing.assert_allclose(coulomb_torque(-0.3, d),
                                   -coulomb_torque(0.3, d))


class TestTotalTorque:
    def test_all_zero(self):
        state = RigidBodyState(np.eye(3), np.zeros(3))
        tau = total_torque(state, paper_body(), quiet_disturbance(), 0.0,
                           np.random.default_rng(0))
        np.testing.assert_allclose(tau, np.zeros(3), atol=1e-12)

    def test_damping_skips_yaw(self):
        # D = diag(200, 200, 0): pure yaw rate sees no damping torque
        state = RigidBodyState(np.eye(3), np.array([0.0, 0.0, 0.5]))
        d = DisturbanceModel(np.diag([200.0, 200.0, 0.0]), 0.0, 1e-2,
                             np.zeros((3, 3)), np.zeros((3, 3)))
        tau = total_torque(state, paper_body(), d, 0.0, np.random.default_rng(0))
        np.testing.assert_allclose(tau, np.zeros(3), atol=1e-12)

    def test_pivot_channel_passthrough(self):
        state = RigidBodyState(np.eye(3), np.zeros(3))
        tau = total_torque(state, paper_body(), quiet_disturbance(coulomb=0.75),
                           5.0, np.random.default_rng(0))
        np.testing.assert_allclose(tau, [0.0, 0.0, 5.0], atol=1e-12)


class TestEulerRate:
    def test_rest(self):
        np.testing.assert_array_equal(
            euler_rate(np.zeros(3), np.zeros(3), paper_body()), np.zeros(3))

    def test_principal_axis_spin(self):
        model = InertiaModel(np.diag([3800.0, 3800.0, 340.0]), 826.0,
                             [0, 0, -1.94])
        wdot = euler_rate(np.array([0.0, 0.0, 0.5]), np.zeros(3), model)
        np.testing.assert_allclose(wdot, np.zeros(3), atol=1e-15)

    def test_cross_axis_coupling_matches_direct_arithmetic(self):
        # independent evaluation of I^-1 (tau - w x I w) with solve/cross
        model = paper_body()
        omega = np.radians([-0.5, 0.5, -10.0])
        tau = np.zeros(3)
        expected = np.linalg.solve(defaults.inertia_matrix(),
                                   tau - np.cross(omega, defaults.inertia_matrix() @ omega))
        got = euler_rate(omega, tau, model)
        np.testing.assert_allclose(got, expected, rtol=1e-12)
        assert np.linalg.norm(expected) > 0.0


class TestStep:
    def test_rest_state_only_advances_time(self):
        state = RigidBodyState(np.eye(3), np.zeros(3))
        res = step(state, paper_body(), quiet_disturbance(), 0.0, 1e-3,
                   np.random.default_rng(0))
        np.testing.assert_array_equal(res.state.attitude, np.eye(3))
        np.testing.assert_array_equal(res.state.omega, np.zeros(3))
        assert res.state.t == pytest.approx(1e-3)

    def test_constant_yaw_spin_kinematics(self):
        # diagonal inertia, no gravity: yaw angle after n steps is n dt w
        model = InertiaModel(np.diag([3800.0, 3800.0, 340.0]), 826.0,
                             [0, 0, -1.94], g_inertial=[0.0, 0.0, 0.0])
        w = 0.3
        state = RigidBodyState(np.eye(3), np.array([0.0, 0.0, w]))
        dt, n = 1e-3, 2000
        rng = np.random.default_rng(0)
        for k in range(n):
            state = step(state, model, quiet_disturbance(), 0.0, dt, rng,
                         step_index=k).state
        expected = so3.exp_rotvec(np.array([0.0, 0.0, -n * dt * w]))
        err = so3.rotation_angle(state.attitude @ expected.T)
        assert err < 1e-9

    def test_free_decay_matches_fig2_behavior(self):
        # 2 deg tilt, paper rates: pendulous roll/pitch oscillation decaying,
        # yaw rate decaying quasi-linearly under Coulomb friction
        model = paper_body()
        dist = paper_disturbance()
        tilt = np.radians(defaults.TILT_DEG)
        state = RigidBodyState(so3.exp_rotvec(-np.array([tilt, 0.0, 0.0])),
                               np.radians(defaults.OMEGA0_DEG_S))
        traj = run_open_loop(state, model, dist, lambda t: 0.0, 100.0, 1e-3,
                             np.random.default_rng(0))
        rates_deg = np.degrees(traj.omega)
        t = traj.t

        # transverse pendulous oscillation: a few deg/s early on
        early = (t >= 0.0) & (t <= 20.0)
        peak_pitch = np.abs(rates_deg[early, 1]).max()
        assert 1.0 < peak_pitch < 8.0

        # damping shrinks the envelope substantially by 100 s
        late = t >= 80.0
        assert np.abs(rates_deg[late, :2]).max() < 0.5 * peak_pitch

        # yaw decays toward zero at roughly c_z / I_zz
        decel = np.degrees(defaults.COULOMB_LEVEL_NM / 340.0)
        sel = (t >= 5.0) & (t <= 60.0)
        predicted = -10.0 + decel * t[sel]
        assert np.abs(rates_deg[sel, 2] - predicted).max() < 0.5

    def test_singular_inertia_propagates(self):
        with pytest.raises(SingularInertiaError):
            InertiaModel(np.zeros((3, 3)), 826.0, [0, 0, -1.94])


class TestConservation:
    def test_energy_and_momentum_torque_free(self):
        # no gravity, damping, Coulomb, or noise: RK2 drift < 1e-6 over 100 s
        model = InertiaModel(defaults.inertia_matrix(), 826.0, [0, 0, -1.94],
                             g_inertial=[0.0, 0.0, 0.0])
        dist = quiet_disturbance()
        state = RigidBodyState(np.eye(3), np.radians([-0.5, 0.5, -10.0]))
        E0 = kinetic_energy(state.omega, model)
        h0 = angular_momentum_inertial(state, model)
        rng = np.random.default_rng(0)
        for k in range(100_000):
            state = step(state, model, dist, 0.0, 1e-3, rng, step_index=k).state
        E1 = kinetic_energy(state.omega, model)
        h1 = angular_momentum_inertial(state, model)
        assert abs(E1 - E0) / E0 < 1e-6
        assert np.abs(h1 - h0).max() / np.linalg.norm(h0) < 1e-6

    def test_damping_dissipates_monotonically(self):
        model = InertiaModel(defaults.inertia_matrix(), 826.0, [0, 0, -1.94],
                             g_inertial=[0.0, 0.0, 0.0])
        dist = quiet_disturbance(damping=(200.0, 200.0, 0.0))
        state = RigidBodyState(np.eye(3), np.radians([2.0, -3.0, -10.0]))
        rng = np.random.default_rng(0)
        prev = kinetic_energy(state.omega, model)
        for k in range(20_000):
            state = step(state, model, dist, 0.0, 1e-3, rng, step_index=k).state
            cur = kinetic_energy(state.omega, model)
            assert cur <= prev + 1e-12 * prev
            prev = cur

    def test_so3_preserved_long_run(self):
        model = paper_body()
        dist = paper_disturbance()
        tilt = np.radians(2.0)
        state = RigidBodyState(so3.exp_rotvec(-np.array([tilt, 0.0, 0.0])),
                               np.radians([-0.5, 0.5, -10.0]))
        rng = np.random.default_rng(0)
        for k in range(100_000):
            state = step(state, model, dist, 0.0, 1e-3, rng, step_index=k).state
        defect = np.abs(state.attitude @ state.attitude.T - np.eye(3)).max()
        assert defect < 1e-8


class TestRunOpenLoop:
    def test_constant_trajectory(self):
        state = RigidBodyState(np.eye(3), np.zeros(3))
        traj = run_open_loop(state, paper_body(), quiet_disturbance(),
                             lambda t: 0.0, 1.0, 1e-3, np.random.default_rng(0))
        assert len(traj) == 1001
        np.testing.assert_array_equal(traj.omega[-1], np.zeros(3))
        np.testing.assert_array_equal(traj.attitude[-1], np.eye(3))

    def test_matches_manual_step_loop(self):
        model = paper_body()
        noisy = DisturbanceModel(np.diag([200.0, 200.0, 0.0]), 0.75, 1e-2,
                                 np.diag([0.5, 0.5, 0.01]) * 1e-3,
                                 np.radians(0.001) ** 2 * np.eye(3))
        state0 = RigidBodyState(np.eye(3), np.radians([-0.5, 0.5, -10.0]))
        traj = run_open_loop(state0, model, noisy, lambda t: 0.0, 0.5, 1e-3,
                             NoiseStreams(42))
        state = state0.copy()
        streams = NoiseStreams(42)
        for k in range(500):
            state = step(state, model, noisy, 0.0, 1e-3, streams,
                         step_index=k).state
        np.testing.assert_array_equal(traj.omega[-1], state.omega)
        np.testing.assert_array_equal(traj.attitude[-1], state.attitude)

    def test_seeded_determinism(self):
        model = paper_body()
        noisy = DisturbanceModel(np.diag([200.0, 200.0, 0.0]), 0.75, 1e-2,
                                 np.diag([0.5, 0.5, 0.01]) * 1e-3,
                                 np.radians(0.001) ** 2 * np.eye(3))
        state0 = RigidBodyState(np.eye(3), np.radians([-0.5, 0.5, -10.0]))
        t1 = run_open_loop(state0, model, noisy, lambda t: 0.0, 0.5, 1e-3,
                           NoiseStreams(7))
        t2 = run_open_loop(state0, model, noisy, lambda t: 0.0, 0.5, 1e-3,
                           NoiseStreams(7))
        np.testing.assert_array_equal(t1.omega, t2.omega)
        np.testing.assert_array_equal(t1.attitude, t2.attitude)
        np.testing.assert_array_equal(t1.omega_mid, t2.omega_mid)
