"""Ground-truth rigid-body attitude dynamics.

Euler's equations under the pivot torque budget (gravity at the pivot,
pivot motor torque, linear viscous damping, tanh-smoothed Coulomb yaw
friction, white torque noise), integrated with a second-order Runge-Kutta
midpoint step for the body rates and an exponential-map increment for the
attitude, with multiplicative attitude process noise.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInertiaError
from .so3 import exp_rotvec, project_to_so3, skew

# attitude re-orthonormalization cadence, cheap insurance against round-off
PROJECT_EVERY = 10_000


def _psd_sqrt(cov, tol=1e-15):
    """Lower-triangular-ish factor L with L L^T = cov; None for a zero matrix."""
    cov = np.asarray(cov, dtype=float)
    if not np.any(cov):
        return None
    if np.allclose(cov, np.diag(np.diag(cov))):
        d = np.diag(cov)
        if np.any(d < -tol):
            raise ValueError("covariance has negative diagonal")
        return np.diag(np.sqrt(np.clip(d, 0.0, None)))
    w, V = np.linalg.eigh(cov)
    if w.min() < -1e-10 * max(w.max(), 1.0):
        raise ValueError("covariance is not positive semidefinite")
    return V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


@dataclass
class InertiaModel:
    """Mass properties of the gondola about the pivot, body frame."""

    inertia: np.ndarray                 # kg m^2, symmetric positive definite
    mass: float                         # kg
    r_cm: np.ndarray                    # m, pivot -> center of mass
    g_inertial: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.r_cm = np.asarray(self.r_cm, dtype=float)
        self.g_inertial = np.asarray(self.g_inertial, dtype=float)
        if np.abs(self.inertia - self.inertia.T).max() > 1e-9:
            raise ValueError("inertia matrix must be symmetric")
        eig = np.linalg.eigvalsh(self.inertia)
        if eig.min() <= 0.0:
            raise SingularInertiaError("inertia matrix must be positive definite")
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        self._inertia_inv = np.linalg.inv(self.inertia)
        self._r_skew = skew(self.r_cm)
        self._mg_inertial = self.mass * self.g_inertial

    @property
    def inertia_inv(self):
        return self._inertia_inv

    @property
    def pendulum_length(self):
        return float(np.linalg.norm(self.r_cm))


@dataclass
class DisturbanceModel:
    """Damping, Coulomb friction, and process-noise levels."""

    damping: np.ndarray                 # N m s / rad
    coulomb_level: float                # N m, yaw axis
    coulomb_smoothing: float            # rad/s, tanh width
    torque_noise_cov: np.ndarray        # (N m)^2 per step
    attitude_noise_cov: np.ndarray      # rad^2 per step

    def __post_init__(self):
        self.damping = np.asarray(self.damping, dtype=float)
        self.torque_noise_cov = np.asarray(self.torque_noise_cov, dtype=float)
        self.attitude_noise_cov = np.asarray(self.attitude_noise_cov, dtype=float)
        if self.coulomb_level < 0.0:
            raise ValueError("coulomb_level must be >= 0")
        if self.coulomb_smoothing <= 0.0:
            raise ValueError("coulomb_smoothing must be > 0")
        if np.linalg.eigvalsh(0.5 * (self.damping + self.damping.T)).min() < -1e-12:
            raise ValueError("damping matrix must be positive semidefinite")
        if np.allclose(self.damping, np.diag(np.diag(self.damping))):
            self._damping_diag = np.diag(self.damping).copy()
        else:
            self._damping_diag = None
        self._torque_sqrt = _psd_sqrt(self.torque_noise_cov)
        if self._torque_sqrt is not None and np.allclose(
                self._torque_sqrt, np.diag(np.diag(self._torque_sqrt))):
            self._torque_sigma = np.diag(self._torque_sqrt).copy()
        else:
            self._torque_sigma = None
        att = self.attitude_noise_cov
        if not np.any(att):
            self._attitude_sigma = None
        elif np.allclose(att, np.diag(np.diag(att))):
            self._attitude_sigma = np.sqrt(np.clip(np.diag(att), 0.0, None))
        else:
            raise ValueError("attitude noise covariance must be diagonal")

    def sample_torque_noise(self, rng):
        if self._torque_sqrt is None:
            return np.zeros(3)
        if self._torque_sigma is not None:
            return self._torque_sigma * rng.standard_normal(3)
        return self._torque_sqrt @ rng.standard_normal(3)

    def sample_attitude_rotation(self, rng):
        if self._attitude_sigma is None:
            return None
        return exp_rotvec(-(self._attitude_sigma * rng.standard_normal(3)))


@dataclass
class RigidBodyState:
    """Truth state: attitude C_bi, body rates, and time."""

    attitude: np.ndarray                # 3x3, body from inertial
    omega: np.ndarray                   # rad/s, body frame
    t: float = 0.0

    def __post_init__(self):
        self.attitude = np.asarray(self.attitude, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)

    def copy(self):
        return RigidBodyState(self.attitude.copy(), self.omega.copy(), self.t)


def gravity_torque(C_bi, model):
    """Gravity torque at the pivot: r_cm x (m C_bi g)."""
    return model._r_skew @ (C_bi @ model._mg_inertial)


def coulomb_torque(omega_z, model):
    """Smoothed Coulomb friction about yaw: [0, 0, -c tanh(w_z / w_eps)]."""
    return np.array([
        0.0, 0.0,
        -model.coulomb_level * np.tanh(omega_z / model.coulomb_smoothing),
    ])


def total_torque(state, model, disturbance, tau_piv, rng):
    """Sum of gravity, pivot, damping, Coulomb, and sampled noise torques."""
    noise = disturbance.sample_torque_noise(getattr(rng, "torque", rng))
    return _deterministic_torque(state.omega, state.attitude, model,
                                 disturbance, tau_piv) + noise


def _deterministic_torque(omega, C_bi, model, disturbance, tau_piv):
    tau = model._r_skew @ (C_bi @ model._mg_inertial)
    tau -= disturbance.damping @ omega
    tau[2] += tau_piv - disturbance.coulomb_level * np.tanh(
        omega[2] / disturbance.coulomb_smoothing)
    return tau


def _cross(a, b):
    # np.cross carries ~2 us of broadcasting overhead per call
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def euler_rate(omega, tau, model):
    """Angular acceleration from Euler's equations: I^-1 (tau - w x I w)."""
    Iw = model.inertia @ omega
    return model.inertia_inv @ (tau - _cross(omega, Iw))


class StepResult:
    """One integration step: the new state plus the midpoint rate that
    advanced the attitude (what a rate-integrating gyro reports for the step)."""

    __slots__ = ("state", "omega_mid")

    def __init__(self, state, omega_mid):
        self.state = state
        self.omega_mid = omega_mid


def step(state, model, disturbance, tau_piv, dt, rng, step_index=None):
    """Advance one RK2 midpoint step with noise sampled once and held.

    The attitude is advanced with the midpoint body rate,
    C+ = N exp((-dt * w_mid)^x) C, where N is the multiplicative attitude
    noise rotation; C is re-orthonormalized every PROJECT_EVERY steps. The
    midpoint gravity vector uses the first-order attitude increment
    g1 - (dt/2) w x g1, which keeps the scheme second order.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    omega, C = state.omega, state.attitude
    I, I_inv = model.inertia, model._inertia_inv
    r_skew, mg = model._r_skew, model._mg_inertial
    c_lvl, c_eps = disturbance.coulomb_level, disturbance.coulomb_smoothing
    dd = disturbance._damping_diag

    noise = disturbance.sample_torque_noise(getattr(rng, "torque", rng))

    g1 = C @ mg
    tau1 = r_skew @ g1 + noise
    tau1 -= dd * omega if dd is not None else disturbance.damping @ omega
    tau1[2] += tau_piv - c_lvl * math.tanh(omega[2] / c_eps)
    k1 = I_inv @ (tau1 - _cross(omega, I @ omega))

    omega_mid = omega + (0.5 * dt) * k1
    g2 = g1 - (0.5 * dt) * _cross(omega, g1)
    tau2 = r_skew @ g2 + noise
    tau2 -= dd * omega_mid if dd is not None else disturbance.damping @ omega_mid
    tau2[2] += tau_piv - c_lvl * math.tanh(omega_mid[2] / c_eps)
    k2 = I_inv @ (tau2 - _cross(omega_mid, I @ omega_mid))

    omega_new = omega + dt * k2
    C_new = exp_rotvec(-dt * omega_mid) @ C
    N = disturbance.sample_attitude_rotation(getattr(rng, "attitude", rng))
    if N is not None:
        C_new = N @ C_new

    if step_index is None:
        step_index = int(round(state.t / dt))
    if (step_index + 1) % PROJECT_EVERY == 0:
        C_new = project_to_so3(C_new)

    new_state = RigidBodyState.__new__(RigidBodyState)
    new_state.attitude = C_new
    new_state.omega = omega_new
    new_state.t = state.t + dt
    return StepResult(new_state, omega_mid)


@dataclass
class Trajectory:
    """Dense truth record of an open-loop run."""

    t: np.ndarray                       # (n+1,)
    omega: np.ndarray                   # (n+1, 3)
    attitude: np.ndarray                # (n+1, 3, 3)
    omega_mid: np.ndarray               # (n, 3), per-step midpoint rates

    def __len__(self):
        return len(self.t)


def run_open_loop(state0, model, disturbance, tau_profile, duration, dt, rng):
    """Integrate for `duration` seconds under a pivot-torque profile t -> N m.

    Deterministic given the generator(s) in `rng`; returns the state at every
    step boundary.
    """
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    n = int(round(duration / dt))
    t = state0.t + dt * np.arange(n + 1)
    omega = np.empty((n + 1, 3))
    attitude = np.empty((n + 1, 3, 3))
    omega_mid = np.empty((n, 3))
    state = state0.copy()
    omega[0], attitude[0] = state.omega, state.attitude
    for k in range(n):
        res = step(state, model, disturbance, tau_profile(state.t), dt, rng,
                   step_index=k)
        state = res.state
        omega[k + 1] = state.omega
        attitude[k + 1] = state.attitude
        omega_mid[k] = res.omega_mid
    return Trajectory(t, omega, attitude, omega_mid)


def kinetic_energy(omega, model):
    return 0.5 * float(omega @ (model.inertia @ omega))


def angular_momentum_inertial(state, model):
    """Angular momentum resolved in the inertial frame, C_bi^T (I w)."""
    return state.attitude.T @ (model.inertia @ state.omega)
