"""Post-processing tools: least-squares gyro alignment from constant-rate
twirl spins, and bias/noise characterization from static recordings.

The alignment model is linear in a small misalignment vector:
-w_meas^x dtheta = w_aligned - w_meas, stacked over all samples. Spins about
a single body axis cannot observe the misalignment component about that
axis, so single-axis datasets are solved for the two transverse components
and the spin-axis component is reported as exactly 0 +- 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (RankDeficientError, TooFewSamplesError, ZeroRateError)
from .so3 import exp_rotvec, skew

# all samples within this cone half-angle of the mean spin axis marks a
# single-axis dataset
_SINGLE_AXIS_COS = np.cos(np.radians(5.0))


@dataclass
class TwirlDataset:
    """Rate measurements from constant-speed yaw spins."""

    rates: np.ndarray                   # (n, 3) rad/s

    def __post_init__(self):
        self.rates = np.atleast_2d(np.asarray(self.rates, dtype=float))
        if len(self.rates) < 3:
            raise TooFewSamplesError("twirl dataset needs >= 3 samples")
        if np.any(np.linalg.norm(self.rates, axis=1) == 0.0):
            raise ZeroRateError("twirl dataset contains zero-rate samples")


@dataclass
class AlignmentEstimate:
    delta_theta: np.ndarray             # rad
    std_err: np.ndarray                 # rad, per component

    def to_dict(self):
        return {
            "delta_theta_deg": [float(x) for x in np.degrees(self.delta_theta)],
            "std_err_deg": [float(x) for x in np.degrees(self.std_err)],
        }


@dataclass
class StaticCharacterization:
    bias: np.ndarray                    # rad/s
    noise_cov: np.ndarray               # (rad/s)^2

    def to_dict(self):
        return {
            "bias_deg_s": [float(x) for x in np.degrees(self.bias)],
            "noise_cov_deg2_s2": [[float(x) for x in row]
                                  for row in np.degrees(np.degrees(self.noise_cov))],
        }


def aligned_rate(omega_meas):
    """Idealized pure-yaw rate with the measured magnitude: [0, 0, ||w||]."""
    omega_meas = np.asarray(omega_meas, dtype=float)
    norm = np.linalg.norm(omega_meas)
    if norm == 0.0:
        raise ZeroRateError("measured rate has zero norm")
    return np.array([0.0, 0.0, norm])


def _is_single_axis(rates):
    units = rates / np.linalg.norm(rates, axis=1, keepdims=True)
    # principal direction of the orientation distribution (sign-blind)
    _, vecs = np.linalg.eigh(units.T @ units)
    axis = vecs[:, -1]
    return bool(np.min(np.abs(units @ axis)) > _SINGLE_AXIS_COS)


def solve_alignment(data):
    """Least-squares misalignment from twirl data.

    The aligned target for each sample carries the sign of the measured yaw
    rate, so datasets mixing +z and -z spins stay consistent. For datasets
    spinning about a single axis the unobservable spin-axis component is
    dropped from the solve and reported as 0 +- 0.
    """
    rates = data.rates if isinstance(data, TwirlDataset) else TwirlDataset(data).rates
    n = len(rates)
    A = np.empty((3 * n, 3))
    b = np.empty(3 * n)
    for i, w in enumerate(rates):
        A[3 * i:3 * i + 3] = -skew(w)
        target = aligned_rate(w)
        if w[2] < 0.0:
            target = -target
        b[3 * i:3 * i + 3] = target - w

    single_axis = _is_single_axis(rates)
    cols = (0, 1) if single_axis else (0, 1, 2)
    As = A[:, cols]
    AtA = As.T @ As
    if np.linalg.cond(AtA) > 1e10:
        raise RankDeficientError("normal matrix is rank deficient")
    sol = np.linalg.solve(AtA, As.T @ b)

    residual = As @ sol - b
    dof = max(len(b) - len(cols), 1)
    sigma2 = float(residual @ residual) / dof
    cov = sigma2 * np.linalg.inv(AtA)

    delta = np.zeros(3)
    err = np.zeros(3)
    for j, c in enumerate(cols):
        delta[c] = sol[j]
        err[c] = np.sqrt(cov[j, j])
    return AlignmentEstimate(delta, err)


def characterize_static(samples, dt=None):
    """Bias and noise covariance from a no-motion recording.

    The mean rate is the bias estimate (any Earth-rotation projection,
    at most ~0.0042 deg/s, is absorbed into it); residuals give the noise
    covariance.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(samples) < 100:
        raise TooFewSamplesError(
            f"static characterization needs >= 100 samples, got {len(samples)}")
    bias = samples.mean(axis=0)
    resid = samples - bias
    cov = resid.T @ resid / (len(samples) - 1)
    return StaticCharacterization(bias, cov)


def synth_twirl(delta_theta_true, speeds, n_per_speed, noise_sigma, rng):
    """Forward model for tests: measured rates for a gyro misaligned by
    delta_theta_true during constant spins at the given signed yaw speeds.

    Uses the exact rotation consistent with the linearized correction
    C_al ~ 1 - dtheta^x; white measurement noise is added per sample.
    """
    if len(speeds) == 0:
        raise ValueError("speeds must be non-empty")
    R_T = exp_rotvec(np.asarray(delta_theta_true, dtype=float)).T
    rows = []
    for speed in speeds:
        u = np.array([0.0, 0.0, float(speed)])
        base = R_T @ u
        for _ in range(int(n_per_speed)):
            if noise_sigma > 0.0:
                rows.append(base + noise_sigma * rng.standard_normal(3))
            else:
                rows.append(base.copy())
    return TwirlDataset(np.array(rows))
