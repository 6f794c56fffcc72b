"""Rotation-group primitives shared by every other module.

Attitude is carried as a 3x3 direction cosine matrix C_bi that maps
inertial-frame coordinates into body-frame coordinates. Rotation vectors
follow the convention exp_rotvec(theta) == exp(+theta^x), so a body frame
reached by rotating through -theta relative to inertial satisfies
C_bi = exp_rotvec(-theta).
"""

import math

import numpy as np

from .errors import DegenerateMatrixError, ZeroAxisError

_EYE3 = np.eye(3)

# below this angle the Rodrigues ratios sin(p)/p, (1-cos p)/p^2 are replaced
# by their second-order series
_SMALL_ANGLE = 1e-8


def skew(v):
    """Skew-symmetric matrix S with S @ w == cross(v, w)."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def unskew(S):
    """Vector of the antisymmetric part of S; exact inverse of skew."""
    S = np.asarray(S, dtype=float)
    return 0.5 * np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]])


def exp_rot(axis, angle):
    """Rodrigues rotation about a unit axis: 1 + sin(a) K + (1-cos(a)) K^2."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        if abs(angle) < 1e-12:
            return _EYE3.copy()
        raise ZeroAxisError(f"axis norm {n:g} too small for angle {angle:g}")
    if abs(n - 1.0) >= 1e-6:
        raise ZeroAxisError(f"axis norm {n:g} not within 1e-6 of unity")
    K = skew(axis / n)
    return _EYE3 + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def exp_rotvec(theta):
    """Matrix exponential exp(theta^x) of a rotation vector.

    Below 1e-8 rad the ratios sin(a)/a and (1-cos a)/a^2 collapse to the
    second-order series 1 + K + K^2/2. Entries are written out directly;
    this sits in the per-step hot path of the simulator and the filter.
    """
    t0, t1, t2 = float(theta[0]), float(theta[1]), float(theta[2])
    a2 = t0 * t0 + t1 * t1 + t2 * t2
    if a2 < _SMALL_ANGLE * _SMALL_ANGLE:
        s, c = 1.0, 0.5
    else:
        a = math.sqrt(a2)
        s = math.sin(a) / a
        c = (1.0 - math.cos(a)) / a2
    ca = 1.0 - c * a2  # = cos(a)
    c01, c02, c12 = c * t0 * t1, c * t0 * t2, c * t1 * t2
    s0, s1, s2 = s * t0, s * t1, s * t2
    return np.array([
        [ca + c * t0 * t0, c01 - s2, c02 + s1],
        [c01 + s2, ca + c * t1 * t1, c12 - s0],
        [c02 - s1, c12 + s0, ca + c * t2 * t2],
    ])


def log_rot(C):
    """Rotation vector theta with exp_rotvec(theta) == C.

    Uses the antisymmetric part away from pi and the symmetric (diagonal)
    extraction branch near pi, where the antisymmetric part degenerates.
    """
    C = np.asarray(C, dtype=float)
    tr = np.trace(C)
    angle = np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
    if angle < _SMALL_ANGLE:
        return unskew(C)
    if angle < np.pi - 1e-3:
        return unskew(C) * (angle / np.sin(angle))
    # near pi the antisymmetric part degenerates; recover the axis from the
    # symmetric part via a_i^2 = (C_ii - cos) / (1 - cos), signs from the
    # off-diagonals through the dominant component
    cos_a = np.clip((tr - 1.0) / 2.0, -1.0, 1.0)
    one_minus = 1.0 - cos_a
    a2 = np.clip((np.diag(C) - cos_a) / one_minus, 0.0, None)
    k = int(np.argmax(a2))
    axis = np.empty(3)
    axis[k] = np.sqrt(a2[k])
    sym = 0.5 * (C + C.T)
    for i in range(3):
        if i != k:
            axis[i] = sym[k, i] / (one_minus * axis[k])
    axis /= np.linalg.norm(axis)
    w = unskew(C)  # = sin(angle) * axis, small but directionally meaningful
    if np.dot(w, axis) < 0.0:
        axis = -axis
    # asin is well conditioned here, acos is not
    angle = np.pi - np.arcsin(min(np.linalg.norm(w), 1.0))
    return axis * angle


def rotation_angle(C):
    """Scalar rotation angle of C in [0, pi], trace clamped against round-off."""
    tr = np.trace(np.asarray(C, dtype=float))
    return float(np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0)))


def small_noise_rotation(sigma, rng):
    """Random rotation exp_rotvec(-xi) with xi ~ N(0, diag(sigma^2)).

    Exact exponential of the drawn vector, so the output is on SO(3) for any
    draw; agrees with the linearized 1 - xi^x to second order in ||xi||.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.all(sigma == 0.0):
        return _EYE3.copy()
    xi = rng.standard_normal(3) * sigma
    return exp_rotvec(-xi)


def project_to_so3(M):
    """Nearest rotation matrix via SVD polar decomposition; idempotent on SO(3)."""
    M = np.asarray(M, dtype=float)
    if np.linalg.det(M) <= 0.0:
        raise DegenerateMatrixError("matrix has non-positive determinant")
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0.0:
        U = U.copy()
        U[:, -1] = -U[:, -1]
        R = U @ Vt
    return R


def is_rotation(C, tol=1e-9):
    """True when C C^T = 1 and det(C) = +1 within tol per entry."""
    C = np.asarray(C, dtype=float)
    return (np.abs(C @ C.T - _EYE3).max() < tol
            and abs(np.linalg.det(C) - 1.0) < tol)
