"""PI yaw-rate control: rate reference ramping, first-order measurement
filtering, the inner rate loop with optional saturation and anti-windup, and
an optional outer angle loop cascaded onto the rate loop."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

# outer-loop rate commands are clamped to the science spin rate
MAX_RATE_CMD = math.radians(30.0)


@dataclass
class LowPassState:
    """First-order low-pass filter, discretized as exponential smoothing."""

    tau: float                          # s
    y: float = 0.0

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")

    def step(self, x, dt):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        alpha = dt / (self.tau + dt)
        self.y += alpha * (x - self.y)
        return self.y


def lowpass_step(lp, x, dt):
    return lp.step(x, dt)


@dataclass
class RateReference:
    """Commanded rate that moves toward its target at a bounded ramp rate."""

    target: float                       # rad/s
    ramp_rate: float                    # rad/s^2, magnitude of the slope
    current: float = 0.0

    def step(self, dt):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        delta = self.target - self.current
        move = abs(self.ramp_rate) * dt
        if abs(delta) <= move:
            self.current = self.target
        else:
            self.current += math.copysign(move, delta)
        return self.current


def ramp_step(ref, dt):
    return ref.step(dt)


@dataclass
class PiGains:
    """PI rate loop with rectangular integration and conditional anti-windup:
    the integrator freezes while the commanded torque is saturated."""

    kp: float                           # N m s / rad
    ki: float                           # N m / rad
    integrator: float = 0.0             # N m
    torque_limit: Optional[float] = None

    def __post_init__(self):
        if self.kp < 0.0 or self.ki < 0.0:
            raise ValueError("gains must be non-negative")

    def step(self, rate_ref, rate_meas, dt):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        e = rate_ref - rate_meas
        tau = self.kp * e + self.integrator + self.ki * e * dt
        lim = self.torque_limit
        if lim is not None and abs(tau) > lim:
            tau = math.copysign(lim, tau)
        else:
            self.integrator += self.ki * e * dt
        return tau

    def reset(self):
        self.integrator = 0.0


def pi_step(gains, rate_ref, rate_meas, dt):
    return gains.step(rate_ref, rate_meas, dt)


def wrap_angle(angle):
    """Wrap to (-pi, pi]."""
    wrapped = math.fmod(angle + np.pi, 2.0 * np.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * np.pi
    return wrapped - np.pi


@dataclass
class AngleLoop:
    """Outer PI loop turning a yaw-angle error into a rate command for the
    inner loop, clamped to +-30 deg/s."""

    gains: PiGains
    rate_limit: float = MAX_RATE_CMD

    def step(self, angle_ref, angle_meas, dt):
        e = wrap_angle(angle_ref - angle_meas)
        cmd = self.gains.kp * e + self.gains.integrator + self.gains.ki * e * dt
        if abs(cmd) > self.rate_limit:
            cmd = math.copysign(self.rate_limit, cmd)
        else:
            self.gains.integrator += self.gains.ki * e * dt
        return cmd


def angle_loop_step(outer, angle_ref, angle_meas, dt):
    return outer.step(angle_ref, angle_meas, dt)
