"""Simulation, estimation, and yaw-rate control toolkit for a pivot-actuated
balloon-borne gondola: SO(3) attitude dynamics, inertial/optical sensor
emulation, a bias-aware multiplicative EKF, a cascaded PI yaw controller, and
seeded Monte Carlo scenario batches."""

__version__ = "0.1.0"
