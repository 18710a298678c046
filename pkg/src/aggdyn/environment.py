"""Orbital environment and attitude control blocks.

Central gravity, an ideal dipole magnetic field, the magnetic torque on a
spacecraft's residual dipole, a local-vertical pointing sensor and a
saturated PD law that commands a flywheel motor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mathcore import cross, quat_identity, quat_normalize, quat_to_matrix, vec3

ANTIPODAL_THRESHOLD = math.pi - 1e-6


class SingularityError(ValueError):
    """Field or sensor evaluated at its center."""


@dataclass(eq=False)
class GravityModel:
    mu: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.mu > 0.0:
            raise ValueError("mu must be positive")
        self.center = vec3(self.center)


@dataclass(eq=False)
class MagneticDipoleField:
    """Ideal dipole; ``moment`` already carries the mu0/4pi factor (T m^3)."""

    moment: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.moment = vec3(self.moment)
        if not np.any(self.moment):
            raise ValueError("dipole moment must be nonzero")
        self.center = vec3(self.center)


@dataclass(eq=False)
class SpacecraftMagnetics:
    dipole: np.ndarray  # A m^2, body frame

    def __post_init__(self):
        self.dipole = vec3(self.dipole)


@dataclass(eq=False)
class Frame:
    """A moving frame; velocities are world-frame."""

    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    parent: Optional[str] = None

    def __post_init__(self):
        self.origin = vec3(self.origin)
        self.orientation = quat_normalize(self.orientation)
        self.velocity = vec3(self.velocity)
        self.angular_velocity = vec3(self.angular_velocity)


@dataclass
class ControlLawParams:
    kp: float
    kd: float
    saturation: float
    boresight: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.kp < 0.0 or self.kd < 0.0:
            raise ValueError("gains must be non-negative")
        if not self.saturation > 0.0:
            raise ValueError("saturation must be positive")
        b = vec3(self.boresight)
        self.boresight = tuple(b / np.linalg.norm(b))


def gravity_accel(model: GravityModel, position) -> np.ndarray:
    r = np.asarray(position, dtype=float) - model.center
    d = math.sqrt(float(r @ r))
    if d == 0.0:
        raise SingularityError("gravity evaluated at the attracting center")
    return -model.mu * r / (d * d * d)


def field_at(field_model: MagneticDipoleField, position) -> np.ndarray:
    r = np.asarray(position, dtype=float) - field_model.center
    d = math.sqrt(float(r @ r))
    if d == 0.0:
        raise SingularityError("dipole field evaluated at its center")
    rhat = r / d
    m = field_model.moment
    return (3.0 * rhat * float(m @ rhat) - m) / d**3


def magnetic_torque(d_body, attitude, b_inertial) -> np.ndarray:
    """Body-frame torque ``d x B`` on a residual dipole."""
    R = quat_to_matrix(attitude)
    return cross(d_body, R.T @ np.asarray(b_inertial, dtype=float))


def local_vertical_error(spacecraft: Frame, earth: Frame, boresight=(0.0, 0.0, 1.0)):
    """Pointing error of a body axis relative to nadir.

    Returns:
        ``(error, rate)`` in the spacecraft body frame. ``error`` is the
        axis-angle vector of the rotation taking ``boresight`` onto the
        nadir direction. ``rate`` is the time derivative of
        ``boresight x nadir``, which equals the error rate for small errors.
    """
    b = vec3(boresight)
    b = b / np.linalg.norm(b)
    rho = earth.origin - spacecraft.origin
    dist = math.sqrt(float(rho @ rho))
    if dist == 0.0:
        raise SingularityError("spacecraft at the earth center")
    R = quat_to_matrix(spacecraft.orientation)
    n_w = rho / dist
    rho_dot = earth.velocity - spacecraft.velocity
    n_w_dot = (rho_dot - n_w * float(n_w @ rho_dot)) / dist
    n_b = R.T @ n_w
    w_b = R.T @ spacecraft.angular_velocity
    n_b_dot = R.T @ n_w_dot - cross(w_b, n_b)

    axis = cross(b, n_b)
    s = float(np.linalg.norm(axis))
    angle = math.atan2(s, float(b @ n_b))
    if angle > ANTIPODAL_THRESHOLD:
        # deterministic tie-break: body x projected off the boresight
        x = np.array([1.0, 0.0, 0.0])
        axis = x - b * float(b @ x)
        if np.linalg.norm(axis) < 1e-6:
            y = np.array([0.0, 1.0, 0.0])
            axis = y - b * float(b @ y)
        axis = axis / np.linalg.norm(axis)
    elif s > 0.0:
        axis = axis / s
    error = angle * axis
    rate = cross(b, n_b_dot)
    return error, rate


def control_torque(params: ControlLawParams, error, error_rate, axis=(0.0, 0.0, 1.0)) -> float:
    """Saturated PD motor torque about the wheel axis ``axis`` (body frame)."""
    a = vec3(axis)
    tau = -params.kp * float(np.dot(error, a)) - params.kd * float(np.dot(error_rate, a))
    return max(-params.saturation, min(params.saturation, tau))


# --------------------------------------------------------------------------
# wiring for integration runs


@dataclass(eq=False)
class Controller:
    params: ControlLawParams
    sensor: int  # component carrying the sensor
    actuator: int  # flywheel component


@dataclass(eq=False)
class Environment:
    """Loads and observables evaluated at every derivative call.

    Gravity acts as a uniform acceleration across the aggregate, evaluated
    at its center of mass.
    """

    gravity: Optional[GravityModel] = None
    magnetic_field: Optional[MagneticDipoleField] = None
    magnetics: dict = field(default_factory=dict)  # component index -> SpacecraftMagnetics
    controller: Optional[Controller] = None
    motor_inputs: dict = field(default_factory=dict)  # component index -> callable(t)
    loads: Optional[Callable] = None  # extra hook: (aggregate, t, state) -> list of forces

    def earth_frame(self) -> Frame:
        if self.gravity is not None:
            return Frame(origin=self.gravity.center)
        if self.magnetic_field is not None:
            return Frame(origin=self.magnetic_field.center)
        return Frame()

    def sensor_frame(self, aggregate, state) -> Frame:
        k = self.controller.sensor
        s = state.states[k]
        R = quat_to_matrix(s.q[3:7])
        return Frame(s.q[0:3], s.q[3:7], s.qdot[0:3], R @ s.qdot[3:6])

    def pointing(self, aggregate, state):
        b = self.controller.params.boresight
        return local_vertical_error(self.sensor_frame(aggregate, state), self.earth_frame(), b)

    def commanded_torque(self, aggregate, state) -> float:
        ctl = self.controller
        error, rate = self.pointing(aggregate, state)
        wheel = aggregate.components[ctl.actuator]
        ss = state.states[ctl.sensor]
        sw = state.states[ctl.actuator]
        axis_w = quat_to_matrix(sw.q[3:7]) @ wheel.spin_axis
        axis_b = quat_to_matrix(ss.q[3:7]).T @ axis_w
        return control_torque(ctl.params, error, rate, axis_b)

    def generalized_forces(self, aggregate, t, state):
        comps = aggregate.components
        forces = [np.zeros(c.dof_count) for c in comps]
        if self.gravity is not None:
            total = sum(c.mass for c in comps)
            com = sum((c.mass * s.q[0:3] for c, s in zip(comps, state.states)), np.zeros(3)) / total
            g = gravity_accel(self.gravity, com)
            for f, c in zip(forces, comps):
                f[0:3] += c.mass * g
        if self.magnetic_field is not None:
            for k, mag in self.magnetics.items():
                s = state.states[k]
                B = field_at(self.magnetic_field, s.q[0:3])
                forces[k][3:6] += magnetic_torque(mag.dipole, s.q[3:7], B)
        for k, fn in self.motor_inputs.items():
            forces[k][6] += fn(t)
        if self.controller is not None:
            forces[self.controller.actuator][6] += self.commanded_torque(aggregate, state)
        if self.loads is not None:
            for f, extra in zip(forces, self.loads(aggregate, t, state)):
                if extra is not None:
                    f += extra
        return forces

    def observables(self, aggregate, t, state) -> dict[str, float]:
        out = {}
        if self.controller is not None:
            error, _ = self.pointing(aggregate, state)
            out["local_vertical_error"] = float(np.linalg.norm(error))
            out["motor_torque"] = self.commanded_torque(aggregate, state)
        return out


__all__ = [
    "ControlLawParams",
    "Controller",
    "Environment",
    "Frame",
    "GravityModel",
    "MagneticDipoleField",
    "SingularityError",
    "SpacecraftMagnetics",
    "control_torque",
    "field_at",
    "gravity_accel",
    "local_vertical_error",
    "magnetic_torque",
]
