"""Component models: rigid body, flywheel and modal elastic body.

Every component shares the same layout of generalized coordinates::

    q    = [position (3, world, center of mass), attitude quaternion (4), extra]
    qdot = [velocity (3, world), body angular rate (3), extra rates]

Accelerations live in the velocity space (``dof_count`` entries), so the
attitude quaternion only ever appears through its kinematic rate.

A component supplies the pieces the aggregate needs at each connection:

* ``free_term``   -- accelerations with no connection wrench applied,
* ``wrench_map``  -- ``dof x 6`` map from a world-frame wrench at the port to
  generalized accelerations,
* ``accel_bias``  -- velocity-only part of the port acceleration,
* ``accel_map``   -- ``6 x dof`` map from generalized accelerations to the
  port's (linear, angular) acceleration.

``wrench_map`` is always ``M^-1 @ accel_map.T``, which is what makes the
coupling forces workless.
"""

from __future__ import annotations

import math
from abc import ABC
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .mathcore import (
    ConnectionAccel,
    SingularMatrixError,
    cross,
    left_jacobian,
    left_jacobian_rate,
    quat_conj,
    quat_exp,
    quat_identity,
    quat_mul,
    quat_normalize,
    quat_rate,
    quat_to_matrix,
    skew,
    solve_dense,
    vec3,
)

TorqueInput = Union[float, Callable[[float], float]]


class DimensionError(ValueError):
    pass


class UnknownConnectionError(KeyError):
    pass


# --------------------------------------------------------------------------
# parameters


@dataclass(eq=False)
class ConnectionPoint:
    """Attachment frame fixed in a component's body frame."""

    id: str
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        self.position = vec3(self.position)
        q = np.asarray(self.orientation, dtype=float).reshape(4)
        self.orientation = quat_normalize(q)


@dataclass(eq=False)
class RigidBodyParams:
    mass: float
    inertia: np.ndarray
    connections: Sequence[ConnectionPoint] = ()

    def __post_init__(self):
        self.mass = float(self.mass)
        # Zero mass is accepted here; it is reported as a singular system
        # the first time the mass matrix is inverted.
        if not math.isfinite(self.mass) or self.mass < 0.0:
            raise ValueError(f"mass must be finite and non-negative, got {self.mass}")
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        if inertia.shape != (3, 3) or not np.all(np.isfinite(inertia)):
            raise ValueError("inertia must be a finite 3x3 matrix or 3 principal moments")
        if not np.allclose(inertia, inertia.T, rtol=0.0, atol=1e-12 * np.abs(inertia).max()):
            raise ValueError("inertia must be symmetric")
        eig = np.linalg.eigvalsh(inertia)
        if eig[0] <= 0.0:
            raise ValueError(f"inertia must be positive definite, eigenvalues {eig}")
        slack = 1e-9 * eig[-1]
        if eig[0] + eig[1] < eig[2] - slack:
            raise ValueError(f"principal moments {eig} violate the triangle inequality")
        self.inertia = 0.5 * (inertia + inertia.T)
        self.connections = tuple(self.connections)
        ids = [c.id for c in self.connections]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate connection ids in {ids}")


@dataclass(eq=False)
class FlywheelParams:
    """Carrier body plus a wheel spinning about a body-fixed axis.

    ``body.inertia`` is the carrier inertia including the wheel's transverse
    inertia but not its spin-axis inertia, which is ``wheel_inertia``.
    """

    body: RigidBodyParams
    wheel_inertia: float
    spin_axis: np.ndarray
    initial_wheel_rate: float = 0.0
    motor_torque: TorqueInput = 0.0

    def __post_init__(self):
        self.wheel_inertia = float(self.wheel_inertia)
        if not self.wheel_inertia > 0.0:
            raise ValueError("wheel_inertia must be positive")
        axis = vec3(self.spin_axis)
        n = float(np.linalg.norm(axis))
        if n == 0.0:
            raise ValueError("spin_axis must be nonzero")
        self.spin_axis = axis / n
        self.initial_wheel_rate = float(self.initial_wheel_rate)

    def motor_torque_at(self, t: float) -> float:
        if callable(self.motor_torque):
            return float(self.motor_torque(t))
        return float(self.motor_torque)


@dataclass(eq=False)
class ElasticModeParams:
    """One harmonic mode ``modal_mass*q'' + damping*q' + stiffness*q = Q``.

    ``participation`` maps a connection id to the 6-vector (linear, angular;
    body frame) that the mode contributes to that connection's displacement
    per unit modal coordinate. Connections not listed do not move with the
    mode.
    """

    modal_mass: float
    damping: float
    stiffness: float
    participation: dict = field(default_factory=dict)

    def __post_init__(self):
        self.modal_mass = float(self.modal_mass)
        self.damping = float(self.damping)
        self.stiffness = float(self.stiffness)
        if not self.modal_mass > 0.0:
            raise ValueError("modal_mass must be positive")
        if not self.stiffness > 0.0:
            raise ValueError("stiffness must be positive")
        if not self.damping >= 0.0:
            raise ValueError("damping must be non-negative")
        self.participation = {
            k: np.asarray(v, dtype=float).reshape(6) for k, v in self.participation.items()
        }


@dataclass(eq=False)
class ElasticBodyParams:
    body: RigidBodyParams
    modes: Sequence[ElasticModeParams] = ()

    def __post_init__(self):
        self.modes = tuple(self.modes)
        ports = {c.id for c in self.body.connections}
        for m in self.modes:
            unknown = set(m.participation) - ports
            if unknown:
                raise ValueError(f"participation given for unknown connections {sorted(unknown)}")


# --------------------------------------------------------------------------
# state


@dataclass(eq=False)
class ComponentState:
    """Generalized coordinates ``q`` and generalized velocities ``qdot``."""

    q: np.ndarray
    qdot: np.ndarray

    def copy(self) -> ComponentState:
        return ComponentState(self.q.copy(), self.qdot.copy())

    @property
    def position(self) -> np.ndarray:
        return self.q[0:3]

    @property
    def attitude(self) -> np.ndarray:
        return self.q[3:7]

    @property
    def velocity(self) -> np.ndarray:
        return self.qdot[0:3]

    @property
    def body_rate(self) -> np.ndarray:
        return self.qdot[3:6]


class _Port:
    __slots__ = ("id", "r", "q", "phi", "psi")

    def __init__(self, point: ConnectionPoint, phi=None, psi=None):
        self.id = point.id
        self.r = point.position
        self.q = point.orientation
        self.phi = phi
        self.psi = psi


# --------------------------------------------------------------------------
# components


class Component(ABC):
    """Base of every aggregable part; implements the rigid-body core."""

    kind = "abstract"

    def __init__(self, name: str, body: RigidBodyParams, n_extra: int = 0):
        self.name = name
        self.body = body
        self.mass = body.mass
        self.inertia = body.inertia
        self.n_extra = n_extra
        self.nq = 7 + n_extra
        self.dof_count = 6 + n_extra
        self._ports = {c.id: _Port(c) for c in body.connections}
        self._M = np.zeros((self.dof_count, self.dof_count))
        self._M[0:3, 0:3] = self.mass * np.eye(3)
        self._M[3:6, 3:6] = self.inertia
        self._Minv = None

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"

    @property
    def connection_ids(self) -> list[str]:
        return list(self._ports)

    def has_connection(self, connection_id: str) -> bool:
        return connection_id in self._ports

    def port(self, connection_id: str) -> _Port:
        try:
            return self._ports[connection_id]
        except KeyError:
            raise UnknownConnectionError(
                f"{self.name!r} has no connection {connection_id!r}"
            ) from None

    # ---- state helpers

    def make_state(
        self,
        position=(0.0, 0.0, 0.0),
        attitude=(1.0, 0.0, 0.0, 0.0),
        velocity=(0.0, 0.0, 0.0),
        body_rate=(0.0, 0.0, 0.0),
        extra=None,
        extra_rates=None,
    ) -> ComponentState:
        extra = np.zeros(self.n_extra) if extra is None else np.asarray(extra, float)
        if extra_rates is None:
            extra_rates = self._default_extra_rates()
        extra_rates = np.asarray(extra_rates, dtype=float)
        if extra.shape != (self.n_extra,) or extra_rates.shape != (self.n_extra,):
            raise DimensionError(f"{self.name!r} expects {self.n_extra} extra coordinates")
        q = np.concatenate((vec3(position), quat_normalize(attitude), extra))
        qdot = np.concatenate((vec3(velocity), vec3(body_rate), extra_rates))
        return ComponentState(q, qdot)

    def _default_extra_rates(self) -> np.ndarray:
        return np.zeros(self.n_extra)

    def check_state(self, state: ComponentState) -> None:
        if state.q.shape != (self.nq,) or state.qdot.shape != (self.dof_count,):
            raise DimensionError(
                f"{self.name!r} expects q of length {self.nq} and qdot of length "
                f"{self.dof_count}, got {state.q.shape} and {state.qdot.shape}"
            )

    def normalized(self, state: ComponentState) -> ComponentState:
        q = state.q.copy()
        q[3:7] = quat_normalize(q[3:7])
        return ComponentState(q, state.qdot.copy())

    def state_labels(self) -> list[str]:
        base = ["px", "py", "pz", "q0", "q1", "q2", "q3", "vx", "vy", "vz", "wx", "wy", "wz"]
        return base + self._extra_labels()

    def _extra_labels(self) -> list[str]:
        return []

    def state_row(self, state: ComponentState) -> np.ndarray:
        """Values matching :meth:`state_labels`."""
        extra = np.column_stack((state.q[7:], state.qdot[6:])).ravel()
        return np.concatenate((state.q[:7], state.qdot[:6], extra))

    # ---- mass properties

    def mass_matrix(self) -> np.ndarray:
        return self._M.copy()

    def inverse_mass_matrix(self) -> np.ndarray:
        if self._Minv is None:
            try:
                self._Minv = solve_dense(self._M, np.eye(self.dof_count))
            except SingularMatrixError as exc:
                raise SingularMatrixError(f"mass matrix of {self.name!r} is singular: {exc}") from exc
        return self._Minv

    def _body_momentum(self, state: ComponentState) -> np.ndarray:
        return self.inertia @ state.qdot[3:6]

    # ---- dynamics

    def free_force(self, state: ComponentState) -> np.ndarray:
        """Velocity-dependent generalized force (gyroscopic and internal)."""
        w = state.qdot[3:6]
        f = np.zeros(self.dof_count)
        f[3:6] = -cross(w, self._body_momentum(state))
        return f

    def free_term(self, state: ComponentState) -> np.ndarray:
        self.check_state(state)
        return self.inverse_mass_matrix() @ self.free_force(state)

    def external_generalized_force(
        self, state: ComponentState, force=None, torque=None, internal=None
    ) -> np.ndarray:
        """Generalized force (force units) of an external load.

        Args:
            force: world-frame force through the center of mass.
            torque: body-frame torque.
            internal: generalized forces on the extra coordinates (modal
                forces, wheel motor torque).
        """
        f = np.zeros(self.dof_count)
        if force is not None:
            f[0:3] = force
        if torque is not None:
            f[3:6] = torque
        if internal is not None:
            f[6:] = internal
        return f

    def coordinate_rates(self, state: ComponentState) -> np.ndarray:
        qd = np.empty(self.nq)
        qd[0:3] = state.qdot[0:3]
        qd[3:7] = quat_rate(state.q[3:7], state.qdot[3:6])
        qd[7:] = state.qdot[6:]
        return qd

    # ---- connection kinematics

    def _deflection(self, port: _Port, state: ComponentState):
        """Port offset and modal contributions in the body frame.

        Returns ``(r_eff, theta, lin_rate, ang_rate, ang_rate_dot, lin_cols,
        ang_cols)``; everything past ``r_eff`` is ``None`` for components
        whose ports do not move relative to the body.
        """
        return port.r, None, None, None, None, None, None

    def port_maps(self, connection_id: str, state: ComponentState):
        """``(accel_map, accel_bias)`` of a port as arrays, sharing the work."""
        self.check_state(state)
        port = self.port(connection_id)
        R = quat_to_matrix(state.q[3:7])
        w = state.qdot[3:6]
        r_eff, _, lin_rate, ang_rate, ang_rate_dot, lin_cols, ang_cols = self._deflection(port, state)
        D = np.zeros((6, self.dof_count))
        D[0, 0] = D[1, 1] = D[2, 2] = 1.0
        D[0:3, 3:6] = -R @ skew(r_eff)
        D[3:6, 3:6] = R
        C = np.zeros(6)
        lin = cross(w, cross(w, r_eff))
        if lin_cols is None:
            C[0:3] = R @ lin
        else:
            D[0:3, 6:] = R @ lin_cols
            D[3:6, 6:] = R @ ang_cols
            C[0:3] = R @ (lin + 2.0 * cross(w, lin_rate))
            C[3:6] = R @ (cross(w, ang_rate) + ang_rate_dot)
        return D, C

    def accel_map(self, connection_id: str, state: ComponentState) -> np.ndarray:
        return self.port_maps(connection_id, state)[0]

    def accel_bias(self, connection_id: str, state: ComponentState) -> ConnectionAccel:
        return ConnectionAccel.from_array(self.port_maps(connection_id, state)[1])

    def wrench_map(self, connection_id: str, state: ComponentState) -> np.ndarray:
        return self.inverse_mass_matrix() @ self.accel_map(connection_id, state).T

    def connection_pose(self, connection_id: str, state: ComponentState):
        """World position and orientation quaternion of a connection frame."""
        port = self.port(connection_id)
        quat = state.q[3:7]
        R = quat_to_matrix(quat)
        r_eff, theta, *_ = self._deflection(port, state)
        x = state.q[0:3] + R @ r_eff
        if theta is None:
            Q = quat_mul(quat, port.q)
        else:
            Q = quat_mul(quat_mul(quat, quat_exp(theta)), port.q)
        return x, Q

    def connection_velocity(self, connection_id: str, state: ComponentState):
        """World linear and angular velocity of a connection frame."""
        port = self.port(connection_id)
        R = quat_to_matrix(state.q[3:7])
        w = state.qdot[3:6]
        r_eff, _, lin_rate, ang_rate, *_ = self._deflection(port, state)
        v_rel = cross(w, r_eff)
        if lin_rate is None:
            return state.qdot[0:3] + R @ v_rel, R @ w
        return state.qdot[0:3] + R @ (v_rel + lin_rate), R @ (w + ang_rate)

    def place_connection(
        self, connection_id: str, state: ComponentState, position, orientation, velocity, angular_velocity
    ) -> ComponentState:
        """Move the body so that a connection frame matches the given pose and velocity.

        Extra coordinates and their rates are kept; only the rigid pose and
        rigid velocities change.
        """
        port = self.port(connection_id)
        r_eff, theta, lin_rate, ang_rate, *_ = self._deflection(port, state)
        quat = quat_mul(np.asarray(orientation, dtype=float), quat_conj(port.q))
        if theta is not None:
            quat = quat_mul(quat, quat_conj(quat_exp(theta)))
        quat = quat_normalize(quat)
        if float(quat @ state.q[3:7]) < 0.0:
            quat = -quat
        R = quat_to_matrix(quat)
        w = R.T @ angular_velocity
        if ang_rate is not None:
            w = w - ang_rate
        v_rel = cross(w, r_eff)
        if lin_rate is not None:
            v_rel = v_rel + lin_rate
        q = state.q.copy()
        qdot = state.qdot.copy()
        q[0:3] = position - R @ r_eff
        q[3:7] = quat
        qdot[0:3] = velocity - R @ v_rel
        qdot[3:6] = w
        return ComponentState(q, qdot)

    # ---- conserved quantities

    def linear_momentum(self, state: ComponentState) -> np.ndarray:
        return self.mass * state.qdot[0:3]

    def angular_momentum(self, state: ComponentState) -> np.ndarray:
        """Angular momentum about the world origin."""
        R = quat_to_matrix(state.q[3:7])
        return self.mass * cross(state.q[0:3], state.qdot[0:3]) + R @ self._body_momentum(state)

    def kinetic_energy(self, state: ComponentState) -> float:
        v = state.qdot
        return 0.5 * float(v @ (self._M @ v))

    def potential_energy(self, state: ComponentState) -> float:
        return 0.0


class RigidBody(Component):
    kind = "rigid_body"

    def __init__(self, name: str, params: RigidBodyParams):
        super().__init__(name, params, 0)
        self.params = params


class Flywheel(Component):
    """Carrier rigid body with one wheel spinning about ``spin_axis``.

    The extra coordinate is the wheel angle relative to the carrier; its
    rate is the relative wheel speed. The wheel motor torque enters as the
    generalized force on that coordinate, which is exactly the internal
    torque pair (``+tau`` on the wheel, ``-tau`` on the carrier).
    """

    kind = "flywheel"

    def __init__(self, name: str, params: FlywheelParams):
        super().__init__(name, params.body, 1)
        self.params = params
        a = params.spin_axis
        Jw = params.wheel_inertia
        self.spin_axis = a
        self.wheel_inertia = Jw
        self._M[3:6, 3:6] += Jw * np.outer(a, a)
        self._M[3:6, 6] = Jw * a
        self._M[6, 3:6] = Jw * a
        self._M[6, 6] = Jw

    def _default_extra_rates(self):
        return np.array([self.params.initial_wheel_rate])

    def _extra_labels(self):
        return ["wheel_angle", "wheel_rate"]

    def wheel_absolute_rate(self, state: ComponentState) -> float:
        return float(self.spin_axis @ state.qdot[3:6] + state.qdot[6])

    def _body_momentum(self, state):
        w = state.qdot[3:6]
        return self.inertia @ w + self.wheel_inertia * self.wheel_absolute_rate(state) * self.spin_axis

    def external_generalized_force(self, state, force=None, torque=None, internal=None, motor_torque=None):
        f = super().external_generalized_force(state, force, torque, internal)
        if motor_torque is not None:
            f[6] += motor_torque
        return f


class ElasticBody(Component):
    """Mean rigid body plus a set of uncoupled harmonic modes."""

    kind = "elastic_body"

    def __init__(self, name: str, params: ElasticBodyParams):
        k = len(params.modes)
        super().__init__(name, params.body, k)
        self.params = params
        self.modes = params.modes
        self._modal_mass = np.array([m.modal_mass for m in self.modes])
        self._damping = np.array([m.damping for m in self.modes])
        self._stiffness = np.array([m.stiffness for m in self.modes])
        for i, mm in enumerate(self._modal_mass):
            self._M[6 + i, 6 + i] = mm
        if k:
            for port in self._ports.values():
                cols = np.zeros((6, k))
                for i, m in enumerate(self.modes):
                    if port.id in m.participation:
                        cols[:, i] = m.participation[port.id]
                port.phi = cols[0:3]
                port.psi = cols[3:6]

    def _extra_labels(self):
        out = []
        for i in range(self.n_extra):
            out += [f"eta{i + 1}", f"eta{i + 1}_rate"]
        return out

    def free_force(self, state):
        f = super().free_force(state)
        f[6:] = -self._damping * state.qdot[6:] - self._stiffness * state.q[7:]
        return f

    def _deflection(self, port, state):
        if port.phi is None:
            return port.r, None, None, None, None, None, None
        eta = state.q[7:]
        eta_dot = state.qdot[6:]
        theta = port.psi @ eta
        theta_dot = port.psi @ eta_dot
        J = left_jacobian(theta)
        return (
            port.r + port.phi @ eta,
            theta,
            port.phi @ eta_dot,
            J @ theta_dot,
            left_jacobian_rate(theta, theta_dot),
            port.phi,
            J @ port.psi,
        )

    def potential_energy(self, state):
        eta = state.q[7:]
        return 0.5 * float(self._stiffness @ (eta * eta))


# --------------------------------------------------------------------------
# standalone internal dynamics


def flywheel_internal_dynamics(params: FlywheelParams, state: ComponentState, motor_torque: float):
    """Wheel spin acceleration and the carrier's reaction to a motor torque.

    Returns:
        ``(wheel_rate_derivative, reaction)`` where the first entry is the
        derivative of the wheel's absolute spin rate about its axis and
        ``reaction`` is the 6-vector generalized force (force, body torque)
        the motor exerts on the carrier.
    """
    reaction = np.zeros(6)
    reaction[3:6] = -motor_torque * params.spin_axis
    return motor_torque / params.wheel_inertia, reaction


def elastic_mode_dynamics(mode: ElasticModeParams, q: float, qdot: float, Q: float) -> float:
    return (Q - mode.damping * qdot - mode.stiffness * q) / mode.modal_mass


def make_component(name: str, params) -> Component:
    if isinstance(params, FlywheelParams):
        return Flywheel(name, params)
    if isinstance(params, ElasticBodyParams):
        return ElasticBody(name, params)
    if isinstance(params, RigidBodyParams):
        return RigidBody(name, params)
    raise TypeError(f"unsupported parameter type {type(params).__name__}")
