"""Builders and independent oracles shared by the test modules."""

import math

import numpy as np

from aggdyn.assembly import Aggregate, AggregateState, Connection
from aggdyn.components import (
    ConnectionPoint,
    ElasticBody,
    ElasticBodyParams,
    ElasticModeParams,
    Flywheel,
    FlywheelParams,
    RigidBody,
    RigidBodyParams,
)
from aggdyn.mathcore import quat_normalize, quat_to_matrix


def random_quat(rng):
    return quat_normalize(rng.normal(size=4))


def random_inertia(rng, scale=1.0):
    """Random physically valid inertia tensor (body frame, not diagonal)."""
    while True:
        moments = rng.uniform(0.5, 2.0, size=3) * scale
        if moments[0] + moments[1] >= moments[2] and moments[1] + moments[2] >= moments[0] and moments[0] + moments[2] >= moments[1]:
            break
    R = quat_to_matrix(random_quat(rng))
    return R @ np.diag(moments) @ R.T


def elastic_single_mode(modal_mass=1.0, damping=0.0, stiffness=4.0, participation=None):
    port = ConnectionPoint("root", [0.0, 0.0, 0.0])
    part = {} if participation is None else {"root": participation}
    return ElasticBody(
        "mode",
        ElasticBodyParams(RigidBodyParams(1.0, [1.0, 1.0, 1.0], [port]), [ElasticModeParams(modal_mass, damping, stiffness, part)]),
    )


def mixed_chain(rng, damping=0.0, motor=0.0):
    """Rigid hub with a flywheel module and an elastic panel, chained as a tree.

    Returns ``(aggregate, consistent initial state)``.
    """
    hub = RigidBody(
        "hub",
        RigidBodyParams(
            10.0,
            random_inertia(rng, 5.0),
            [ConnectionPoint("a", [0.6, 0.1, 0.0], random_quat(rng)), ConnectionPoint("b", [-0.5, 0.0, 0.2])],
        ),
    )
    fw = Flywheel(
        "wheel",
        FlywheelParams(
            RigidBodyParams(2.0, [0.3, 0.25, 0.35], [ConnectionPoint("m", [0.0, 0.0, -0.2])]),
            0.05,
            [0.3, 0.4, 0.866],
            initial_wheel_rate=20.0,
            motor_torque=motor,
        ),
    )
    panel = ElasticBody(
        "panel",
        ElasticBodyParams(
            RigidBodyParams(3.0, [0.4, 2.0, 2.2], [ConnectionPoint("root", [-1.0, 0.0, 0.0], random_quat(rng))]),
            [
                ElasticModeParams(1.0, damping, 9.0, {"root": [0.0, 0.0, 0.1, 0.05, 0.0, 0.0]}),
                ElasticModeParams(0.5, damping, 16.0, {"root": [0.02, 0.04, 0.0, 0.0, 0.03, -0.02]}),
            ],
        ),
    )
    agg = Aggregate([hub, fw, panel], [Connection(0, "a", 1, "m"), Connection(0, "b", 2, "root")])
    from aggdyn.assembly import normalize_state

    states = [
        hub.make_state([0.1, -0.2, 0.3], random_quat(rng), [0.2, 0.1, -0.3], [0.3, -0.5, 0.4]),
        fw.make_state(),
        panel.make_state(extra=[0.05, -0.03], extra_rates=[0.1, 0.2]),
    ]
    return agg, normalize_state(agg, AggregateState(states))


def composite_rigid_body(masses, positions, rotations, inertias):
    """Mass, center of mass and world inertia of rigidly joined bodies."""
    m = float(sum(masses))
    c = sum(mk * np.asarray(pk) for mk, pk in zip(masses, positions)) / m
    I = np.zeros((3, 3))
    for mk, pk, Rk, Ik in zip(masses, positions, rotations, inertias):
        d = np.asarray(pk) - c
        I += Rk @ Ik @ Rk.T + mk * (np.dot(d, d) * np.eye(3) - np.outer(d, d))
    return m, c, I


def underdamped(t, modal_mass, damping, stiffness, q0=1.0, v0=0.0):
    wn = math.sqrt(stiffness / modal_mass)
    zeta = damping / (2.0 * math.sqrt(stiffness * modal_mass))
    wd = wn * math.sqrt(1.0 - zeta * zeta)
    a = zeta * wn
    return math.exp(-a * t) * (q0 * math.cos(wd * t) + (v0 + a * q0) / wd * math.sin(wd * t))
