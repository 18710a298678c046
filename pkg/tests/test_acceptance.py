"""Acceptance gate: every criterion at its stated tolerance.

Each test carries a ``criterion`` marker; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the session.
"""

import math
from pathlib import Path

import numpy as np
import pytest

import aggdyn.integrator as integrator_module
from aggdyn.assembly import (
    Aggregate,
    AggregateState,
    Connection,
    CycleError,
    center_of_mass,
    normalize_state,
    total_angular_momentum,
    total_energy,
    total_linear_momentum,
)
from aggdyn.components import ConnectionPoint, Flywheel, FlywheelParams, RigidBody, RigidBodyParams
from aggdyn.environment import Environment, GravityModel, magnetic_torque
from aggdyn.integrator import IntegrationSettings, integrate
from aggdyn.mathcore import quat_conj, quat_mul, quat_to_matrix
from aggdyn.scenario import ScenarioError, bundled_scenario_path, load_scenario, run

from helpers import composite_rigid_body, elastic_single_mode, mixed_chain, random_inertia, random_quat, underdamped

FIXTURES = Path(__file__).parent / "fixtures"


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def attitude_gap(q1, q2):
    rel = quat_mul(quat_conj(q1), q2)
    return 2.0 * float(np.linalg.norm(rel[1:]))


# ---------------------------------------------------------------- 1


def _third_law_runs():
    yield "spacecraft_wheels_panels", load_scenario(bundled_scenario_path("spacecraft_wheels_panels")).build(t_end=0.2)
    yield "spacecraft_controlled", load_scenario(bundled_scenario_path("spacecraft_controlled")).build(t_end=5.0)
    for name in ("forest", "torque_free"):
        yield name, load_scenario(FIXTURES / f"{name}.json").build(t_end=0.5)


@criterion(1, "Newton's third law holds exactly at every solved step")
def test_newton_third_law_every_step(monkeypatch):
    checked = {"solutions": 0}
    original = integrator_module.solve_step

    def checking_solve_step(aggregate, state, forces=None):
        sol = original(aggregate, state, forces)
        assert len(sol.wrenches) == len(aggregate.connections)
        for k, c in enumerate(aggregate.connections):
            on_i = sol.wrench_on(c.i, k, aggregate).as_array()
            on_j = sol.wrench_on(c.j, k, aggregate).as_array()
            assert np.array_equal(on_j, -on_i)
        checked["solutions"] += 1
        return sol

    monkeypatch.setattr(integrator_module, "solve_step", checking_solve_step)
    for name, sc in _third_law_runs():
        integrate(sc.aggregate, sc.initial_state, sc.settings, sc.environment)
    assert checked["solutions"] > 1000


# ---------------------------------------------------------------- 2


@criterion(2, "acceleration compatibility <= 1e-8 over 10 s of the wheels-and-panels spacecraft")
def test_wheels_panels_compatibility():
    sc = load_scenario(bundled_scenario_path("spacecraft_wheels_panels")).build(step=1e-3, t_end=10.0)
    traj = integrate(sc.aggregate, sc.initial_state, sc.settings, sc.environment)
    assert traj.accepted_steps == 10_000
    assert traj.max_compatibility_residual <= 1e-8


# ---------------------------------------------------------------- 3


@criterion(3, "two joined rigid bodies match the combined rigid body to 1e-6 over 10 s")
def test_composite_body_oracle():
    rng = np.random.default_rng(31)
    m1, m2 = 3.0, 1.5
    I1, I2 = random_inertia(rng), random_inertia(rng, 0.5)
    port1 = ConnectionPoint("j", [0.4, -0.1, 0.2], random_quat(rng))
    port2 = ConnectionPoint("j", [-0.3, 0.2, 0.05], random_quat(rng))
    b1 = RigidBody("b1", RigidBodyParams(m1, I1, [port1]))
    b2 = RigidBody("b2", RigidBodyParams(m2, I2, [port2]))
    pair = Aggregate([b1, b2], [Connection(0, "j", 1, "j")])
    s1 = b1.make_state([1.0, 2.0, -0.5], random_quat(rng), [0.2, -0.1, 0.3], [0.4, -0.6, 0.9])
    start = normalize_state(pair, AggregateState([s1, b2.make_state()]))

    # independent combined body, expressed in body 1's frame
    R1 = quat_to_matrix(start[0].attitude)
    p1 = start[0].position
    rel_pos = [np.zeros(3), R1.T @ (start[1].position - p1)]
    rel_rot = [np.eye(3), R1.T @ quat_to_matrix(start[1].attitude)]
    m, c_body, I = composite_rigid_body([m1, m2], rel_pos, rel_rot, [I1, I2])
    combined = RigidBody("combined", RigidBodyParams(m, I))
    com0 = center_of_mass(pair, start)
    v_com = (m1 * start[0].velocity + m2 * start[1].velocity) / m
    solo = AggregateState([combined.make_state(com0, start[0].attitude, v_com, start[0].body_rate)])
    np.testing.assert_allclose(p1 + R1 @ c_body, com0, atol=1e-14)

    # identical external wrench: a world force through body 1's center and a body-1 torque
    force = np.array([0.3, -0.2, 0.5])
    torque = np.array([0.05, 0.02, -0.04])
    lever = -c_body  # body 1 center relative to the combined center, body-1 frame

    class PairLoads:
        def generalized_forces(self, aggregate, t, state):
            return [b1.external_generalized_force(state[0], force=force, torque=torque), None]

        def observables(self, aggregate, t, state):
            return {}

    class SoloLoads:
        def generalized_forces(self, aggregate, t, state):
            R = quat_to_matrix(state[0].attitude)
            return [combined.external_generalized_force(state[0], force=force, torque=torque + np.cross(lever, R.T @ force))]

        def observables(self, aggregate, t, state):
            return {}

    cfg = IntegrationSettings(step=1e-3, t_end=10.0, output_stride=100)
    a = integrate(pair, start, cfg, PairLoads())
    b = integrate(Aggregate([combined]), solo, cfg, SoloLoads())
    assert len(a) == len(b) == 101
    worst_com = max(float(np.max(np.abs(center_of_mass(pair, x.state) - y.state[0].position))) for x, y in zip(a, b))
    worst_att = max(attitude_gap(x.state[0].attitude, y.state[0].attitude) for x, y in zip(a, b))
    assert worst_com <= 1e-6
    assert worst_att <= 1e-6


# ---------------------------------------------------------------- 4


def _relative_drift(values):
    v0 = values[0]
    scale = max(float(np.linalg.norm(v0)), 1e-300)
    return max(float(np.linalg.norm(v - v0)) for v in values) / scale


def _conservation(aggregate, state, energy):
    traj = integrate(aggregate, state, IntegrationSettings(step=1e-3, t_end=10.0, output_stride=100))
    assert traj.accepted_steps == 10_000
    states = [s.state for s in traj]
    assert _relative_drift([total_linear_momentum(aggregate, s) for s in states]) <= 1e-6
    assert _relative_drift([total_angular_momentum(aggregate, s) for s in states]) <= 1e-6
    if energy:
        assert _relative_drift([np.array([total_energy(aggregate, s)]) for s in states]) <= 1e-6


@criterion(4, "torque-free and force-free aggregates conserve momentum and energy to 1e-6 over 1e4 steps")
def test_conservation_single_rigid_body():
    rng = np.random.default_rng(41)
    b = RigidBody("b", RigidBodyParams(2.0, random_inertia(rng)))
    s = b.make_state([0.5, -0.2, 0.1], random_quat(rng), [0.3, 0.1, -0.2], [0.9, -1.4, 0.6])
    _conservation(Aggregate([b]), AggregateState([s]), energy=True)


@criterion(4, "torque-free and force-free aggregates conserve momentum and energy to 1e-6 over 1e4 steps")
def test_conservation_rigid_chain():
    rng = np.random.default_rng(42)
    bodies = [
        RigidBody(f"b{k}", RigidBodyParams(1.0 + k, random_inertia(rng), [ConnectionPoint("a", rng.normal(size=3) * 0.3, random_quat(rng)), ConnectionPoint("b", rng.normal(size=3) * 0.3)]))
        for k in range(3)
    ]
    agg = Aggregate(bodies, [Connection(0, "a", 1, "b"), Connection(1, "a", 2, "b")])
    s0 = bodies[0].make_state([0, 0, 0], random_quat(rng), [0.2, 0.1, 0.0], [0.5, -0.3, 0.8])
    state = normalize_state(agg, AggregateState([s0] + [b.make_state() for b in bodies[1:]]))
    _conservation(agg, state, energy=True)


@criterion(4, "torque-free and force-free aggregates conserve momentum and energy to 1e-6 over 1e4 steps")
def test_conservation_mixed_aggregate():
    agg, state = mixed_chain(np.random.default_rng(43), damping=0.05, motor=0.2)
    _conservation(agg, state, energy=False)


# ---------------------------------------------------------------- 5


def _mode_final(damping, t_end):
    e = elastic_single_mode(1.0, damping, 4.0)
    traj = integrate(Aggregate([e]), AggregateState([e.make_state(extra=[1.0])]), IntegrationSettings(step=1e-3, t_end=t_end))
    return traj


@criterion(5, "single mode matches cos 2t and the underdamped closed form to 1e-6")
def test_undamped_mode():
    traj = _mode_final(0.0, math.pi)
    assert abs(traj.final.state[0].q[7] - math.cos(2 * math.pi)) <= 1e-6


@criterion(5, "single mode matches cos 2t and the underdamped closed form to 1e-6")
def test_damped_mode():
    traj = _mode_final(0.4, 5.0)
    worst = max(abs(s.state[0].q[7] - underdamped(s.time, 1.0, 0.4, 4.0)) for s in traj)
    assert worst <= 1e-6


# ---------------------------------------------------------------- 6


def _spin_axis_flywheel(Jb, Jw, rate=0.0, wheel_rate=0.0, motor=0.0):
    fw = Flywheel("f", FlywheelParams(RigidBodyParams(1.0, [1.5, 1.5, Jb]), Jw, [0, 0, 1], motor_torque=motor))
    return fw, fw.make_state(body_rate=[0, 0, rate], extra_rates=[wheel_rate])


@criterion(6, "flywheel momentum balance to 1e-10 and spin momentum conserved to 1e-8")
def test_flywheel_accelerations():
    Jb, Jw, tau = 2.0, 1.0, 1.0
    fw, s = _spin_axis_flywheel(Jb, Jw)
    acc = integrator_module.derivative(Aggregate([fw]), AggregateState([s]), Environment(motor_inputs={0: lambda t: tau}))[0].qdot
    assert abs(acc[5] - (-tau / Jb)) <= 1e-10
    assert abs(acc[6] - tau * (1 / Jw + 1 / Jb)) <= 1e-10


@criterion(6, "flywheel momentum balance to 1e-10 and spin momentum conserved to 1e-8")
def test_flywheel_spin_momentum():
    Jb, Jw = 2.0, 1.0
    fw, s = _spin_axis_flywheel(Jb, Jw, rate=0.3, wheel_rate=5.0)
    env = Environment(motor_inputs={0: math.sin})
    traj = integrate(Aggregate([fw]), AggregateState([s]), IntegrationSettings(step=1e-2, t_end=10.0), env)
    assert traj.accepted_steps == 1000

    def spin_momentum(cs):
        w, rel = cs.qdot[5], cs.qdot[6]
        return Jb * w + Jw * (w + rel)

    L0 = spin_momentum(traj[0].state[0])
    worst = max(abs(spin_momentum(x.state[0]) - L0) for x in traj)
    # the wheel really did spin up and down
    assert max(abs(x.state[0].qdot[6] - 5.0) for x in traj) > 0.5
    assert worst <= 1e-8 * abs(L0)


# ---------------------------------------------------------------- 7


@criterion(7, "RK4 error ratio in [12, 20] when the step halves")
def test_rk4_order():
    def err(h):
        e = elastic_single_mode(1.0, 0.0, 4.0)
        traj = integrate(Aggregate([e]), AggregateState([e.make_state(extra=[1.0])]), IntegrationSettings(step=h, t_end=2.0))
        return abs(traj.final.state[0].q[7] - math.cos(4.0))

    ratio = err(0.04) / err(0.02)
    assert 12.0 <= ratio <= 20.0


# ---------------------------------------------------------------- 8


@criterion(8, "magnetic torque orthogonal to the dipole; circular orbit closes to 1e-6")
def test_magnetic_torque_orthogonality():
    rng = np.random.default_rng(81)
    worst = 0.0
    for _ in range(10_000):
        d, B, q = rng.normal(size=3), rng.normal(size=3), random_quat(rng)
        worst = max(worst, abs(float(np.dot(d, magnetic_torque(d, q, B)))))
    assert worst <= 1e-12


@criterion(8, "magnetic torque orthogonal to the dipole; circular orbit closes to 1e-6")
def test_circular_orbit_closure():
    b = RigidBody("sat", RigidBodyParams(1.0, [1, 1, 1]))
    start = AggregateState([b.make_state([1, 0, 0], velocity=[0, 1, 0])])
    traj = integrate(Aggregate([b]), start, IntegrationSettings(step=1e-3, t_end=2 * math.pi), Environment(gravity=GravityModel(1.0)))
    assert float(np.max(np.abs(traj.final.state[0].position - [1, 0, 0]))) <= 1e-6


# ---------------------------------------------------------------- 9


@criterion(9, "closed-loop spacecraft: pointing error at 500 s below its initial value, residual < 1e-8")
def test_closed_loop_spacecraft():
    report = run(bundled_scenario_path("spacecraft_controlled"))
    assert report.exit_status == 0, report.message
    traj = report.trajectory
    assert traj.final.time == pytest.approx(500.0)
    first = traj[0].observables["local_vertical_error"]
    last = traj.final.observables["local_vertical_error"]
    assert last < first
    assert report.final_constraint_residual < 1e-8


# ---------------------------------------------------------------- 10


def _balls(n):
    return [RigidBody(f"b{k}", RigidBodyParams(1.0, [1, 1, 1], [ConnectionPoint("a"), ConnectionPoint("b")])) for k in range(n)]


@criterion(10, "cycles rejected with the cycle identified; forests accepted")
def test_cycle_rejected():
    with pytest.raises(CycleError) as info:
        Aggregate(_balls(4), [Connection(0, "a", 1, "a"), Connection(1, "b", 2, "a"), Connection(2, "b", 3, "a"), Connection(3, "b", 1, "b")])
    assert sorted(info.value.cycle) == [1, 2, 3]
    with pytest.raises(ScenarioError) as info:
        load_scenario(FIXTURES / "cycle.json")
    assert sorted(info.value.cycle) == [0, 1, 2]


@criterion(10, "cycles rejected with the cycle identified; forests accepted")
def test_forest_accepted():
    agg = Aggregate(_balls(5), [Connection(0, "a", 1, "a"), Connection(2, "a", 3, "a")])
    assert len(agg.trees()) == 3
    assert len(load_scenario(FIXTURES / "forest.json").build().aggregate.trees()) == 2
