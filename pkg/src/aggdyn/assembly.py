"""Aggregate topology, per-step linear system, and post-step normalization.

Unknowns of the per-step system are the generalized accelerations of every
component followed by one world-frame wrench per connection. For a
connection ``(i, j)`` the unknown ``W`` is the wrench that ``j`` exerts on
``i`` at the connection point; ``i`` receives ``W`` and ``j`` receives
``-W``, so action and reaction share a single unknown.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .components import Component, ComponentState
from .mathcore import SingularMatrixError, Wrench, quat_conj, quat_mul, solve_dense


class TopologyError(ValueError):
    pass


class CycleError(TopologyError):
    def __init__(self, cycle: list[int], names: list[str] | None = None):
        self.cycle = cycle
        label = names if names is not None else cycle
        super().__init__(f"connections form a cycle through components {label}")


class DanglingReferenceError(TopologyError):
    pass


class SingularSystemError(SingularMatrixError):
    pass


@dataclass(frozen=True)
class Connection:
    """Rigid attachment of port ``port_i`` on component ``i`` to ``port_j`` on ``j``."""

    i: int
    port_i: str
    j: int
    port_j: str
    name: str = ""


class Aggregate:
    """Components plus the connection set; immutable after construction."""

    def __init__(self, components: Sequence[Component], connections: Sequence[Connection] = (), check: bool = True):
        self.components = tuple(components)
        self.connections = tuple(
            c if c.name else Connection(c.i, c.port_i, c.j, c.port_j, f"C{k + 1}")
            for k, c in enumerate(connections)
        )
        if check:
            validate_forest(self)
        n = len(self.components)
        self._incident = [[] for _ in range(n)]
        for k, c in enumerate(self.connections):
            if 0 <= c.i < n and 0 <= c.j < n:
                self._incident[c.i].append(k)
                self._incident[c.j].append(k)

    def __len__(self):
        return len(self.components)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.components]

    def index_of(self, name: str) -> int:
        for k, c in enumerate(self.components):
            if c.name == name:
                return k
        raise KeyError(name)

    @property
    def unknown_count(self) -> int:
        return sum(c.dof_count for c in self.components) + 6 * len(self.connections)

    def trees(self) -> list[list[tuple[int, int | None]]]:
        """Breadth-first orderings of each tree as ``(component, via_connection)``.

        Roots are the lowest component index of their tree and carry ``None``.
        """
        seen = [False] * len(self.components)
        out = []
        for root in range(len(self.components)):
            if seen[root]:
                continue
            seen[root] = True
            order = [(root, None)]
            queue = deque([root])
            while queue:
                u = queue.popleft()
                for k in self._incident[u]:
                    c = self.connections[k]
                    v = c.j if c.i == u else c.i
                    if not seen[v]:
                        seen[v] = True
                        order.append((v, k))
                        queue.append(v)
            out.append(order)
        return out

    def initial_state(self, states: Sequence[ComponentState], time: float = 0.0) -> AggregateState:
        return AggregateState([s.copy() for s in states], float(time))


@dataclass(eq=False)
class AggregateState:
    states: list[ComponentState]
    time: float = 0.0

    def copy(self) -> AggregateState:
        return AggregateState([s.copy() for s in self.states], self.time)

    def __getitem__(self, k: int) -> ComponentState:
        return self.states[k]


def validate_forest(aggregate: Aggregate) -> None:
    """Raise unless the connection graph is a forest with resolvable ports."""
    comps = aggregate.components
    n = len(comps)
    seen_pairs = set()
    adj: list[list[int]] = [[] for _ in range(n)]
    parent = list(range(n))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for c in aggregate.connections:
        for idx in (c.i, c.j):
            if not 0 <= idx < n:
                raise DanglingReferenceError(f"connection {c.name or c} references component {idx}")
        if c.i == c.j:
            raise TopologyError(f"connection {c.name} attaches component {comps[c.i].name!r} to itself")
        for idx, port in ((c.i, c.port_i), (c.j, c.port_j)):
            if not comps[idx].has_connection(port):
                raise DanglingReferenceError(f"component {comps[idx].name!r} has no connection point {port!r}")
        key = frozenset([(c.i, c.port_i), (c.j, c.port_j)])
        if key in seen_pairs:
            raise TopologyError(f"connection {c.name} duplicates an earlier connection")
        seen_pairs.add(key)
        ri, rj = find(c.i), find(c.j)
        if ri == rj:
            cycle = _tree_path(adj, c.j, c.i)
            raise CycleError(cycle, [comps[k].name for k in cycle])
        parent[ri] = rj
        adj[c.i].append(c.j)
        adj[c.j].append(c.i)


def _tree_path(adj, start, goal) -> list[int]:
    prev = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            break
        for v in adj[u]:
            if v not in prev:
                prev[v] = u
                queue.append(v)
    path = []
    u = goal
    while u is not None:
        path.append(u)
        u = prev[u]
    return path


# --------------------------------------------------------------------------
# assembly and solve


@dataclass(eq=False)
class AssembledSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    accel_slices: list[slice]
    wrench_slices: list[slice]
    # per connection: (accel_map_i, accel_bias_i, accel_map_j, accel_bias_j)
    port_maps: list = field(default_factory=list)


@dataclass(eq=False)
class StepSolution:
    accelerations: list[np.ndarray]
    wrenches: list[Wrench]
    system_residual: float
    compatibility_residual: float

    def wrench_on(self, component: int, connection: int, aggregate: Aggregate) -> Wrench:
        """Wrench acting on ``component`` through ``connection``."""
        c = aggregate.connections[connection]
        if component == c.i:
            return self.wrenches[connection]
        if component == c.j:
            return -self.wrenches[connection]
        raise ValueError(f"component {component} is not part of connection {connection}")


def _external_term(comp: Component, f) -> np.ndarray:
    if f is None:
        return np.zeros(comp.dof_count)
    f = np.asarray(f, dtype=float)
    if f.shape != (comp.dof_count,):
        raise ValueError(f"external force for {comp.name!r} must have length {comp.dof_count}")
    return comp.inverse_mass_matrix() @ f


def assemble(aggregate: Aggregate, state: AggregateState, external_forces=None) -> AssembledSystem:
    """Build the coupled linear system for accelerations and wrenches.

    ``external_forces`` holds one generalized force per component in force
    units (see :meth:`Component.external_generalized_force`) or ``None``.
    """
    comps = aggregate.components
    if len(state.states) != len(comps):
        raise ValueError(f"state has {len(state.states)} components, aggregate has {len(comps)}")
    if external_forces is None:
        external_forces = [None] * len(comps)
    accel_slices = []
    offset = 0
    for comp, s in zip(comps, state.states):
        comp.check_state(s)
        accel_slices.append(slice(offset, offset + comp.dof_count))
        offset += comp.dof_count
    wrench_slices = []
    for _ in aggregate.connections:
        wrench_slices.append(slice(offset, offset + 6))
        offset += 6
    N = offset
    A = np.zeros((N, N))
    b = np.zeros(N)
    try:
        for k, (comp, s, f) in enumerate(zip(comps, state.states, external_forces)):
            sl = accel_slices[k]
            A[sl, sl] = np.eye(comp.dof_count)
            b[sl] = comp.free_term(s) + _external_term(comp, f)
        port_maps = []
        for k, c in enumerate(aggregate.connections):
            ci, cj = comps[c.i], comps[c.j]
            si, sj = state.states[c.i], state.states[c.j]
            wk = wrench_slices[k]
            Di, Ci = ci.port_maps(c.port_i, si)
            Dj, Cj = cj.port_maps(c.port_j, sj)
            Bi = ci.inverse_mass_matrix() @ Di.T
            Bj = cj.inverse_mass_matrix() @ Dj.T
            A[accel_slices[c.i], wk] = -Bi
            A[accel_slices[c.j], wk] = Bj
            A[wk, accel_slices[c.i]] = Di
            A[wk, accel_slices[c.j]] = -Dj
            b[wk] = Cj - Ci
            port_maps.append((Di, Ci, Dj, Cj))
    except SingularMatrixError as exc:
        raise SingularSystemError(str(exc)) from exc
    return AssembledSystem(A, b, accel_slices, wrench_slices, port_maps)


def solve_step(aggregate: Aggregate, state: AggregateState, external_forces=None) -> StepSolution:
    system = assemble(aggregate, state, external_forces)
    try:
        x = solve_dense(system.matrix, system.rhs)
    except SingularMatrixError as exc:
        raise SingularSystemError(f"aggregate system is singular at t={state.time}: {exc}") from exc
    residual = float(np.max(np.abs(system.matrix @ x - system.rhs))) if x.size else 0.0
    accels = [x[sl].copy() for sl in system.accel_slices]
    wrenches = [Wrench.from_array(x[sl]) for sl in system.wrench_slices]
    compat = 0.0
    for c, (Di, Ci, Dj, Cj) in zip(aggregate.connections, system.port_maps):
        wi = Ci + Di @ accels[c.i]
        wj = Cj + Dj @ accels[c.j]
        compat = max(compat, float(np.max(np.abs(wi - wj))))
    return StepSolution(accels, wrenches, residual, compat)


# --------------------------------------------------------------------------
# normalization


def normalize_state(aggregate: Aggregate, state: AggregateState) -> AggregateState:
    """Make every connection frame pair coincide in pose and velocity.

    Quaternions are renormalized first. The lowest-index component of each
    tree stays put and children are re-placed outward along tree edges.
    """
    comps = aggregate.components
    states = [comp.normalized(s) for comp, s in zip(comps, state.states)]
    for order in aggregate.trees():
        for child, k in order[1:]:
            c = aggregate.connections[k]
            if c.j == child:
                parent, port_p, port_c = c.i, c.port_i, c.port_j
            else:
                parent, port_p, port_c = c.j, c.port_j, c.port_i
            x, Q = comps[parent].connection_pose(port_p, states[parent])
            v, w = comps[parent].connection_velocity(port_p, states[parent])
            states[child] = comps[child].place_connection(port_c, states[child], x, Q, v, w)
    return AggregateState(states, state.time)


def constraint_violation(aggregate: Aggregate, state: AggregateState) -> dict[str, float]:
    """Largest pose and velocity mismatch over all connections."""
    out = {"position": 0.0, "orientation": 0.0, "velocity": 0.0, "angular_velocity": 0.0}
    comps = aggregate.components
    for c in aggregate.connections:
        si, sj = state.states[c.i], state.states[c.j]
        xi, Qi = comps[c.i].connection_pose(c.port_i, si)
        xj, Qj = comps[c.j].connection_pose(c.port_j, sj)
        vi, wi = comps[c.i].connection_velocity(c.port_i, si)
        vj, wj = comps[c.j].connection_velocity(c.port_j, sj)
        rel = quat_mul(quat_conj(Qi), Qj)
        rel = rel / np.linalg.norm(rel)
        out["position"] = max(out["position"], float(np.max(np.abs(xi - xj))))
        out["orientation"] = max(out["orientation"], 2.0 * float(np.linalg.norm(rel[1:])))
        out["velocity"] = max(out["velocity"], float(np.max(np.abs(vi - vj))))
        out["angular_velocity"] = max(out["angular_velocity"], float(np.max(np.abs(wi - wj))))
    return out


# --------------------------------------------------------------------------
# totals


def total_linear_momentum(aggregate: Aggregate, state: AggregateState) -> np.ndarray:
    return sum((c.linear_momentum(s) for c, s in zip(aggregate.components, state.states)), np.zeros(3))


def total_angular_momentum(aggregate: Aggregate, state: AggregateState) -> np.ndarray:
    return sum((c.angular_momentum(s) for c, s in zip(aggregate.components, state.states)), np.zeros(3))


def total_energy(aggregate: Aggregate, state: AggregateState) -> float:
    return sum(
        c.kinetic_energy(s) + c.potential_energy(s) for c, s in zip(aggregate.components, state.states)
    )


def center_of_mass(aggregate: Aggregate, state: AggregateState) -> np.ndarray:
    m = sum(c.mass for c in aggregate.components)
    return sum((c.mass * s.q[0:3] for c, s in zip(aggregate.components, state.states)), np.zeros(3)) / m
