"""Explicit Runge-Kutta time stepping of an aggregate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import Aggregate, AggregateState, StepSolution, normalize_state, solve_step
from .components import ComponentState
from .mathcore import Wrench

METHODS = ("rk4", "rk45")


class IntegrationError(RuntimeError):
    pass


@dataclass
class IntegrationSettings:
    method: str = "rk4"
    step: float = 1e-3
    t_end: float = 1.0
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    output_stride: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if not self.t_end >= 0.0:
            raise ValueError("t_end must be non-negative")
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ValueError("output_stride must be a positive integer")
        self.output_stride = int(self.output_stride)


@dataclass(eq=False)
class TrajectorySample:
    time: float
    state: AggregateState
    wrenches: list[Wrench]
    observables: dict[str, float] = field(default_factory=dict)


@dataclass(eq=False)
class Trajectory:
    samples: list[TrajectorySample]
    accepted_steps: int = 0
    rejected_steps: int = 0
    max_compatibility_residual: float = 0.0
    max_system_residual: float = 0.0

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, k):
        return self.samples[k]

    @property
    def final(self) -> TrajectorySample:
        return self.samples[-1]


class _Layout:
    """Flat ``[q_1, qdot_1, q_2, qdot_2, ...]`` packing of an aggregate state."""

    def __init__(self, aggregate: Aggregate):
        self.aggregate = aggregate
        self.blocks = []
        off = 0
        for c in aggregate.components:
            self.blocks.append((off, off + c.nq, off + c.nq + c.dof_count))
            off += c.nq + c.dof_count
        self.size = off

    def pack(self, state: AggregateState) -> np.ndarray:
        y = np.empty(self.size)
        for (a, b, e), s in zip(self.blocks, state.states):
            y[a:b] = s.q
            y[b:e] = s.qdot
        return y

    def unpack(self, y: np.ndarray, t: float) -> AggregateState:
        return AggregateState([ComponentState(y[a:b].copy(), y[b:e].copy()) for a, b, e in self.blocks], t)


def _forces(environment, aggregate, state):
    if environment is None:
        return None
    return environment.generalized_forces(aggregate, state.time, state)


def _derivative(aggregate, layout, state, environment) -> tuple[np.ndarray, StepSolution]:
    sol = solve_step(aggregate, state, _forces(environment, aggregate, state))
    dy = np.empty(layout.size)
    for (a, b, e), comp, s, acc in zip(layout.blocks, aggregate.components, state.states, sol.accelerations):
        dy[a:b] = comp.coordinate_rates(s)
        dy[b:e] = acc
    return dy, sol


def derivative(aggregate: Aggregate, state: AggregateState, environment=None) -> list[ComponentState]:
    """Time derivative of every component state.

    Each entry's ``q`` holds coordinate rates (quaternion rate included) and
    ``qdot`` holds generalized accelerations.
    """
    layout = _Layout(aggregate)
    dy, _ = _derivative(aggregate, layout, state, environment)
    return layout.unpack(dy, state.time).states


# Dormand-Prince 5(4)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4

SAFETY = 0.9
MIN_RATIO = 0.2
MAX_RATIO = 5.0


class _Stepper:
    def __init__(self, aggregate, environment):
        self.aggregate = aggregate
        self.environment = environment
        self.layout = _Layout(aggregate)
        self.max_compat = 0.0
        self.max_system = 0.0

    def f(self, t, y):
        state = self.layout.unpack(y, t)
        dy, sol = _derivative(self.aggregate, self.layout, state, self.environment)
        self.max_compat = max(self.max_compat, sol.compatibility_residual)
        self.max_system = max(self.max_system, sol.system_residual)
        return dy

    def rk4(self, t, y, h):
        k1 = self.f(t, y)
        k2 = self.f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = self.f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = self.f(t + h, y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def dopri(self, t, y, h):
        ks = []
        for c, row in zip(_DP_C, _DP_A):
            yi = y.copy()
            for a, k in zip(row, ks):
                if a:
                    yi += (h * a) * k
            ks.append(self.f(t + c * h, yi))
        K = np.array(ks)
        return y + h * (_DP_B5 @ K), h * (_DP_E @ K)

    def normalize(self, y, t):
        state = normalize_state(self.aggregate, self.layout.unpack(y, t))
        return self.layout.pack(state), state


def _sample(aggregate, state, environment) -> TrajectorySample:
    sol = solve_step(aggregate, state, _forces(environment, aggregate, state))
    obs = {} if environment is None else environment.observables(aggregate, state.time, state)
    return TrajectorySample(state.time, state, sol.wrenches, obs)


def integrate(
    aggregate: Aggregate,
    initial: AggregateState,
    settings: IntegrationSettings,
    environment=None,
) -> Trajectory:
    """Advance ``initial`` to ``settings.t_end``.

    ``environment`` (optional) provides ``generalized_forces(aggregate, t,
    state)`` and ``observables(aggregate, t, state)``. The state is
    normalized before the first step and after every accepted step.

    Raises:
        IntegrationError: adaptive step size underflow.
        SingularSystemError: the coupled system became singular.
    """
    stepper = _Stepper(aggregate, environment)
    layout = stepper.layout
    t0 = float(initial.time)
    t_end = t0 + settings.t_end
    y, state = stepper.normalize(layout.pack(initial), t0)
    samples = [_sample(aggregate, state, environment)]
    accepted = rejected = 0
    stride = settings.output_stride

    if settings.method == "rk4":
        n = int(math.ceil(settings.t_end / settings.step * (1.0 - 1e-12))) if settings.t_end > 0 else 0
        h = settings.t_end / n if n else 0.0
        for k in range(1, n + 1):
            t = t0 + (k - 1) * h
            y = stepper.rk4(t, y, h)
            t_new = t_end if k == n else t0 + k * h
            y, state = stepper.normalize(y, t_new)
            accepted += 1
            if accepted % stride == 0:
                samples.append(_sample(aggregate, state, environment))
    else:
        t = t0
        h = settings.step
        while t_end - t > 1e-12 * max(1.0, abs(t_end)):
            h = min(h, t_end - t)
            if h < 1e-12 * max(1.0, abs(t)):
                raise IntegrationError(f"step size underflow at t={t}")
            y_new, err = stepper.dopri(t, y, h)
            scale = settings.abs_tol + settings.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            e = float(np.max(np.abs(err) / scale)) if err.size else 0.0
            if not math.isfinite(e):
                ratio = MIN_RATIO
            elif e == 0.0:
                ratio = MAX_RATIO
            else:
                ratio = min(MAX_RATIO, max(MIN_RATIO, SAFETY * e ** -0.2))
            if e <= 1.0:
                t = t_end if t_end - (t + h) <= 1e-12 * max(1.0, abs(t_end)) else t + h
                y, state = stepper.normalize(y_new, t)
                accepted += 1
                if accepted % stride == 0:
                    samples.append(_sample(aggregate, state, environment))
            else:
                rejected += 1
            h *= ratio

    return Trajectory(samples, accepted, rejected, stepper.max_compat, stepper.max_system)
