"""Declarative scenario files and trajectory output.

A scenario is a JSON document (``format_version`` 1) describing components,
connections, environment, control wiring, initial state, integration
settings and output selection. See ``docs/scenario-format.md``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time as _time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .assembly import (
    Aggregate,
    AggregateState,
    Connection,
    SingularSystemError,
    TopologyError,
    constraint_violation,
    normalize_state,
    solve_step,
)
from .components import (
    ConnectionPoint,
    ElasticBodyParams,
    ElasticModeParams,
    FlywheelParams,
    RigidBodyParams,
    make_component,
)
from .environment import (
    ControlLawParams,
    Controller,
    Environment,
    GravityModel,
    MagneticDipoleField,
    SingularityError,
    SpacecraftMagnetics,
)
from .integrator import IntegrationError, IntegrationSettings, Trajectory, integrate
from .mathcore import SingularMatrixError, rotation_angle_between

FORMAT_VERSION = 1
COMPONENT_TYPES = ("rigid_body", "flywheel", "elastic_body")
OBSERVABLES = ("local_vertical_error", "motor_torque")
DEFAULT_MAX_INITIAL_CORRECTION = 1e-3

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class ScenarioError(ValueError):
    """Invalid scenario; ``where`` names the offending field or file position."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class ScenarioWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# document model

Vec = tuple[float, float, float]
Quat = tuple[float, float, float, float]


@dataclass(frozen=True)
class PortSpec:
    id: str
    position: Vec = (0.0, 0.0, 0.0)
    orientation: Quat = (1.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ModeSpec:
    modal_mass: float
    damping: float
    stiffness: float
    participation: tuple[tuple[str, tuple[float, ...]], ...] = ()


@dataclass(frozen=True)
class ComponentSpec:
    id: str
    type: str
    mass: float
    inertia: tuple[Vec, Vec, Vec]
    connections: tuple[PortSpec, ...] = ()
    wheel_inertia: Optional[float] = None
    spin_axis: Optional[Vec] = None
    initial_wheel_rate: float = 0.0
    motor_torque: Any = 0.0  # number or tuple of sorted (key, value) pairs
    modes: tuple[ModeSpec, ...] = ()


@dataclass(frozen=True)
class ConnectionSpec:
    name: str
    a: str
    port_a: str
    b: str
    port_b: str


@dataclass(frozen=True)
class InitialSpec:
    component: str
    position: Optional[Vec] = None
    attitude: Optional[Quat] = None
    velocity: Optional[Vec] = None
    angular_velocity: Optional[Vec] = None
    modal: Optional[tuple[float, ...]] = None
    modal_rates: Optional[tuple[float, ...]] = None
    wheel_angle: Optional[float] = None
    wheel_rate: Optional[float] = None

    @property
    def places_body(self) -> bool:
        return self.position is not None or self.attitude is not None


@dataclass(frozen=True)
class EnvironmentSpec:
    gravity_mu: Optional[float] = None
    gravity_center: Vec = (0.0, 0.0, 0.0)
    field_moment: Optional[Vec] = None
    field_center: Vec = (0.0, 0.0, 0.0)
    magnetics: tuple[tuple[str, Vec], ...] = ()


@dataclass(frozen=True)
class ControlSpec:
    sensor: str
    actuator: str
    kp: float
    kd: float
    saturation: float
    boresight: Vec = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class OutputSpec:
    wrenches: bool = True
    observables: tuple[str, ...] = ()


@dataclass(eq=False)
class Scenario:
    """Runtime objects built from a document."""

    aggregate: Aggregate
    initial_state: AggregateState
    environment: Environment
    settings: IntegrationSettings
    output: OutputSpec
    initial_correction: float = 0.0


@dataclass(frozen=True)
class ScenarioDocument:
    name: str
    components: tuple[ComponentSpec, ...]
    connections: tuple[ConnectionSpec, ...]
    environment: EnvironmentSpec
    control: Optional[ControlSpec]
    initial_state: tuple[InitialSpec, ...]
    integration: tuple[tuple[str, Any], ...]
    output: OutputSpec
    max_initial_correction: float = DEFAULT_MAX_INITIAL_CORRECTION
    format_version: int = FORMAT_VERSION

    def settings(self, **overrides) -> IntegrationSettings:
        values = dict(self.integration)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return IntegrationSettings(**values)

    def build(self, **overrides) -> Scenario:
        return _build(self, **overrides)

    def to_dict(self) -> dict:
        return _document_to_dict(self)


# --------------------------------------------------------------------------
# parsing


def _where(path, key):
    return f"{path}.{key}" if path else str(key)


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ScenarioError(f"missing required field {key!r}", path)
    return d[key]


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", where)
    v = float(value)
    if not math.isfinite(v):
        raise ScenarioError("value must be finite", where)
    return v


def _vec(value, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ScenarioError(f"expected a list of {n} numbers", where)
    return tuple(_num(v, f"{where}[{k}]") for k, v in enumerate(value))


def _dict(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError("expected an object", where)
    return value


def _check_keys(d: dict, allowed, where: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown field(s) {sorted(unknown)}", where)


def _str(value, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise ScenarioError("expected a non-empty string", where)
    return value


def _inertia(value, where: str):
    if isinstance(value, (list, tuple)) and len(value) == 3 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        d = _vec(value, 3, where)
        return ((d[0], 0.0, 0.0), (0.0, d[1], 0.0), (0.0, 0.0, d[2]))
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return tuple(_vec(row, 3, f"{where}[{k}]") for k, row in enumerate(value))
    raise ScenarioError("inertia must be 3 principal moments or a 3x3 matrix", where)


def _motor(value, where: str):
    if isinstance(value, dict):
        _check_keys(value, ("amplitude", "angular_frequency", "phase", "offset"), where)
        return tuple(sorted((k, _num(v, _where(where, k))) for k, v in value.items()))
    return _num(value, where)


def _parse_component(d, where: str) -> ComponentSpec:
    d = _dict(d, where)
    ctype = _str(_req(d, "type", where), _where(where, "type"))
    if ctype not in COMPONENT_TYPES:
        raise ScenarioError(f"unknown component type {ctype!r}; expected one of {COMPONENT_TYPES}", _where(where, "type"))
    common = ("id", "type", "mass", "inertia", "connections")
    extra = {"rigid_body": (), "flywheel": ("wheel_inertia", "spin_axis", "initial_wheel_rate", "motor_torque"), "elastic_body": ("modes",)}
    _check_keys(d, common + extra[ctype], where)
    ports = []
    for k, p in enumerate(d.get("connections", [])):
        pw = f"{where}.connections[{k}]"
        p = _dict(p, pw)
        _check_keys(p, ("id", "position", "orientation"), pw)
        ports.append(
            PortSpec(
                _str(_req(p, "id", pw), _where(pw, "id")),
                _vec(p.get("position", [0, 0, 0]), 3, _where(pw, "position")),
                _vec(p.get("orientation", [1, 0, 0, 0]), 4, _where(pw, "orientation")),
            )
        )
    kwargs = dict(
        id=_str(_req(d, "id", where), _where(where, "id")),
        type=ctype,
        mass=_num(_req(d, "mass", where), _where(where, "mass")),
        inertia=_inertia(_req(d, "inertia", where), _where(where, "inertia")),
        connections=tuple(ports),
    )
    if ctype == "flywheel":
        kwargs["wheel_inertia"] = _num(_req(d, "wheel_inertia", where), _where(where, "wheel_inertia"))
        kwargs["spin_axis"] = _vec(_req(d, "spin_axis", where), 3, _where(where, "spin_axis"))
        kwargs["initial_wheel_rate"] = _num(d.get("initial_wheel_rate", 0.0), _where(where, "initial_wheel_rate"))
        kwargs["motor_torque"] = _motor(d.get("motor_torque", 0.0), _where(where, "motor_torque"))
    if ctype == "elastic_body":
        modes = []
        for k, m in enumerate(d.get("modes", [])):
            mw = f"{where}.modes[{k}]"
            m = _dict(m, mw)
            _check_keys(m, ("modal_mass", "damping", "stiffness", "participation"), mw)
            part = _dict(m.get("participation", {}), _where(mw, "participation"))
            modes.append(
                ModeSpec(
                    _num(_req(m, "modal_mass", mw), _where(mw, "modal_mass")),
                    _num(m.get("damping", 0.0), _where(mw, "damping")),
                    _num(_req(m, "stiffness", mw), _where(mw, "stiffness")),
                    tuple(sorted((pid, _vec(col, 6, f"{mw}.participation.{pid}")) for pid, col in part.items())),
                )
            )
        kwargs["modes"] = tuple(modes)
    return ComponentSpec(**kwargs)


def _parse_initial(cid: str, d, where: str) -> InitialSpec:
    d = _dict(d, where)
    keys = ("position", "attitude", "velocity", "angular_velocity", "modal", "modal_rates", "wheel_angle", "wheel_rate")
    _check_keys(d, keys, where)
    out = {"component": cid}
    for key, n in (("position", 3), ("attitude", 4), ("velocity", 3), ("angular_velocity", 3)):
        if key in d:
            out[key] = _vec(d[key], n, _where(where, key))
    for key in ("modal", "modal_rates"):
        if key in d:
            v = d[key]
            if not isinstance(v, list):
                raise ScenarioError("expected a list of numbers", _where(where, key))
            out[key] = tuple(_num(x, f"{where}.{key}[{k}]") for k, x in enumerate(v))
    for key in ("wheel_angle", "wheel_rate"):
        if key in d:
            out[key] = _num(d[key], _where(where, key))
    return InitialSpec(**out)


def parse_document(data: dict) -> ScenarioDocument:
    """Validate a decoded JSON object into a document (structure only)."""
    data = _dict(data, "")
    _check_keys(
        data,
        ("format_version", "name", "description", "components", "connections", "environment",
         "control", "initial_state", "integration", "output", "validation"),
        "",
    )
    version = _req(data, "format_version", "")
    if version != FORMAT_VERSION:
        raise ScenarioError(f"unsupported format_version {version!r}; expected {FORMAT_VERSION}", "format_version")
    comps_raw = _req(data, "components", "")
    if not isinstance(comps_raw, list):
        raise ScenarioError("expected a list", "components")
    if not comps_raw:
        raise ScenarioError("empty aggregate: no components", "components")
    components = tuple(_parse_component(c, f"components[{k}]") for k, c in enumerate(comps_raw))
    ids = [c.id for c in components]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise ScenarioError(f"duplicate component ids {sorted(dup)}", "components")

    conns = []
    for k, c in enumerate(data.get("connections", [])):
        w = f"connections[{k}]"
        c = _dict(c, w)
        _check_keys(c, ("name", "a", "port_a", "b", "port_b"), w)
        conns.append(
            ConnectionSpec(
                str(c.get("name", f"C{k + 1}")),
                _str(_req(c, "a", w), _where(w, "a")),
                _str(_req(c, "port_a", w), _where(w, "port_a")),
                _str(_req(c, "b", w), _where(w, "b")),
                _str(_req(c, "port_b", w), _where(w, "port_b")),
            )
        )

    env = _dict(data.get("environment", {}), "environment")
    _check_keys(env, ("gravity", "magnetic_field", "magnetics"), "environment")
    env_kwargs = {}
    if "gravity" in env:
        g = _dict(env["gravity"], "environment.gravity")
        _check_keys(g, ("mu", "center"), "environment.gravity")
        env_kwargs["gravity_mu"] = _num(_req(g, "mu", "environment.gravity"), "environment.gravity.mu")
        env_kwargs["gravity_center"] = _vec(g.get("center", [0, 0, 0]), 3, "environment.gravity.center")
    if "magnetic_field" in env:
        f = _dict(env["magnetic_field"], "environment.magnetic_field")
        _check_keys(f, ("moment", "center"), "environment.magnetic_field")
        env_kwargs["field_moment"] = _vec(_req(f, "moment", "environment.magnetic_field"), 3, "environment.magnetic_field.moment")
        env_kwargs["field_center"] = _vec(f.get("center", [0, 0, 0]), 3, "environment.magnetic_field.center")
    mags = []
    for k, m in enumerate(env.get("magnetics", [])):
        w = f"environment.magnetics[{k}]"
        m = _dict(m, w)
        _check_keys(m, ("component", "dipole"), w)
        mags.append((_str(_req(m, "component", w), _where(w, "component")), _vec(_req(m, "dipole", w), 3, _where(w, "dipole"))))
    env_kwargs["magnetics"] = tuple(mags)

    control = None
    if data.get("control") is not None:
        c = _dict(data["control"], "control")
        _check_keys(c, ("sensor", "actuator", "kp", "kd", "saturation", "boresight"), "control")
        control = ControlSpec(
            _str(_req(c, "sensor", "control"), "control.sensor"),
            _str(_req(c, "actuator", "control"), "control.actuator"),
            _num(_req(c, "kp", "control"), "control.kp"),
            _num(_req(c, "kd", "control"), "control.kd"),
            _num(_req(c, "saturation", "control"), "control.saturation"),
            _vec(c.get("boresight", [0, 0, 1]), 3, "control.boresight"),
        )

    init_raw = _dict(data.get("initial_state", {}), "initial_state")
    initial = tuple(_parse_initial(cid, v, f"initial_state.{cid}") for cid, v in sorted(init_raw.items()))

    integ = _dict(data.get("integration", {}), "integration")
    _check_keys(integ, ("method", "step", "t_end", "abs_tol", "rel_tol", "output_stride"), "integration")
    for key in ("step", "t_end", "abs_tol", "rel_tol"):
        if key in integ:
            _num(integ[key], f"integration.{key}")
    try:
        IntegrationSettings(**integ)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc), "integration") from None
    integration = tuple(sorted(integ.items()))

    out = _dict(data.get("output", {}), "output")
    _check_keys(out, ("wrenches", "observables"), "output")
    obs = out.get("observables", [])
    for k, o in enumerate(obs):
        if o not in OBSERVABLES:
            raise ScenarioError(f"unknown observable {o!r}; expected one of {OBSERVABLES}", f"output.observables[{k}]")
    output = OutputSpec(bool(out.get("wrenches", True)), tuple(obs))

    val = _dict(data.get("validation", {}), "validation")
    _check_keys(val, ("max_initial_correction",), "validation")
    max_corr = _num(val.get("max_initial_correction", DEFAULT_MAX_INITIAL_CORRECTION), "validation.max_initial_correction")

    return ScenarioDocument(
        name=str(data.get("name", "")),
        components=components,
        connections=tuple(conns),
        environment=EnvironmentSpec(**env_kwargs),
        control=control,
        initial_state=initial,
        integration=integration,
        output=output,
        max_initial_correction=max_corr,
    )


def _document_to_dict(doc: ScenarioDocument) -> dict:
    comps = []
    for c in doc.components:
        d = {
            "id": c.id,
            "type": c.type,
            "mass": c.mass,
            "inertia": [list(r) for r in c.inertia],
            "connections": [
                {"id": p.id, "position": list(p.position), "orientation": list(p.orientation)} for p in c.connections
            ],
        }
        if c.type == "flywheel":
            d["wheel_inertia"] = c.wheel_inertia
            d["spin_axis"] = list(c.spin_axis)
            d["initial_wheel_rate"] = c.initial_wheel_rate
            d["motor_torque"] = dict(c.motor_torque) if isinstance(c.motor_torque, tuple) else c.motor_torque
        if c.type == "elastic_body":
            d["modes"] = [
                {
                    "modal_mass": m.modal_mass,
                    "damping": m.damping,
                    "stiffness": m.stiffness,
                    "participation": {pid: list(col) for pid, col in m.participation},
                }
                for m in c.modes
            ]
        comps.append(d)
    env: dict = {}
    e = doc.environment
    if e.gravity_mu is not None:
        env["gravity"] = {"mu": e.gravity_mu, "center": list(e.gravity_center)}
    if e.field_moment is not None:
        env["magnetic_field"] = {"moment": list(e.field_moment), "center": list(e.field_center)}
    if e.magnetics:
        env["magnetics"] = [{"component": cid, "dipole": list(d)} for cid, d in e.magnetics]
    initial = {}
    for s in doc.initial_state:
        entry = {}
        for key in ("position", "attitude", "velocity", "angular_velocity", "modal", "modal_rates", "wheel_angle", "wheel_rate"):
            v = getattr(s, key)
            if v is not None:
                entry[key] = list(v) if isinstance(v, tuple) else v
        initial[s.component] = entry
    out = {
        "format_version": doc.format_version,
        "name": doc.name,
        "components": comps,
        "connections": [
            {"name": c.name, "a": c.a, "port_a": c.port_a, "b": c.b, "port_b": c.port_b} for c in doc.connections
        ],
        "environment": env,
        "initial_state": initial,
        "integration": dict(doc.integration),
        "output": {"wrenches": doc.output.wrenches, "observables": list(doc.output.observables)},
        "validation": {"max_initial_correction": doc.max_initial_correction},
    }
    if doc.control is not None:
        c = doc.control
        out["control"] = {
            "sensor": c.sensor,
            "actuator": c.actuator,
            "kp": c.kp,
            "kd": c.kd,
            "saturation": c.saturation,
            "boresight": list(c.boresight),
        }
    return out


def dumps_scenario(doc: ScenarioDocument) -> str:
    return json.dumps(doc.to_dict(), indent=2)


# --------------------------------------------------------------------------
# building runtime objects


def _motor_fn(spec):
    if isinstance(spec, tuple):
        p = dict(spec)
        amp = p.get("amplitude", 0.0)
        omega = p.get("angular_frequency", 0.0)
        phase = p.get("phase", 0.0)
        offset = p.get("offset", 0.0)
        return lambda t: offset + amp * math.sin(omega * t + phase)
    value = float(spec)
    return lambda t: value


def _component_params(c: ComponentSpec):
    ports = [ConnectionPoint(p.id, p.position, p.orientation) for p in c.connections]
    body = RigidBodyParams(c.mass, np.array(c.inertia), ports)
    if c.type == "rigid_body":
        return body
    if c.type == "flywheel":
        return FlywheelParams(body, c.wheel_inertia, c.spin_axis, c.initial_wheel_rate, _motor_fn(c.motor_torque))
    modes = [ElasticModeParams(m.modal_mass, m.damping, m.stiffness, dict(m.participation)) for m in c.modes]
    return ElasticBodyParams(body, modes)


def _build(doc: ScenarioDocument, **overrides) -> Scenario:
    index = {c.id: k for k, c in enumerate(doc.components)}

    def ref(cid, where):
        if cid not in index:
            raise ScenarioError(f"unknown component {cid!r}", where)
        return index[cid]

    components = []
    for k, c in enumerate(doc.components):
        try:
            components.append(make_component(c.id, _component_params(c)))
        except (ValueError, SingularMatrixError) as exc:
            raise ScenarioError(str(exc), f"components[{k}]") from None

    connections = []
    for k, c in enumerate(doc.connections):
        w = f"connections[{k}]"
        i, j = ref(c.a, _where(w, "a")), ref(c.b, _where(w, "b"))
        connections.append(Connection(i, c.port_a, j, c.port_b, c.name))
    try:
        aggregate = Aggregate(components, connections)
    except TopologyError as exc:
        err = ScenarioError(str(exc), "connections")
        err.cycle = getattr(exc, "cycle", None)
        raise err from None

    explicit = set()
    states = [comp.make_state() for comp in components]
    for s in doc.initial_state:
        w = f"initial_state.{s.component}"
        k = ref(s.component, w)
        comp = components[k]
        kw = {}
        if s.position is not None:
            kw["position"] = s.position
        if s.attitude is not None:
            kw["attitude"] = s.attitude
        if s.velocity is not None:
            kw["velocity"] = s.velocity
        if s.angular_velocity is not None:
            kw["body_rate"] = s.angular_velocity
        if comp.kind == "elastic_body":
            if s.modal is not None:
                kw["extra"] = s.modal
            if s.modal_rates is not None:
                kw["extra_rates"] = s.modal_rates
        elif comp.kind == "flywheel":
            if s.wheel_angle is not None:
                kw["extra"] = [s.wheel_angle]
            if s.wheel_rate is not None:
                kw["extra_rates"] = [s.wheel_rate]
        if comp.kind != "elastic_body" and (s.modal is not None or s.modal_rates is not None):
            raise ScenarioError("modal coordinates given for a component without modes", w)
        if comp.kind != "flywheel" and (s.wheel_angle is not None or s.wheel_rate is not None):
            raise ScenarioError("wheel state given for a component that is not a flywheel", w)
        try:
            states[k] = comp.make_state(**kw)
        except ValueError as exc:
            raise ScenarioError(str(exc), w) from None
        if s.places_body:
            explicit.add(k)

    raw = AggregateState(states, 0.0)
    initial = normalize_state(aggregate, raw)
    correction = 0.0
    for k in explicit:
        a, b = raw.states[k], initial.states[k]
        correction = max(
            correction,
            float(np.max(np.abs(a.q[0:3] - b.q[0:3]))),
            rotation_angle_between(a.q[3:7], b.q[3:7]),
            float(np.max(np.abs(a.qdot[0:6] - b.qdot[0:6]))),
        )
    if correction > doc.max_initial_correction:
        warnings.warn(
            f"initial state needed a correction of {correction:.3e} to satisfy connections "
            f"(threshold {doc.max_initial_correction:.1e})",
            ScenarioWarning,
            stacklevel=3,
        )

    e = doc.environment
    env = Environment()
    if e.gravity_mu is not None:
        try:
            env.gravity = GravityModel(e.gravity_mu, e.gravity_center)
        except ValueError as exc:
            raise ScenarioError(str(exc), "environment.gravity") from None
    if e.field_moment is not None:
        try:
            env.magnetic_field = MagneticDipoleField(e.field_moment, e.field_center)
        except ValueError as exc:
            raise ScenarioError(str(exc), "environment.magnetic_field") from None
    for k, (cid, dipole) in enumerate(e.magnetics):
        env.magnetics[ref(cid, f"environment.magnetics[{k}].component")] = SpacecraftMagnetics(dipole)
    if env.magnetics and env.magnetic_field is None:
        raise ScenarioError("spacecraft magnetics given without a magnetic field", "environment.magnetics")
    for k, comp in enumerate(components):
        if comp.kind == "flywheel":
            env.motor_inputs[k] = comp.params.motor_torque_at
    if doc.control is not None:
        c = doc.control
        sensor = ref(c.sensor, "control.sensor")
        actuator = ref(c.actuator, "control.actuator")
        if components[actuator].kind != "flywheel":
            raise ScenarioError(f"actuator {c.actuator!r} is not a flywheel", "control.actuator")
        try:
            params = ControlLawParams(c.kp, c.kd, c.saturation, c.boresight)
        except ValueError as exc:
            raise ScenarioError(str(exc), "control") from None
        env.controller = Controller(params, sensor, actuator)
    missing = [o for o in doc.output.observables if env.controller is None]
    if missing:
        raise ScenarioError(f"observables {missing} need a control section", "output.observables")

    try:
        settings = doc.settings(**overrides)
    except ValueError as exc:
        raise ScenarioError(str(exc), "integration") from None
    return Scenario(aggregate, initial, env, settings, doc.output, correction)


# --------------------------------------------------------------------------
# loading


def loads_scenario(text: str, source: str = "<string>") -> ScenarioDocument:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", f"{source}:{exc.lineno}:{exc.colno}") from None
    doc = parse_document(data)
    doc.build()
    return doc


def load_scenario(path) -> ScenarioDocument:
    """Read, parse and fully validate a scenario file.

    Raises:
        ScenarioError: missing file, bad JSON, bad fields, dangling
            references or a cyclic connection graph.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc.strerror or exc}", str(path)) from None
    return loads_scenario(text, str(path))


def bundled_scenario_path(name: str) -> Path:
    here = Path(__file__).parent / "scenarios"
    p = here / (name if name.endswith(".json") else name + ".json")
    if not p.exists():
        raise FileNotFoundError(p)
    return p


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).parent / "scenarios").glob("*.json"))


# --------------------------------------------------------------------------
# running


@dataclass
class RunReport:
    exit_status: int
    wall_time: float = 0.0
    steps: int = 0
    rejected_steps: int = 0
    final_constraint_residual: float = 0.0
    max_compatibility_residual: float = 0.0
    rows: int = 0
    message: str = ""
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    def summary(self) -> str:
        lines = [
            f"status: {self.exit_status}",
            f"wall time: {self.wall_time:.3f} s",
            f"accepted steps: {self.steps}",
            f"rejected steps: {self.rejected_steps}",
            f"rows written: {self.rows}",
            f"max compatibility residual: {self.max_compatibility_residual:.3e}",
            f"final constraint residual: {self.final_constraint_residual:.3e}",
        ]
        if self.message:
            lines.append(f"message: {self.message}")
        return "\n".join(lines)


def csv_header(scenario: Scenario) -> list[str]:
    agg = scenario.aggregate
    cols = ["time"]
    for comp in agg.components:
        cols += [f"{comp.name}.{label}" for label in comp.state_labels()]
    if scenario.output.wrenches:
        for c in agg.connections:
            cols += [f"{c.name}.{x}" for x in ("Fx", "Fy", "Fz", "Mx", "My", "Mz")]
    cols += list(scenario.output.observables)
    return cols


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(scenario: Scenario, trajectory: Trajectory, stream) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(csv_header(scenario))
    agg = scenario.aggregate
    for sample in trajectory:
        row = [_fmt(sample.time)]
        for comp, s in zip(agg.components, sample.state.states):
            row += [_fmt(v) for v in comp.state_row(s)]
        if scenario.output.wrenches:
            for w in sample.wrenches:
                row += [_fmt(v) for v in w.as_array()]
        row += [_fmt(sample.observables[o]) for o in scenario.output.observables]
        writer.writerow(row)
    return len(trajectory)


def final_constraint_residual(scenario: Scenario, trajectory: Trajectory) -> float:
    agg = scenario.aggregate
    state = trajectory.final.state
    viol = constraint_violation(agg, state)
    sol = solve_step(agg, state, scenario.environment.generalized_forces(agg, state.time, state))
    return max(max(viol.values(), default=0.0), sol.compatibility_residual)


def run(scenario, out=None, **overrides) -> RunReport:
    """Integrate a scenario and write its trajectory as CSV.

    Args:
        scenario: a :class:`ScenarioDocument`, a built :class:`Scenario` or a path.
        out: output path, text stream, or ``None`` to skip writing.
        overrides: ``step``, ``t_end``, ``method`` and other
            integration settings.
    """
    start = _time.perf_counter()
    try:
        if isinstance(scenario, (str, Path)):
            scenario = load_scenario(scenario)
        if isinstance(scenario, ScenarioDocument):
            scenario = scenario.build(**overrides)
        elif overrides:
            raise TypeError("overrides need a ScenarioDocument or path")
    except ScenarioError as exc:
        return RunReport(EXIT_VALIDATION, _time.perf_counter() - start, message=str(exc))
    try:
        traj = integrate(scenario.aggregate, scenario.initial_state, scenario.settings, scenario.environment)
        residual = final_constraint_residual(scenario, traj)
    except (SingularSystemError, SingularMatrixError) as exc:
        return RunReport(EXIT_RUNTIME, _time.perf_counter() - start, message=f"singular system: {exc}")
    except (IntegrationError, SingularityError, FloatingPointError) as exc:
        return RunReport(EXIT_RUNTIME, _time.perf_counter() - start, message=str(exc))
    rows = 0
    if out is not None:
        if isinstance(out, (str, Path)):
            buf = io.StringIO()
            rows = write_csv(scenario, traj, buf)
            Path(out).write_text(buf.getvalue())
        else:
            rows = write_csv(scenario, traj, out)
    return RunReport(
        EXIT_OK,
        _time.perf_counter() - start,
        traj.accepted_steps,
        traj.rejected_steps,
        residual,
        traj.max_compatibility_residual,
        rows,
        trajectory=traj,
    )
