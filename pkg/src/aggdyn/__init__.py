"""Dynamics of mechanical aggregates assembled from component models."""

from .assembly import (
    Aggregate,
    AggregateState,
    Connection,
    CycleError,
    SingularSystemError,
    TopologyError,
    assemble,
    normalize_state,
    solve_step,
    validate_forest,
)
from .components import (
    ComponentState,
    ConnectionPoint,
    ElasticBody,
    ElasticBodyParams,
    ElasticModeParams,
    Flywheel,
    FlywheelParams,
    RigidBody,
    RigidBodyParams,
)
from .integrator import IntegrationSettings, integrate
from .mathcore import ConnectionAccel, Wrench
from .scenario import load_scenario, run

__all__ = [
    "Aggregate",
    "AggregateState",
    "ComponentState",
    "Connection",
    "ConnectionAccel",
    "ConnectionPoint",
    "CycleError",
    "ElasticBody",
    "ElasticBodyParams",
    "ElasticModeParams",
    "Flywheel",
    "FlywheelParams",
    "IntegrationSettings",
    "RigidBody",
    "RigidBodyParams",
    "SingularSystemError",
    "TopologyError",
    "Wrench",
    "assemble",
    "integrate",
    "load_scenario",
    "normalize_state",
    "run",
    "solve_step",
    "validate_forest",
]
