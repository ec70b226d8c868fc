"""Parallel agent-based simulation engine with a uniform-grid environment."""

from .core import (
    Agent,
    AgentRef,
    Behavior,
    EventKind,
    FunctionBehavior,
    ModelError,
    NewAgentEvent,
    Operation,
    OpKind,
    RandomStream,
    Shape,
    Simulation,
    SimulationReport,
)
from .diffusion import DiffusionGrid, DiffusionStep
from .grid import UniformGrid
from .mechanics import MechanicalForces, MechanicsParams

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AgentRef",
    "Behavior",
    "DiffusionGrid",
    "DiffusionStep",
    "EventKind",
    "FunctionBehavior",
    "MechanicalForces",
    "MechanicsParams",
    "ModelError",
    "NewAgentEvent",
    "Operation",
    "OpKind",
    "RandomStream",
    "Shape",
    "Simulation",
    "SimulationReport",
    "UniformGrid",
]
