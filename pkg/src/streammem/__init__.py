"""Bounded hierarchical memory for infinite dialogue streams.

Utterances stream in, get segmented into semantic blocks, distilled into a
scene/event/fact hierarchy, and held under a hard token budget by
utility-driven eviction; ad-hoc probes are answered from the union of the
short-term buffer, pending distillations, and retrieved tree paths.
"""

from .config import EngineConfig, PluginSettings, UtilityParams
from .engine import Engine, ProbeResult
from .errors import (
    ConfigError,
    EngineBusyError,
    MemoryEngineError,
    NotFoundError,
    PluginError,
    PreconditionError,
    StreamFormatError,
    StructuralError,
)
from .hierarchy import Hierarchy, Level, MemoryNode
from .types import Probe, Utterance

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Engine",
    "EngineBusyError",
    "EngineConfig",
    "Hierarchy",
    "Level",
    "MemoryEngineError",
    "MemoryNode",
    "NotFoundError",
    "PluginError",
    "PluginSettings",
    "Probe",
    "ProbeResult",
    "PreconditionError",
    "StreamFormatError",
    "StructuralError",
    "Utterance",
    "UtilityParams",
    "__version__",
]
