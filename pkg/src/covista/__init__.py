"""Session engine for table-centered perspective alignment.

Each user works on a locally rotated replica of the shared objects;
collaborators' virtual hands are counter-rotated so spatial references
stay correct from every seat. The package ships the geometry core, the
authoritative session and its websocket server, a client-side replica,
a deterministic network simulator with scripted bots, and a behavioral
metrics analyzer.
"""

from .harness import analyze, run_scenario
from .replica import ClientReplica
from .scene import load_scene
from .session import Session, SessionConfig

__version__ = "0.1.0"

__all__ = [
    "ClientReplica",
    "Session",
    "SessionConfig",
    "analyze",
    "load_scene",
    "run_scenario",
    "__version__",
]
