"""Live labeling service: durable sessions, event folding, HTTP API."""

from .api import create_app
from .service import (
    LabelEvent,
    LabelingError,
    NotFound,
    ProcedureRecord,
    SessionStore,
    StateConflict,
    ValidationFailure,
    fold_events,
)

__all__ = [
    "LabelEvent",
    "LabelingError",
    "NotFound",
    "ProcedureRecord",
    "SessionStore",
    "StateConflict",
    "ValidationFailure",
    "create_app",
    "fold_events",
]
