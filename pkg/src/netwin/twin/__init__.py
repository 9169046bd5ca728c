"""Twin store and reconciliation: the continuously synchronized graph of
devices, signal sources, their detects-relationships, and KPI history."""

from netwin.twin.controller import ControllerService, TwinController
from netwin.twin.store import TwinStore
from netwin.twin.types import (
    AuthenticationFailed,
    ChangeSet,
    CorruptSnapshot,
    Credentials,
    GraphView,
    KpiSample,
    SchemaConflict,
    Session,
    StoreCorruption,
    TwinInstance,
    TwinModel,
    TwinRelationship,
    UnknownSeries,
    UnknownTwin,
    VersionMismatch,
)

__all__ = [
    "AuthenticationFailed",
    "ChangeSet",
    "ControllerService",
    "CorruptSnapshot",
    "Credentials",
    "GraphView",
    "KpiSample",
    "SchemaConflict",
    "Session",
    "StoreCorruption",
    "TwinController",
    "TwinInstance",
    "TwinModel",
    "TwinRelationship",
    "TwinStore",
    "UnknownSeries",
    "UnknownTwin",
    "VersionMismatch",
]
