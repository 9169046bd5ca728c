"""Twin graph domain types and errors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping


class AuthenticationFailed(PermissionError):
    pass


class SchemaConflict(ValueError):
    """Model name exists with an incompatible property schema."""


class UnknownTwin(KeyError):
    pass


class UnknownSeries(KeyError):
    pass


class StoreCorruption(RuntimeError):
    """A store invariant was violated; the store must not be trusted."""


class VersionMismatch(ValueError):
    pass


class CorruptSnapshot(ValueError):
    pass


PROPERTY_TYPES = ("string", "number", "integer", "string_list")

RELATIONSHIP_KIND = "detects"


@dataclass(frozen=True)
class TwinModel:
    model_id: str
    name: str
    schema: tuple[tuple[str, str], ...]  # (property name, semantic type)

    def __post_init__(self) -> None:
        for prop, prop_type in self.schema:
            if prop_type not in PROPERTY_TYPES:
                raise ValueError(f"model {self.name}: unknown property type {prop_type!r}")

    def compatible_with(self, schema: tuple[tuple[str, str], ...]) -> bool:
        return set(self.schema) == set(schema)


@dataclass(frozen=True)
class TwinInstance:
    twin_id: str
    model_id: str
    external_id: str
    properties: Mapping[str, Any]
    last_updated_ms: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "properties", dict(self.properties))


@dataclass(frozen=True)
class TwinRelationship:
    rel_id: str
    source_twin: str  # device twin
    target_twin: str  # signal-source twin
    kind: str
    signal_strength_dbm: float
    last_updated_ms: int


@dataclass(frozen=True)
class Credentials:
    token: str


@dataclass(frozen=True)
class Session:
    session_id: str
    principal: str
    expires_at_s: float


KpiSample = tuple[int, float]


@dataclass(frozen=True)
class ChangeSet:
    """Exact delta of one store mutation; the six id lists are disjoint."""

    added_instances: tuple[str, ...] = ()
    updated_instances: tuple[str, ...] = ()
    removed_instances: tuple[str, ...] = ()
    added_relationships: tuple[str, ...] = ()
    updated_relationships: tuple[str, ...] = ()
    removed_relationships: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for group in (
            (self.added_instances, self.updated_instances, self.removed_instances),
            (self.added_relationships, self.updated_relationships, self.removed_relationships),
        ):
            seen: set[str] = set()
            for bucket in group:
                for entity_id in bucket:
                    if entity_id in seen:
                        raise ValueError(f"changeset lists overlap on {entity_id!r}")
                    seen.add(entity_id)

    @property
    def empty(self) -> bool:
        return not (
            self.added_instances
            or self.updated_instances
            or self.removed_instances
            or self.added_relationships
            or self.updated_relationships
            or self.removed_relationships
        )

    @property
    def graph_empty(self) -> bool:
        """True when instances and relationships are untouched."""
        return self.empty

    def to_doc(self) -> dict[str, Any]:
        return {
            "added_instances": list(self.added_instances),
            "updated_instances": list(self.updated_instances),
            "removed_instances": list(self.removed_instances),
            "added_relationships": list(self.added_relationships),
            "updated_relationships": list(self.updated_relationships),
            "removed_relationships": list(self.removed_relationships),
        }


@dataclass(frozen=True)
class GraphView:
    """Consistent point-in-time projection of instances and relationships."""

    instances: tuple[TwinInstance, ...]
    relationships: tuple[TwinRelationship, ...]
    models: Mapping[str, TwinModel] = field(default_factory=dict)

    def to_doc(self) -> dict[str, Any]:
        return {
            "twins": [
                {
                    "twin_id": t.twin_id,
                    "model": self.models[t.model_id].name if t.model_id in self.models else t.model_id,
                    "external_id": t.external_id,
                    "properties": dict(t.properties),
                    "last_updated_ms": t.last_updated_ms,
                }
                for t in self.instances
            ],
            "relationships": [
                {
                    "rel_id": r.rel_id,
                    "source_twin": r.source_twin,
                    "target_twin": r.target_twin,
                    "kind": r.kind,
                    "signal_strength_dbm": r.signal_strength_dbm,
                    "last_updated_ms": r.last_updated_ms,
                }
                for r in self.relationships
            ],
        }
