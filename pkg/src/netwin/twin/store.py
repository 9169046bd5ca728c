"""The twin store: models, instances, relationships, KPI rings, snapshots.

Pure data structure with no bus or clock dependencies. Identifiers are
assigned sequentially in arrival order, and the id counters are part of
the snapshot, so replaying an identical reading stream reproduces a
byte-identical snapshot.
"""

from __future__ import annotations

import json
from collections import deque
from typing import Any, Iterable

from netwin.signals import canonical_json
from netwin.twin.types import (
    RELATIONSHIP_KIND,
    ChangeSet,
    CorruptSnapshot,
    SchemaConflict,
    StoreCorruption,
    TwinInstance,
    TwinModel,
    TwinRelationship,
    UnknownSeries,
    UnknownTwin,
    VersionMismatch,
)

SNAPSHOT_VERSION = 1
DEFAULT_KPI_CAPACITY = 10_000


def _id_sort_key(entity_id: str) -> tuple[int, str]:
    return (len(entity_id), entity_id)


class TwinStore:
    def __init__(self, kpi_capacity: int = DEFAULT_KPI_CAPACITY) -> None:
        if kpi_capacity < 1:
            raise ValueError("kpi_capacity must be >= 1")
        self.kpi_capacity = kpi_capacity
        self.models: dict[str, TwinModel] = {}
        self.instances: dict[str, TwinInstance] = {}
        self.relationships: dict[str, TwinRelationship] = {}
        self.kpis: dict[tuple[str, str], deque[tuple[int, float]]] = {}
        self._model_by_name: dict[str, str] = {}
        self._instance_by_key: dict[tuple[str, str], str] = {}
        self._rel_by_key: dict[tuple[str, str, str], str] = {}
        self._rels_by_twin: dict[str, set[str]] = {}
        self._counters = {"model": 0, "twin": 0, "rel": 0}

    # -- id allocation

    def _next_id(self, prefix: str, counter: str) -> str:
        self._counters[counter] += 1
        return f"{prefix}{self._counters[counter]}"

    # -- models

    def ensure_model(self, name: str, schema: Iterable[tuple[str, str]]) -> str:
        schema = tuple((str(p), str(t)) for p, t in schema)
        existing_id = self._model_by_name.get(name)
        if existing_id is not None:
            model = self.models[existing_id]
            if not model.compatible_with(schema):
                raise SchemaConflict(f"model {name!r} exists with a different schema")
            return existing_id
        model_id = self._next_id("m", "model")
        self.models[model_id] = TwinModel(model_id=model_id, name=name, schema=schema)
        self._model_by_name[name] = model_id
        return model_id

    def model_named(self, name: str) -> TwinModel | None:
        model_id = self._model_by_name.get(name)
        return None if model_id is None else self.models[model_id]

    # -- instances

    def find_instance(self, model_id: str, external_id: str) -> TwinInstance | None:
        twin_id = self._instance_by_key.get((model_id, external_id))
        return None if twin_id is None else self.instances[twin_id]

    def find_instance_by_external_id(self, external_id: str) -> TwinInstance | None:
        for instance in self.instances.values():
            if instance.external_id == external_id:
                return instance
        return None

    def create_instance(
        self, model_id: str, external_id: str, properties: dict[str, Any], timestamp_ms: int
    ) -> TwinInstance:
        if model_id not in self.models:
            raise StoreCorruption(f"instance references missing model {model_id}")
        key = (model_id, external_id)
        if key in self._instance_by_key:
            raise StoreCorruption(f"external id {external_id!r} already exists for model {model_id}")
        self._check_properties(model_id, properties)
        twin_id = self._next_id("t", "twin")
        instance = TwinInstance(
            twin_id=twin_id,
            model_id=model_id,
            external_id=external_id,
            properties=properties,
            last_updated_ms=timestamp_ms,
        )
        self.instances[twin_id] = instance
        self._instance_by_key[key] = twin_id
        self._rels_by_twin.setdefault(twin_id, set())
        return instance

    def update_instance(
        self, twin_id: str, properties: dict[str, Any], timestamp_ms: int
    ) -> TwinInstance:
        current = self.instances[twin_id]
        self._check_properties(current.model_id, properties)
        updated = TwinInstance(
            twin_id=twin_id,
            model_id=current.model_id,
            external_id=current.external_id,
            properties=properties,
            last_updated_ms=timestamp_ms,
        )
        self.instances[twin_id] = updated
        return updated

    def remove_instance(self, twin_id: str) -> list[str]:
        """Removes the twin and any relationship touching it."""
        instance = self.instances.get(twin_id)
        if instance is None:
            raise UnknownTwin(twin_id)
        removed_rels = [rel_id for rel_id in self._rels_by_twin.get(twin_id, set())]
        for rel_id in list(removed_rels):
            self.remove_relationship(rel_id)
        del self.instances[twin_id]
        del self._instance_by_key[(instance.model_id, instance.external_id)]
        self._rels_by_twin.pop(twin_id, None)
        return removed_rels

    def _check_properties(self, model_id: str, properties: dict[str, Any]) -> None:
        model = self.models[model_id]
        allowed = dict(model.schema)
        for name, value in properties.items():
            expected = allowed.get(name)
            if expected is None:
                raise StoreCorruption(f"property {name!r} not in schema of model {model.name!r}")
            ok = (
                (expected == "string" and isinstance(value, str))
                or (expected == "number" and isinstance(value, (int, float)) and not isinstance(value, bool))
                or (expected == "integer" and isinstance(value, int) and not isinstance(value, bool))
                or (expected == "string_list" and isinstance(value, list) and all(isinstance(v, str) for v in value))
            )
            if not ok:
                raise StoreCorruption(
                    f"property {name!r} of model {model.name!r} expects {expected}, got {type(value).__name__}"
                )

    # -- relationships

    def find_relationship(self, source_twin: str, target_twin: str, kind: str = RELATIONSHIP_KIND) -> TwinRelationship | None:
        rel_id = self._rel_by_key.get((source_twin, target_twin, kind))
        return None if rel_id is None else self.relationships[rel_id]

    def create_relationship(
        self,
        source_twin: str,
        target_twin: str,
        signal_strength_dbm: float,
        timestamp_ms: int,
        kind: str = RELATIONSHIP_KIND,
    ) -> TwinRelationship:
        if source_twin not in self.instances or target_twin not in self.instances:
            raise StoreCorruption("relationship endpoint does not exist")
        key = (source_twin, target_twin, kind)
        if key in self._rel_by_key:
            raise StoreCorruption(f"relationship {key} already exists")
        rel_id = self._next_id("r", "rel")
        relationship = TwinRelationship(
            rel_id=rel_id,
            source_twin=source_twin,
            target_twin=target_twin,
            kind=kind,
            signal_strength_dbm=signal_strength_dbm,
            last_updated_ms=timestamp_ms,
        )
        self.relationships[rel_id] = relationship
        self._rel_by_key[key] = rel_id
        self._rels_by_twin.setdefault(source_twin, set()).add(rel_id)
        self._rels_by_twin.setdefault(target_twin, set()).add(rel_id)
        return relationship

    def update_relationship(
        self, rel_id: str, signal_strength_dbm: float, timestamp_ms: int
    ) -> TwinRelationship:
        current = self.relationships[rel_id]
        updated = TwinRelationship(
            rel_id=rel_id,
            source_twin=current.source_twin,
            target_twin=current.target_twin,
            kind=current.kind,
            signal_strength_dbm=signal_strength_dbm,
            last_updated_ms=timestamp_ms,
        )
        self.relationships[rel_id] = updated
        return updated

    def remove_relationship(self, rel_id: str) -> None:
        relationship = self.relationships.pop(rel_id, None)
        if relationship is None:
            return
        del self._rel_by_key[(relationship.source_twin, relationship.target_twin, relationship.kind)]
        self._rels_by_twin.get(relationship.source_twin, set()).discard(rel_id)
        self._rels_by_twin.get(relationship.target_twin, set()).discard(rel_id)

    def relationships_of(self, twin_id: str) -> list[TwinRelationship]:
        return [self.relationships[r] for r in sorted(self._rels_by_twin.get(twin_id, set()), key=_id_sort_key)]

    # -- KPI rings

    def kpi_append(self, entity_id: str, metric: str, timestamp_ms: int, value: float) -> bool:
        """Append one sample; exact duplicates of the latest sample are
        skipped so at-least-once redelivery cannot grow the ring."""
        series = self.kpis.get((entity_id, metric))
        if series is None:
            series = deque(maxlen=self.kpi_capacity)
            self.kpis[(entity_id, metric)] = series
        if series and series[-1] == (timestamp_ms, value):
            return False
        series.append((timestamp_ms, value))
        return True

    def kpi_query(self, entity_id: str, metric: str, from_ms: int, to_ms: int) -> list[tuple[int, float]]:
        series = self.kpis.get((entity_id, metric))
        if series is None:
            raise UnknownSeries(f"{entity_id}/{metric}")
        return sorted((s for s in series if from_ms <= s[0] <= to_ms), key=lambda s: s[0])

    # -- integrity

    def check_integrity(self) -> None:
        for relationship in self.relationships.values():
            if relationship.source_twin not in self.instances or relationship.target_twin not in self.instances:
                raise StoreCorruption(f"relationship {relationship.rel_id} references a missing twin")

    # -- snapshots

    def snapshot_doc(self) -> dict[str, Any]:
        return {
            "format_version": SNAPSHOT_VERSION,
            "kpi_capacity": self.kpi_capacity,
            "counters": dict(self._counters),
            "models": [
                {"model_id": m.model_id, "name": m.name, "schema": [list(pair) for pair in m.schema]}
                for m in sorted(self.models.values(), key=lambda m: _id_sort_key(m.model_id))
            ],
            "instances": [
                {
                    "twin_id": i.twin_id,
                    "model_id": i.model_id,
                    "external_id": i.external_id,
                    "properties": dict(i.properties),
                    "last_updated_ms": i.last_updated_ms,
                }
                for i in sorted(self.instances.values(), key=lambda i: _id_sort_key(i.twin_id))
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
                for r in sorted(self.relationships.values(), key=lambda r: _id_sort_key(r.rel_id))
            ],
            "kpis": [
                {
                    "entity_id": entity_id,
                    "metric": metric,
                    "samples": [[t, v] for t, v in samples],
                }
                for (entity_id, metric), samples in sorted(
                    self.kpis.items(), key=lambda kv: (_id_sort_key(kv[0][0]), kv[0][1])
                )
                # KPI rings of entities that no longer exist are pruned at
                # snapshot time.
                if entity_id in self.instances or entity_id in self.relationships
            ],
        }

    def snapshot(self) -> str:
        return canonical_json(self.snapshot_doc())

    @classmethod
    def restore(cls, document: str | bytes) -> "TwinStore":
        if isinstance(document, bytes):
            try:
                document = document.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorruptSnapshot(f"invalid UTF-8: {exc}") from None
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise CorruptSnapshot(f"invalid JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise CorruptSnapshot("snapshot must be an object")
        version = doc.get("format_version")
        if version != SNAPSHOT_VERSION:
            raise VersionMismatch(f"snapshot format {version!r}, expected {SNAPSHOT_VERSION}")
        try:
            store = cls(kpi_capacity=int(doc["kpi_capacity"]))
            for model_doc in doc["models"]:
                model = TwinModel(
                    model_id=model_doc["model_id"],
                    name=model_doc["name"],
                    schema=tuple((p, t) for p, t in model_doc["schema"]),
                )
                store.models[model.model_id] = model
                store._model_by_name[model.name] = model.model_id
            for instance_doc in doc["instances"]:
                instance = TwinInstance(
                    twin_id=instance_doc["twin_id"],
                    model_id=instance_doc["model_id"],
                    external_id=instance_doc["external_id"],
                    properties=instance_doc["properties"],
                    last_updated_ms=int(instance_doc["last_updated_ms"]),
                )
                store.instances[instance.twin_id] = instance
                store._instance_by_key[(instance.model_id, instance.external_id)] = instance.twin_id
                store._rels_by_twin.setdefault(instance.twin_id, set())
            for rel_doc in doc["relationships"]:
                relationship = TwinRelationship(
                    rel_id=rel_doc["rel_id"],
                    source_twin=rel_doc["source_twin"],
                    target_twin=rel_doc["target_twin"],
                    kind=rel_doc["kind"],
                    signal_strength_dbm=float(rel_doc["signal_strength_dbm"]),
                    last_updated_ms=int(rel_doc["last_updated_ms"]),
                )
                store.relationships[relationship.rel_id] = relationship
                store._rel_by_key[
                    (relationship.source_twin, relationship.target_twin, relationship.kind)
                ] = relationship.rel_id
                store._rels_by_twin.setdefault(relationship.source_twin, set()).add(relationship.rel_id)
                store._rels_by_twin.setdefault(relationship.target_twin, set()).add(relationship.rel_id)
            for series_doc in doc["kpis"]:
                series = deque(maxlen=store.kpi_capacity)
                for t, v in series_doc["samples"]:
                    series.append((int(t), float(v)))
                store.kpis[(series_doc["entity_id"], series_doc["metric"])] = series
            counters = doc["counters"]
            store._counters = {
                "model": int(counters["model"]),
                "twin": int(counters["twin"]),
                "rel": int(counters["rel"]),
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptSnapshot(f"malformed snapshot: {exc}") from None
        try:
            store.check_integrity()
        except StoreCorruption as exc:
            raise CorruptSnapshot(str(exc)) from None
        return store

    # -- mutations wholesale (eviction support)

    def graph_signature(self) -> tuple:
        """Hashable digest of instances + relationships, for test diffing."""
        return (
            tuple(sorted((i.twin_id, i.external_id, tuple(sorted(i.properties.items(), key=lambda kv: kv[0])), i.last_updated_ms) for i in self.instances.values())),
            tuple(sorted((r.rel_id, r.source_twin, r.target_twin, r.signal_strength_dbm, r.last_updated_ms) for r in self.relationships.values())),
        )
