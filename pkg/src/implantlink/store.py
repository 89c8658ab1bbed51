"""Versioned object storage and schema harmonization.

Cumulative digital objects (patient, surgery, implant) carry a metadata map
plus section-partitioned payloads. Writes are last-writer-wins under the
total order (version, timestamp, writer_id), which makes concurrent update
replay converge regardless of arrival order. Persistence is an append-only
JSON Lines journal; the in-memory state and indexes are rebuilt by replay.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable

from .access import AccessDenied, AccessEngine, Resource, Session
from .sections import SECTION_SCHEMAS, Section
from .udi import LinkageRecord

KINDS = ("patient", "surgery", "implant")

# section whose write right governs creating/retitling an object of a kind
PRIMARY_SECTION = {
    "patient": Section.MEDICAL,
    "surgery": Section.MEDICAL,
    "implant": Section.TECHNICAL,
}

IDENTITY_METADATA_KEYS = ("name", "birthdate", "address")
CREDENTIAL_REF_KEYS = ("author", "last_writer", "linked_by")


class StoreError(Exception):
    pass


class NotFound(StoreError):
    pass


class StaleWrite(StoreError):
    pass


class DuplicateLink(StoreError):
    pass


class HarmonizationError(StoreError):
    pass


class MissingRequiredField(HarmonizationError):
    pass


class UnknownField(HarmonizationError):
    pass


class UnitConversionError(HarmonizationError):
    pass


@dataclass
class DigitalObject:
    object_id: str
    kind: str
    metadata: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)  # Section -> payload dict
    version: int = 1
    last_writer: str = ""
    updated_at: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StoreError(f"unknown object kind {self.kind!r}")
        self.sections = {Section(k): dict(v) for k, v in self.sections.items()}
        for section, payload in self.sections.items():
            unknown = set(payload) - set(SECTION_SCHEMAS[section])
            if unknown:
                raise StoreError(
                    f"fields {sorted(unknown)} do not belong to {section.value}"
                )

    @property
    def lww_key(self) -> tuple:
        return (self.version, self.updated_at, self.last_writer)

    def to_json(self) -> dict:
        return {
            "object_id": self.object_id,
            "kind": self.kind,
            "metadata": dict(self.metadata),
            "sections": {s.value: dict(p) for s, p in self.sections.items()},
            "version": self.version,
            "last_writer": self.last_writer,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DigitalObject":
        return cls(**data)

    def copy(self) -> "DigitalObject":
        return DigitalObject.from_json(json.loads(json.dumps(self.to_json())))


# --- harmonization -----------------------------------------------------------

CONVERSIONS: dict[str, Callable[[float], float]] = {
    "lb_to_kg": lambda v: v * 0.45359237,
    "fahrenheit_to_celsius": lambda v: (v - 32.0) * 5.0 / 9.0,
    "inch_to_mm": lambda v: v * 25.4,
}


@dataclass(frozen=True)
class MappingSpec:
    """ETL wrapper: renames source fields to canonical ones, converting units."""

    source_name: str
    target_section: Section
    field_maps: tuple[tuple[str, str, object], ...]  # (source, canonical, conversion)
    required_fields: tuple[str, ...] = ()

    def validate(self) -> None:
        schema = SECTION_SCHEMAS[self.target_section]
        for _source, canonical, conversion in self.field_maps:
            if canonical not in schema and canonical != "udi":
                raise UnknownField(
                    f"{canonical!r} is not a canonical {self.target_section.value} field"
                )
            if conversion is not None and not isinstance(conversion, (int, float)):
                if not (isinstance(conversion, str) and conversion in CONVERSIONS):
                    raise UnitConversionError(f"unknown conversion {conversion!r}")
        canonical_names = {c for _s, c, _f in self.field_maps}
        missing = set(self.required_fields) - canonical_names
        if missing:
            raise UnknownField(f"required fields not produced by any mapping: {sorted(missing)}")

    @classmethod
    def from_json(cls, data: dict) -> "MappingSpec":
        return cls(
            source_name=data["source_name"],
            target_section=Section(data["target_section"]),
            field_maps=tuple((s, c, f) for s, c, f in data["field_maps"]),
            required_fields=tuple(data.get("required_fields", ())),
        )


def harmonize(raw: dict, spec: MappingSpec) -> dict:
    """Rename, convert, and validate one flat source record."""
    by_source = {source: (canonical, conversion) for source, canonical, conversion in spec.field_maps}
    out: dict = {}
    for key, value in raw.items():
        if key not in by_source:
            raise UnknownField(f"source field {key!r} is not mapped for {spec.source_name}")
        canonical, conversion = by_source[key]
        if conversion is not None:
            try:
                numeric = float(value)
            except (TypeError, ValueError):
                raise UnitConversionError(f"{key!r}: cannot convert {value!r}")
            if isinstance(conversion, (int, float)):
                value = numeric * float(conversion)
            else:
                value = CONVERSIONS[conversion](numeric)
        out[canonical] = value
    for required in spec.required_fields:
        if required not in out:
            raise MissingRequiredField(f"{spec.source_name}: missing {required!r}")
    schema = SECTION_SCHEMAS[spec.target_section]
    unknown = set(out) - set(schema)
    if unknown:
        raise UnknownField(f"fields {sorted(unknown)} not in {spec.target_section.value}")
    return out


# --- the store ---------------------------------------------------------------

class ObjectStore:
    """Journal-backed object store; every access funnels through the engine."""

    def __init__(
        self,
        journal_path: str | Path | None,
        engine: AccessEngine,
        *,
        export_role: str = "medical_staff",
    ):
        self.journal_path = Path(journal_path) if journal_path else None
        self.engine = engine
        self.export_role = export_role
        self.objects: dict[str, DigitalObject] = {}
        self.tombstones: dict[str, tuple] = {}  # object_id -> lww key of delete
        self.linkages_by_serial: dict[str, LinkageRecord] = {}
        self._metadata_index: dict[tuple[str, str], set[str]] = {}
        if self.journal_path is not None and self.journal_path.exists():
            for line in self.journal_path.read_text().splitlines():
                if line.strip():
                    self._apply(json.loads(line))

    # -- journal ---------------------------------------------------------

    def _journal(self, record: dict) -> None:
        if self.journal_path is not None:
            with self.journal_path.open("a") as fh:
                fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")

    def _apply(self, record: dict) -> None:
        """Replay one journal line; LWW keeps replay order-independent."""
        op = record["op"]
        if op == "put":
            obj = DigitalObject.from_json(record["object"])
            self._apply_put(obj)
        elif op == "delete":
            key = (record["version"], record["ts"], record["writer"])
            self._apply_delete(record["object_id"], key)
        elif op == "link":
            rec = LinkageRecord.from_json(record["record"])
            self.linkages_by_serial.setdefault(rec.udi.serial, rec)
        else:
            raise StoreError(f"unknown journal op {op!r}")

    def _apply_put(self, obj: DigitalObject) -> bool:
        tomb = self.tombstones.get(obj.object_id)
        if tomb is not None and obj.lww_key <= tomb:
            return False
        stored = self.objects.get(obj.object_id)
        if stored is not None and obj.lww_key <= stored.lww_key:
            return False
        if stored is not None:
            self._unindex(stored)
        if tomb is not None and obj.lww_key > tomb:
            del self.tombstones[obj.object_id]
        self.objects[obj.object_id] = obj
        self._index(obj)
        return True

    def _apply_delete(self, object_id: str, key: tuple) -> bool:
        stored = self.objects.get(object_id)
        if stored is not None and key > stored.lww_key:
            self._unindex(stored)
            del self.objects[object_id]
        elif stored is not None:
            return False
        previous = self.tombstones.get(object_id)
        if previous is None or key > previous:
            self.tombstones[object_id] = key
            return True
        return False

    def _index(self, obj: DigitalObject) -> None:
        for key, value in obj.metadata.items():
            self._metadata_index.setdefault((key, str(value)), set()).add(obj.object_id)
        self._metadata_index.setdefault(("kind", obj.kind), set()).add(obj.object_id)

    def _unindex(self, obj: DigitalObject) -> None:
        for key, value in obj.metadata.items():
            self._metadata_index.get((key, str(value)), set()).discard(obj.object_id)
        self._metadata_index.get(("kind", obj.kind), set()).discard(obj.object_id)

    # -- resources --------------------------------------------------------

    def _owning_patient(self, obj: DigitalObject) -> str | None:
        if obj.kind == "patient":
            return obj.object_id
        if obj.kind == "surgery":
            return obj.metadata.get("patient_id")
        link = self.linkages_by_serial.get(obj.metadata.get("serial", ""))
        return link.patient_id if link is not None else None

    def _resource(self, obj: DigitalObject, section: Section, fields=None) -> Resource:
        return Resource(
            section=section,
            patient_id=self._owning_patient(obj),
            device_key=obj.object_id if obj.kind == "implant" else None,
            producer_id=obj.metadata.get("producer_id"),
            fields=tuple(fields) if fields else None,
        )

    # -- operations --------------------------------------------------------

    def put_object(
        self,
        obj: DigitalObject,
        writer: Session,
        *,
        timestamp: float | None = None,
    ) -> int:
        """Authorize every changed section, then apply last-writer-wins."""
        obj = obj.copy()
        obj.last_writer = writer.subject_id
        obj.updated_at = self.engine.clock.now() if timestamp is None else timestamp

        stored = self.objects.get(obj.object_id)
        changed: list[tuple[Section, tuple]] = []
        for section, payload in obj.sections.items():
            old = stored.sections.get(section) if stored is not None else None
            if old != payload:
                changed_fields = tuple(
                    sorted(
                        k
                        for k in set(payload) | set(old or {})
                        if (old or {}).get(k) != payload.get(k)
                    )
                )
                changed.append((section, changed_fields))
        if stored is None or stored.metadata != obj.metadata:
            primary = PRIMARY_SECTION[obj.kind]
            if primary not in (section for section, _ in changed):
                changed.append((primary, ()))

        for section, fields in changed:
            decision = self.engine.decide(
                writer, "write", self._resource(obj, section, fields)
            )
            if not decision.allow:
                raise AccessDenied(decision.reason, decision.audit_seq)

        if stored is not None and obj.lww_key <= stored.lww_key:
            raise StaleWrite(
                f"{obj.object_id}: incoming {obj.lww_key} <= stored {stored.lww_key}"
            )
        tomb = self.tombstones.get(obj.object_id)
        if tomb is not None and obj.lww_key <= tomb:
            raise StaleWrite(f"{obj.object_id}: object deleted at {tomb}")
        self._apply_put(obj)
        self._journal(
            {"op": "put", "object": obj.to_json(), "version": obj.version,
             "writer": obj.last_writer, "ts": obj.updated_at}
        )
        return obj.version

    def delete_object(self, object_id: str, writer: Session, *, version: int) -> None:
        obj = self.objects.get(object_id)
        if obj is None:
            raise NotFound(object_id)
        decision = self.engine.decide(
            writer, "write", self._resource(obj, PRIMARY_SECTION[obj.kind])
        )
        if not decision.allow:
            raise AccessDenied(decision.reason, decision.audit_seq)
        ts = self.engine.clock.now()
        key = (version, ts, writer.subject_id)
        if not self._apply_delete(object_id, key):
            raise StaleWrite(f"delete of {object_id} at {key} is stale")
        self._journal(
            {"op": "delete", "object_id": object_id, "version": version,
             "writer": writer.subject_id, "ts": ts}
        )

    def get_object(self, object_id: str, reader: Session) -> DigitalObject:
        """Section-filtered view; raises unless at least one section is readable."""
        obj = self.objects.get(object_id)
        if obj is None:
            raise NotFound(object_id)
        sections = obj.sections or {PRIMARY_SECTION[obj.kind]: {}}
        readable = {}
        last_seq = None
        for section, payload in sections.items():
            decision = self.engine.decide(reader, "read", self._resource(obj, section))
            if decision.allow:
                readable[section] = dict(payload)
            else:
                last_seq = decision.audit_seq
        if not readable:
            raise AccessDenied(f"no readable section of {object_id}", last_seq)
        view = obj.copy()
        view.sections = {s: p for s, p in view.sections.items() if s in readable}
        return view

    def get_raw(self, object_id: str) -> DigitalObject:
        """Unfiltered internal access for system-level flows (not a user path)."""
        obj = self.objects.get(object_id)
        if obj is None:
            raise NotFound(object_id)
        return obj.copy()

    def query_metadata(self, filters: dict, reader: Session) -> list[DigitalObject]:
        """All objects matching every clause, section-filtered, ordered by id."""
        if filters:
            candidate_sets = [
                self._metadata_index.get((k, str(v)), set()) for k, v in filters.items()
            ]
            ids = set.intersection(*candidate_sets) if candidate_sets else set()
        else:
            ids = set(self.objects)
        views = []
        for object_id in sorted(ids):
            try:
                views.append(self.get_object(object_id, reader))
            except AccessDenied:
                continue
        return views

    # -- linkage -----------------------------------------------------------

    def add_linkage(self, record: LinkageRecord) -> None:
        existing = self.linkages_by_serial.get(record.udi.serial)
        if existing is not None:
            raise DuplicateLink(
                f"serial {record.udi.serial!r} already linked to {existing.patient_id}"
            )
        self.linkages_by_serial[record.udi.serial] = record
        self._journal({"op": "link", "record": record.to_json()})

    def linkages_for_patient(self, patient_id: str) -> list[LinkageRecord]:
        return sorted(
            (r for r in self.linkages_by_serial.values() if r.patient_id == patient_id),
            key=lambda r: r.udi.serial,
        )

    # -- anonymized export ---------------------------------------------------

    def export_anonymized(
        self,
        filters: dict,
        pseudonym_key: str,
        caller: Session,
    ) -> list[dict]:
        """Strip direct identifiers; patient ids become stable keyed pseudonyms."""
        if caller.role.value != self.export_role:
            entry = self.engine.audit.append(
                timestamp=self.engine.clock.now(),
                subject_id=caller.subject_id,
                role=caller.role.value,
                action="export",
                resource=f"export:{json.dumps(filters, sort_keys=True)}",
                decision="deny",
            )
            raise AccessDenied("caller lacks the export capability", entry.seq)

        patient_ids = {o.object_id for o in self.objects.values() if o.kind == "patient"}
        identity_values = self.engine.directory.identity_strings() | {
            str(v)
            for o in self.objects.values()
            for k, v in o.metadata.items()
            if k in IDENTITY_METADATA_KEYS
        }

        def pseudonym(value: str) -> str:
            return hmac.new(pseudonym_key.encode(), value.encode(), hashlib.sha256).hexdigest()[:32]

        def scrub(value):
            if isinstance(value, dict):
                out = {}
                for k, v in value.items():
                    if k in IDENTITY_METADATA_KEYS or k in CREDENTIAL_REF_KEYS:
                        continue
                    out[k] = scrub(v)
                return out
            if isinstance(value, list):
                return [scrub(v) for v in value]
            if isinstance(value, str):
                if value in patient_ids:
                    return pseudonym(value)
                if value in identity_values:
                    return "[redacted]"
            return value

        now_date = datetime.fromtimestamp(self.engine.clock.now(), tz=timezone.utc).date()
        dataset = []
        if filters:
            candidate_sets = [
                self._metadata_index.get((k, str(v)), set()) for k, v in filters.items()
            ]
            ids = set.intersection(*candidate_sets) if candidate_sets else set()
        else:
            ids = set(self.objects)
        for object_id in sorted(ids):
            obj = self.objects[object_id]
            record = {
                "pseudonym": pseudonym(self._owning_patient(obj) or obj.object_id),
                "kind": obj.kind,
                "metadata": scrub(obj.metadata),
                "sections": {s.value: scrub(p) for s, p in obj.sections.items()},
            }
            birthdate = obj.metadata.get("birthdate")
            if obj.kind == "patient" and birthdate:
                born = date.fromisoformat(birthdate)
                age = int((now_date - born).days / 365.2425)
                bucket = 5 * (age // 5)
                record["age_bucket"] = f"{bucket}-{bucket + 4}"
            dataset.append(record)

        self.engine.audit.append(
            timestamp=self.engine.clock.now(),
            subject_id=caller.subject_id,
            role=caller.role.value,
            action="export",
            resource=f"export:{json.dumps(filters, sort_keys=True)}",
            decision="allow",
        )
        return dataset
