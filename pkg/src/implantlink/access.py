"""Shell-embedded role model: four roles, nested read scopes, audited decisions.

Sessions are integrity-tagged with a server-keyed HMAC. Every decide() call
appends to a tamper-evident hash-chained audit log, allow and deny alike.
First responders hold no standing rights; they read a patient's social and
medical sections only through a time-limited grant issued when enough vital
thresholds are breached simultaneously.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import operator
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Union

from .clock import SystemClock
from .sections import PATIENT_ENTRY_FIELDS, PROCUREMENT_REQUIRED_FIELDS, Section

GENESIS_HASH = "0" * 64

_COMPARATORS = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


class AccessError(Exception):
    pass


class UnknownSubject(AccessError):
    pass


class BadSecret(AccessError):
    pass


class ExpiredSession(AccessError):
    pass


class TamperedSession(AccessError):
    pass


class AccessDenied(AccessError):
    def __init__(self, reason: str, audit_seq: int | None = None):
        super().__init__(reason)
        self.reason = reason
        self.audit_seq = audit_seq


class ChainBroken(AccessError):
    def __init__(self, seq: int):
        super().__init__(f"audit chain broken at seq {seq}")
        self.seq = seq


class Role(str, Enum):
    USER = "user"
    MEDICAL_STAFF = "medical_staff"
    PRODUCER = "producer"
    FIRST_RESPONDER = "first_responder"


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Session:
    subject_id: str
    role: Role
    issued_at: float
    expires_at: float
    integrity_tag: str

    def payload(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "role": self.role.value,
            "issued_at": self.issued_at,
            "expires_at": self.expires_at,
        }

    def to_json(self) -> dict:
        data = self.payload()
        data["integrity_tag"] = self.integrity_tag
        return data

    @classmethod
    def from_json(cls, data: dict) -> "Session":
        return cls(
            subject_id=data["subject_id"],
            role=Role(data["role"]),
            issued_at=float(data["issued_at"]),
            expires_at=float(data["expires_at"]),
            integrity_tag=data["integrity_tag"],
        )


def session_tag(server_key: bytes | str, payload: dict) -> str:
    key = server_key.encode() if isinstance(server_key, str) else server_key
    return hmac.new(key, _canonical(payload).encode(), hashlib.sha256).hexdigest()


@dataclass(frozen=True)
class Resource:
    """A section scoped to its owner.

    ``patient_id`` owns social and medical data (and, for technical data,
    names the patient the device is linked to, if any). ``producer_id`` is
    the manufacturer owning a device's technical area. ``fields`` names the
    specific payload fields a write touches.
    """

    section: Section
    patient_id: str | None = None
    device_key: str | None = None
    producer_id: str | None = None
    fields: tuple[str, ...] | None = None

    def ref(self) -> str:
        owner = self.patient_id or self.device_key or "*"
        return f"{self.section.value}:{owner}"


@dataclass(frozen=True)
class Decision:
    allow: bool
    reason: str
    audit_seq: int


@dataclass(frozen=True)
class EmergencyPolicy:
    conditions: tuple[tuple[str, str, float], ...]
    required_simultaneous: int = 2
    simultaneity_window_s: float = 60.0
    grant_ttl_s: float = 3600.0

    def __post_init__(self):
        if self.required_simultaneous < 2:
            raise ValueError("policy must require at least two simultaneous factors")
        if self.required_simultaneous > len(self.conditions):
            raise ValueError("cannot require more factors than conditions exist")
        if self.simultaneity_window_s <= 0 or self.grant_ttl_s <= 0:
            raise ValueError("window and TTL must be positive")
        for _vital, comparator, _threshold in self.conditions:
            if comparator not in _COMPARATORS:
                raise ValueError(f"unknown comparator {comparator!r}")

    @classmethod
    def from_json(cls, data: dict) -> "EmergencyPolicy":
        return cls(
            conditions=tuple((v, c, float(t)) for v, c, t in data["conditions"]),
            required_simultaneous=int(data.get("required_simultaneous", 2)),
            simultaneity_window_s=float(data.get("simultaneity_window_s", 60.0)),
            grant_ttl_s=float(data.get("grant_ttl_s", 3600.0)),
        )


@dataclass(frozen=True)
class EmergencyGrant:
    responder_id: str
    patient_id: str
    granted_at: float
    expires_at: float
    triggering_observations: tuple[tuple[float, str, float], ...]

    def active(self, now: float) -> bool:
        return self.granted_at <= now < self.expires_at

    def to_json(self) -> dict:
        return {
            "responder_id": self.responder_id,
            "patient_id": self.patient_id,
            "granted_at": self.granted_at,
            "expires_at": self.expires_at,
            "triggering_observations": [list(o) for o in self.triggering_observations],
        }


@dataclass(frozen=True)
class AuditEntry:
    seq: int
    timestamp: float
    subject_id: str
    role: str
    action: str  # read | write | link | export | grant | auth
    resource: str
    decision: str  # allow | deny
    prev_hash: str
    entry_hash: str

    def body(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "subject_id": self.subject_id,
            "role": self.role,
            "action": self.action,
            "resource": self.resource,
            "decision": self.decision,
            "prev_hash": self.prev_hash,
        }

    def to_json(self) -> dict:
        data = self.body()
        data["entry_hash"] = self.entry_hash
        return data


def _entry_hash(body: dict) -> str:
    return hashlib.sha256(_canonical(body).encode()).hexdigest()


class AuditLog:
    """Append-only hash chain, one canonical JSON object per line on disk."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.entries: list[AuditEntry] = []
        if self.path is not None and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    data = json.loads(line)
                    self.entries.append(AuditEntry(**data))

    @property
    def last_hash(self) -> str:
        return self.entries[-1].entry_hash if self.entries else GENESIS_HASH

    def append(
        self,
        *,
        timestamp: float,
        subject_id: str,
        role: str,
        action: str,
        resource: str,
        decision: str,
    ) -> AuditEntry:
        body = {
            "seq": len(self.entries),
            "timestamp": timestamp,
            "subject_id": subject_id,
            "role": role,
            "action": action,
            "resource": resource,
            "decision": decision,
            "prev_hash": self.last_hash,
        }
        entry = AuditEntry(entry_hash=_entry_hash(body), **body)
        self.entries.append(entry)
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(_canonical(entry.to_json()) + "\n")
        return entry


def verify_audit_chain(
    log: Union[AuditLog, Iterable[AuditEntry], str, Path],
    *,
    raise_on_break: bool = False,
) -> bool:
    """Recompute every link from genesis; an empty log verifies trivially."""
    if isinstance(log, AuditLog):
        entries = list(log.entries)
    elif isinstance(log, (str, Path)):
        entries = []
        path = Path(log)
        try:
            text = path.read_text() if path.exists() else ""
        except (UnicodeDecodeError, OSError):
            if raise_on_break:
                raise ChainBroken(0)
            return False
        for line in text.splitlines():
            if line.strip():
                try:
                    entries.append(AuditEntry(**json.loads(line)))
                except (json.JSONDecodeError, TypeError, ValueError):
                    if raise_on_break:
                        raise ChainBroken(len(entries))
                    return False
    else:
        entries = list(log)

    prev = GENESIS_HASH
    for i, entry in enumerate(entries):
        ok = (
            entry.seq == i
            and entry.prev_hash == prev
            and entry.entry_hash == _entry_hash(entry.body())
        )
        if not ok:
            if raise_on_break:
                raise ChainBroken(entry.seq if entry.seq == i else i)
            return False
        prev = entry.entry_hash
    return True


class CredentialDirectory:
    """Registered subjects with salted secrets, roles, and identity attributes."""

    def __init__(self):
        self._subjects: dict[str, dict] = {}

    def register(
        self,
        subject_id: str,
        secret: str,
        role: Role,
        *,
        name: str = "",
        birthdate: str = "",
        address: str = "",
    ) -> None:
        salt = hashlib.sha256(subject_id.encode()).hexdigest()[:16]
        self._subjects[subject_id] = {
            "secret_hash": hashlib.sha256((salt + secret).encode()).hexdigest(),
            "salt": salt,
            "role": role,
            "name": name,
            "birthdate": birthdate,
            "address": address,
        }

    def __contains__(self, subject_id: str) -> bool:
        return subject_id in self._subjects

    def check_secret(self, subject_id: str, secret: str) -> bool:
        record = self._subjects.get(subject_id)
        if record is None:
            raise UnknownSubject(subject_id)
        digest = hashlib.sha256((record["salt"] + secret).encode()).hexdigest()
        return hmac.compare_digest(digest, record["secret_hash"])

    def role_of(self, subject_id: str) -> Role:
        record = self._subjects.get(subject_id)
        if record is None:
            raise UnknownSubject(subject_id)
        return record["role"]

    def attributes(self, subject_id: str) -> dict:
        record = self._subjects.get(subject_id)
        if record is None:
            raise UnknownSubject(subject_id)
        return {k: record[k] for k in ("name", "birthdate", "address")}

    def subject_ids(self) -> list[str]:
        return sorted(self._subjects)

    def identity_strings(self) -> set[str]:
        """Every string that would directly identify a registered person."""
        values: set[str] = set()
        for subject_id, record in self._subjects.items():
            values.add(subject_id)
            for key in ("name", "birthdate", "address"):
                if record[key]:
                    values.add(record[key])
        return values


class AccessEngine:
    """Policy decision point plus audit sink and emergency-grant registry."""

    def __init__(
        self,
        server_key: str,
        directory: CredentialDirectory,
        audit: AuditLog,
        clock=None,
        *,
        session_ttl_s: float = 8 * 3600.0,
        patient_entry_fields: frozenset[str] = PATIENT_ENTRY_FIELDS,
        emergency_policy: EmergencyPolicy | None = None,
    ):
        self.server_key = server_key
        self.directory = directory
        self.audit = audit
        self.clock = clock or SystemClock()
        self.session_ttl_s = session_ttl_s
        self.patient_entry_fields = patient_entry_fields
        self.emergency_policy = emergency_policy
        self.grants: list[EmergencyGrant] = []

    # -- sessions -------------------------------------------------------

    def issue_session(self, subject_id: str, role: Role) -> Session:
        now = self.clock.now()
        payload = {
            "subject_id": subject_id,
            "role": role.value,
            "issued_at": now,
            "expires_at": now + self.session_ttl_s,
        }
        return Session(
            subject_id=subject_id,
            role=role,
            issued_at=now,
            expires_at=payload["expires_at"],
            integrity_tag=session_tag(self.server_key, payload),
        )

    def authenticate(self, subject_id: str, secret: str) -> Session:
        if subject_id not in self.directory:
            raise UnknownSubject(subject_id)
        if not self.directory.check_secret(subject_id, secret):
            entry = self.audit.append(
                timestamp=self.clock.now(),
                subject_id=subject_id,
                role="unknown",
                action="auth",
                resource="credential-directory",
                decision="deny",
            )
            raise BadSecret(f"bad secret for {subject_id} (audit seq {entry.seq})")
        return self.issue_session(subject_id, self.directory.role_of(subject_id))

    def check_session(self, session: Session) -> None:
        """Integrity and expiry; violations are audited as denials."""
        expected = session_tag(self.server_key, session.payload())
        if not hmac.compare_digest(expected, session.integrity_tag):
            entry = self._audit_decision(session, "read", "session", "deny")
            raise TamperedSession(f"audit seq {entry.seq}")
        if self.clock.now() >= session.expires_at:
            entry = self._audit_decision(session, "read", "session", "deny")
            raise ExpiredSession(f"audit seq {entry.seq}")

    # -- decisions ------------------------------------------------------

    def _audit_decision(self, actor, action: str, resource_ref: str, decision: str) -> AuditEntry:
        if isinstance(actor, Session):
            subject, role = actor.subject_id, actor.role.value
        else:  # EmergencyGrant
            subject, role = actor.responder_id, Role.FIRST_RESPONDER.value
        return self.audit.append(
            timestamp=self.clock.now(),
            subject_id=subject,
            role=role,
            action=action,
            resource=resource_ref,
            decision=decision,
        )

    def decide(
        self,
        actor: Union[Session, EmergencyGrant],
        action: str,
        resource: Resource,
    ) -> Decision:
        """Evaluate the access matrix. Every call is audited, allow and deny."""
        if action not in ("read", "write"):
            raise ValueError(f"action must be read or write, got {action!r}")
        if isinstance(actor, Session):
            self.check_session(actor)
            allow, reason = self._decide_session(actor, action, resource)
        else:
            allow, reason = self._decide_grant(actor, action, resource)
        entry = self._audit_decision(
            actor, action, resource.ref(), "allow" if allow else "deny"
        )
        return Decision(allow=allow, reason=reason, audit_seq=entry.seq)

    def _decide_session(self, session: Session, action: str, resource: Resource):
        role, subject = session.role, session.subject_id
        section = resource.section

        if role == Role.USER:
            owns = resource.patient_id == subject
            if action == "read":
                if owns:
                    return True, "owner reads own data"
                return False, "users read only their own data"
            if section == Section.SOCIAL and owns:
                if resource.fields is None:
                    return False, "social writes must name their target fields"
                outside = set(resource.fields) - self.patient_entry_fields
                if outside:
                    return False, f"fields outside the dedicated patient area: {sorted(outside)}"
                return True, "owner writes the dedicated social area"
            return False, "users write only their own dedicated social area"

        if role == Role.MEDICAL_STAFF:
            if action == "read":
                return True, "medical staff read all sections"
            if section == Section.MEDICAL:
                return True, "medical staff write the medical record (author recorded)"
            return False, "medical staff write only the medical section"

        if role == Role.PRODUCER:
            if section == Section.TECHNICAL and resource.producer_id == subject:
                return True, f"producer {action}s own device data"
            return False, "producers access only their own device data area"

        if role == Role.FIRST_RESPONDER:
            if action != "read":
                return False, "emergency grants never confer write access"
            if section not in (Section.SOCIAL, Section.MEDICAL):
                return False, "emergency grants cover social and medical data only"
            grant = self.active_grant(subject, resource.patient_id)
            if grant is not None:
                return True, f"active emergency grant until {grant.expires_at:.0f}"
            return False, "no active emergency grant for this patient"

        return False, "deny by default"

    def _decide_grant(self, grant: EmergencyGrant, action: str, resource: Resource):
        if action != "read":
            return False, "emergency grants never confer write access"
        if resource.section not in (Section.SOCIAL, Section.MEDICAL):
            return False, "emergency grants cover social and medical data only"
        if resource.patient_id != grant.patient_id:
            return False, "grant is scoped to a different patient"
        if not grant.active(self.clock.now()):
            return False, "grant expired or not yet active"
        return True, f"emergency grant active until {grant.expires_at:.0f}"

    # -- emergency grants ------------------------------------------------

    def active_grant(self, responder_id: str, patient_id: str | None) -> Optional[EmergencyGrant]:
        now = self.clock.now()
        for grant in reversed(self.grants):
            if (
                grant.responder_id == responder_id
                and grant.patient_id == patient_id
                and grant.active(now)
            ):
                return grant
        return None

    def evaluate_emergency(
        self,
        responder_id: str,
        patient_id: str,
        observations: Iterable[tuple[float, str, float]],
        policy: EmergencyPolicy | None = None,
        now: float | None = None,
    ) -> Optional[EmergencyGrant]:
        """Issue a grant iff >= k distinct conditions co-occur within one window.

        The grant starts at the end of the earliest qualifying window; absence
        of a grant is a normal outcome and is not audited.
        """
        policy = policy or self.emergency_policy
        if policy is None:
            raise ValueError("no emergency policy configured")
        now = self.clock.now() if now is None else now
        obs = sorted((float(t), str(v), float(x)) for t, v, x in observations)
        obs = [o for o in obs if o[0] <= now]

        for t_end in (o[0] for o in obs):
            window_start = t_end - policy.simultaneity_window_s
            in_window = [o for o in obs if window_start <= o[0] <= t_end]
            satisfied: dict[tuple[str, str, float], tuple[float, str, float]] = {}
            for condition in policy.conditions:
                vital, comparator, threshold = condition
                for o in in_window:
                    if o[1] == vital and _COMPARATORS[comparator](o[2], threshold):
                        satisfied[condition] = o
                        break
            if len(satisfied) >= policy.required_simultaneous:
                grant = EmergencyGrant(
                    responder_id=responder_id,
                    patient_id=patient_id,
                    granted_at=t_end,
                    expires_at=t_end + policy.grant_ttl_s,
                    triggering_observations=tuple(sorted(satisfied.values())),
                )
                self.grants.append(grant)
                self.audit.append(
                    timestamp=now,
                    subject_id=responder_id,
                    role=Role.FIRST_RESPONDER.value,
                    action="grant",
                    resource=f"emergency:{patient_id}",
                    decision="allow",
                )
                return grant
        return None


def procurement_status(implant_object) -> str:
    """'cleared' once the producer feed delivered the mandatory technical set."""
    technical = implant_object.sections.get(Section.TECHNICAL, {})
    for field_name in PROCUREMENT_REQUIRED_FIELDS:
        value = technical.get(field_name)
        if value is None or value == "" or value == [] or value == {}:
            return "blocked"
    return "cleared"
