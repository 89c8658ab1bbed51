"""Device identifier model and string codec.

The identifier wire format is a GS1-style application-identifier string

    (01)<14-digit DI>(11)<YYMMDD made>(17)<YYMMDD expiry>(10)<lot>(21)<serial>

with a fixed AI order, so parsing is total and ``parse_udi(format_udi(r))``
round-trips for every valid record.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date

__all__ = [
    "UdiError",
    "MalformedIdentifier",
    "BadCheckDigit",
    "BadDate",
    "NonDigitInput",
    "UdiRecord",
    "LinkageRecord",
    "gtin_check_digit",
    "parse_udi",
    "format_udi",
]


class UdiError(ValueError):
    """Base class for identifier codec failures."""


class MalformedIdentifier(UdiError):
    """Input does not follow the (01)..(11)..(17)..(10)..(21).. layout."""


class BadCheckDigit(UdiError):
    """Device identifier fails mod-10 validation."""


class BadDate(UdiError):
    """Date field is not a valid calendar date, or expiry precedes manufacture."""


class NonDigitInput(UdiError):
    """Check-digit input must be exactly 13 decimal digits."""


# Lot/serial alphabet: Code 128 code-set-B printables. Parentheses are the AI
# delimiters of the wire format and DEL is unprintable, so both are excluded
# to keep parse_udi a total inverse of format_udi.
_ID_CHARS = frozenset(chr(c) for c in range(32, 127)) - {"(", ")"}

_UDI_RE = re.compile(
    r"^\(01\)(\d{14})"
    r"\(11\)(\d{6})"
    r"\(17\)(\d{6})"
    r"\(10\)(.{1,20}?)"
    r"\(21\)(.{1,20})$"
)


def gtin_check_digit(digits: str) -> int:
    """Mod-10 check digit for a 13-digit GTIN payload.

    Weights alternate 3,1,3,1,... from the leftmost digit; the check digit
    d makes (weighted sum + d) divisible by 10.
    """
    if len(digits) != 13 or not digits.isdigit():
        raise NonDigitInput(f"need exactly 13 decimal digits, got {digits!r}")
    total = sum(int(d) * (3 if i % 2 == 0 else 1) for i, d in enumerate(digits))
    return (10 - total % 10) % 10


def _parse_yymmdd(text: str, field: str) -> date:
    # Pivot: 2000-2099 per GS1 convention at desk scale.
    yy, mm, dd = int(text[0:2]), int(text[2:4]), int(text[4:6])
    try:
        return date(2000 + yy, mm, dd)
    except ValueError as exc:
        raise BadDate(f"{field}: {text!r} is not a valid YYMMDD date") from exc


@dataclass(frozen=True)
class UdiRecord:
    """Structured device identifier: static DI plus production identifiers."""

    device_identifier: str
    manufacture_date: date
    expiry_date: date
    lot: str
    serial: str
    issuing_agency: str = "GS1"

    def validate(self) -> None:
        di = self.device_identifier
        if len(di) != 14 or not di.isdigit():
            raise MalformedIdentifier(f"device identifier must be 14 digits, got {di!r}")
        if gtin_check_digit(di[:13]) != int(di[13]):
            raise BadCheckDigit(f"check digit of {di!r} should be {gtin_check_digit(di[:13])}")
        if self.expiry_date < self.manufacture_date:
            raise BadDate("expiry date precedes manufacture date")
        for name, value in (("lot", self.lot), ("serial", self.serial)):
            if not 1 <= len(value) <= 20:
                raise MalformedIdentifier(f"{name} must be 1-20 characters, got {value!r}")
            bad = set(value) - _ID_CHARS
            if bad:
                raise MalformedIdentifier(f"{name} contains disallowed characters {sorted(bad)!r}")

    @property
    def key(self) -> str:
        """Store key identifying the physical device (DI + serial)."""
        return f"{self.device_identifier}:{self.serial}"


def parse_udi(text: str) -> UdiRecord:
    """Parse an application-identifier string into a validated UdiRecord."""
    m = _UDI_RE.match(text)
    if m is None:
        raise MalformedIdentifier(f"not a (01)(11)(17)(10)(21) identifier: {text!r}")
    di, made, expiry, lot, serial = m.groups()
    record = UdiRecord(
        device_identifier=di,
        manufacture_date=_parse_yymmdd(made, "manufacture_date"),
        expiry_date=_parse_yymmdd(expiry, "expiry_date"),
        lot=lot,
        serial=serial,
    )
    record.validate()
    return record


def format_udi(record: UdiRecord) -> str:
    """Render a UdiRecord back to its identifier string."""
    record.validate()
    return (
        f"(01){record.device_identifier}"
        f"(11){record.manufacture_date.strftime('%y%m%d')}"
        f"(17){record.expiry_date.strftime('%y%m%d')}"
        f"(10){record.lot}"
        f"(21){record.serial}"
    )


@dataclass(frozen=True)
class LinkageRecord:
    """Ties one physical implant to one patient and the surgery that placed it."""

    udi: UdiRecord
    patient_id: str
    surgery_id: str
    linked_at: float
    linked_by: str

    def to_json(self) -> dict:
        return {
            "udi": format_udi(self.udi),
            "patient_id": self.patient_id,
            "surgery_id": self.surgery_id,
            "linked_at": self.linked_at,
            "linked_by": self.linked_by,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "LinkageRecord":
        return cls(
            udi=parse_udi(payload["udi"]),
            patient_id=payload["patient_id"],
            surgery_id=payload["surgery_id"],
            linked_at=payload["linked_at"],
            linked_by=payload["linked_by"],
        )
