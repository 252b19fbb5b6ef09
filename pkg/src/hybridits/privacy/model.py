from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from ..errors import PurposeMismatch


class ProtectionGoal(Enum):
    CONFIDENTIALITY = "confidentiality"
    INTEGRITY = "integrity"
    AVAILABILITY = "availability"
    UNLINKABILITY = "unlinkability"
    TRANSPARENCY = "transparency"
    INTERVENABILITY = "intervenability"


@dataclass(frozen=True)
class DataSchema:
    """Fields a service may collect for one purpose.

    An empty field set marks a service that handles no personal data.
    """

    purpose: str
    allowed_fields: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.purpose:
            raise ValueError("purpose tag must be non-empty")
        object.__setattr__(self, "allowed_fields", frozenset(self.allowed_fields))

    @property
    def personal(self) -> bool:
        return bool(self.allowed_fields)

    def accepts(self, field_names) -> bool:
        return set(field_names) <= self.allowed_fields


@dataclass(frozen=True)
class PersonalDataRecord:
    record_id: str
    subject: str
    service_id: str
    purpose: str
    fields: Mapping[str, str] = field(default_factory=dict)
    stored_at: int = 0

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "subject": self.subject,
            "service_id": self.service_id,
            "purpose": self.purpose,
            "fields": dict(self.fields),
            "stored_at": self.stored_at,
        }


@dataclass(frozen=True)
class MinimizationViolation:
    record_id: str
    purpose: str
    extra_fields: frozenset[str]


def check_minimization(record: PersonalDataRecord, schema: DataSchema) -> MinimizationViolation | None:
    """``None`` when the record only carries allowed fields."""
    if record.purpose != schema.purpose:
        raise PurposeMismatch(f"record purpose {record.purpose!r} != schema purpose {schema.purpose!r}")
    extra = frozenset(record.fields) - schema.allowed_fields
    if not extra:
        return None
    return MinimizationViolation(record.record_id, record.purpose, extra)
