"""Provider-side personal data stores and data-subject rights.

Subjects are known to a store only by the pseudonym they used with that
store's service. Every request arrives signed with the key of that pseudonym.

Portability bundle text format (version 1)::

    {
      "format": "hybridits-portability",
      "version": "1",
      "source_service_id": "<service id>",
      "exported_at": "<ms>",
      "settings": {"<name>": "<value>", ...},
      "records": [
        {"record_id": "...", "subject": "...", "service_id": "...",
         "purpose": "...", "stored_at": "<ms>", "fields": {"<name>": "<value>"}}
      ]
    }

JSON, keys sorted, every value a string.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from ..credentials import PseudonymCertificate, PseudonymWallet, TrustAnchors, check_pseudonym
from ..errors import InvalidCredential, SchemaMismatch, UnknownRecord, UnknownSubject
from ..security import SignedBlob, verify
from .model import DataSchema, MinimizationViolation, PersonalDataRecord, check_minimization
from .translog import TransparencyLog

BUNDLE_FORMAT = "hybridits-portability"
BUNDLE_VERSION = "1"
RIGHTS_PURPOSE = "data-subject-rights"


class RequestKind(Enum):
    REVIEW = "review"
    CORRECT = "correct"
    DELETE = "delete"
    EXPORT = "export"
    IMPORT = "import"


@dataclass(frozen=True)
class SubjectRequest:
    kind: RequestKind
    record_id: str | None = None
    field: str | None = None
    value: str | None = None

    @classmethod
    def review(cls) -> "SubjectRequest":
        return cls(RequestKind.REVIEW)

    @classmethod
    def correct(cls, record_id: str, field: str, value: str) -> "SubjectRequest":
        return cls(RequestKind.CORRECT, record_id, field, value)

    @classmethod
    def delete(cls) -> "SubjectRequest":
        return cls(RequestKind.DELETE)

    @classmethod
    def export(cls) -> "SubjectRequest":
        return cls(RequestKind.EXPORT)

    @classmethod
    def import_(cls, bundle: "PortabilityBundle") -> "SubjectRequest":
        return cls(RequestKind.IMPORT, value=bundle.to_text())

    def to_bytes(self) -> bytes:
        body = {"kind": self.kind.value, "record_id": self.record_id, "field": self.field, "value": self.value}
        return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class AuthenticatedRequest:
    service_id: str
    request: SubjectRequest
    credential: PseudonymCertificate
    at: int
    proof: SignedBlob

    def signed_bytes(self) -> bytes:
        return _proof_bytes(self.service_id, self.request, self.at)


def _proof_bytes(service_id: str, request: SubjectRequest, at: int) -> bytes:
    return b"subject-request/v1|" + service_id.encode() + b"|" + str(at).encode() + b"|" + request.to_bytes()


def authenticate(
    wallet: PseudonymWallet,
    service_id: str,
    request: SubjectRequest,
    at: int,
    credential: PseudonymCertificate | None = None,
) -> AuthenticatedRequest:
    """Sign ``request`` with the pseudonym the wallet uses for ``service_id``."""
    cert = credential or wallet.current(service_id, at)
    proof = wallet.holder.platform.sign(wallet.handle(cert), _proof_bytes(service_id, request, at))
    return AuthenticatedRequest(service_id, request, cert, at, proof)


@dataclass(frozen=True)
class PortabilityBundle:
    records: tuple[PersonalDataRecord, ...]
    settings: Mapping[str, str]
    source_service_id: str
    exported_at: int

    def to_text(self) -> str:
        body = {
            "format": BUNDLE_FORMAT,
            "version": BUNDLE_VERSION,
            "source_service_id": self.source_service_id,
            "exported_at": str(self.exported_at),
            "settings": {k: str(v) for k, v in self.settings.items()},
            "records": [
                {
                    "record_id": r.record_id,
                    "subject": r.subject,
                    "service_id": r.service_id,
                    "purpose": r.purpose,
                    "stored_at": str(r.stored_at),
                    "fields": {k: str(v) for k, v in r.fields.items()},
                }
                for r in self.records
            ],
        }
        return json.dumps(body, sort_keys=True, indent=2)

    @classmethod
    def from_text(cls, text: str) -> "PortabilityBundle":
        body = json.loads(text)
        if body.get("format") != BUNDLE_FORMAT:
            raise ValueError("not a portability bundle")
        if body.get("version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported bundle version {body.get('version')!r}")
        records = tuple(
            PersonalDataRecord(
                record_id=r["record_id"],
                subject=r["subject"],
                service_id=r["service_id"],
                purpose=r["purpose"],
                fields=dict(r["fields"]),
                stored_at=int(r["stored_at"]),
            )
            for r in body["records"]
        )
        return cls(records, dict(body["settings"]), body["source_service_id"], int(body["exported_at"]))


@dataclass(frozen=True)
class SubjectResponse:
    service_id: str
    kind: RequestKind
    records: tuple[PersonalDataRecord, ...] = ()
    settings: Mapping[str, str] = field(default_factory=dict)
    bundle: PortabilityBundle | None = None


class ProviderStore:
    """Personal data held by one service, keyed by subject pseudonym."""

    def __init__(
        self,
        service_id: str,
        provider_id: str,
        schema: DataSchema,
        anchors: TrustAnchors,
        log: TransparencyLog,
        setting_names: frozenset[str] = frozenset(),
    ):
        self.service_id = service_id
        self.provider_id = provider_id
        self.schema = schema
        self.setting_names = frozenset(setting_names)
        self.anchors = anchors
        self.log = log
        self._records: dict[str, PersonalDataRecord] = {}
        self._settings: dict[str, dict[str, str]] = {}
        self._known: set[str] = set()
        self._next_id = 0

    @property
    def purpose(self) -> str:
        return self.schema.purpose

    def _new_record_id(self) -> str:
        self._next_id += 1
        return f"{self.service_id}#{self._next_id}"

    def _log(self, subject: str, operation: str, at: int) -> None:
        self.log.append(self.provider_id, subject, operation, self.purpose, at)

    def all_records(self) -> list[PersonalDataRecord]:
        return list(self._records.values())

    def subject_records(self, subject: str) -> list[PersonalDataRecord]:
        return [r for r in self._records.values() if r.subject == subject]

    def settings_of(self, subject: str) -> dict[str, str]:
        return dict(self._settings.get(subject, {}))

    def collect(
        self, subject: str, fields: Mapping[str, str], at: int
    ) -> tuple[PersonalDataRecord | None, MinimizationViolation | None]:
        """Store what a service received.

        Fields named in ``setting_names`` update the subject's settings; the
        rest become a record. Fields outside the schema are reported and
        discarded.
        """
        settings = {k: v for k, v in fields.items() if k in self.setting_names}
        data = {k: v for k, v in fields.items() if k not in self.setting_names}
        record_id = self._new_record_id() if data else f"{self.service_id}#settings"
        violation = check_minimization(
            PersonalDataRecord(record_id, subject, self.service_id, self.purpose, data, at), self.schema
        )
        kept = {k: v for k, v in data.items() if k in self.schema.allowed_fields}
        record = None
        if kept:
            record = PersonalDataRecord(record_id, subject, self.service_id, self.purpose, kept, at)
            self._records[record_id] = record
        if settings:
            self._settings.setdefault(subject, {}).update(settings)
        self._known.add(subject)
        self._log(subject, "collect", at)
        return record, violation

    def put_setting(self, subject: str, name: str, value: str, at: int) -> None:
        self._settings.setdefault(subject, {})[name] = value
        self._known.add(subject)
        self._log(subject, "setting", at)

    def _authenticate(self, auth: AuthenticatedRequest) -> str:
        if auth.service_id != self.service_id:
            raise InvalidCredential(f"request addressed to {auth.service_id}, not {self.service_id}")
        check_pseudonym(auth.credential, self.anchors, auth.at)
        if not verify(auth.credential.public_key, auth.signed_bytes(), auth.proof):
            raise InvalidCredential("request proof does not verify")
        return auth.credential.pseudonym_id


def handle_subject_request(store: ProviderStore, auth: AuthenticatedRequest) -> SubjectResponse:
    subject = store._authenticate(auth)
    request, at = auth.request, auth.at
    if request.kind is RequestKind.IMPORT:
        bundle = PortabilityBundle.from_text(request.value or "")
        import_bundle(store, bundle, subject, at)
        return SubjectResponse(store.service_id, request.kind, tuple(store.subject_records(subject)), store.settings_of(subject))
    if subject not in store._known:
        raise UnknownSubject(subject)

    if request.kind is RequestKind.REVIEW:
        store._log(subject, "review", at)
        return SubjectResponse(store.service_id, request.kind, tuple(store.subject_records(subject)), store.settings_of(subject))

    if request.kind is RequestKind.CORRECT:
        record = store._records.get(request.record_id or "")
        if record is None or record.subject != subject:
            raise UnknownRecord(str(request.record_id))
        if request.field not in store.schema.allowed_fields:
            raise SchemaMismatch(f"{request.field!r} is not collected for {store.purpose}")
        fields = {**record.fields, request.field: request.value or ""}
        updated = PersonalDataRecord(record.record_id, subject, record.service_id, record.purpose, fields, record.stored_at)
        store._records[record.record_id] = updated
        store._log(subject, "correct", at)
        return SubjectResponse(store.service_id, request.kind, (updated,))

    if request.kind is RequestKind.DELETE:
        for record_id in [r.record_id for r in store.subject_records(subject)]:
            del store._records[record_id]
        store._settings.pop(subject, None)
        store._log(subject, "delete", at)
        return SubjectResponse(store.service_id, request.kind)

    records = tuple(
        PersonalDataRecord(r.record_id, r.subject, r.service_id, r.purpose, dict(r.fields), r.stored_at)
        for r in store.subject_records(subject)
    )
    bundle = PortabilityBundle(records, store.settings_of(subject), store.service_id, at)
    store._log(subject, "export", at)
    return SubjectResponse(store.service_id, request.kind, records, bundle.settings, bundle)


def import_bundle(store: ProviderStore, bundle: PortabilityBundle, subject: str, at: int) -> None:
    """Re-key ``bundle`` under ``subject`` at this store; all or nothing."""
    for record in bundle.records:
        if not store.schema.accepts(record.fields):
            extra = sorted(set(record.fields) - store.schema.allowed_fields)
            raise SchemaMismatch(f"{store.service_id} does not accept fields {extra}")
    for record in bundle.records:
        rekeyed = PersonalDataRecord(store._new_record_id(), subject, store.service_id, store.purpose, dict(record.fields), at)
        store._records[rekeyed.record_id] = rekeyed
    store._settings[subject] = dict(bundle.settings)
    store._known.add(subject)
    store._log(subject, "import", at)
