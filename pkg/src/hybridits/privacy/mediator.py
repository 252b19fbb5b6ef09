"""Single point of contact for data-protection requests.

The contact forwards requests the subject already signed per provider. It
keeps no copy of requests or answers, only its own transparency entries,
each referring to an opaque mediation number rather than a pseudonym.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from ..credentials import PseudonymWallet
from ..errors import HybridItsError, UnknownService
from .rights import (
    RIGHTS_PURPOSE,
    AuthenticatedRequest,
    ProviderStore,
    SubjectRequest,
    SubjectResponse,
    authenticate,
    handle_subject_request,
)
from .translog import TransparencyLog


@dataclass(frozen=True)
class ProviderOutcome:
    service_id: str
    response: SubjectResponse | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class MediationResult:
    outcomes: tuple[ProviderOutcome, ...]

    @property
    def merged_records(self) -> list[tuple[str, object]]:
        """(service id, record) pairs across all successful providers."""
        return [(o.service_id, r) for o in self.outcomes if o.response for r in o.response.records]

    @property
    def errors(self) -> list[ProviderOutcome]:
        return [o for o in self.outcomes if not o.ok]


class DataProtectionContact:
    def __init__(self, contact_id: str, directory: Mapping[str, ProviderStore], log: TransparencyLog):
        self.contact_id = contact_id
        self.directory = directory
        self.log = log
        self._mediations = 0


def prepare_requests(
    wallet: PseudonymWallet, service_ids: list[str], request: SubjectRequest, at: int
) -> dict[str, AuthenticatedRequest]:
    """Subject side: one signed request per provider, each under its own pseudonym."""
    return {sid: authenticate(wallet, sid, request, at) for sid in service_ids}


def mediate_request(
    contact: DataProtectionContact, requests: Mapping[str, AuthenticatedRequest], at: int
) -> MediationResult:
    contact._mediations += 1
    kinds = sorted({r.request.kind.value for r in requests.values()}) or ["none"]
    contact.log.append(contact.contact_id, f"mediation-{contact._mediations}", "mediate:" + "+".join(kinds), RIGHTS_PURPOSE, at)
    outcomes = []
    for service_id, auth in requests.items():
        store = contact.directory.get(service_id)
        try:
            if store is None:
                raise UnknownService(service_id)
            outcomes.append(ProviderOutcome(service_id, handle_subject_request(store, auth)))
        except HybridItsError as exc:
            outcomes.append(ProviderOutcome(service_id, error=exc.reason))
    return MediationResult(tuple(outcomes))
