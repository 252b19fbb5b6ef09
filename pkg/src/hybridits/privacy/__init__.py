"""Protection-goal enforcement: minimization, transparency, subject rights, linkability."""

from .linkability import (
    IdentifierEquality,
    LinkabilityReport,
    Observation,
    SpatioTemporal,
    adversary_by_name,
    analyze_linkability,
)
from .mediator import DataProtectionContact, MediationResult, ProviderOutcome, mediate_request, prepare_requests
from .model import DataSchema, MinimizationViolation, PersonalDataRecord, ProtectionGoal, check_minimization
from .rights import (
    AuthenticatedRequest,
    PortabilityBundle,
    ProviderStore,
    RequestKind,
    SubjectRequest,
    SubjectResponse,
    authenticate,
    handle_subject_request,
    import_bundle,
)
from .translog import TransparencyLog, TransparencyLogEntry, log_processing, verify_chain

__all__ = [
    "AuthenticatedRequest",
    "DataProtectionContact",
    "DataSchema",
    "IdentifierEquality",
    "LinkabilityReport",
    "MediationResult",
    "MinimizationViolation",
    "Observation",
    "PersonalDataRecord",
    "PortabilityBundle",
    "ProtectionGoal",
    "ProviderOutcome",
    "ProviderStore",
    "RequestKind",
    "SpatioTemporal",
    "SubjectRequest",
    "SubjectResponse",
    "TransparencyLog",
    "TransparencyLogEntry",
    "adversary_by_name",
    "analyze_linkability",
    "authenticate",
    "check_minimization",
    "handle_subject_request",
    "import_bundle",
    "log_processing",
    "mediate_request",
    "prepare_requests",
    "verify_chain",
]
