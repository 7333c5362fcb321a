"""JSON wire and storage formats shared by the safekeeper, its clients, and storage.

Timestamps travel as RFC 3339 UTC strings, digests as lowercase hex. Event
objects serialize with keys in canonical field order, which is also the
line format of the JSON-lines storage backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from .model import UsageEvent, ms_to_rfc3339, rfc3339_to_ms

__all__ = [
    "ReportValidationError",
    "UsageReport",
    "JustificationStatus",
    "JustificationRequest",
    "parse_report",
    "report_to_dict",
    "event_to_dict",
    "event_from_dict",
    "justification_to_dict",
    "justification_from_dict",
]


class ReportValidationError(ValueError):
    """A usage report violates field invariants."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class UsageReport:
    """A usage report as submitted by a monitor, before the safekeeper
    assigns chain position and token fingerprint.

    ``consumer_id`` is implied by the presented token; when a client includes
    it anyway it must match the token subject.
    """

    event_id: str
    owner_ids: tuple[str, ...]
    tool_id: str
    data_source: str
    accessed_fields: tuple[str, ...]
    purpose: str
    occurred_at_ms: int
    consumer_id: Optional[str] = None


class JustificationStatus(str, Enum):
    OPEN = "open"
    ANSWERED = "answered"


@dataclass(frozen=True)
class JustificationRequest:
    """An owner's request that a consumer explain one logged usage."""

    request_id: str
    event_id: str
    owner_id: str
    message: str
    status: JustificationStatus
    created_at_ms: int
    response: Optional[str] = None
    answered_at_ms: Optional[int] = None


def _require_str(data: dict, key: str, problems: list[str], *, nonempty: bool) -> str:
    value = data.get(key)
    if not isinstance(value, str) or (nonempty and not value):
        problems.append(f"{key} must be a {'nonempty ' if nonempty else ''}string")
        return ""
    return value


def _require_str_list(data: dict, key: str, problems: list[str]) -> tuple[str, ...]:
    value = data.get(key)
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        problems.append(f"{key} must be a list of strings")
        return ()
    return tuple(value)


def parse_report(data: Any) -> UsageReport:
    """Validate and normalize a usage-report JSON object.

    Owner ids are deduplicated and sorted here, so canonical form never
    depends on the order a client happened to report them in. Raises
    :class:`ReportValidationError` listing every violation found.
    """
    if not isinstance(data, dict):
        raise ReportValidationError(["report must be a JSON object"])
    problems: list[str] = []
    event_id = _require_str(data, "event_id", problems, nonempty=True)
    tool_id = _require_str(data, "tool_id", problems, nonempty=True)
    data_source = _require_str(data, "data_source", problems, nonempty=True)
    purpose = _require_str(data, "purpose", problems, nonempty=False)
    raw_owner_ids = data.get("owner_ids")
    owner_ids = _require_str_list(data, "owner_ids", problems)
    if isinstance(raw_owner_ids, list) and all(isinstance(v, str) for v in raw_owner_ids):
        if not owner_ids:
            problems.append("owner_ids must be nonempty")
        elif any(not o for o in owner_ids):
            problems.append("owner_ids entries must be nonempty")
    accessed_fields = _require_str_list(data, "accessed_fields", problems)
    occurred_at_ms = 0
    try:
        occurred_at_ms = rfc3339_to_ms(data.get("occurred_at"))
    except (ValueError, TypeError):
        problems.append("occurred_at must be an RFC 3339 timestamp")
    consumer_id = data.get("consumer_id")
    if consumer_id is not None and (not isinstance(consumer_id, str) or not consumer_id):
        problems.append("consumer_id, when present, must be a nonempty string")
        consumer_id = None
    if problems:
        raise ReportValidationError(problems)
    return UsageReport(
        event_id=event_id,
        owner_ids=tuple(sorted(set(owner_ids))),
        tool_id=tool_id,
        data_source=data_source,
        accessed_fields=accessed_fields,
        purpose=purpose,
        occurred_at_ms=occurred_at_ms,
        consumer_id=consumer_id,
    )


def report_to_dict(report: UsageReport) -> dict:
    out = {
        "event_id": report.event_id,
        "owner_ids": list(report.owner_ids),
        "tool_id": report.tool_id,
        "data_source": report.data_source,
        "accessed_fields": list(report.accessed_fields),
        "purpose": report.purpose,
        "occurred_at": ms_to_rfc3339(report.occurred_at_ms),
    }
    if report.consumer_id is not None:
        out["consumer_id"] = report.consumer_id
    return out


def event_to_dict(event: UsageEvent) -> dict:
    """Event as a JSON-ready dict, keys in canonical field order."""
    return {
        "event_id": event.event_id,
        "consumer_id": event.consumer_id,
        "owner_ids": list(event.owner_ids),
        "tool_id": event.tool_id,
        "data_source": event.data_source,
        "accessed_fields": list(event.accessed_fields),
        "purpose": event.purpose,
        "occurred_at": ms_to_rfc3339(event.occurred_at_ms),
        "token_fingerprint": event.token_fingerprint,
        "sequence": event.sequence,
        "prev_hash": event.prev_hash,
        "entry_hash": event.entry_hash,
    }


def event_from_dict(data: dict) -> UsageEvent:
    """Rebuild an event from its JSON form, leniently.

    Values are taken as-is so that a tampered stored record still becomes an
    event object for chain verification to flag; an unparseable timestamp is
    mapped to -1, which verification reports as a bad encoding.
    """
    if not isinstance(data, dict):
        raise ValueError("event must be a JSON object")
    missing = [k for k in ("event_id", "sequence", "prev_hash", "entry_hash") if k not in data]
    if missing:
        raise ValueError(f"event object missing keys: {missing}")
    try:
        occurred_at_ms = rfc3339_to_ms(data.get("occurred_at"))
    except (ValueError, TypeError):
        occurred_at_ms = -1
    listify = lambda v: tuple(v) if isinstance(v, list) else (v,)  # noqa: E731
    return UsageEvent(
        event_id=data.get("event_id", ""),
        consumer_id=data.get("consumer_id", ""),
        owner_ids=listify(data.get("owner_ids", [])),
        tool_id=data.get("tool_id", ""),
        data_source=data.get("data_source", ""),
        accessed_fields=listify(data.get("accessed_fields", [])),
        purpose=data.get("purpose", ""),
        occurred_at_ms=occurred_at_ms,
        token_fingerprint=data.get("token_fingerprint", ""),
        sequence=data.get("sequence", -1),
        prev_hash=data.get("prev_hash", ""),
        entry_hash=data.get("entry_hash", ""),
    )


def justification_to_dict(req: JustificationRequest) -> dict:
    out = {
        "request_id": req.request_id,
        "event_id": req.event_id,
        "owner_id": req.owner_id,
        "message": req.message,
        "status": req.status.value,
        "created_at": ms_to_rfc3339(req.created_at_ms),
    }
    if req.response is not None:
        out["response"] = req.response
    if req.answered_at_ms is not None:
        out["answered_at"] = ms_to_rfc3339(req.answered_at_ms)
    return out


def justification_from_dict(data: dict) -> JustificationRequest:
    return JustificationRequest(
        request_id=data["request_id"],
        event_id=data["event_id"],
        owner_id=data["owner_id"],
        message=data["message"],
        status=JustificationStatus(data["status"]),
        created_at_ms=rfc3339_to_ms(data["created_at"]),
        response=data.get("response"),
        answered_at_ms=(
            rfc3339_to_ms(data["answered_at"]) if "answered_at" in data else None
        ),
    )
