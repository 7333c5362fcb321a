"""Domain model for the tamper-evident usage log.

A usage event records one access to personal data: who consumed whose data,
through which tool, from which source, and when. Events form a hash chain:
each record's digest covers its predecessor's digest, so deleting, modifying,
or reordering any stored record is detectable by re-verification.

The canonical byte encoding is a bespoke length-prefixed layout rather than
serialized JSON, so wire-format or storage-format changes can never silently
alter digests.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional, Sequence

__all__ = [
    "GENESIS_HASH",
    "DEFAULT_CLOCK_SKEW_SECONDS",
    "EncodingError",
    "UsageEvent",
    "VerificationReport",
    "FailureReason",
    "canonical_encode",
    "compute_entry_hash",
    "verify_chain",
    "validate_event_fields",
    "ms_to_rfc3339",
    "rfc3339_to_ms",
]

#: prev_hash of the very first record in a log.
GENESIS_HASH = "0" * 64

#: How far in the future (relative to safekeeper receipt time) an event
#: timestamp may lie. Reporting hosts are not assumed time-synchronized.
DEFAULT_CLOCK_SKEW_SECONDS = 300

# Domain-separation prefix; bump the version on any layout change.
_FORMAT_TAG = b"clearbox.usage.v1\x00"

_HEX_DIGITS = set("0123456789abcdef")


class EncodingError(ValueError):
    """Raised when an event cannot be canonically encoded."""


@dataclass(frozen=True)
class UsageEvent:
    """One logged data access, as stored in the chain.

    ``sequence``, ``prev_hash``, ``entry_hash`` and ``token_fingerprint`` are
    assigned by the safekeeper; everything else originates from the reporting
    client. ``event_id`` is the client-generated idempotency key.

    Instances are plain values: construction does not validate, so that
    hostile or tampered records read back from storage can still be
    represented and fed to :func:`verify_chain`. Use
    :func:`validate_event_fields` to check field invariants.
    """

    event_id: str
    consumer_id: str
    owner_ids: tuple[str, ...]
    tool_id: str
    data_source: str
    accessed_fields: tuple[str, ...]
    purpose: str
    occurred_at_ms: int
    token_fingerprint: str
    sequence: int
    prev_hash: str
    entry_hash: str = ""

    def __post_init__(self) -> None:
        # Normalize list fields to tuples so events hash/compare as values.
        object.__setattr__(self, "owner_ids", tuple(self.owner_ids))
        object.__setattr__(self, "accessed_fields", tuple(self.accessed_fields))


class FailureReason(str, Enum):
    """Why chain verification failed."""

    HASH_MISMATCH = "hash_mismatch"
    CHAIN_BREAK = "chain_break"
    SEQUENCE_GAP = "sequence_gap"
    BAD_ENCODING = "bad_encoding"


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of verifying a chain.

    ``checked_count`` is the number of records that verified cleanly; on
    failure it equals ``first_bad_sequence``. ``valid`` holds exactly when
    ``first_bad_sequence`` is absent.
    """

    valid: bool
    checked_count: int
    first_bad_sequence: Optional[int] = None
    reason: Optional[FailureReason] = None

    def to_dict(self) -> dict:
        out: dict = {"valid": self.valid, "checked_count": self.checked_count}
        if self.first_bad_sequence is not None:
            out["first_bad_sequence"] = self.first_bad_sequence
        if self.reason is not None:
            out["reason"] = self.reason.value
        return out


def _encode_bytes(raw: bytes) -> bytes:
    return struct.pack(">I", len(raw)) + raw


def _encode_str(value: str) -> bytes:
    if not isinstance(value, str):
        raise EncodingError(f"expected str, got {type(value).__name__}")
    try:
        return _encode_bytes(value.encode("utf-8"))
    except UnicodeEncodeError as exc:
        raise EncodingError(f"not valid UTF-8: {exc}") from exc


def _encode_list(values: Sequence[str]) -> bytes:
    return struct.pack(">I", len(values)) + b"".join(_encode_str(v) for v in values)


def _encode_nonnegative(value: int, name: str) -> bytes:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise EncodingError(f"{name} must be a nonnegative integer, got {value!r}")
    return _encode_str(str(value))


def canonical_encode(event: UsageEvent) -> bytes:
    """Deterministic, injective byte encoding of an event, sans ``entry_hash``.

    Field order is fixed; strings are UTF-8; the timestamp is encoded as
    decimal milliseconds; lists are length-prefixed. Two events encode to the
    same bytes iff they agree on every covered field.

    Raises :class:`EncodingError` on unencodable strings or a negative
    timestamp/sequence.
    """
    return b"".join(
        (
            _FORMAT_TAG,
            _encode_str(event.event_id),
            _encode_str(event.consumer_id),
            _encode_list(event.owner_ids),
            _encode_str(event.tool_id),
            _encode_str(event.data_source),
            _encode_list(event.accessed_fields),
            _encode_str(event.purpose),
            _encode_nonnegative(event.occurred_at_ms, "occurred_at_ms"),
            _encode_str(event.token_fingerprint),
            _encode_nonnegative(event.sequence, "sequence"),
            _encode_str(event.prev_hash),
        )
    )


def compute_entry_hash(event: UsageEvent) -> str:
    """SHA-256 over :func:`canonical_encode`, as lowercase hex."""
    return hashlib.sha256(canonical_encode(event)).hexdigest()


def _is_hex_digest(value: object) -> bool:
    return (
        isinstance(value, str)
        and len(value) == 64
        and all(c in _HEX_DIGITS for c in value)
    )


def validate_event_fields(event: UsageEvent) -> list[str]:
    """Check field invariants; returns a list of violations (empty if clean).

    Chain linkage (prev_hash/entry_hash correctness) is the business of
    :func:`verify_chain`, not of this per-record check.
    """
    problems: list[str] = []
    for name in ("event_id", "consumer_id", "tool_id", "data_source"):
        value = getattr(event, name)
        if not isinstance(value, str) or not value:
            problems.append(f"{name} must be a nonempty string")
    if not event.owner_ids:
        problems.append("owner_ids must be nonempty")
    elif any(not isinstance(o, str) or not o for o in event.owner_ids):
        problems.append("owner_ids entries must be nonempty strings")
    elif list(event.owner_ids) != sorted(set(event.owner_ids)):
        problems.append("owner_ids must be sorted and deduplicated")
    if any(not isinstance(f, str) for f in event.accessed_fields):
        problems.append("accessed_fields entries must be strings")
    if not isinstance(event.purpose, str):
        problems.append("purpose must be a string")
    if not isinstance(event.occurred_at_ms, int) or event.occurred_at_ms < 0:
        problems.append("occurred_at_ms must be a nonnegative integer")
    if not _is_hex_digest(event.token_fingerprint):
        problems.append("token_fingerprint must be a 64-char lowercase hex digest")
    return problems


def verify_chain(events: Sequence[UsageEvent]) -> VerificationReport:
    """Verify an ordered list of events as a complete chain.

    Valid iff sequences run 0..n-1 without gaps, every ``prev_hash`` equals the
    predecessor's ``entry_hash`` (genesis for sequence 0), and every
    ``entry_hash`` recomputes from the record's canonical encoding. Failures
    are reported, never raised; ``first_bad_sequence`` is the smallest
    offending position.
    """
    prev_hash = GENESIS_HASH
    for position, event in enumerate(events):
        if event.sequence != position:
            return VerificationReport(False, position, position, FailureReason.SEQUENCE_GAP)
        if event.prev_hash != prev_hash:
            return VerificationReport(False, position, position, FailureReason.CHAIN_BREAK)
        try:
            recomputed = compute_entry_hash(event)
        except EncodingError:
            return VerificationReport(False, position, position, FailureReason.BAD_ENCODING)
        if event.entry_hash != recomputed:
            return VerificationReport(False, position, position, FailureReason.HASH_MISMATCH)
        prev_hash = event.entry_hash
    return VerificationReport(True, len(events))


def ms_to_rfc3339(ms: int) -> str:
    """Epoch milliseconds to an RFC 3339 UTC string with millisecond precision."""
    seconds, millis = divmod(ms, 1000)
    dt = datetime.fromtimestamp(seconds, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{millis:03d}Z"


def rfc3339_to_ms(text: str) -> int:
    """Parse an RFC 3339 timestamp to epoch milliseconds (UTC).

    Accepts 'Z' or numeric offsets; sub-millisecond digits are truncated.
    """
    if not isinstance(text, str):
        raise ValueError("timestamp must be a string")
    normalized = text.strip()
    if normalized.endswith(("Z", "z")):
        normalized = normalized[:-1] + "+00:00"
    dt = datetime.fromisoformat(normalized)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp must carry a UTC offset: {text!r}")
    # Integer math end to end; float epoch seconds would wobble at ms scale.
    offset = dt.utcoffset()
    assert offset is not None
    naive_utc = dt.replace(tzinfo=None) - offset
    delta = naive_utc - datetime(1970, 1, 1)
    return (delta.days * 86400 + delta.seconds) * 1000 + delta.microseconds // 1000
