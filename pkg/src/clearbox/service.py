"""The safekeeper: verifies incoming usage reports, appends them to the
hash-chained log, and answers owner-scoped queries.

Authorization is derived from the presented token, never from request
parameters: an owner sees exactly the events that name them, a consumer may
only log under their own identity, and an admin is unrestricted. Appends go
through a single-writer critical section so the chain has a total order;
reads observe a prefix of the log.
"""

from __future__ import annotations

import base64
import binascii
import statistics
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Callable, Optional

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

from . import authkit
from .authkit import Claims, Role, TokenError
from .model import (
    DEFAULT_CLOCK_SKEW_SECONDS,
    GENESIS_HASH,
    UsageEvent,
    VerificationReport,
    compute_entry_hash,
    validate_event_fields,
    verify_chain,
)
from .storage import StorageBackend, StorageCorruption
from .wire import JustificationRequest, JustificationStatus, UsageReport

__all__ = [
    "SafekeeperError",
    "Unauthorized",
    "Forbidden",
    "InvalidReport",
    "Conflict",
    "InvalidQuery",
    "BadPageToken",
    "NotFound",
    "AlreadyAnswered",
    "StorageFailure",
    "UsageQuery",
    "QueryPage",
    "UsageSummary",
    "Safekeeper",
    "DEFAULT_ANOMALY_WINDOW_MS",
    "DEFAULT_ANOMALY_HISTORY",
]

#: Defaults for the anomaly scorer when a caller does not choose a window.
DEFAULT_ANOMALY_WINDOW_MS = 7 * 24 * 3600 * 1000
DEFAULT_ANOMALY_HISTORY = 4
_ANOMALY_EPSILON = 1.0


class SafekeeperError(Exception):
    code = "error"
    http_status = 500


class Unauthorized(SafekeeperError):
    code = "unauthorized"
    http_status = 401


class Forbidden(SafekeeperError):
    code = "forbidden"
    http_status = 403


class InvalidReport(SafekeeperError):
    code = "invalid_report"
    http_status = 422


class Conflict(SafekeeperError):
    code = "conflict"
    http_status = 409


class InvalidQuery(SafekeeperError):
    code = "invalid_query"
    http_status = 422


class BadPageToken(SafekeeperError):
    code = "bad_page_token"
    http_status = 422


class NotFound(SafekeeperError):
    code = "not_found"
    http_status = 404


class AlreadyAnswered(SafekeeperError):
    code = "already_answered"
    http_status = 409


class StorageFailure(SafekeeperError):
    code = "storage_failure"
    http_status = 500


@dataclass(frozen=True)
class UsageQuery:
    """Owner-scoped event query; the owner is taken from the token."""

    from_ms: Optional[int] = None
    to_ms: Optional[int] = None
    consumer_id: Optional[str] = None
    data_source: Optional[str] = None
    page_size: int = 100
    page_token: Optional[str] = None


@dataclass(frozen=True)
class QueryPage:
    events: list[UsageEvent]
    next_page_token: Optional[str] = None


@dataclass(frozen=True)
class UsageSummary:
    """Owner-facing aggregate over a time window.

    ``total_count`` always equals both the sum of ``per_consumer_counts`` and
    the sum of ``weekly_buckets``; weekly buckets are ISO weeks (Monday,
    UTC), zero-filled across the effective window.
    """

    owner_id: str
    from_ms: Optional[int]
    to_ms: Optional[int]
    total_count: int
    per_consumer_counts: dict[str, int]
    per_source_counts: dict[str, int]
    weekly_buckets: list[tuple[str, int]]
    anomaly_scores: dict[str, float]


def _encode_page_token(last_sequence: int) -> str:
    return base64.urlsafe_b64encode(f"s:{last_sequence}".encode("ascii")).decode("ascii")


def _decode_page_token(token: str) -> int:
    try:
        decoded = base64.urlsafe_b64decode(token.encode("ascii")).decode("ascii")
        tag, _, value = decoded.partition(":")
        if tag != "s":
            raise ValueError(decoded)
        return int(value)
    except (binascii.Error, ValueError, UnicodeDecodeError) as exc:
        raise BadPageToken(f"unusable page token: {token!r}") from exc


def _iso_week_start(ms: int) -> str:
    day = datetime.fromtimestamp(ms // 1000, tz=timezone.utc).date()
    return (day - timedelta(days=day.isoweekday() - 1)).isoformat()


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


class Safekeeper:
    """Service facade over one storage backend and one authority key."""

    def __init__(
        self,
        storage: StorageBackend,
        verifying_key: Ed25519PublicKey,
        clock_skew_seconds: int = DEFAULT_CLOCK_SKEW_SECONDS,
        clock: Callable[[], int] = _now_ms,
    ) -> None:
        self._storage = storage
        self._verifying_key = verifying_key
        self._clock_skew_ms = clock_skew_seconds * 1000
        self._clock = clock
        self._append_lock = threading.Lock()
        self._justification_lock = threading.Lock()

    # -- authentication ----------------------------------------------------

    def _authenticate(self, token: str) -> Claims:
        try:
            return authkit.verify_token(self._verifying_key, token, now=self._clock() // 1000)
        except TokenError as exc:
            raise Unauthorized(f"{exc.code}: {exc}") from exc

    def _authenticate_as(self, token: str, *roles: Role) -> Claims:
        claims = self._authenticate(token)
        if claims.role not in roles:
            raise Forbidden(f"role {claims.role.value} may not call this operation")
        return claims

    # -- logging -----------------------------------------------------------

    def log_usage(self, token: str, report: UsageReport) -> tuple[UsageEvent, bool]:
        """Verify, deduplicate, and append one usage report.

        Returns ``(event, created)``; ``created`` is False when the same
        event_id with identical content was already stored (idempotent
        replay). A same-id report with different content is a conflict.
        """
        claims = self._authenticate_as(token, Role.CONSUMER, Role.ADMIN)
        if report.consumer_id is not None and report.consumer_id != claims.subject:
            raise InvalidReport("consumer_id must match the token subject")
        now_ms = self._clock()
        if report.occurred_at_ms > now_ms + self._clock_skew_ms:
            raise InvalidReport(
                f"occurred_at is {report.occurred_at_ms - now_ms} ms in the future"
            )

        with self._append_lock:
            existing = self._storage.get_by_event_id(report.event_id)
            if existing is not None:
                if self._report_matches_event(report, claims.subject, existing):
                    return existing, False
                raise Conflict(f"event_id {report.event_id} already stored with different content")

            last = self._storage.last()
            event = UsageEvent(
                event_id=report.event_id,
                consumer_id=claims.subject,
                owner_ids=report.owner_ids,
                tool_id=report.tool_id,
                data_source=report.data_source,
                accessed_fields=report.accessed_fields,
                purpose=report.purpose,
                occurred_at_ms=report.occurred_at_ms,
                token_fingerprint=authkit.token_fingerprint(token),
                sequence=0 if last is None else last.sequence + 1,
                prev_hash=GENESIS_HASH if last is None else last.entry_hash,
            )
            problems = validate_event_fields(event)
            if problems:
                raise InvalidReport("; ".join(problems))
            event = replace(event, entry_hash=compute_entry_hash(event))
            try:
                self._storage.append(event)
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc
            return event, True

    @staticmethod
    def _report_matches_event(report: UsageReport, subject: str, event: UsageEvent) -> bool:
        # Identical content ignoring safekeeper-assigned fields; the token
        # fingerprint may legitimately differ across retries (token refresh).
        return (
            event.consumer_id == subject
            and event.owner_ids == report.owner_ids
            and event.tool_id == report.tool_id
            and event.data_source == report.data_source
            and event.accessed_fields == report.accessed_fields
            and event.purpose == report.purpose
            and event.occurred_at_ms == report.occurred_at_ms
        )

    # -- queries -----------------------------------------------------------

    def _owner_scope(self, claims: Claims) -> Optional[str]:
        """The owner id events must contain, or None for unrestricted admin."""
        return None if claims.role is Role.ADMIN else claims.subject

    def _scoped_events(
        self,
        claims: Claims,
        from_ms: Optional[int] = None,
        to_ms: Optional[int] = None,
        consumer_id: Optional[str] = None,
        data_source: Optional[str] = None,
    ) -> list[UsageEvent]:
        try:
            events = self._storage.scan(from_ms, to_ms, consumer_id, data_source)
        except (OSError, StorageCorruption) as exc:
            raise StorageFailure(str(exc)) from exc
        owner = self._owner_scope(claims)
        if owner is None:
            return events
        return [e for e in events if owner in e.owner_ids]

    def query_usages(self, token: str, query: UsageQuery) -> QueryPage:
        """Events visible to the token's subject, filtered and paginated."""
        claims = self._authenticate_as(token, Role.OWNER, Role.ADMIN)
        if query.from_ms is not None and query.to_ms is not None and query.from_ms >= query.to_ms:
            raise InvalidQuery("from must be before to")
        if not 1 <= query.page_size <= 1000:
            raise InvalidQuery(f"page_size must be in 1..1000, got {query.page_size}")
        after_sequence = -1
        if query.page_token is not None:
            after_sequence = _decode_page_token(query.page_token)

        events = self._scoped_events(
            claims, query.from_ms, query.to_ms, query.consumer_id, query.data_source
        )
        remaining = [e for e in events if e.sequence > after_sequence]
        page = remaining[: query.page_size]
        next_token = (
            _encode_page_token(page[-1].sequence) if len(remaining) > len(page) else None
        )
        return QueryPage(events=page, next_page_token=next_token)

    def summarize(
        self, token: str, from_ms: Optional[int] = None, to_ms: Optional[int] = None
    ) -> UsageSummary:
        """Exact aggregates over the subject's events in [from, to)."""
        claims = self._authenticate_as(token, Role.OWNER, Role.ADMIN)
        if from_ms is not None and to_ms is not None and from_ms >= to_ms:
            raise InvalidQuery("from must be before to")
        events = self._scoped_events(claims, from_ms, to_ms)

        per_consumer: dict[str, int] = {}
        per_source: dict[str, int] = {}
        for event in events:
            per_consumer[event.consumer_id] = per_consumer.get(event.consumer_id, 0) + 1
            per_source[event.data_source] = per_source.get(event.data_source, 0) + 1

        weekly = self._weekly_buckets(events, from_ms, to_ms)
        anchor = to_ms if to_ms is not None else self._clock()
        scores = self._score_consumers(
            self._scoped_events(claims), anchor, DEFAULT_ANOMALY_WINDOW_MS, DEFAULT_ANOMALY_HISTORY
        )
        return UsageSummary(
            owner_id=claims.subject,
            from_ms=from_ms,
            to_ms=to_ms,
            total_count=len(events),
            per_consumer_counts=dict(sorted(per_consumer.items())),
            per_source_counts=dict(sorted(per_source.items())),
            weekly_buckets=weekly,
            anomaly_scores=scores,
        )

    @staticmethod
    def _weekly_buckets(
        events: list[UsageEvent], from_ms: Optional[int], to_ms: Optional[int]
    ) -> list[tuple[str, int]]:
        """Counts per ISO week (Monday start, UTC), zero-filled across the
        effective window so graphs show quiet weeks as zeroes."""
        counts: dict[str, int] = {}
        for event in events:
            week = _iso_week_start(event.occurred_at_ms)
            counts[week] = counts.get(week, 0) + 1
        lo = from_ms if from_ms is not None else min((e.occurred_at_ms for e in events), default=None)
        hi_exclusive = to_ms if to_ms is not None else (
            max((e.occurred_at_ms for e in events), default=0) + 1 if events else None
        )
        if lo is None or hi_exclusive is None or lo >= hi_exclusive:
            return []
        first = datetime.fromisoformat(_iso_week_start(lo)).date()
        last = datetime.fromisoformat(_iso_week_start(hi_exclusive - 1)).date()
        buckets: list[tuple[str, int]] = []
        week = first
        while week <= last:
            key = week.isoformat()
            buckets.append((key, counts.get(key, 0)))
            week += timedelta(days=7)
        return buckets

    # -- anomaly scoring ---------------------------------------------------

    def anomaly_scores(
        self,
        token: str,
        window_length_ms: int = DEFAULT_ANOMALY_WINDOW_MS,
        history_windows: int = DEFAULT_ANOMALY_HISTORY,
    ) -> dict[str, float]:
        """Per-consumer burst score over the subject's events.

        The score compares each consumer's count in the most recent window of
        ``window_length_ms`` against the mean and spread of their counts in
        the ``history_windows`` windows preceding it:

            (current - mean(history)) / (stddev(history) + 1)

        Population standard deviation; the +1 keeps quiet histories from
        exploding the ratio. Consumers with no events in any considered
        window are omitted.
        """
        claims = self._authenticate_as(token, Role.OWNER, Role.ADMIN)
        if window_length_ms <= 0:
            raise InvalidQuery("window length must be positive")
        if history_windows < 2:
            raise InvalidQuery("history must cover at least 2 windows")
        events = self._scoped_events(claims)
        return self._score_consumers(events, self._clock(), window_length_ms, history_windows)

    @staticmethod
    def _score_consumers(
        events: list[UsageEvent], anchor_ms: int, window_ms: int, history_windows: int
    ) -> dict[str, float]:
        # Window i counts events in [anchor - (i+1)*w, anchor - i*w); i = 0 is
        # the current window, i = 1..history the history.
        counts: dict[str, list[int]] = {}
        window_count = history_windows + 1
        lo_bound = anchor_ms - window_count * window_ms
        for event in events:
            if not lo_bound <= event.occurred_at_ms < anchor_ms:
                continue
            index = (anchor_ms - 1 - event.occurred_at_ms) // window_ms
            per_consumer = counts.setdefault(event.consumer_id, [0] * window_count)
            per_consumer[index] += 1
        scores: dict[str, float] = {}
        for consumer, windows in sorted(counts.items()):
            current, history = windows[0], windows[1:]
            scores[consumer] = (current - statistics.fmean(history)) / (
                statistics.pstdev(history) + _ANOMALY_EPSILON
            )
        return scores

    # -- integrity ---------------------------------------------------------

    def verify_integrity(self, token: str) -> VerificationReport:
        """Re-verify the complete stored chain; any authenticated principal
        may call this."""
        self._authenticate(token)
        try:
            events = self._storage.scan()
        except (OSError, StorageCorruption) as exc:
            raise StorageFailure(str(exc)) from exc
        return verify_chain(events)

    # -- justification requests --------------------------------------------

    def create_justification_request(
        self, token: str, event_id: str, message: str
    ) -> JustificationRequest:
        claims = self._authenticate_as(token, Role.OWNER, Role.ADMIN)
        event = self._storage.get_by_event_id(event_id)
        if event is None:
            raise NotFound(f"no event {event_id}")
        if claims.subject not in event.owner_ids:
            raise Forbidden("only an owner of the event may request justification")
        request = JustificationRequest(
            request_id=uuid.uuid4().hex,
            event_id=event_id,
            owner_id=claims.subject,
            message=message,
            status=JustificationStatus.OPEN,
            created_at_ms=self._clock(),
        )
        self._storage.put_justification(request)
        return request

    def list_justification_requests(self, token: str) -> list[JustificationRequest]:
        """Role-scoped listing: owners see the requests they filed, consumers
        the requests aimed at their usages, admins everything."""
        claims = self._authenticate(token)
        requests = self._storage.list_justifications()
        if claims.role is Role.ADMIN:
            return requests
        if claims.role is Role.OWNER:
            return [r for r in requests if r.owner_id == claims.subject]
        visible = []
        for request in requests:
            event = self._storage.get_by_event_id(request.event_id)
            if event is not None and event.consumer_id == claims.subject:
                visible.append(request)
        return visible

    def answer_justification_request(
        self, token: str, request_id: str, response: str
    ) -> JustificationRequest:
        claims = self._authenticate_as(token, Role.CONSUMER, Role.ADMIN)
        if not isinstance(response, str) or not response:
            raise InvalidQuery("response must be a nonempty string")
        with self._justification_lock:
            request = self._storage.get_justification(request_id)
            if request is None:
                raise NotFound(f"no justification request {request_id}")
            event = self._storage.get_by_event_id(request.event_id)
            if event is None or event.consumer_id != claims.subject:
                raise Forbidden("only the consumer of the event may answer")
            if request.status is JustificationStatus.ANSWERED:
                raise AlreadyAnswered(f"request {request_id} was already answered")
            answered = replace(
                request,
                status=JustificationStatus.ANSWERED,
                response=response,
                answered_at_ms=self._clock(),
            )
            self._storage.put_justification(answered)
            return answered
