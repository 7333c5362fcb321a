"""Client library that tools embed to report each data access.

The contract is transparency by design: a tool wraps its data reads in
:func:`guarded_access`, and in the default fail-closed mode the read simply
does not happen unless the usage was durably logged first. Reporting is
synchronous; a fire-and-forget buffer would make fail-closed meaningless.

Each logical access gets one client-generated event id that is reused across
retries, so the safekeeper stores exactly one event no matter how many
responses got lost on the way back.
"""

from __future__ import annotations

import time
import uuid
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, TypeVar

import httpx

from .model import UsageEvent, ms_to_rfc3339
from .wire import event_from_dict

__all__ = [
    "FailMode",
    "RetryPolicy",
    "MonitorConfig",
    "AccessContext",
    "MonitorError",
    "TokenUnavailable",
    "TransportFailure",
    "Rejected",
    "MonitorWarning",
    "record_access",
    "guarded_access",
]

T = TypeVar("T")


class FailMode(str, Enum):
    #: data access happens only after the usage is logged
    CLOSED = "closed"
    #: data access happens regardless; a logging failure becomes a warning
    OPEN = "open"


class MonitorError(Exception):
    """Base class for reporting failures."""


class TokenUnavailable(MonitorError):
    """The token supplier raised or returned nothing usable."""


class TransportFailure(MonitorError):
    """The safekeeper stayed unreachable after all attempts."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class Rejected(MonitorError):
    """The safekeeper refused the report (4xx); not retried."""

    def __init__(self, status_code: int, detail: str):
        super().__init__(f"safekeeper rejected report ({status_code}): {detail}")
        self.status_code = status_code
        self.detail = detail


class MonitorWarning(UserWarning):
    """Fail-open mode proceeded with the access despite a logging failure."""


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base_ms: int = 100
    multiplier: float = 2.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.backoff_base_ms < 0 or self.multiplier <= 0:
            raise ValueError("backoff parameters must be positive")

    def delay_ms(self, completed_attempts: int) -> float:
        return self.backoff_base_ms * self.multiplier ** (completed_attempts - 1)


@dataclass(frozen=True)
class MonitorConfig:
    """Immutable client configuration; safe to share across threads.

    ``token_supplier`` is called per attempt so callers can rotate
    credentials. ``transport`` and ``sleep`` are seams for tests.
    """

    safekeeper_url: str
    token_supplier: Callable[[], str]
    tool_id: str
    fail_mode: FailMode = FailMode.CLOSED
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    timeout_ms: int = 2000
    transport: Optional[httpx.BaseTransport] = None
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self) -> None:
        if not self.safekeeper_url:
            raise ValueError("safekeeper_url must be set")
        if not self.tool_id:
            raise ValueError("tool_id must be set")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")


@dataclass(frozen=True)
class AccessContext:
    """What one logical data access touches."""

    owner_ids: tuple[str, ...]
    data_source: str
    accessed_fields: tuple[str, ...] = ()
    purpose: str = ""


def _current_token(config: MonitorConfig) -> str:
    try:
        token = config.token_supplier()
    except Exception as exc:
        raise TokenUnavailable(f"token supplier failed: {exc}") from exc
    if not isinstance(token, str) or not token:
        raise TokenUnavailable("token supplier returned no token")
    return token


def record_access(
    config: MonitorConfig, ctx: AccessContext, now_ms: Optional[int] = None
) -> UsageEvent:
    """Report one data access; returns the stored event acknowledgment.

    Retries transport errors and 5xx responses with exponential backoff;
    4xx responses are permanent and raise :class:`Rejected` immediately.
    """
    if not ctx.owner_ids:
        raise ValueError("owner_ids must be nonempty")
    if not ctx.data_source:
        raise ValueError("data_source must be set")
    occurred_at_ms = time.time_ns() // 1_000_000 if now_ms is None else now_ms
    body = {
        "event_id": uuid.uuid4().hex,
        "owner_ids": sorted(set(ctx.owner_ids)),
        "tool_id": config.tool_id,
        "data_source": ctx.data_source,
        "accessed_fields": list(ctx.accessed_fields),
        "purpose": ctx.purpose,
        "occurred_at": ms_to_rfc3339(occurred_at_ms),
    }
    url = config.safekeeper_url.rstrip("/") + "/v1/usages"
    timeout = config.timeout_ms / 1000
    last_failure = "no attempt made"
    attempts = 0
    with httpx.Client(transport=config.transport, timeout=timeout) as client:
        for attempt in range(1, config.retry.max_attempts + 1):
            attempts = attempt
            token = _current_token(config)
            try:
                response = client.post(
                    url, json=body, headers={"Authorization": f"Bearer {token}"}
                )
            except httpx.HTTPError as exc:
                last_failure = f"transport error: {exc}"
            else:
                if response.status_code in (200, 201):
                    return event_from_dict(response.json())
                if 400 <= response.status_code < 500:
                    raise Rejected(response.status_code, response.text)
                last_failure = f"server error {response.status_code}"
            if attempt < config.retry.max_attempts:
                config.sleep(config.retry.delay_ms(attempt) / 1000)
    raise TransportFailure(f"gave up after {attempts} attempts: {last_failure}", attempts)


def guarded_access(
    config: MonitorConfig,
    ctx: AccessContext,
    supplier: Callable[[], T],
    now_ms: Optional[int] = None,
) -> T:
    """Run ``supplier`` under the configured fail mode.

    Fail-closed: the supplier runs only after :func:`record_access`
    succeeds; any reporting error aborts the access. Fail-open: the supplier
    always runs, and a reporting failure is surfaced to the caller as a
    :class:`MonitorWarning`.
    """
    if config.fail_mode is FailMode.CLOSED:
        record_access(config, ctx, now_ms)
        return supplier()
    try:
        record_access(config, ctx, now_ms)
    except MonitorError as exc:
        warnings.warn(MonitorWarning(f"usage not logged: {exc}"), stacklevel=2)
    return supplier()
