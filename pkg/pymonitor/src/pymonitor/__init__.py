"""Minimal usage-reporting client for the clearbox safekeeper.

Standalone analysis tools embed this module to log each data access over the
safekeeper's HTTP/JSON protocol. Standard library only. Each logical access
gets one client-generated event id, reused across retries, so the safekeeper
stores it exactly once however flaky the network.
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
import uuid
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone

__all__ = ["ClientConfig", "MonitorError", "Rejected", "Unreachable", "record_access"]


class MonitorError(Exception):
    pass


class Rejected(MonitorError):
    """4xx from the safekeeper; permanent, not retried."""

    def __init__(self, status: int, detail: str):
        super().__init__(f"rejected ({status}): {detail}")
        self.status = status


class Unreachable(MonitorError):
    """Safekeeper unreachable after all attempts."""


@dataclass(frozen=True)
class ClientConfig:
    safekeeper_url: str
    token: str
    tool_id: str
    timeout: float = 2.0
    fail_mode: str = "closed"  # "closed" raises on failure, "open" warns
    max_attempts: int = 3
    backoff_base: float = 0.1


def _post(url: str, body: bytes, headers: dict, timeout: float) -> tuple[int, bytes]:
    request = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.status, response.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()


def record_access(
    config: ClientConfig,
    owner_ids: list[str],
    data_source: str,
    accessed_fields: list[str] = (),
    purpose: str = "",
) -> dict | None:
    """Report one data access; returns the stored event as a dict.

    Transport errors and 5xx responses are retried with exponential backoff;
    4xx responses raise immediately. In fail-open mode a final failure is
    downgraded to a warning and None is returned.
    """
    now = datetime.now(timezone.utc)
    occurred_at = now.strftime("%Y-%m-%dT%H:%M:%S.") + f"{now.microsecond // 1000:03d}Z"
    body = json.dumps(
        {
            "event_id": uuid.uuid4().hex,
            "owner_ids": sorted(set(owner_ids)),
            "tool_id": config.tool_id,
            "data_source": data_source,
            "accessed_fields": list(accessed_fields),
            "purpose": purpose,
            "occurred_at": occurred_at,
        }
    ).encode("utf-8")
    headers = {
        "Authorization": f"Bearer {config.token}",
        "Content-Type": "application/json",
    }
    url = config.safekeeper_url.rstrip("/") + "/v1/usages"
    failure: MonitorError = Unreachable("no attempt made")
    for attempt in range(1, config.max_attempts + 1):
        try:
            status, payload = _post(url, body, headers, config.timeout)
        except OSError as exc:
            failure = Unreachable(f"attempt {attempt}: {exc}")
        else:
            if status in (200, 201):
                return json.loads(payload)
            if 400 <= status < 500:
                raise Rejected(status, payload.decode("utf-8", "replace"))
            failure = Unreachable(f"attempt {attempt}: server error {status}")
        if attempt < config.max_attempts:
            time.sleep(config.backoff_base * 2 ** (attempt - 1))
    if config.fail_mode == "open":
        warnings.warn(f"usage not logged: {failure}", stacklevel=2)
        return None
    raise failure
