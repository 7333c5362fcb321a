"""Pluggable storage for the usage log.

The safekeeper talks to storage through a small data-access interface, so
the backend can be switched without touching service logic. Two backends
ship here: an in-memory one for tests and embedding, and an append-only
JSON-lines file that fsyncs every append.
"""

from __future__ import annotations

import json
import os
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Iterable, Optional, Union

from .model import UsageEvent
from .wire import (
    JustificationRequest,
    event_from_dict,
    event_to_dict,
    justification_from_dict,
    justification_to_dict,
)

__all__ = [
    "StorageCorruption",
    "StorageBackend",
    "MemoryBackend",
    "JsonlBackend",
]


class StorageCorruption(Exception):
    """The persisted log could not even be parsed (distinct from a chain
    verification failure, which is reported, not raised)."""


class StorageBackend(ABC):
    """Append-only event log plus justification-request records.

    ``append`` must be atomic; ``scan`` returns events in sequence order.
    """

    @abstractmethod
    def append(self, event: UsageEvent) -> None: ...

    @abstractmethod
    def last(self) -> Optional[UsageEvent]: ...

    @abstractmethod
    def count(self) -> int: ...

    @abstractmethod
    def get_by_event_id(self, event_id: str) -> Optional[UsageEvent]: ...

    @abstractmethod
    def scan(
        self,
        from_ms: Optional[int] = None,
        to_ms: Optional[int] = None,
        consumer_id: Optional[str] = None,
        data_source: Optional[str] = None,
    ) -> list[UsageEvent]: ...

    @abstractmethod
    def put_justification(self, request: JustificationRequest) -> None: ...

    @abstractmethod
    def get_justification(self, request_id: str) -> Optional[JustificationRequest]: ...

    @abstractmethod
    def list_justifications(self) -> list[JustificationRequest]: ...


def _matches(
    event: UsageEvent,
    from_ms: Optional[int],
    to_ms: Optional[int],
    consumer_id: Optional[str],
    data_source: Optional[str],
) -> bool:
    if from_ms is not None and event.occurred_at_ms < from_ms:
        return False
    if to_ms is not None and event.occurred_at_ms >= to_ms:
        return False
    if consumer_id is not None and event.consumer_id != consumer_id:
        return False
    if data_source is not None and event.data_source != data_source:
        return False
    return True


class MemoryBackend(StorageBackend):
    """In-memory backend; the default for tests and throwaway runs."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._events: list[UsageEvent] = []
        self._by_event_id: dict[str, UsageEvent] = {}
        self._justifications: dict[str, JustificationRequest] = {}

    def append(self, event: UsageEvent) -> None:
        with self._lock:
            self._events.append(event)
            self._by_event_id[event.event_id] = event

    def last(self) -> Optional[UsageEvent]:
        with self._lock:
            return self._events[-1] if self._events else None

    def count(self) -> int:
        with self._lock:
            return len(self._events)

    def get_by_event_id(self, event_id: str) -> Optional[UsageEvent]:
        with self._lock:
            return self._by_event_id.get(event_id)

    def scan(self, from_ms=None, to_ms=None, consumer_id=None, data_source=None):
        with self._lock:
            snapshot = list(self._events)
        return [e for e in snapshot if _matches(e, from_ms, to_ms, consumer_id, data_source)]

    def put_justification(self, request: JustificationRequest) -> None:
        with self._lock:
            self._justifications[request.request_id] = request

    def get_justification(self, request_id: str) -> Optional[JustificationRequest]:
        with self._lock:
            return self._justifications.get(request_id)

    def list_justifications(self) -> list[JustificationRequest]:
        with self._lock:
            return sorted(self._justifications.values(), key=lambda r: r.created_at_ms)


class JsonlBackend(StorageBackend):
    """Durable backend: one canonical-order JSON object per line, LF
    terminated, fsync after every append.

    The whole log is mirrored in memory (the service re-verifies the chain
    anyway, and desk-scale logs fit easily); the file is the source of truth
    and is re-read on construction. Justification requests live in a sibling
    file as an append-only record stream where the last line per request id
    wins.
    """

    def __init__(self, path: Union[str, Path]) -> None:
        self._lock = threading.Lock()
        self._path = Path(path)
        self._justifications_path = self._path.parent / (
            self._path.stem + "-justifications" + (self._path.suffix or ".jsonl")
        )
        self._events: list[UsageEvent] = []
        self._by_event_id: dict[str, UsageEvent] = {}
        self._justifications: dict[str, JustificationRequest] = {}
        self._load()
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._events_file = open(self._path, "a", encoding="utf-8")
        self._justifications_file = open(self._justifications_path, "a", encoding="utf-8")

    def _load(self) -> None:
        if self._path.exists():
            for lineno, line in enumerate(self._read_lines(self._path), start=1):
                try:
                    event = event_from_dict(json.loads(line))
                except (ValueError, KeyError) as exc:
                    raise StorageCorruption(f"{self._path}:{lineno}: {exc}") from exc
                self._events.append(event)
                self._by_event_id[event.event_id] = event
        if self._justifications_path.exists():
            for lineno, line in enumerate(self._read_lines(self._justifications_path), 1):
                try:
                    request = justification_from_dict(json.loads(line))
                except (ValueError, KeyError) as exc:
                    raise StorageCorruption(
                        f"{self._justifications_path}:{lineno}: {exc}"
                    ) from exc
                self._justifications[request.request_id] = request

    @staticmethod
    def _read_lines(path: Path) -> Iterable[str]:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield line

    def close(self) -> None:
        with self._lock:
            self._events_file.close()
            self._justifications_file.close()

    def _write_line(self, fh, obj: dict) -> None:
        fh.write(json.dumps(obj, separators=(",", ":"), ensure_ascii=False) + "\n")
        fh.flush()
        os.fsync(fh.fileno())

    def append(self, event: UsageEvent) -> None:
        with self._lock:
            self._write_line(self._events_file, event_to_dict(event))
            self._events.append(event)
            self._by_event_id[event.event_id] = event

    def last(self) -> Optional[UsageEvent]:
        with self._lock:
            return self._events[-1] if self._events else None

    def count(self) -> int:
        with self._lock:
            return len(self._events)

    def get_by_event_id(self, event_id: str) -> Optional[UsageEvent]:
        with self._lock:
            return self._by_event_id.get(event_id)

    def scan(self, from_ms=None, to_ms=None, consumer_id=None, data_source=None):
        with self._lock:
            snapshot = list(self._events)
        return [e for e in snapshot if _matches(e, from_ms, to_ms, consumer_id, data_source)]

    def put_justification(self, request: JustificationRequest) -> None:
        with self._lock:
            self._write_line(self._justifications_file, justification_to_dict(request))
            self._justifications[request.request_id] = request

    def get_justification(self, request_id: str) -> Optional[JustificationRequest]:
        with self._lock:
            return self._justifications.get(request_id)

    def list_justifications(self) -> list[JustificationRequest]:
        with self._lock:
            return sorted(self._justifications.values(), key=lambda r: r.created_at_ms)
