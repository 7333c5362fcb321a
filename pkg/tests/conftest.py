from __future__ import annotations

import json
import random
from dataclasses import replace
from pathlib import Path

import pytest

from clearbox import authkit
from clearbox.model import GENESIS_HASH, UsageEvent, compute_entry_hash

FIXTURES = Path(__file__).parent / "fixtures"

CONSUMERS = ["carol", "dave", "erin", "frank", "grace"]
OWNERS = [f"owner{i:02d}" for i in range(1, 21)]
SOURCES = ["issue-tracker", "team-messenger", "version-control"]


def load_golden() -> dict:
    return json.loads((FIXTURES / "golden_event.json").read_text())


def golden_event() -> UsageEvent:
    data = load_golden()["event"]
    return UsageEvent(
        event_id=data["event_id"],
        consumer_id=data["consumer_id"],
        owner_ids=tuple(data["owner_ids"]),
        tool_id=data["tool_id"],
        data_source=data["data_source"],
        accessed_fields=tuple(data["accessed_fields"]),
        purpose=data["purpose"],
        occurred_at_ms=data["occurred_at_ms"],
        token_fingerprint=data["token_fingerprint"],
        sequence=data["sequence"],
        prev_hash=data["prev_hash"],
    )


def random_event_fields(rng: random.Random, index: int) -> dict:
    owners = sorted(rng.sample(OWNERS, rng.randint(1, 3)))
    return dict(
        event_id=f"evt-{index:06d}-{rng.randrange(1 << 30):08x}",
        consumer_id=rng.choice(CONSUMERS),
        owner_ids=tuple(owners),
        tool_id=rng.choice(["analysis.expert-search", "analysis.leaderboard", "hr-dashboard"]),
        data_source=rng.choice(SOURCES),
        accessed_fields=tuple(rng.sample(["issue.assignee", "issue.status", "issue.reviewers"], rng.randint(0, 3))),
        purpose=rng.choice(["", "quarterly report", "capacity planning"]),
        occurred_at_ms=1_700_000_000_000 + rng.randrange(90 * 86_400_000),
        token_fingerprint=f"{rng.getrandbits(256):064x}",
    )


def build_chain(count: int, seed: int = 7) -> list[UsageEvent]:
    """A well-formed chain of ``count`` random events, linked via the real
    hash function (the construction the chain invariants promise to honor)."""
    rng = random.Random(seed)
    events: list[UsageEvent] = []
    prev_hash = GENESIS_HASH
    for index in range(count):
        event = UsageEvent(
            sequence=index, prev_hash=prev_hash, **random_event_fields(rng, index)
        )
        event = replace(event, entry_hash=compute_entry_hash(event))
        events.append(event)
        prev_hash = event.entry_hash
    return events


@pytest.fixture(scope="session")
def authority() -> authkit.AuthorityKeyPair:
    return authkit.keygen("test-authority")


@pytest.fixture()
def tokens(authority):
    def issue(subject: str, role: authkit.Role, ttl: int = 3600) -> str:
        return authkit.issue_token(authority, subject, role, ttl)

    return issue
