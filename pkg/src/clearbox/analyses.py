"""Example analyses over a synthetic issue-tracker corpus.

Each analysis is useful but touches personal data, which is exactly why they
exist: they demonstrate tools built transparency-first, where every person
whose issue data is read ends up in a usage event at the safekeeper. The
scoring rules are deliberately simple and deterministic (ties always break
lexicographically) so independent recounts can verify them.
"""

from __future__ import annotations

import dataclasses
import json
import random
import time
import warnings
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

from .monitor import (
    AccessContext,
    FailMode,
    MonitorConfig,
    MonitorError,
    MonitorWarning,
    record_access,
)

__all__ = [
    "PRIORITY_WEIGHTS",
    "Issue",
    "Corpus",
    "RankedResult",
    "expert_search",
    "supporter_list",
    "leaderboard",
    "who_needs_help",
    "ANALYSES",
    "touched_owners",
    "accessed_fields_for",
    "run_instrumented",
    "seed_corpus",
    "seed_access_stream",
    "corpus_to_json",
    "corpus_from_json",
    "load_corpus",
    "save_corpus",
]

#: Productivity weight per priority for the leaderboard. Adjust to taste;
#: every ranking and test recomputes from this table.
PRIORITY_WEIGHTS = {"low": 1, "medium": 2, "high": 3, "critical": 4}

_PRIORITIES = ("low", "medium", "high", "critical")
_STATUSES = ("open", "in_progress", "done")
_TECHNOLOGIES = (
    "python", "rust", "typescript", "sql", "docker",
    "kubernetes", "react", "terraform", "kafka", "grpc",
)
_TITLE_WORDS = (
    "fix", "add", "refactor", "migrate", "investigate", "document",
    "login", "cache", "pipeline", "dashboard", "export", "index",
    "timeout", "parser", "scheduler", "webhook", "quota", "backup",
)


@dataclass(frozen=True)
class Issue:
    issue_id: str
    title: str
    assignee: str
    reporter: str
    reviewers: tuple[str, ...]
    priority: str
    status: str
    time_estimate_hours: float
    technologies: tuple[str, ...]
    comment_authors: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.assignee or not self.reporter:
            raise ValueError("assignee and reporter must be nonempty")
        if self.priority not in _PRIORITIES:
            raise ValueError(f"unknown priority {self.priority!r}")
        if self.status not in _STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.time_estimate_hours < 0:
            raise ValueError("time_estimate_hours must be >= 0")
        object.__setattr__(self, "reviewers", tuple(self.reviewers))
        object.__setattr__(self, "technologies", tuple(self.technologies))
        object.__setattr__(self, "comment_authors", tuple(self.comment_authors))


@dataclass(frozen=True)
class Corpus:
    issues: tuple[Issue, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "issues", tuple(self.issues))

    @property
    def persons(self) -> frozenset[str]:
        """Every principal id appearing anywhere in the corpus."""
        people: set[str] = set()
        for issue in self.issues:
            people.add(issue.assignee)
            people.add(issue.reporter)
            people.update(issue.reviewers)
            people.update(issue.comment_authors)
        return frozenset(people)


@dataclass(frozen=True)
class RankedResult:
    """Scores in non-increasing order; ties sorted by principal id."""

    entries: tuple[tuple[str, float], ...]
    analysis_id: str
    generated_at_ms: int


def _ranked(scores: dict[str, float], analysis_id: str) -> RankedResult:
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return RankedResult(
        entries=tuple(ordered),
        analysis_id=analysis_id,
        generated_at_ms=time.time_ns() // 1_000_000,
    )


def expert_search(corpus: Corpus, query_technologies: Sequence[str]) -> RankedResult:
    """Colleagues by skill: completed issues whose technologies meet the query."""
    if not query_technologies:
        raise ValueError("query_technologies must be nonempty")
    wanted = set(query_technologies)
    scores: dict[str, float] = {}
    for issue in corpus.issues:
        if issue.status == "done" and wanted.intersection(issue.technologies):
            scores[issue.assignee] = scores.get(issue.assignee, 0) + 1
    return _ranked(scores, "expert-search")


def supporter_list(corpus: Corpus) -> RankedResult:
    """Who reviews the most issues."""
    scores: dict[str, float] = {}
    for issue in corpus.issues:
        for reviewer in issue.reviewers:
            scores[reviewer] = scores.get(reviewer, 0) + 1
    return _ranked(scores, "supporter-list")


def leaderboard(corpus: Corpus) -> RankedResult:
    """Approximated productivity: priority weight x estimate, over done issues."""
    scores: dict[str, float] = {}
    for issue in corpus.issues:
        if issue.status == "done":
            value = PRIORITY_WEIGHTS[issue.priority] * issue.time_estimate_hours
            scores[issue.assignee] = scores.get(issue.assignee, 0) + value
    return _ranked(scores, "leaderboard")


def who_needs_help(corpus: Corpus) -> RankedResult:
    """Most uncompleted issues per assignee."""
    scores: dict[str, float] = {}
    for issue in corpus.issues:
        if issue.status != "done":
            scores[issue.assignee] = scores.get(issue.assignee, 0) + 1
    return _ranked(scores, "who-needs-help")


ANALYSES: dict[str, Callable[..., RankedResult]] = {
    "expert-search": expert_search,
    "supporter-list": supporter_list,
    "leaderboard": leaderboard,
    "who-needs-help": who_needs_help,
}

_ACCESSED_FIELDS = {
    "expert-search": ("issue.assignee", "issue.status", "issue.technologies"),
    "supporter-list": ("issue.reviewers",),
    "leaderboard": (
        "issue.assignee",
        "issue.status",
        "issue.priority",
        "issue.time_estimate_hours",
    ),
    "who-needs-help": ("issue.assignee", "issue.status"),
}

_PURPOSES = {
    "expert-search": "find colleagues by technology experience",
    "supporter-list": "list the most active reviewers",
    "leaderboard": "rank developers by approximated productivity",
    "who-needs-help": "show assignees with the most uncompleted issues",
}


def touched_owners(analysis_id: str, corpus: Corpus) -> tuple[str, ...]:
    """The people whose issue fields the analysis reads, sorted, deduplicated."""
    if analysis_id == "expert-search" or analysis_id == "leaderboard":
        people = {i.assignee for i in corpus.issues if i.status == "done"}
    elif analysis_id == "supporter-list":
        people = {r for i in corpus.issues for r in i.reviewers}
    elif analysis_id == "who-needs-help":
        people = {i.assignee for i in corpus.issues if i.status != "done"}
    else:
        raise KeyError(f"unknown analysis {analysis_id!r}")
    return tuple(sorted(people))


def accessed_fields_for(analysis_id: str) -> tuple[str, ...]:
    return _ACCESSED_FIELDS[analysis_id]


def run_instrumented(
    analysis_id: str,
    corpus: Corpus,
    config: MonitorConfig,
    query_technologies: Optional[Sequence[str]] = None,
    data_source: str = "issue-tracker",
    now_ms: Optional[int] = None,
) -> tuple[RankedResult, int]:
    """Run one analysis with its usage reported to the safekeeper.

    One aggregate event per run, naming every touched person as an owner. A
    run that touches nobody has nothing to report and emits no event. In
    fail-closed mode a reporting failure aborts the run before any issue
    data is read for scoring.
    """
    if analysis_id not in ANALYSES:
        raise KeyError(f"unknown analysis {analysis_id!r}")
    if analysis_id == "expert-search":
        run = lambda: expert_search(corpus, query_technologies or ())  # noqa: E731
    else:
        run = lambda: ANALYSES[analysis_id](corpus)  # noqa: E731

    owners = touched_owners(analysis_id, corpus)
    if not owners:
        return run(), 0

    ctx = AccessContext(
        owner_ids=owners,
        data_source=data_source,
        accessed_fields=accessed_fields_for(analysis_id),
        purpose=_PURPOSES[analysis_id],
    )
    tool_config = dataclasses.replace(config, tool_id=f"analysis.{analysis_id}")
    emitted = 0
    if tool_config.fail_mode is FailMode.CLOSED:
        record_access(tool_config, ctx, now_ms)
        emitted = 1
    else:
        try:
            record_access(tool_config, ctx, now_ms)
            emitted = 1
        except MonitorError as exc:
            warnings.warn(MonitorWarning(f"usage not logged: {exc}"), stacklevel=2)
    return run(), emitted


def seed_corpus(seed: int, n_issues: int, n_persons: int) -> Corpus:
    """Deterministic synthetic corpus.

    Distributions: status open/in_progress/done at 30/30/40 %, priority
    low/medium/high/critical at 35/35/20/10 %, 0-3 reviewers and 0-4 comment
    authors per issue, 1-3 technologies from a fixed pool, estimates of
    0.5-40 h in half-hour steps.
    """
    if n_issues < 0 or n_persons < 1:
        raise ValueError("need n_issues >= 0 and n_persons >= 1")
    rng = random.Random(seed)
    persons = [f"person{i:03d}" for i in range(1, n_persons + 1)]
    issues = []
    for index in range(1, n_issues + 1):
        issues.append(
            Issue(
                issue_id=f"ISS-{index}",
                title=" ".join(rng.sample(_TITLE_WORDS, 3)),
                assignee=rng.choice(persons),
                reporter=rng.choice(persons),
                reviewers=tuple(rng.sample(persons, min(rng.randint(0, 3), n_persons))),
                priority=rng.choices(_PRIORITIES, weights=(35, 35, 20, 10))[0],
                status=rng.choices(_STATUSES, weights=(30, 30, 40))[0],
                time_estimate_hours=rng.randint(1, 80) / 2,
                technologies=tuple(rng.sample(_TECHNOLOGIES, rng.randint(1, 3))),
                comment_authors=tuple(rng.sample(persons, min(rng.randint(0, 4), n_persons))),
            )
        )
    return Corpus(issues=tuple(issues))


def seed_access_stream(
    seed: int,
    week_start: Union[str, date],
    daily_counts: Sequence[int],
    owner_ids: Sequence[str],
    data_source: str = "issue-tracker",
    purpose: str = "seeded access stream",
) -> list[tuple[int, AccessContext]]:
    """Deterministic stream of (occurred_at_ms, context) pairs.

    ``daily_counts[d]`` accesses land on day ``week_start + d`` at random
    times of day; the total is exactly ``sum(daily_counts)``. Feeding a
    profile of 15 accesses per day for one ISO week through a monitor yields
    a 105-count weekly summary bucket.
    """
    if isinstance(week_start, str):
        week_start = date.fromisoformat(week_start)
    rng = random.Random(seed)
    start_ms = int(
        datetime(week_start.year, week_start.month, week_start.day, tzinfo=timezone.utc).timestamp()
    ) * 1000
    ctx = AccessContext(
        owner_ids=tuple(sorted(set(owner_ids))),
        data_source=data_source,
        accessed_fields=("issue.assignee",),
        purpose=purpose,
    )
    stream = []
    for day_index, count in enumerate(daily_counts):
        day_ms = start_ms + day_index * 86_400_000
        for _ in range(count):
            stream.append((day_ms + rng.randrange(86_400_000), ctx))
    stream.sort(key=lambda pair: pair[0])
    return stream


def corpus_to_json(corpus: Corpus) -> list[dict]:
    return [
        {
            "issue_id": i.issue_id,
            "title": i.title,
            "assignee": i.assignee,
            "reporter": i.reporter,
            "reviewers": list(i.reviewers),
            "priority": i.priority,
            "status": i.status,
            "time_estimate_hours": i.time_estimate_hours,
            "technologies": list(i.technologies),
            "comment_authors": list(i.comment_authors),
        }
        for i in corpus.issues
    ]


def corpus_from_json(data: Iterable[dict]) -> Corpus:
    issues = tuple(
        Issue(
            issue_id=item["issue_id"],
            title=item.get("title", ""),
            assignee=item["assignee"],
            reporter=item["reporter"],
            reviewers=tuple(item.get("reviewers", ())),
            priority=item["priority"],
            status=item["status"],
            time_estimate_hours=float(item.get("time_estimate_hours", 0.0)),
            technologies=tuple(item.get("technologies", ())),
            comment_authors=tuple(item.get("comment_authors", ())),
        )
        for item in data
    )
    return Corpus(issues=issues)


def save_corpus(corpus: Corpus, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(corpus_to_json(corpus), indent=2) + "\n")


def load_corpus(path: Union[str, Path]) -> Corpus:
    return corpus_from_json(json.loads(Path(path).read_text()))
