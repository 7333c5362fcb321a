"""Issue analyses against independent brute-force recounts, plus the
instrumentation contract (one event per run naming every touched person)."""

from __future__ import annotations

import random

import pytest

from clearbox import authkit
from clearbox.analyses import (
    ANALYSES,
    Corpus,
    Issue,
    PRIORITY_WEIGHTS,
    corpus_from_json,
    corpus_to_json,
    expert_search,
    leaderboard,
    run_instrumented,
    seed_access_stream,
    seed_corpus,
    supporter_list,
    touched_owners,
    who_needs_help,
)
from clearbox.authkit import Role
from clearbox.monitor import FailMode, MonitorConfig, MonitorWarning, TransportFailure
from clearbox.service import Safekeeper
from clearbox.storage import MemoryBackend
from clearbox.webapi import create_app

from tests.test_monitor import AppTransport, DownTransport

NOW_MS = 1_700_000_000_000
NOW_S = NOW_MS // 1000


def make_issue(
    issue_id="ISS-1",
    assignee="alice",
    status="done",
    priority="medium",
    reviewers=(),
    technologies=("python",),
    time_estimate_hours=1.0,
) -> Issue:
    return Issue(
        issue_id=issue_id,
        title="a title",
        assignee=assignee,
        reporter="reporter",
        reviewers=tuple(reviewers),
        priority=priority,
        status=status,
        time_estimate_hours=time_estimate_hours,
        technologies=tuple(technologies),
        comment_authors=(),
    )


# -- independent recounts (deliberately naive) -------------------------------

def oracle_expert_search(corpus, query):
    scores = {}
    for person in sorted({i.assignee for i in corpus.issues}):
        n = 0
        for issue in corpus.issues:
            if issue.assignee != person or issue.status != "done":
                continue
            if any(t in issue.technologies for t in query):
                n += 1
        if n > 0:
            scores[person] = float(n)
    return rank(scores)


def oracle_supporter_list(corpus):
    scores = {}
    everyone = {r for i in corpus.issues for r in i.reviewers}
    for person in everyone:
        scores[person] = float(
            sum(1 for i in corpus.issues for r in i.reviewers if r == person)
        )
    return rank(scores)


def oracle_leaderboard(corpus):
    scores = {}
    for issue in corpus.issues:
        if issue.status == "done":
            weight = {"low": 1, "medium": 2, "high": 3, "critical": 4}[issue.priority]
            scores.setdefault(issue.assignee, 0.0)
            scores[issue.assignee] += weight * issue.time_estimate_hours
    return rank(scores)


def oracle_who_needs_help(corpus):
    scores = {}
    for issue in corpus.issues:
        if issue.status in ("open", "in_progress"):
            scores[issue.assignee] = scores.get(issue.assignee, 0.0) + 1
    return rank(scores)


def rank(scores: dict) -> tuple:
    return tuple(sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])))


def oracle_touched(analysis_id, corpus):
    if analysis_id in ("expert-search", "leaderboard"):
        return tuple(sorted({i.assignee for i in corpus.issues if i.status == "done"}))
    if analysis_id == "supporter-list":
        return tuple(sorted({r for i in corpus.issues for r in i.reviewers}))
    if analysis_id == "who-needs-help":
        return tuple(sorted({i.assignee for i in corpus.issues if i.status != "done"}))
    raise AssertionError(analysis_id)


class TestExpertSearch:
    def test_empty_corpus(self):
        assert expert_search(Corpus(issues=()), ["rust"]).entries == ()

    def test_single_match(self):
        corpus = Corpus(issues=(make_issue(technologies=("rust",)),))
        assert expert_search(corpus, ["rust"]).entries == (("alice", 1.0),)

    def test_not_done_excluded(self):
        corpus = Corpus(issues=(make_issue(status="open", technologies=("rust",)),))
        assert expert_search(corpus, ["rust"]).entries == ()

    def test_no_overlap_excluded(self):
        corpus = Corpus(issues=(make_issue(technologies=("sql",)),))
        assert expert_search(corpus, ["rust"]).entries == ()

    def test_empty_query_raises(self):
        with pytest.raises(ValueError):
            expert_search(Corpus(issues=()), [])


class TestSupporterList:
    def test_no_reviewers(self):
        assert supporter_list(Corpus(issues=(make_issue(),))).entries == ()

    def test_counts(self):
        issues = tuple(
            make_issue(issue_id=f"ISS-{i}", reviewers=reviewers)
            for i, reviewers in enumerate([("bob",), ("bob", "alice"), ("bob",)])
        )
        result = supporter_list(Corpus(issues=issues))
        assert result.entries == (("bob", 3.0), ("alice", 1.0))

    def test_tie_alphabetical(self):
        issues = (
            make_issue(issue_id="ISS-1", reviewers=("zoe", "ann")),
            make_issue(issue_id="ISS-2", reviewers=("zoe", "ann")),
        )
        result = supporter_list(Corpus(issues=issues))
        assert result.entries == (("ann", 2.0), ("zoe", 2.0))


class TestLeaderboard:
    def test_no_done_issues_omitted(self):
        corpus = Corpus(issues=(make_issue(status="open"),))
        assert leaderboard(corpus).entries == ()

    def test_hand_example_high_four_hours(self):
        corpus = Corpus(
            issues=(make_issue(priority="high", time_estimate_hours=4.0),)
        )
        assert leaderboard(corpus).entries == (("alice", 12.0),)

    def test_weights_table(self):
        assert PRIORITY_WEIGHTS == {"low": 1, "medium": 2, "high": 3, "critical": 4}


class TestWhoNeedsHelp:
    def test_all_done(self):
        assert who_needs_help(Corpus(issues=(make_issue(),))).entries == ()

    def test_counts(self):
        issues = tuple(
            make_issue(issue_id=f"ISS-{i}", assignee=a, status="open")
            for i, a in enumerate(["alice"] * 4 + ["bob"])
        )
        result = who_needs_help(Corpus(issues=issues))
        assert result.entries == (("alice", 4.0), ("bob", 1.0))

    def test_tie_alphabetical(self):
        issues = (
            make_issue(issue_id="ISS-1", assignee="zoe", status="open"),
            make_issue(issue_id="ISS-2", assignee="ann", status="in_progress"),
        )
        result = who_needs_help(Corpus(issues=issues))
        assert result.entries == (("ann", 1.0), ("zoe", 1.0))


class TestOracleEquivalence:
    def test_random_corpora(self):
        for seed in range(60):
            corpus = seed_corpus(seed, n_issues=seed % 50 + 1, n_persons=seed % 9 + 2)
            query = ["python", "rust", "sql"]
            assert expert_search(corpus, query).entries == oracle_expert_search(corpus, query)
            assert supporter_list(corpus).entries == oracle_supporter_list(corpus)
            assert who_needs_help(corpus).entries == oracle_who_needs_help(corpus)
            got = leaderboard(corpus).entries
            expected = oracle_leaderboard(corpus)
            assert [p for p, _ in got] == [p for p, _ in expected]
            for (_, a), (_, b) in zip(got, expected):
                assert a == pytest.approx(b)

    def test_determinism(self):
        corpus = seed_corpus(4, n_issues=30, n_persons=6)
        assert leaderboard(corpus).entries == leaderboard(corpus).entries
        assert (
            expert_search(corpus, ["python"]).entries
            == expert_search(corpus, ["python"]).entries
        )


class TestSeedCorpus:
    def test_same_seed_identical(self):
        assert seed_corpus(11, 25, 5).issues == seed_corpus(11, 25, 5).issues

    def test_different_seed_differs(self):
        assert seed_corpus(1, 25, 5).issues != seed_corpus(2, 25, 5).issues

    def test_issue_count_exact(self):
        assert len(seed_corpus(3, 37, 5).issues) == 37

    def test_persons_derived(self):
        corpus = seed_corpus(3, 40, 6)
        assert corpus.persons <= {f"person{i:03d}" for i in range(1, 7)}
        assert corpus.persons  # somebody appears

    def test_json_round_trip(self, tmp_path):
        corpus = seed_corpus(8, 12, 4)
        data = corpus_to_json(corpus)
        assert corpus_from_json(data) == corpus


class TestSeedAccessStream:
    def test_deterministic_and_exact(self):
        stream = seed_access_stream(5, "2023-11-06", [15] * 7, ["alice"])
        again = seed_access_stream(5, "2023-11-06", [15] * 7, ["alice"])
        assert stream == again
        assert len(stream) == 105
        start = 1_699_228_800_000
        for ts, ctx in stream:
            assert start <= ts < start + 7 * 86_400_000
            assert ctx.owner_ids == ("alice",)
        assert [ts for ts, _ in stream] == sorted(ts for ts, _ in stream)


class TestRunInstrumented:
    @pytest.fixture()
    def stack(self, authority):
        backend = MemoryBackend()
        service = Safekeeper(backend, authority.verifying_key, clock=lambda: NOW_MS)
        transport = AppTransport(create_app(service))
        token = authkit.issue_token(authority, "carol", Role.CONSUMER, 3600, now=NOW_S)
        config = MonitorConfig(
            safekeeper_url="http://safekeeper.test",
            token_supplier=lambda: token,
            tool_id="suite",
            transport=transport,
            sleep=lambda s: None,
        )
        return backend, config

    @pytest.mark.parametrize("analysis_id", sorted(ANALYSES))
    def test_one_event_with_exact_owner_set(self, stack, analysis_id):
        backend, config = stack
        corpus = seed_corpus(21, 40, 8)
        result, emitted = run_instrumented(
            analysis_id, corpus, config, query_technologies=["python", "rust"], now_ms=NOW_MS
        )
        expected_owners = oracle_touched(analysis_id, corpus)
        if not expected_owners:
            assert emitted == 0 and backend.count() == 0
            return
        assert emitted == 1
        assert backend.count() == 1
        event = backend.scan()[0]
        assert event.owner_ids == expected_owners
        assert event.tool_id == f"analysis.{analysis_id}"
        assert event.consumer_id == "carol"

    def test_empty_corpus_emits_nothing(self, stack):
        backend, config = stack
        result, emitted = run_instrumented(
            "supporter-list", Corpus(issues=()), config, now_ms=NOW_MS
        )
        assert result.entries == ()
        assert emitted == 0
        assert backend.count() == 0

    def test_fail_closed_down_aborts(self, stack, authority):
        _, config = stack
        down = MonitorConfig(
            safekeeper_url="http://safekeeper.test",
            token_supplier=config.token_supplier,
            tool_id="suite",
            fail_mode=FailMode.CLOSED,
            transport=DownTransport(),
            sleep=lambda s: None,
        )
        corpus = seed_corpus(21, 40, 8)
        with pytest.raises(TransportFailure):
            run_instrumented("leaderboard", corpus, down, now_ms=NOW_MS)

    def test_fail_open_down_still_returns(self, stack):
        _, config = stack
        import dataclasses

        open_config = dataclasses.replace(
            config, fail_mode=FailMode.OPEN, transport=DownTransport()
        )
        corpus = seed_corpus(21, 40, 8)
        with pytest.warns(MonitorWarning):
            result, emitted = run_instrumented("leaderboard", corpus, open_config, now_ms=NOW_MS)
        assert emitted == 0
        assert result.entries == leaderboard(corpus).entries

    def test_result_matches_uninstrumented(self, stack):
        _, config = stack
        corpus = seed_corpus(33, 25, 6)
        result, _ = run_instrumented("who-needs-help", corpus, config, now_ms=NOW_MS)
        assert result.entries == who_needs_help(corpus).entries

    def test_instrumented_accessed_fields(self, stack):
        backend, config = stack
        corpus = seed_corpus(21, 40, 8)
        run_instrumented("leaderboard", corpus, config, now_ms=NOW_MS)
        event = backend.scan()[0]
        assert "issue.priority" in event.accessed_fields
        assert "issue.time_estimate_hours" in event.accessed_fields

    def test_unknown_analysis(self, stack):
        _, config = stack
        with pytest.raises(KeyError):
            run_instrumented("mystery", Corpus(issues=()), config)
