import numpy as np
import pytest

from clarikit.core import (
    CandidateAnswer,
    ClarificationPane,
    DomainError,
    EngagementStats,
    ImpressionRecord,
    PaneLabels,
    Query,
    classify_template,
    collect_stats,
    conditional_click_distribution,
    engagement_rate,
    merge_stats,
    tokenize,
    validate_pane,
)


def make_pane(pane_id="p1", query_id="q1", texts=("red", "blue", "green"), **kwargs):
    answers = tuple(CandidateAnswer(text=t, position=i + 1) for i, t in enumerate(texts))
    return ClarificationPane(
        id=pane_id, query_id=query_id, question_text="Which color do you mean?", answers=answers, **kwargs
    )


class TestEngagementRate:
    def test_no_clicks(self):
        stats = EngagementStats(10, 0, (0, 0))
        assert engagement_rate(stats) == 0.0

    def test_all_engaged(self):
        stats = EngagementStats(10, 10, (10, 3))
        assert engagement_rate(stats) == 1.0

    def test_direct_division(self):
        stats = EngagementStats(74, 21, (12, 9))
        assert engagement_rate(stats) == pytest.approx(21 / 74)

    def test_zero_impressions_rejected(self):
        with pytest.raises(DomainError):
            engagement_rate(EngagementStats(0, 0, (0,)))

    def test_monotone_in_engaged(self):
        rates = [engagement_rate(EngagementStats(50, e, (0,) * 3)) for e in range(0, 51, 5)]
        assert rates == sorted(rates)


class TestConditionalClickDistribution:
    def test_no_clicks_is_uniform(self):
        dist = conditional_click_distribution(EngagementStats(10, 0, (0, 0, 0, 0, 0)))
        np.testing.assert_allclose(dist, [0.2] * 5)

    def test_single_position(self):
        dist = conditional_click_distribution(EngagementStats(10, 7, (7, 0, 0)))
        np.testing.assert_allclose(dist, [1, 0, 0])

    def test_normalization(self):
        dist = conditional_click_distribution(EngagementStats(10, 4, (3, 1, 0, 0)))
        np.testing.assert_allclose(dist, [0.75, 0.25, 0, 0])

    def test_sums_to_one_and_nonnegative(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(2, 6))
            imps = int(rng.integers(1, 50))
            clicks = tuple(int(rng.integers(0, imps + 1)) for _ in range(n))
            stats = EngagementStats(imps, min(imps, max(clicks)), clicks)
            dist = conditional_click_distribution(stats)
            assert abs(dist.sum() - 1.0) < 1e-12
            assert (dist >= 0).all()


class TestValidatePane:
    def test_well_formed(self):
        assert validate_pane(make_pane()) == []

    def test_too_many_answers(self):
        pane = make_pane(texts=("a", "b", "c", "d", "e", "f"))
        assert any(v.startswith("answer count") for v in validate_pane(pane))

    def test_too_few_answers(self):
        pane = make_pane(texts=("a",))
        assert any(v.startswith("answer count") for v in validate_pane(pane))

    def test_contiguity(self):
        answers = (CandidateAnswer("a", 1), CandidateAnswer("b", 3))
        pane = ClarificationPane("p", "q", "Which a are you looking for?", answers)
        assert any(v.startswith("contiguity") for v in validate_pane(pane))

    def test_empty_question(self):
        answers = (CandidateAnswer("a", 1), CandidateAnswer("b", 2))
        pane = ClarificationPane("p", "q", "  ", answers)
        assert any("question" in v for v in validate_pane(pane))


class TestTemplates:
    @pytest.mark.parametrize(
        "question,expected",
        [
            ("What would you like to know about python?", "T1"),
            ("What do you want to know about jaguar cars?", "T1"),
            ("Which jaguar do you mean?", "T2"),
            ("What size are you looking for?", "T3"),
            ("What do you want to do with this file?", "T4"),
            ("Who are you shopping for?", "T5"),
            ("What are you trying to do?", "T6"),
            ("Do you have a brand in mind?", "T7"),
            ("Is this a question?", "other"),
        ],
    )
    def test_classification(self, question, expected):
        assert classify_template(question) == expected

    def test_case_insensitive(self):
        assert classify_template("WHO ARE YOU SHOPPING FOR?") == "T5"


class TestTypes:
    def test_query_requires_tokens(self):
        with pytest.raises(ValueError):
            Query(id="q", text="  !!  ")

    def test_query_length(self):
        assert Query(id="q", text="jaguar car price").length == 3

    def test_answer_default_render_size(self):
        assert CandidateAnswer(text="windows 10", position=1).render_size == 10.0

    def test_answer_explicit_render_size(self):
        assert CandidateAnswer(text="x", position=1, render_size=42.0).render_size == 42.0

    def test_impression_rejects_negative_dwell(self):
        with pytest.raises(ValueError):
            ImpressionRecord("p", 0, frozenset(), (("u", -1.0),))

    def test_impression_rejects_negative_delta(self):
        with pytest.raises(ValueError):
            ImpressionRecord("p", 0, reformulation=("q2", -5.0))

    def test_stats_invariants(self):
        with pytest.raises(ValueError):
            EngagementStats(5, 6, (0,))
        with pytest.raises(ValueError):
            EngagementStats(5, 3, (6,))

    def test_labels(self):
        labels = PaneLabels("Good", ("Fair", "Bad"))
        assert labels.landing == ("Fair", "Bad")
        with pytest.raises(ValueError):
            PaneLabels("Great", ())

    def test_tokenize(self):
        assert tokenize("Which Jaguar, exactly?") == ["which", "jaguar", "exactly"]


class TestCollectStats:
    def test_aggregation(self):
        panes = {"p1": make_pane()}
        log = [
            ImpressionRecord("p1", 0, frozenset({1})),
            ImpressionRecord("p1", 1, frozenset({1, 2})),
            ImpressionRecord("p1", 2, frozenset()),
        ]
        stats = collect_stats(log, panes)["p1"]
        assert stats.impressions == 3
        assert stats.engaged_impressions == 2
        assert stats.per_position_clicks == (2, 1, 0)

    def test_unknown_pane(self):
        with pytest.raises(KeyError):
            collect_stats([ImpressionRecord("nope", 0)], {})

    def test_merge_matches_single_pass(self):
        panes = {"p1": make_pane()}
        log = [
            ImpressionRecord("p1", t, frozenset({1 + t % 3}) if t % 2 else frozenset())
            for t in range(20)
        ]
        whole = collect_stats(log, panes)["p1"]
        first = collect_stats(log[:7], panes)["p1"]
        second = collect_stats(log[7:], panes)["p1"]
        assert merge_stats(first, second) == whole
