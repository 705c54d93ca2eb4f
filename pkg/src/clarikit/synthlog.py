"""Synthetic queries, panes, intent sets, and impression logs with analytically
known click probabilities.

Four user models are supported:

  relevance_only       clicks each answer independently with its relevance;
                       position and presentation play no role, which makes it
                       the unbiased null for swap experiments.
  examination          each position has a fixed probability of being examined;
                       a click needs examination and attraction.  Independent
                       across positions, so multi-clicks happen.
  cascade              scans left to right, clicks with the answer's relevance,
                       stops at the first click.  At most one click.
  size_offset_logistic clicks each answer independently with probability
                       sigmoid(bias + w_relevance*rel + w_size*size/size_scale
                       + w_offset*(position-1) + w_pixel*preceding_size/size_scale),
                       where preceding_size is the summed render size of the
                       answers to the left.  The default weights make longer
                       answers, deeper positions, and answers pushed right by
                       wide neighbours less clickable; these are the
                       presentation effects the swap regression measures, and
                       the physical-offset term is the part a per-position
                       examination or cascade model cannot express.

Simulation draws one uniform matrix per pane from a stream seeded by
(master_seed, pane_id), so logs are reproducible and independent of how work
is partitioned over panes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import CandidateAnswer, ClarificationPane, EngagementStats, ImpressionRecord, Query
from .intents import IntentSet
from .tensor.text import fnv1a

MODEL_KINDS = ("relevance_only", "examination", "cascade", "size_offset_logistic")

_NOUNS = (
    "jaguar", "python", "mercury", "eclipse", "phoenix", "amazon", "kiwi", "saturn",
    "cricket", "delta", "polaris", "orion", "maple", "falcon", "atlas", "comet",
)
_MODIFIERS = ("price", "review", "manual", "history", "repair", "recipe", "parts", "rental", "course", "guide")
_FACETS = (
    "car", "animal", "team", "software", "film", "hotel", "book", "city",
    "game", "plant", "band", "store", "phone", "league", "tool", "brand",
)
_FILLERS = ("", "option", "official site", "near me today", "complete beginner edition")
# planted-mode answers that cover no intent draw from off-topic terms, so
# covering and non-covering answers differ in content, not just in weight
_OFF_TOPIC = ("misc", "assorted", "general", "archive", "redirect", "untagged", "sundry", "leftover")
_TEMPLATE_QUESTIONS = {
    "T1": "What would you like to know about {noun}?",
    "T2": "Which {noun} do you mean?",
    "T3": "Which {noun} are you looking for?",
    "T4": "What do you want to do with {noun}?",
    "T5": "Who are you shopping for?",
    "T6": "What are you trying to do?",
    "T7": "Do you have {noun} in mind?",
    "other": "More about {noun}?",
}

# facets 2g and 2g+1 share an entity group, so panes drawn from one group
# have a consistent answer set
_ENTITY_GROUP = {facet: f"group{i // 2}" for i, facet in enumerate(_FACETS)}


@dataclass(frozen=True)
class UserModel:
    kind: str
    exam_probs: tuple[float, ...] = (1.0, 0.85, 0.72, 0.61, 0.52)
    cascade_scale: float = 1.0
    bias: float = -3.1
    w_relevance: float = 6.0
    w_size: float = -0.75
    w_offset: float = -0.55
    w_pixel: float = -0.3
    size_scale: float = 12.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown user model kind {self.kind!r}")
        if any(not 0.0 <= p <= 1.0 for p in self.exam_probs):
            raise ValueError("examination probabilities must be in [0, 1]")
        if not 0.0 < self.cascade_scale <= 1.0:
            raise ValueError("cascade scale must be in (0, 1]")
        for name in ("bias", "w_relevance", "w_size", "w_offset", "w_pixel", "size_scale"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"logistic parameter {name} must be finite")

    @staticmethod
    def relevance_only() -> "UserModel":
        return UserModel(kind="relevance_only")

    @staticmethod
    def examination(exam_probs: Sequence[float] | None = None) -> "UserModel":
        model = UserModel(kind="examination")
        return replace(model, exam_probs=tuple(exam_probs)) if exam_probs is not None else model

    @staticmethod
    def cascade(scale: float = 1.0) -> "UserModel":
        return UserModel(kind="cascade", cascade_scale=scale)

    @staticmethod
    def size_offset_logistic(**kwargs) -> "UserModel":
        return UserModel(kind="size_offset_logistic", **kwargs)


def _logistic_probs(model: UserModel, pane: ClarificationPane, relevances: np.ndarray) -> np.ndarray:
    sizes = np.array([a.render_size for a in pane.answers]) / model.size_scale
    offsets = np.arange(len(pane.answers), dtype=np.float64)
    preceding = np.concatenate([[0.0], np.cumsum(sizes)[:-1]])
    z = (
        model.bias
        + model.w_relevance * relevances
        + model.w_size * sizes
        + model.w_offset * offsets
        + model.w_pixel * preceding
    )
    return 1.0 / (1.0 + np.exp(-z))


def oracle_click_rates(model: UserModel, pane: ClarificationPane, relevances: Sequence[float]) -> np.ndarray:
    """Exact per-answer click probability (per impression) under the model."""
    rel = np.asarray(relevances, dtype=np.float64)
    k = len(pane.answers)
    if rel.shape != (k,):
        raise ValueError(f"expected {k} relevances, got shape {rel.shape}")
    if model.kind == "relevance_only":
        return rel.copy()
    if model.kind == "examination":
        if len(model.exam_probs) < k:
            raise ValueError(f"examination model covers {len(model.exam_probs)} positions, pane has {k}")
        return np.array(model.exam_probs[:k]) * rel
    if model.kind == "cascade":
        attract = model.cascade_scale * rel
        no_click_before = np.concatenate([[1.0], np.cumprod(1.0 - attract)[:-1]])
        return attract * no_click_before
    return _logistic_probs(model, pane, rel)


def _independent_probs(model: UserModel, pane: ClarificationPane, rel: np.ndarray) -> np.ndarray:
    if model.kind == "relevance_only":
        return rel
    if model.kind == "examination":
        return np.array(model.exam_probs[: len(rel)]) * rel
    return _logistic_probs(model, pane, rel)


def click_matrix(
    model: UserModel, pane: ClarificationPane, relevances: Sequence[float], n: int, rng: np.random.Generator
) -> np.ndarray:
    """Boolean (n, answers) click outcomes for n impressions of one pane."""
    rel = np.asarray(relevances, dtype=np.float64)
    k = len(pane.answers)
    u = rng.random((n, k))
    if model.kind == "cascade":
        attract = model.cascade_scale * rel
        attracted = u < attract[None, :]
        first = np.argmax(attracted, axis=1)
        any_click = attracted.any(axis=1)
        clicks = np.zeros((n, k), dtype=bool)
        clicks[np.arange(n)[any_click], first[any_click]] = True
        return clicks
    return u < _independent_probs(model, pane, rel)[None, :]


@dataclass(frozen=True)
class CorpusConfig:
    n_queries: int
    panes_per_query: int = 1
    swap_fraction: float = 0.0
    answer_count_weights: tuple[float, float, float, float] = (0.2, 0.3, 0.25, 0.25)
    # ("beta", a, b) | ("uniform", lo, hi) | ("bimodal", lo, hi, lo2, hi2, p_hi) | ("planted",)
    relevance: tuple = ("beta", 1.0, 3.0)
    intents_per_query: int = 4
    question_fraction: float = 0.25
    reformulation_rate: float = 0.0
    result_click_rate: float = 0.0
    # (answer_count, swap_position, n_queries) rows; overrides the random mix
    # and forces one base pane plus one adjacent-swap variant per query
    cell_plan: tuple[tuple[int, int, int], ...] | None = None

    def __post_init__(self):
        if self.cell_plan is None and self.n_queries < 1:
            raise ValueError("n_queries must be >= 1")
        if not 0.0 <= self.swap_fraction <= 1.0:
            raise ValueError(f"swap fraction {self.swap_fraction} not in [0, 1]")
        if self.panes_per_query < 1:
            raise ValueError("panes_per_query must be >= 1")
        if len(self.answer_count_weights) != 4 or min(self.answer_count_weights) < 0:
            raise ValueError("answer_count_weights must be 4 non-negative weights for 2..5 answers")
        if self.relevance[0] not in ("beta", "uniform", "bimodal", "planted"):
            raise ValueError(f"unknown relevance scheme {self.relevance[0]!r}")
        if self.cell_plan is not None:
            for k, i, count in self.cell_plan:
                if not (2 <= k <= 5 and 1 <= i <= k - 1 and count >= 1):
                    raise ValueError(f"bad cell plan row ({k}, {i}, {count})")
        if not 0.0 <= self.reformulation_rate <= 1.0 or not 0.0 <= self.result_click_rate <= 1.0:
            raise ValueError("event rates must be in [0, 1]")


@dataclass
class Corpus:
    config: CorpusConfig
    seed: int
    queries: dict[str, Query]
    panes: dict[str, ClarificationPane]
    intent_sets: dict[str, dict[str, IntentSet]]
    ground_truth: dict[str, tuple[float, ...]]  # pane_id -> per-answer relevance
    entity_lexicon: dict[str, str]  # answer text -> entity type
    swap_pairs: list[tuple[str, str, int]] = field(default_factory=list)

    def pane_relevances(self, pane_id: str) -> np.ndarray:
        return np.asarray(self.ground_truth[pane_id], dtype=np.float64)


# planted template effects interact with question-ness: question queries
# engage more with the action templates, statement queries with the generic
# ones, so tree learners can pick up what a linear model on one-hots cannot
_TEMPLATE_BOOST_QUESTION = {
    "T1": 0.00, "T2": 0.01, "T3": 0.02, "T4": 0.04, "T5": 0.06, "T6": 0.06, "T7": 0.03, "other": 0.0,
}
_TEMPLATE_BOOST_STATEMENT = {
    "T1": 0.06, "T2": 0.05, "T3": 0.03, "T4": 0.01, "T5": 0.00, "T6": 0.00, "T7": 0.02, "other": 0.03,
}


def _draw_relevance(config: CorpusConfig, rng: np.random.Generator) -> float:
    scheme = config.relevance
    if scheme[0] == "beta":
        return float(np.clip(rng.beta(scheme[1], scheme[2]), 0.01, 0.99))
    if scheme[0] == "uniform":
        return float(rng.uniform(scheme[1], scheme[2]))
    if scheme[0] == "bimodal":
        lo, hi, lo2, hi2, p_hi = scheme[1:]
        if rng.random() < p_hi:
            return float(rng.uniform(lo2, hi2))
        return float(rng.uniform(lo, hi))
    raise AssertionError("planted relevance is computed, not drawn")


def _swap_answers(answers: tuple[CandidateAnswer, ...], i: int) -> tuple[CandidateAnswer, ...]:
    """Transpose the answers at 1-based positions i and i+1, renumbering only
    those two positions."""
    swapped = list(answers)
    left, right = swapped[i - 1], swapped[i]
    swapped[i - 1] = replace(right, position=i)
    swapped[i] = replace(left, position=i + 1)
    return tuple(swapped)


def gen_corpus(config: CorpusConfig, seed: int) -> Corpus:
    """Deterministically generate a corpus for one (config, seed) pair.

    Every flagged query gets pane pairs (base, variant) that share question
    and answers and differ by exactly one adjacent transposition.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, fnv1a("corpus")]))
    corpus = Corpus(
        config=config,
        seed=seed,
        queries={},
        panes={},
        intent_sets={},
        ground_truth={},
        entity_lexicon={},
    )
    planted = config.relevance[0] == "planted"
    template_ids = tuple(_TEMPLATE_QUESTIONS)
    count_weights = np.asarray(config.answer_count_weights, dtype=np.float64)
    count_weights = count_weights / count_weights.sum()

    if config.cell_plan is not None:
        plan = [(k, i) for k, i, count in config.cell_plan for _ in range(count)]
    else:
        plan = [(0, 0)] * config.n_queries  # answer counts drawn per pane

    for q_index, (plan_k, plan_i) in enumerate(plan):
        qid = f"q{q_index:06d}"
        noun = _NOUNS[int(rng.integers(len(_NOUNS)))]
        modifier = _MODIFIERS[int(rng.integers(len(_MODIFIERS)))]
        is_question = bool(rng.random() < config.question_fraction)
        text = f"how to find {noun} {modifier}" if is_question else f"{noun} {modifier}"
        query = Query(
            id=qid,
            text=text,
            is_question=is_question,
            ambiguity_class=("ambiguous", "faceted", "unknown")[int(rng.choice(3, p=(0.3, 0.55, 0.15)))],
            traffic_class=("head", "torso", "tail")[int(rng.integers(3))],
        )
        corpus.queries[qid] = query

        n_intents = max(1, config.intents_per_query)
        facet_pool = rng.permutation(len(_FACETS))[:n_intents]
        facets = [_FACETS[j] for j in facet_pool]
        intent_weights = np.array([max(1.0, round(12.0 / (r + 1))) for r in range(n_intents)])
        corpus.intent_sets[qid] = {
            "reformulation": IntentSet(
                query_id=qid,
                source="reformulation",
                items=tuple((f"{text} {facet}", float(w)) for facet, w in zip(facets, intent_weights)),
            ),
            "click_title": IntentSet(
                query_id=qid,
                source="click_title",
                items=tuple((f"{facet} {noun} overview", float(w)) for facet, w in zip(facets, intent_weights)),
            ),
        }

        relevance_by_text: dict[str, float] = {}
        # planted mode holds the answer count fixed within a query so pane
        # quality differences come from coverage and consistency, not size
        query_k = int(2 + rng.choice(4, p=count_weights)) if planted else 0
        for p_index in range(config.panes_per_query):
            pane_id = f"{qid}:p{p_index}"
            if plan_k:
                k = plan_k
            elif planted:
                k = query_k
            else:
                k = int(2 + rng.choice(4, p=count_weights))
            template_id = template_ids[int(rng.integers(len(template_ids)))]
            question_text = _TEMPLATE_QUESTIONS[template_id].format(noun=noun)

            consistent = bool(rng.random() < 0.5)
            if consistent:
                group_facet = facets[int(rng.integers(len(facets)))]
                group = _ENTITY_GROUP[group_facet]
                pool = [f for f in _FACETS if _ENTITY_GROUP[f] == group]
            else:
                pool = list(_FACETS)
            cover_p = float(rng.uniform(0.2, 1.0))
            if planted:
                uncovered = list(_OFF_TOPIC)
            else:
                uncovered = [f for f in pool if f not in facets] or pool

            # planted relevance carries pane-level effects (template boost,
            # consistency), so it is keyed per pane; otherwise relevance is a
            # per-(query, answer text) property shared across the query's panes
            pane_rel_map: dict[str, float] = {} if planted else relevance_by_text
            answers = []
            used_texts: set[str] = set()
            for pos in range(1, k + 1):
                covers = bool(rng.random() < cover_p)
                candidates = [f for f in facets if f in pool] if covers else uncovered
                if not candidates:
                    candidates = pool
                facet = candidates[int(rng.integers(len(candidates)))]
                filler = _FILLERS[int(rng.integers(len(_FILLERS)))]
                answer_text = f"{facet} {filler}".strip()
                while answer_text in used_texts:
                    answer_text = f"{answer_text} {pos}"
                used_texts.add(answer_text)

                if planted:
                    if facet in facets:
                        weight_share = float(intent_weights[facets.index(facet)] / intent_weights.sum())
                    else:
                        weight_share = 0.0
                    boost = (_TEMPLATE_BOOST_QUESTION if is_question else _TEMPLATE_BOOST_STATEMENT)[template_id]
                    rel = 0.06 + 0.5 * weight_share + (0.1 if consistent else 0.0) + boost
                    pane_rel_map[answer_text] = float(np.clip(rel + rng.normal(0.0, 0.01), 0.02, 0.95))
                elif answer_text not in pane_rel_map:
                    pane_rel_map[answer_text] = _draw_relevance(config, rng)

                etype = _ENTITY_GROUP.get(facet, "offtopic")
                corpus.entity_lexicon.setdefault(answer_text, etype)
                answers.append(CandidateAnswer(text=answer_text, position=pos, entity_type=etype))

            answers = tuple(answers)
            pane = ClarificationPane(
                id=pane_id, query_id=qid, question_text=question_text, answers=answers, template_id=template_id
            )
            corpus.panes[pane_id] = pane
            corpus.ground_truth[pane_id] = tuple(pane_rel_map[a.text] for a in answers)

            wants_swap = plan_k or (config.swap_fraction > 0 and rng.random() < config.swap_fraction)
            if wants_swap and k >= 2:
                i = plan_i if plan_i else int(rng.integers(1, k))
                variant_id = f"{pane_id}s"
                variant = ClarificationPane(
                    id=variant_id,
                    query_id=qid,
                    question_text=question_text,
                    answers=_swap_answers(answers, i),
                    template_id=template_id,
                )
                corpus.panes[variant_id] = variant
                corpus.ground_truth[variant_id] = tuple(pane_rel_map[a.text] for a in variant.answers)
                corpus.swap_pairs.append((pane_id, variant_id, i))

    return corpus


def _pane_rng(master_seed: int, pane_id: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, fnv1a(pane_id)]))


def simulate_stats(
    corpus: Corpus, model: UserModel, n_per_pane: int, seed: int
) -> dict[str, EngagementStats]:
    """Aggregate engagement statistics from the same per-pane draws as
    simulate_impressions, without materializing records."""
    if n_per_pane < 1:
        raise ValueError("n_per_pane must be >= 1")
    stats = {}
    for pane_id in sorted(corpus.panes):
        pane = corpus.panes[pane_id]
        rng = _pane_rng(seed, pane_id)
        clicks = click_matrix(model, pane, corpus.pane_relevances(pane_id), n_per_pane, rng)
        stats[pane_id] = EngagementStats(
            impressions=n_per_pane,
            engaged_impressions=int(clicks.any(axis=1).sum()),
            per_position_clicks=tuple(int(c) for c in clicks.sum(axis=0)),
        )
    return stats


def simulate_impressions(
    corpus: Corpus, model: UserModel, n_per_pane: int, seed: int, base_timestamp: int = 1_600_000_000
) -> list[ImpressionRecord]:
    """Draw an impression log; empirical per-answer rates converge to
    oracle_click_rates.  Reformulation and result-click events are sampled
    i.i.d. at the corpus-config rates, after the click draws, so per-pane
    click outcomes match simulate_stats exactly."""
    if n_per_pane < 1:
        raise ValueError("n_per_pane must be >= 1")
    cfg = corpus.config
    log: list[ImpressionRecord] = []
    for pane_id in sorted(corpus.panes):
        pane = corpus.panes[pane_id]
        rng = _pane_rng(seed, pane_id)
        clicks = click_matrix(model, pane, corpus.pane_relevances(pane_id), n_per_pane, rng)
        query_text = corpus.queries[pane.query_id].text
        result_flags = rng.random(n_per_pane) < cfg.result_click_rate if cfg.result_click_rate else None
        reform_flags = rng.random(n_per_pane) < cfg.reformulation_rate if cfg.reformulation_rate else None
        for j in range(n_per_pane):
            result_clicks = ()
            if result_flags is not None and result_flags[j]:
                dwell = float(rng.uniform(0.0, 60.0))
                result_clicks = ((f"url:{pane.query_id}:{int(rng.integers(5))}", dwell),)
            reformulation = None
            if reform_flags is not None and reform_flags[j]:
                reformulation = (f"{query_text} again", float(rng.uniform(0.0, 600.0)))
            log.append(
                ImpressionRecord(
                    pane_id=pane_id,
                    timestamp=base_timestamp + j,
                    answer_clicks=frozenset(int(p) + 1 for p in np.flatnonzero(clicks[j])),
                    result_clicks=result_clicks,
                    reformulation=reformulation,
                )
            )
    return log
