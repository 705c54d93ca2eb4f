"""Two-encoder neural scorer for clarification panes.

One branch (the intents coverage encoder, one per intent source) measures how
well the candidate answers cover the query's mined intents; the other (the
answers consistency encoder) measures whether the answers are coherent with
each other and the clarifying question.  A two-layer feed-forward head maps
the concatenated branch outputs to a scalar score.

Panes are padded to a fixed number of answer slots and intent sets to a fixed
number of intent slots; padded slots are masked out of attention and pooling,
so padding never changes a score.  Training is pairwise: for two panes of the
same query, the softmax over their two scores is pushed toward the one with
the higher engagement label.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import ClarificationPane, Query, tokenize
from .intents import IntentSet
from .tensor import autodiff as ad
from .tensor.autodiff import Tensor
from .tensor.nn import (
    EncoderLayerParams,
    encoder_layer_params_dict,
    encoder_layer_params_from_dict,
    init_encoder_layer,
    masked_mean_rows,
    transformer_encoder_layer,
)
from .tensor.optim import Adam, AdamConfig
from .tensor.text import text_encode
from .tensor import checkpoint

INTENT_SOURCES = ("reformulation", "click_title")


@dataclass(frozen=True)
class RlcConfig:
    dim: int = 64
    heads: int = 2
    layers: int = 1
    answer_slots: int = 5
    max_intents: int = 8
    hash_buckets: int = 4096
    ff_dim: int = 128
    head_hidden: int = 64

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ValueError("dim must be divisible by heads")
        if not (2 <= self.answer_slots <= 5):
            raise ValueError("answer_slots must be in [2, 5]")
        if self.max_intents < 1 or self.hash_buckets < 2:
            raise ValueError("bad config")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "heads": self.heads,
            "layers": self.layers,
            "answer_slots": self.answer_slots,
            "max_intents": self.max_intents,
            "hash_buckets": self.hash_buckets,
            "ff_dim": self.ff_dim,
            "head_hidden": self.head_hidden,
        }

    @staticmethod
    def from_dict(d: dict) -> "RlcConfig":
        return RlcConfig(**d)


@dataclass(frozen=True)
class TrainTriple:
    """One query with its candidate panes and per-pane labels (engagement
    rates from clicks, or ordinal human labels)."""

    query: Query
    panes: tuple[ClarificationPane, ...]
    labels: tuple[float, ...]

    def __post_init__(self):
        if len(self.panes) != len(self.labels):
            raise ValueError("one label per pane required")
        if any(not np.isfinite(l) for l in self.labels):
            raise ValueError("labels must be finite")


class RlcModel:
    """Parameter container plus the forward pipeline.  Parameters live in a
    flat name -> Tensor dict so the optimizer, checkpoints, and gradient
    checks all see one namespace."""

    def __init__(self, config: RlcConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params

    # -- construction -----------------------------------------------------

    @staticmethod
    def init(config: RlcConfig, seed: int) -> "RlcModel":
        rng = np.random.default_rng(seed)
        d = config.dim
        params: dict[str, Tensor] = {}
        # one shared embedding table; per-role projections keep the encoder
        # roles distinct while reusing the same token space
        params["embed.table"] = Tensor(rng.standard_normal((config.hash_buckets, d)) * 0.1, requires_grad=True)
        for role in ("ice.reformulation", "ice.click_title", "ace.answer", "ace.question"):
            params[f"{role}.proj"] = Tensor(rng.standard_normal((d, d)) * (1.0 / np.sqrt(d)), requires_grad=True)
        for source in INTENT_SOURCES:
            for stage in ("answers_enc", "intents_enc"):
                for layer in range(config.layers):
                    enc = init_encoder_layer(d, config.heads, config.ff_dim, rng)
                    params.update(encoder_layer_params_dict(f"ice.{source}.{stage}.l{layer}", enc))
            params[f"ice.{source}.ff_w1"] = Tensor(rng.standard_normal((d, d)) * (1.0 / np.sqrt(d)), requires_grad=True)
            params[f"ice.{source}.ff_b1"] = Tensor(np.zeros(d), requires_grad=True)
            params[f"ice.{source}.ff_w2"] = Tensor(rng.standard_normal((d, d)) * (1.0 / np.sqrt(d)), requires_grad=True)
            params[f"ice.{source}.ff_b2"] = Tensor(np.zeros(d), requires_grad=True)
        for layer in range(config.layers):
            enc = init_encoder_layer(d, config.heads, config.ff_dim, rng)
            params.update(encoder_layer_params_dict(f"ace.enc.l{layer}", enc))
        concat_dim = 3 * d  # two intent sources + the consistency branch
        params["head.w1"] = Tensor(rng.standard_normal((concat_dim, config.head_hidden)) * (1.0 / np.sqrt(concat_dim)), requires_grad=True)
        params["head.b1"] = Tensor(np.zeros(config.head_hidden), requires_grad=True)
        params["head.w2"] = Tensor(rng.standard_normal((config.head_hidden, 1)) * (1.0 / np.sqrt(config.head_hidden)), requires_grad=True)
        params["head.b2"] = Tensor(np.zeros(1), requires_grad=True)
        return RlcModel(config, params)

    def _encoder(self, prefix: str, layer: int) -> EncoderLayerParams:
        return encoder_layer_params_from_dict(f"{prefix}.l{layer}", self.params, self.config.heads)

    # -- forward ----------------------------------------------------------

    def _padded_intents(self, intent_set: IntentSet | None) -> tuple[list[str | None], np.ndarray]:
        n = self.config.max_intents
        items = list(intent_set.items[:n]) if intent_set is not None else []
        texts: list[str | None] = [text for text, _ in items] + [None] * (n - len(items))
        weights = np.zeros(n)
        weights[: len(items)] = [w for _, w in items]
        if weights.sum() <= 0.0:
            if intent_set is not None and len(items) > 0:
                warnings.warn(f"intent set for {intent_set.query_id} has zero total weight; using uniform")
                weights[: len(items)] = 1.0
            else:
                # no intents at all: a single uniformly weighted null slot
                weights[0] = 1.0
        return texts, weights / weights.sum()

    def _padded_answers(self, pane: ClarificationPane) -> tuple[list[str | None], np.ndarray]:
        k = self.config.answer_slots
        texts: list[str | None] = [a.text for a in pane.answers[:k]]
        texts += [None] * (k - len(texts))
        mask = np.array([0.0 if t is None else 1.0 for t in texts])
        return texts, mask

    def encode_intent_coverage(
        self, query: Query, pane: ClarificationPane, intent_set: IntentSet | None, source: str
    ) -> Tensor:
        """Coverage branch for one intent source: encode every (query, answer,
        intent) triplet, summarize the answers per intent, contextualize
        across intents, weight by normalized intent weight, sum, and refine
        with two point-wise feed-forward layers."""
        cfg = self.config
        table = self.params["embed.table"]
        proj = self.params[f"ice.{source}.proj"]
        query_tokens = tokenize(query.text)
        answer_texts, answer_mask = self._padded_answers(pane)
        intent_texts, weights = self._padded_intents(intent_set)
        zero_row = Tensor(np.zeros((1, cfg.dim)))

        per_intent_rows: list[Tensor] = []
        for intent_text in intent_texts:
            if intent_text is None:
                per_intent_rows.append(zero_row)
                continue
            intent_tokens = tokenize(intent_text)
            triplet_rows = []
            for answer_text in answer_texts:
                if answer_text is None:
                    triplet_rows.append(zero_row)
                else:
                    triplet_rows.append(
                        text_encode([query_tokens, tokenize(answer_text), intent_tokens], table, proj)
                    )
            seq = ad.concat(triplet_rows, axis=0)
            for layer in range(cfg.layers):
                seq = transformer_encoder_layer(seq, self._encoder(f"ice.{source}.answers_enc", layer), key_mask=answer_mask)
            per_intent_rows.append(masked_mean_rows(seq, answer_mask))

        intent_mask = np.array([0.0 if t is None else 1.0 for t in intent_texts])
        if intent_mask.sum() == 0:
            intent_mask[0] = 1.0  # the null slot carries the uniform weight
        intents_seq = ad.concat(per_intent_rows, axis=0)
        for layer in range(cfg.layers):
            intents_seq = transformer_encoder_layer(intents_seq, self._encoder(f"ice.{source}.intents_enc", layer), key_mask=intent_mask)
        # weight each contextualized intent by its normalized frequency and sum
        pooled = ad.matmul(Tensor(weights[None, :]), intents_seq)
        h = ad.relu(ad.add(ad.matmul(pooled, self.params[f"ice.{source}.ff_w1"]), self.params[f"ice.{source}.ff_b1"]))
        return ad.add(ad.matmul(h, self.params[f"ice.{source}.ff_w2"]), self.params[f"ice.{source}.ff_b2"])

    def encode_answer_consistency(
        self, pane: ClarificationPane, entity_lexicon: Mapping[str, str] | None = None
    ) -> Tensor:
        """Consistency branch: encode each answer with its entity type, add
        the question encoding, run the encoder over the slots, and mean-pool
        the real ones."""
        cfg = self.config
        table = self.params["embed.table"]
        lexicon = entity_lexicon or {}
        answer_texts, answer_mask = self._padded_answers(pane)
        rows: list[Tensor] = []
        for text in answer_texts:
            if text is None:
                rows.append(Tensor(np.zeros((1, cfg.dim))))
                continue
            entity_type = lexicon.get(text, "")
            rows.append(
                text_encode([tokenize(text), tokenize(entity_type)], table, self.params["ace.answer.proj"])
            )
        rows.append(text_encode([tokenize(pane.question_text)], table, self.params["ace.question.proj"]))
        mask = np.concatenate([answer_mask, [1.0]])
        seq = ad.concat(rows, axis=0)
        for layer in range(cfg.layers):
            seq = transformer_encoder_layer(seq, self._encoder("ace.enc", layer), key_mask=mask)
        return masked_mean_rows(seq, mask)

    def score_tensor(
        self,
        query: Query,
        pane: ClarificationPane,
        intent_sets: Mapping[str, IntentSet] | None,
        entity_lexicon: Mapping[str, str] | None = None,
    ) -> Tensor:
        intent_sets = intent_sets or {}
        branches = [
            self.encode_intent_coverage(query, pane, intent_sets.get(source), source)
            for source in INTENT_SOURCES
        ]
        branches.append(self.encode_answer_consistency(pane, entity_lexicon))
        joined = ad.concat(branches, axis=1)
        h = ad.relu(ad.add(ad.matmul(joined, self.params["head.w1"]), self.params["head.b1"]))
        out = ad.add(ad.matmul(h, self.params["head.w2"]), self.params["head.b2"])
        return ad.sum_(out)

    def score(self, query, pane, intent_sets=None, entity_lexicon=None) -> float:
        return self.score_tensor(query, pane, intent_sets, entity_lexicon).item()

    # -- persistence -------------------------------------------------------

    def save(self, path: str) -> None:
        checkpoint.save_tensors(path, self.params, config=self.config.to_dict())

    @staticmethod
    def load(path: str) -> "RlcModel":
        tensors, config = checkpoint.load_tensors(path)
        return RlcModel(RlcConfig.from_dict(config), tensors)


def pair_probabilities(score_a: float, score_b: float) -> tuple[float, float]:
    """Softmax over two scores as (p_a, p_b).  Computed from the higher score
    down so the pair sums to exactly 1.0 and swapping the arguments returns
    the bitwise-mirrored pair."""
    if score_a >= score_b:
        p_hi = 1.0 / (1.0 + math.exp(score_b - score_a))
        return p_hi, 1.0 - p_hi
    p_hi = 1.0 / (1.0 + math.exp(score_a - score_b))
    return 1.0 - p_hi, p_hi


def pair_loss(score_winner: Tensor, score_loser: Tensor) -> Tensor:
    """Binary cross entropy of the pairwise softmax with the winner as the
    positive class: softplus(loser - winner)."""
    return ad.softplus(ad.add(score_loser, ad.neg(score_winner)))


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    pair_count: int = 0


def training_pairs(triples: Sequence[TrainTriple]) -> list[tuple[int, int, int]]:
    """(triple index, winner pane index, loser pane index) for every unordered
    pane pair with distinct labels."""
    pairs = []
    for t_idx, triple in enumerate(triples):
        for a in range(len(triple.panes)):
            for b in range(a + 1, len(triple.panes)):
                if triple.labels[a] == triple.labels[b]:
                    continue
                if triple.labels[a] > triple.labels[b]:
                    pairs.append((t_idx, a, b))
                else:
                    pairs.append((t_idx, b, a))
    return pairs


def train_pairwise(
    model: RlcModel,
    triples: Sequence[TrainTriple],
    intent_sets: Mapping[str, Mapping[str, IntentSet]],
    entity_lexicon: Mapping[str, str] | None,
    optimizer_config: AdamConfig,
    steps: int,
    shuffle_seed: int = 0,
) -> TrainReport:
    """Pairwise training: each step draws the next (winner, loser) pane pair
    from a seeded shuffle (reshuffled per epoch) and applies one Adam update
    of the softmax cross-entropy pair loss."""
    pairs = training_pairs(triples)
    if not pairs:
        raise ValueError("no trainable pairs: every query needs >= 2 panes with distinct labels")
    optimizer = Adam(model.params, optimizer_config)
    rng = np.random.default_rng(shuffle_seed)
    report = TrainReport(pair_count=len(pairs))
    order: list[int] = []
    for _ in range(steps):
        if not order:
            order = list(rng.permutation(len(pairs)))
        t_idx, win, lose = pairs[order.pop()]
        triple = triples[t_idx]
        sets = intent_sets.get(triple.query.id, {})
        optimizer.zero_grad()
        score_w = model.score_tensor(triple.query, triple.panes[win], sets, entity_lexicon)
        score_l = model.score_tensor(triple.query, triple.panes[lose], sets, entity_lexicon)
        loss = pair_loss(score_w, score_l)
        loss.backward()
        optimizer.step()
        report.losses.append(loss.item())
    return report


def pairwise_accuracy(
    model: RlcModel,
    triples: Sequence[TrainTriple],
    intent_sets: Mapping[str, Mapping[str, IntentSet]],
    entity_lexicon: Mapping[str, str] | None = None,
) -> float:
    """Fraction of distinct-label pane pairs the model orders correctly."""
    pairs = training_pairs(triples)
    if not pairs:
        raise ValueError("no scorable pairs")
    correct = 0
    for t_idx, win, lose in pairs:
        triple = triples[t_idx]
        sets = intent_sets.get(triple.query.id, {})
        s_win = model.score(triple.query, triple.panes[win], sets, entity_lexicon)
        s_lose = model.score(triple.query, triple.panes[lose], sets, entity_lexicon)
        if s_win > s_lose:
            correct += 1
    return correct / len(pairs)


LABEL_VALUES = {"Bad": 0.0, "Fair": 1.0, "Good": 2.0}


def fine_tune(
    model: RlcModel,
    labeled: Sequence[TrainTriple],
    negative_pool: Sequence[ClarificationPane],
    optimizer_config: AdamConfig,
    steps: int,
    intent_sets: Mapping[str, Mapping[str, IntentSet]],
    entity_lexicon: Mapping[str, str] | None = None,
    panes_per_query: int = 10,
    pad_seed: int = 0,
) -> TrainReport:
    """Continue pairwise training on human-labeled panes.  Queries with fewer
    than panes_per_query candidates are padded with label-0 panes sampled from
    other queries, so every query ranks a fixed-size list."""
    distinct = {label for triple in labeled for label in triple.labels}
    if len(distinct) < 2:
        raise ValueError("fine-tuning needs at least 2 distinct labels overall")
    rng = np.random.default_rng(pad_seed)
    padded: list[TrainTriple] = []
    for triple in labeled:
        panes = list(triple.panes)
        labels = list(triple.labels)
        foreign = [p for p in negative_pool if p.query_id != triple.query.id]
        need = panes_per_query - len(panes)
        if need > 0 and foreign:
            chosen = rng.choice(len(foreign), size=min(need, len(foreign)), replace=False)
            for idx in sorted(int(c) for c in chosen):
                panes.append(foreign[idx])
                labels.append(0.0)
        padded.append(TrainTriple(query=triple.query, panes=tuple(panes), labels=tuple(labels)))
    return train_pairwise(
        model, padded, intent_sets, entity_lexicon, optimizer_config, steps, shuffle_seed=pad_seed + 1
    )


def triples_from_labels(
    queries: Mapping[str, Query],
    panes: Mapping[str, ClarificationPane],
    labels: Mapping[str, str],
) -> list[TrainTriple]:
    """Assemble labeled training triples from overall pane labels
    (pane id -> Good/Fair/Bad), ordinalized Good=2, Fair=1, Bad=0."""
    by_query: dict[str, list[tuple[ClarificationPane, float]]] = {}
    for pane_id, label in labels.items():
        pane = panes[pane_id]
        by_query.setdefault(pane.query_id, []).append((pane, LABEL_VALUES[label]))
    triples = []
    for query_id in sorted(by_query):
        entries = sorted(by_query[query_id], key=lambda e: e[0].id)
        triples.append(
            TrainTriple(
                query=queries[query_id],
                panes=tuple(p for p, _ in entries),
                labels=tuple(v for _, v in entries),
            )
        )
    return triples
