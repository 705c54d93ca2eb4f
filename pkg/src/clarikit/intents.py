"""Weighted intent sets per query, mined from two sources: reformulations
where the follow-up query contains the original, and titles of clicked URLs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .core import tokenize

SOURCES = ("reformulation", "click_title")


@dataclass(frozen=True)
class IntentSet:
    query_id: str
    source: str
    items: tuple[tuple[str, float], ...]  # (intent_text, weight), weight descending

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown intent source {self.source!r}")
        items = tuple((text, float(w)) for text, w in self.items)
        if any(w <= 0 or not math.isfinite(w) for _, w in items):
            raise ValueError("intent weights must be positive and finite")
        texts = [t for t, _ in items]
        if len(set(texts)) != len(texts):
            raise ValueError("intent texts must be unique within a set")
        object.__setattr__(self, "items", tuple(sorted(items, key=lambda it: (-it[1], it[0]))))

    def weights_total(self) -> float:
        return sum(w for _, w in self.items)


def normalize_phrase(text: str) -> str:
    return " ".join(tokenize(text))


def contains_query(query_tokens: list[str], candidate_tokens: list[str]) -> bool:
    """Token-level contiguous subsequence test (so 'art' never matches inside
    'cartoon')."""
    n, m = len(candidate_tokens), len(query_tokens)
    if m == 0 or m > n:
        return False
    return any(candidate_tokens[i : i + m] == query_tokens for i in range(n - m + 1))


def strip_site_suffix(title: str) -> str:
    """Drop a trailing ' - Site Name' or ' | Site Name' boilerplate segment."""
    for sep in (" - ", " | "):
        idx = title.rfind(sep)
        if idx > 0:
            title = title[:idx]
    return title


def intents_from_reformulations(
    triples: Iterable[tuple[str, str, int]],
    min_freq: int = 2,
    query_ids: Mapping[str, str] | None = None,
) -> dict[str, IntentSet]:
    """Build one reformulation-sourced intent set per query.

    Keeps triples whose follow-up query strictly contains the query as a
    contiguous token subsequence; weights are summed frequencies, and items
    below min_freq are dropped after aggregation.  Keys are normalized query
    texts unless a query_ids mapping (normalized text -> id) is given.
    """
    weights: dict[str, dict[str, float]] = {}
    for q, q_prime, w in triples:
        if w < 1:
            raise ValueError(f"reformulation frequency must be >= 1, got {w}")
        q_norm = normalize_phrase(q)
        intent_norm = normalize_phrase(q_prime)
        if not q_norm or intent_norm == q_norm:
            continue
        if not contains_query(tokenize(q), tokenize(q_prime)):
            continue
        bucket = weights.setdefault(q_norm, {})
        bucket[intent_norm] = bucket.get(intent_norm, 0.0) + float(w)
    return _finish(weights, "reformulation", min_freq, query_ids)


def intents_from_click_titles(
    records: Iterable[tuple[str, str, str, int]],
    min_freq: int = 2,
    query_ids: Mapping[str, str] | None = None,
) -> dict[str, IntentSet]:
    """Build one click-title-sourced intent set per query.  Titles are
    normalized (site-name suffix stripped, lowercased, punctuation removed)
    and weights are summed click frequencies."""
    weights: dict[str, dict[str, float]] = {}
    for q, _url, title, freq in records:
        if freq < 1:
            raise ValueError(f"click frequency must be >= 1, got {freq}")
        q_norm = normalize_phrase(q)
        intent_norm = normalize_phrase(strip_site_suffix(title))
        if not q_norm or not intent_norm:
            continue
        bucket = weights.setdefault(q_norm, {})
        bucket[intent_norm] = bucket.get(intent_norm, 0.0) + float(freq)
    return _finish(weights, "click_title", min_freq, query_ids)


def _finish(
    weights: dict[str, dict[str, float]],
    source: str,
    min_freq: int,
    query_ids: Mapping[str, str] | None,
) -> dict[str, IntentSet]:
    out = {}
    for q_norm, bucket in weights.items():
        items = tuple((text, w) for text, w in bucket.items() if w >= min_freq)
        if not items:
            continue
        if query_ids is None:
            key = query_id = q_norm
        elif q_norm in query_ids:
            key = query_id = query_ids[q_norm]
        else:
            continue
        out[key] = IntentSet(query_id=query_id, source=source, items=items)
    return out


def truncate_intents(intent_set: IntentSet, n_max: int) -> IntentSet:
    """Keep the n_max heaviest intents, breaking weight ties by text order.
    Weights are left as-is; consumers renormalize."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if len(intent_set.items) <= n_max:
        return intent_set
    return IntentSet(
        query_id=intent_set.query_id, source=intent_set.source, items=intent_set.items[:n_max]
    )


def read_reformulations_tsv(path: str) -> Iterator[tuple[str, str, int]]:
    yield from ((q, qp, int(w)) for q, qp, w in _read_tsv_rows(path, 3))


def read_click_titles_tsv(path: str) -> Iterator[tuple[str, str, str, int]]:
    yield from ((q, url, title, int(f)) for q, url, title, f in _read_tsv_rows(path, 4))


def _read_tsv_rows(path: str, n_cols: int) -> Iterator[tuple]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != n_cols:
                raise ValueError(f"{path}:{lineno}: expected {n_cols} tab-separated columns, got {len(cols)}")
            yield tuple(cols)


def save_intent_sets(path: str, sets: Iterable[IntentSet]) -> None:
    from .dataio import write_jsonl

    write_jsonl(
        path,
        (
            {"query_id": s.query_id, "source": s.source, "items": [[t, w] for t, w in s.items]}
            for s in sorted(sets, key=lambda s: (s.query_id, s.source))
        ),
    )


def load_intent_sets(path: str) -> dict[str, dict[str, IntentSet]]:
    """Load as query_id -> source -> IntentSet."""
    from .dataio import read_jsonl

    out: dict[str, dict[str, IntentSet]] = {}
    for d in read_jsonl(path):
        s = IntentSet(
            query_id=d["query_id"], source=d["source"], items=tuple((t, float(w)) for t, w in d["items"])
        )
        out.setdefault(s.query_id, {})[s.source] = s
    return out
