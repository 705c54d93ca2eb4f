"""Batch command-line surface.

Every command reads declarative parameters from an optional JSON config file
(--config), lets individual flags override file values, writes plain
delimited or line-delimited artifacts into --out, and drops a manifest.json
(command, version, seed, resolved config, input digests) next to them.
Partial outputs are removed when a command fails.

Exit codes: 0 success, 1 input or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import analytics, bias, dataio, intents as intents_mod, ranker as ranker_mod, rlc as rlc_mod
from .bias import NumericalError
from .core import collect_stats, engagement_rate
from .synthlog import CorpusConfig, UserModel, gen_corpus, simulate_impressions
from .tensor.optim import AdamConfig, NonFiniteGradientError


class Outputs:
    """Tracks files written by one command so failures can clean up."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.created: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        full = os.path.join(self.out_dir, name)
        self.created.append(full)
        return full

    def discard_all(self) -> None:
        for path in self.created:
            try:
                os.unlink(path)
            except FileNotFoundError:
                pass


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, then config-file values, then explicit flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_values = json.load(fh)
        if not isinstance(file_values, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise ValueError(f"{args.config}: unknown config keys {sorted(unknown)}")
        merged.update(file_values)
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _load_corpus_files(args) -> tuple[dict, dict]:
    queries = dataio.load_queries(args.queries)
    panes = dataio.load_panes(args.panes)
    for pane in panes.values():
        if pane.query_id not in queries:
            raise ValueError(f"pane {pane.id} references unknown query {pane.query_id}")
    return queries, panes


def _load_lexicon(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    lexicon = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 tab-separated columns")
            lexicon[cols[0]] = cols[1]
    return lexicon


def _load_history(path: str | None) -> dict[str, list[tuple[str, int]]]:
    """Per-query URL click history from a (query_id, url, count) TSV."""
    history: dict[str, dict[str, int]] = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cols = line.split("\t")
                if len(cols) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 tab-separated columns")
                history.setdefault(cols[0], {})[cols[1]] = history.get(cols[0], {}).get(cols[1], 0) + int(cols[2])
    return {qid: sorted(urls.items()) for qid, urls in history.items()}


def _derive_history(log, panes) -> dict[str, list[tuple[str, int]]]:
    history: dict[str, dict[str, int]] = {}
    for rec in log:
        pane = panes.get(rec.pane_id)
        if pane is None:
            continue
        for url, _dwell in rec.result_clicks:
            bucket = history.setdefault(pane.query_id, {})
            bucket[url] = bucket.get(url, 0) + 1
    return {qid: sorted(urls.items()) for qid, urls in history.items()}


def _rlc_scorer(model_path: str | None, intent_sets, lexicon):
    if not model_path:
        return None
    model = rlc_mod.RlcModel.load(model_path)

    def scorer(query, pane):
        return model.score(query, pane, intent_sets.get(query.id, {}), lexicon)

    return scorer


def _engagement_triples(queries, panes, log, min_impressions: int) -> list[rlc_mod.TrainTriple]:
    """Queries with >= 2 sufficiently shown panes whose engagement rates
    differ become training triples labeled by those rates."""
    stats = collect_stats(log, panes)
    by_query: dict[str, list[tuple[str, float]]] = {}
    for pane_id, pane_stats in sorted(stats.items()):
        if pane_stats.impressions < min_impressions:
            continue
        by_query.setdefault(panes[pane_id].query_id, []).append((pane_id, engagement_rate(pane_stats)))
    triples = []
    for query_id in sorted(by_query):
        entries = by_query[query_id]
        if len(entries) < 2 or len({rate for _, rate in entries}) < 2:
            continue
        triples.append(
            rlc_mod.TrainTriple(
                query=queries[query_id],
                panes=tuple(panes[pid] for pid, _ in entries),
                labels=tuple(rate for _, rate in entries),
            )
        )
    return triples


# -- commands ----------------------------------------------------------------

SYNTH_DEFAULTS = {
    "n_queries": 200,
    "panes_per_query": 1,
    "swap_fraction": 0.0,
    "answer_count_weights": [0.2, 0.3, 0.25, 0.25],
    "relevance": ["beta", 1.0, 3.0],
    "intents_per_query": 4,
    "question_fraction": 0.25,
    "reformulation_rate": 0.0,
    "result_click_rate": 0.0,
    "cell_plan": None,
    "user_model": {"kind": "relevance_only"},
    "n_per_pane": 100,
}


def cmd_synth_gen(args, out: Outputs) -> None:
    config = _merge_config(args, SYNTH_DEFAULTS)
    model_params = dict(config["user_model"])
    kind = model_params.pop("kind")
    if "exam_probs" in model_params:
        model_params["exam_probs"] = tuple(model_params["exam_probs"])
    user_model = UserModel(kind=kind, **model_params)
    corpus_config = CorpusConfig(
        n_queries=int(config["n_queries"]),
        panes_per_query=int(config["panes_per_query"]),
        swap_fraction=float(config["swap_fraction"]),
        answer_count_weights=tuple(config["answer_count_weights"]),
        relevance=tuple(config["relevance"]),
        intents_per_query=int(config["intents_per_query"]),
        question_fraction=float(config["question_fraction"]),
        reformulation_rate=float(config["reformulation_rate"]),
        result_click_rate=float(config["result_click_rate"]),
        cell_plan=tuple(tuple(row) for row in config["cell_plan"]) if config["cell_plan"] else None,
    )
    corpus = gen_corpus(corpus_config, seed=args.seed)
    log = simulate_impressions(corpus, user_model, int(config["n_per_pane"]), seed=args.seed)

    dataio.save_queries(out.path("queries.jsonl"), [corpus.queries[k] for k in sorted(corpus.queries)])
    dataio.save_panes(out.path("panes.jsonl"), [corpus.panes[k] for k in sorted(corpus.panes)])
    dataio.save_impressions(out.path("impressions.jsonl"), log)
    intents_mod.save_intent_sets(
        out.path("intents.jsonl"),
        [s for per_query in corpus.intent_sets.values() for s in per_query.values()],
    )
    dataio.write_jsonl(
        out.path("ground_truth.jsonl"),
        (
            {"pane_id": pane_id, "relevance": list(corpus.ground_truth[pane_id])}
            for pane_id in sorted(corpus.ground_truth)
        ),
    )
    dataio.write_tsv(
        out.path("entity_lexicon.tsv"),
        ["answer_text", "entity_type"],
        sorted(corpus.entity_lexicon.items()),
    )
    dataio.write_manifest(out.out_dir, "synth-gen", config, {}, seed=args.seed)


ANALYZE_DEFAULTS = {
    "dwell_threshold_s": 30.0,
    "reformulation_window_s": 300.0,
    "entropy_bins": 5,
}


def cmd_analyze(args, out: Outputs) -> None:
    config = _merge_config(args, ANALYZE_DEFAULTS)
    queries, panes = _load_corpus_files(args)
    log = dataio.load_impressions(args.impressions)
    history = _load_history(args.history) if args.history else _derive_history(log, panes)

    for dimension in analytics.DIMENSIONS:
        if dimension in ("unique_url_bin", "url_entropy_bin") and not history:
            continue
        try:
            table = analytics.engagement_breakdown(
                log, panes, queries, dimension, historical_clicks=history, n_bins=int(config["entropy_bins"])
            )
        except ValueError:
            continue  # dimension has no eligible panes in this log
        rows = []
        for row in table.rows:
            base = [row.bucket, row.impressions, row.relative_engagement]
            if row.quartiles is not None:
                base.extend(row.quartiles)
            rows.append(base)
        header = ["bucket", "impressions", "relative_engagement"]
        if any(r.quartiles is not None for r in table.rows):
            header += ["min", "q1", "median", "q3", "max"]
        dataio.write_tsv(out.path(f"breakdown_{dimension}.tsv"), header, rows)

    curves = []
    for ambiguity in ("ambiguous", "faceted"):
        for count in (2, 3, 4, 5):
            try:
                curve = analytics.conditional_click_by_position(log, panes, queries, ambiguity, count)
            except ValueError:
                continue
            curves.append([ambiguity, count] + [float(v) for v in curve])
    if curves:
        width = max(len(r) for r in curves) - 2
        dataio.write_tsv(
            out.path("conditional_click_by_position.tsv"),
            ["ambiguity_class", "answer_count"] + [f"position_{i + 1}" for i in range(width)],
            [r + [""] * (2 + width - len(r)) for r in curves],
        )

    summary = [
        ["dissatisfaction_rate", analytics.dissatisfaction_rate(
            log, float(config["dwell_threshold_s"]), float(config["reformulation_window_s"]))],
    ]
    try:
        summary.append(["multi_click_rate", analytics.multi_click_rate(log)])
    except ValueError:
        pass
    dataio.write_tsv(out.path("summary.tsv"), ["metric", "value"], summary)
    dataio.write_manifest(
        out.out_dir, "analyze", config,
        {"queries": args.queries, "panes": args.panes, "impressions": args.impressions},
        seed=None,
    )


BIAS_DEFAULTS = {
    "folds": 10,
    "logreg_tol": 1e-10,
    "logreg_max_iter": 100000,
}


def cmd_bias(args, out: Outputs) -> None:
    config = _merge_config(args, BIAS_DEFAULTS)
    _, panes = _load_corpus_files(args)
    log = dataio.load_impressions(args.impressions)
    stats = collect_stats(log, panes)
    triples = bias.build_swap_dataset(panes)
    triples = [t for t in triples if t.pane_c in stats and t.pane_c_prime in stats]
    if not triples:
        raise ValueError("no swap triples found in the pane set")

    points = bias.scatter_points(triples, stats)
    dataio.write_tsv(
        out.path("scatter.tsv"),
        ["log_odds_lower", "log_odds_higher", "answer_count", "swap_position"],
        points,
    )
    slope, intercept = bias.fit_scatter_line([(x, y) for x, y, _, _ in points])
    cells = bias.pct_above_diagonal(triples, stats)
    dataio.write_tsv(
        out.path("above_diagonal.tsv"),
        ["answer_count", "swap_position", "pct_above", "points"],
        [[k, i, pct, n] for (k, i), (pct, n) in sorted(cells.items())],
    )

    folds = int(config["folds"])
    report = bias.fit_click_logreg(
        triples, panes, stats, folds=folds,
        tol=float(config["logreg_tol"]), max_iter=int(config["logreg_max_iter"]),
    )
    weight_rows = []
    for label, per_fold in (("L", report.fold_weights_l), ("R", report.fold_weights_r)):
        for fold, weights in enumerate(per_fold):
            for name, value in zip(report.feature_names, weights):
                weight_rows.append([label, fold, name, float(value)])
        for name, value in zip(report.feature_names, np.mean(per_fold, axis=0)):
            weight_rows.append([label, "mean", name, float(value)])
    dataio.write_tsv(out.path("logreg_weights.tsv"), ["label", "fold", "feature", "weight"], weight_rows)

    ce_report = bias.evaluate_click_models(
        triples, panes, stats, folds=folds,
        logreg_tol=float(config["logreg_tol"]), logreg_max_iter=int(config["logreg_max_iter"]),
    )
    ce_rows = [
        [model, group, cell.mean, cell.std, cell.folds]
        for (model, group), cell in sorted(ce_report.cells.items())
    ]
    dataio.write_tsv(out.path("cross_entropy.tsv"), ["model", "options", "mean", "std", "folds"], ce_rows)
    dataio.write_tsv(
        out.path("scatter_fit.tsv"), ["metric", "value"],
        [["slope", slope], ["intercept", intercept], ["points", len(points)]],
    )
    dataio.write_manifest(
        out.out_dir, "bias", config,
        {"queries": args.queries, "panes": args.panes, "impressions": args.impressions},
        seed=None,
    )


INTENTS_DEFAULTS = {"min_freq": 2, "n_max": 8}


def cmd_intents(args, out: Outputs) -> None:
    config = _merge_config(args, INTENTS_DEFAULTS)
    if not args.reformulations and not args.click_titles:
        raise ValueError("need --reformulations and/or --click-titles input")
    query_ids = None
    if args.queries:
        queries = dataio.load_queries(args.queries)
        query_ids = {intents_mod.normalize_phrase(q.text): q.id for q in queries.values()}
    sets: list = []
    min_freq = int(config["min_freq"])
    n_max = int(config["n_max"])
    if args.reformulations:
        triples = intents_mod.read_reformulations_tsv(args.reformulations)
        built = intents_mod.intents_from_reformulations(triples, min_freq=min_freq, query_ids=query_ids)
        sets.extend(intents_mod.truncate_intents(s, n_max) for s in built.values())
    if args.click_titles:
        records = intents_mod.read_click_titles_tsv(args.click_titles)
        built = intents_mod.intents_from_click_titles(records, min_freq=min_freq, query_ids=query_ids)
        sets.extend(intents_mod.truncate_intents(s, n_max) for s in built.values())
    intents_mod.save_intent_sets(out.path("intents.jsonl"), sets)
    inputs = {}
    if args.reformulations:
        inputs["reformulations"] = args.reformulations
    if args.click_titles:
        inputs["click_titles"] = args.click_titles
    dataio.write_manifest(out.out_dir, "intents", config, inputs, seed=None)


TRAIN_RLC_DEFAULTS = {
    "dim": 64,
    "heads": 2,
    "layers": 1,
    "max_intents": 8,
    "hash_buckets": 4096,
    "steps": 500,
    "lr": 1e-5,
    "weight_decay": 0.0,
    "warmup_steps": 5000,
    "total_steps": 100000,
    "min_impressions": 10,
}


def cmd_train_rlc(args, out: Outputs) -> None:
    config = _merge_config(args, TRAIN_RLC_DEFAULTS)
    queries, panes = _load_corpus_files(args)
    log = dataio.load_impressions(args.impressions)
    intent_sets = intents_mod.load_intent_sets(args.intents) if args.intents else {}
    lexicon = _load_lexicon(args.lexicon)
    triples = _engagement_triples(queries, panes, log, int(config["min_impressions"]))
    if not triples:
        raise ValueError("no queries with >= 2 panes of distinct engagement rates")
    model_config = rlc_mod.RlcConfig(
        dim=int(config["dim"]),
        heads=int(config["heads"]),
        layers=int(config["layers"]),
        max_intents=int(config["max_intents"]),
        hash_buckets=int(config["hash_buckets"]),
    )
    model = rlc_mod.RlcModel.init(model_config, seed=args.seed)
    adam = AdamConfig(
        lr=float(config["lr"]),
        weight_decay=float(config["weight_decay"]),
        warmup_steps=int(config["warmup_steps"]),
        total_steps=int(config["total_steps"]),
    )
    report = rlc_mod.train_pairwise(
        model, triples, intent_sets, lexicon, adam, steps=int(config["steps"]), shuffle_seed=args.seed
    )
    model.save(out.path("rlc_model.json"))
    dataio.write_tsv(
        out.path("loss.tsv"), ["step", "loss"], [[i + 1, loss] for i, loss in enumerate(report.losses)]
    )
    inputs = {"queries": args.queries, "panes": args.panes, "impressions": args.impressions}
    if args.intents:
        inputs["intents"] = args.intents
    if args.lexicon:
        inputs["lexicon"] = args.lexicon
    dataio.write_manifest(out.out_dir, "train-rlc", config, inputs, seed=args.seed)


FINE_TUNE_DEFAULTS = {
    "steps": 200,
    "lr": 1e-6,
    "weight_decay": 0.0,
    "warmup_steps": 50,
    "total_steps": 100000,
    "panes_per_query": 10,
}


def cmd_fine_tune_rlc(args, out: Outputs) -> None:
    config = _merge_config(args, FINE_TUNE_DEFAULTS)
    queries, panes = _load_corpus_files(args)
    labels = {}
    for d in dataio.read_jsonl(args.labels):
        _query_id, pane_id, pane_labels = dataio.labels_from_dict(d)
        labels[pane_id] = pane_labels.overall
    intent_sets = intents_mod.load_intent_sets(args.intents) if args.intents else {}
    lexicon = _load_lexicon(args.lexicon)
    model = rlc_mod.RlcModel.load(args.model)
    triples = rlc_mod.triples_from_labels(queries, panes, labels)
    adam = AdamConfig(
        lr=float(config["lr"]),
        weight_decay=float(config["weight_decay"]),
        warmup_steps=int(config["warmup_steps"]),
        total_steps=int(config["total_steps"]),
    )
    report = rlc_mod.fine_tune(
        model,
        triples,
        list(panes.values()),
        adam,
        steps=int(config["steps"]),
        intent_sets=intent_sets,
        entity_lexicon=lexicon,
        panes_per_query=int(config["panes_per_query"]),
        pad_seed=args.seed,
    )
    model.save(out.path("rlc_model.json"))
    dataio.write_tsv(
        out.path("loss.tsv"), ["step", "loss"], [[i + 1, loss] for i, loss in enumerate(report.losses)]
    )
    dataio.write_manifest(
        out.out_dir, "fine-tune-rlc", config,
        {"queries": args.queries, "panes": args.panes, "labels": args.labels, "model": args.model},
        seed=args.seed,
    )


TRAIN_RANKER_DEFAULTS = {
    "trees": 100,
    "depth": 3,
    "shrinkage": 0.1,
    "min_impressions": 10,
}


def _label_scale(rates: Sequence[float]) -> list[float]:
    """Engagement rates mapped onto the graded-label scale used by the nDCG
    gains (0..2), preserving order."""
    top = max(rates)
    if top <= 0:
        return [0.0 for _ in rates]
    return [2.0 * r / top for r in rates]


def cmd_train_ranker(args, out: Outputs) -> None:
    config = _merge_config(args, TRAIN_RANKER_DEFAULTS)
    queries, panes = _load_corpus_files(args)
    log = dataio.load_impressions(args.impressions)
    history = _load_history(args.history) if args.history else _derive_history(log, panes)
    intent_sets = intents_mod.load_intent_sets(args.intents) if args.intents else {}
    lexicon = _load_lexicon(args.lexicon)
    scorer = _rlc_scorer(args.rlc_model, intent_sets, lexicon)
    triples = _engagement_triples(queries, panes, log, int(config["min_impressions"]))
    if not triples:
        raise ValueError("no trainable queries in the impression log")
    per_query = []
    for triple in triples:
        rows = np.array(
            [
                ranker_mod.extract_features(triple.query, pane, history.get(triple.query.id), scorer).as_array()
                for pane in triple.panes
            ]
        )
        per_query.append((rows, np.array(_label_scale(triple.labels))))
    ensemble = ranker_mod.train_lambdamart(
        per_query,
        ranker_mod.LambdaMartConfig(
            n_trees=int(config["trees"]), max_depth=int(config["depth"]), shrinkage=float(config["shrinkage"])
        ),
    )
    ensemble.save(out.path("ensemble.json"))
    inputs = {"queries": args.queries, "panes": args.panes, "impressions": args.impressions}
    if args.rlc_model:
        inputs["rlc_model"] = args.rlc_model
    dataio.write_manifest(out.out_dir, "train-ranker", config, inputs, seed=args.seed)


def cmd_rank(args, out: Outputs) -> None:
    queries, panes = _load_corpus_files(args)
    history = _load_history(args.history) if args.history else {}
    intent_sets = intents_mod.load_intent_sets(args.intents) if args.intents else {}
    lexicon = _load_lexicon(args.lexicon)
    scorer = _rlc_scorer(args.rlc_model, intent_sets, lexicon)
    ensemble = ranker_mod.BoostedEnsemble.load(args.ensemble) if args.ensemble else None
    by_query: dict[str, list] = {}
    for pane in panes.values():
        by_query.setdefault(pane.query_id, []).append(pane)
    wanted = [args.query_id] if args.query_id else sorted(by_query)
    rows = []
    for query_id in wanted:
        if query_id not in by_query:
            raise ValueError(f"no panes for query {query_id!r}")
        ranked = ranker_mod.rank_panes(
            queries[query_id], by_query[query_id], ensemble, history.get(query_id), scorer
        )
        for position, pane in enumerate(ranked, start=1):
            rows.append([query_id, position, pane.id])
    dataio.write_tsv(out.path("ranked.tsv"), ["query_id", "rank", "pane_id"], rows)
    dataio.write_manifest(
        out.out_dir, "rank", {}, {"queries": args.queries, "panes": args.panes}, seed=None
    )


EVAL_DEFAULTS = {"min_impressions": 10, "randomization_rounds": 10000}


def cmd_eval(args, out: Outputs) -> None:
    config = _merge_config(args, EVAL_DEFAULTS)
    queries, panes = _load_corpus_files(args)
    intent_sets = intents_mod.load_intent_sets(args.intents) if args.intents else {}
    lexicon = _load_lexicon(args.lexicon)
    scorer = _rlc_scorer(args.rlc_model, intent_sets, lexicon)
    ensemble = ranker_mod.BoostedEnsemble.load(args.ensemble) if args.ensemble else None

    log = dataio.load_impressions(args.impressions) if args.impressions else None
    history = _load_history(args.history) if args.history else {}
    if not history and log is not None:
        history = _derive_history(log, panes)

    def method_ranker(query, query_panes):
        return ranker_mod.rank_panes(query, query_panes, ensemble, history.get(query.id), scorer)

    baseline = ranker_mod.entropy_baseline_ranker(history)
    rows = []

    if log is not None:
        stats = collect_stats(log, panes)
        test_set = []
        by_query: dict[str, list] = {}
        for pane_id, pane_stats in stats.items():
            if pane_stats.impressions >= int(config["min_impressions"]):
                by_query.setdefault(panes[pane_id].query_id, []).append(pane_id)
        for query_id in sorted(by_query):
            pane_ids = by_query[query_id]
            if len(pane_ids) < 2:
                continue
            rates = {pid: engagement_rate(stats[pid]) for pid in pane_ids}
            test_set.append((queries[query_id], [panes[pid] for pid in pane_ids], rates))
        if test_set:
            improvement = ranker_mod.engagement_improvement(method_ranker, test_set, baseline)
            rows.append(["engagement_improvement_pct", improvement])
            rows.append(["engagement_queries", len(test_set)])

    if args.labels:
        labels: dict[str, float] = {}
        for d in dataio.read_jsonl(args.labels):
            _qid, pane_id, pane_labels = dataio.labels_from_dict(d)
            labels[pane_id] = rlc_mod.LABEL_VALUES[pane_labels.overall]
        by_query = {}
        for pane_id in labels:
            if pane_id in panes:
                by_query.setdefault(panes[pane_id].query_id, []).append(pane_id)
        method_labels, baseline_labels = [], []
        for query_id in sorted(by_query):
            pane_ids = by_query[query_id]
            query_panes = [panes[pid] for pid in pane_ids]
            ranked = method_ranker(queries[query_id], query_panes)
            method_labels.append([labels[p.id] for p in ranked])
            ranked_baseline = baseline(queries[query_id], query_panes)
            baseline_labels.append([labels[p.id] for p in ranked_baseline])
        for k in (1, 3, 5):
            method_scores = [ranker_mod.ndcg_at_k(l, k) for l in method_labels]
            baseline_scores = [ranker_mod.ndcg_at_k(l, k) for l in baseline_labels]
            rows.append([f"ndcg@{k}", float(np.mean(method_scores))])
            rows.append([f"ndcg@{k}_baseline", float(np.mean(baseline_scores))])
            rows.append(
                [
                    f"ndcg@{k}_randomization_p",
                    ranker_mod.randomization_test(
                        method_scores, baseline_scores, rounds=int(config["randomization_rounds"]), seed=args.seed or 0
                    ),
                ]
            )

    if not rows:
        raise ValueError("nothing to evaluate: provide --impressions and/or --labels")
    dataio.write_tsv(out.path("eval.tsv"), ["metric", "value"], rows)
    dataio.write_manifest(
        out.out_dir, "eval", config, {"queries": args.queries, "panes": args.panes}, seed=args.seed
    )


def cmd_plot_data(args, out: Outputs) -> None:
    header, rows = dataio.read_tsv(args.input)
    name = args.name or os.path.basename(args.input)
    dataio.write_tsv(out.path(name), header, rows)
    dataio.write_manifest(out.out_dir, "plot-data", {}, {"input": args.input}, seed=None)


# -- argument wiring ---------------------------------------------------------


def _add_common(sub, *, seed=False, corpus=False, impressions=False, intents=False, lexicon=False, history=False):
    sub.add_argument("--out", help="output directory (or CLARIKIT_OUT_DIR)")
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--threads", type=int, help="worker cap (or CLARIKIT_THREADS); results never depend on it")
    if seed:
        sub.add_argument("--seed", type=int, default=0)
    if corpus:
        sub.add_argument("--queries", required=True)
        sub.add_argument("--panes", required=True)
    if impressions:
        sub.add_argument("--impressions", required=True)
    if intents:
        sub.add_argument("--intents")
    if lexicon:
        sub.add_argument("--lexicon")
    if history:
        sub.add_argument("--history")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clarikit",
        description="Engagement analytics, click-bias estimation, and learned re-ranking for search clarification panes.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("synth-gen", help="generate a synthetic corpus and impression log")
    _add_common(sub, seed=True)
    for key, value in SYNTH_DEFAULTS.items():
        if key in ("answer_count_weights", "relevance", "cell_plan", "user_model"):
            continue  # config-file only (structured values)
        sub.add_argument(f"--{key.replace('_', '-')}", type=type(value), default=None)
    sub.set_defaults(func=cmd_synth_gen)

    sub = commands.add_parser("analyze", help="engagement breakdowns and interaction quality metrics")
    _add_common(sub, corpus=True, impressions=True, history=True)
    sub.add_argument("--dwell-threshold-s", dest="dwell_threshold_s", type=float, default=None)
    sub.add_argument("--reformulation-window-s", dest="reformulation_window_s", type=float, default=None)
    sub.add_argument("--entropy-bins", dest="entropy_bins", type=int, default=None)
    sub.set_defaults(func=cmd_analyze)

    sub = commands.add_parser("bias", help="swap-experiment click bias report")
    _add_common(sub, corpus=True, impressions=True)
    sub.add_argument("--folds", type=int, default=None)
    sub.set_defaults(func=cmd_bias)

    sub = commands.add_parser("intents", help="build intent sets from reformulations and click titles")
    _add_common(sub)
    sub.add_argument("--reformulations")
    sub.add_argument("--click-titles", dest="click_titles")
    sub.add_argument("--queries")
    sub.add_argument("--min-freq", dest="min_freq", type=int, default=None)
    sub.add_argument("--n-max", dest="n_max", type=int, default=None)
    sub.set_defaults(func=cmd_intents)

    sub = commands.add_parser("train-rlc", help="train the pane scoring model on click data")
    _add_common(sub, seed=True, corpus=True, impressions=True, intents=True, lexicon=True)
    for key in ("dim", "heads", "layers", "max_intents", "hash_buckets", "steps", "warmup_steps", "total_steps", "min_impressions"):
        sub.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int, default=None)
    sub.add_argument("--lr", type=float, default=None)
    sub.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    sub.set_defaults(func=cmd_train_rlc)

    sub = commands.add_parser("fine-tune-rlc", help="continue training on human-labeled panes")
    _add_common(sub, seed=True, corpus=True, intents=True, lexicon=True)
    sub.add_argument("--model", required=True)
    sub.add_argument("--labels", required=True)
    for key in ("steps", "warmup_steps", "total_steps", "panes_per_query"):
        sub.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int, default=None)
    sub.add_argument("--lr", type=float, default=None)
    sub.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    sub.set_defaults(func=cmd_fine_tune_rlc)

    sub = commands.add_parser("train-ranker", help="train the boosted re-ranker on click data")
    _add_common(sub, seed=True, corpus=True, impressions=True, intents=True, lexicon=True, history=True)
    sub.add_argument("--rlc-model", dest="rlc_model")
    sub.add_argument("--trees", type=int, default=None)
    sub.add_argument("--depth", type=int, default=None)
    sub.add_argument("--shrinkage", type=float, default=None)
    sub.add_argument("--min-impressions", dest="min_impressions", type=int, default=None)
    sub.set_defaults(func=cmd_train_ranker)

    sub = commands.add_parser("rank", help="rank the panes of each query")
    _add_common(sub, corpus=True, intents=True, lexicon=True, history=True)
    sub.add_argument("--ensemble")
    sub.add_argument("--rlc-model", dest="rlc_model")
    sub.add_argument("--query-id", dest="query_id")
    sub.set_defaults(func=cmd_rank)

    sub = commands.add_parser("eval", help="nDCG on labels and engagement improvement on clicks")
    _add_common(sub, seed=True, corpus=True, intents=True, lexicon=True, history=True)
    sub.add_argument("--impressions")
    sub.add_argument("--labels")
    sub.add_argument("--ensemble")
    sub.add_argument("--rlc-model", dest="rlc_model")
    sub.add_argument("--min-impressions", dest="min_impressions", type=int, default=None)
    sub.add_argument("--randomization-rounds", dest="randomization_rounds", type=int, default=None)
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser("plot-data", help="re-emit a report as a plotting-ready table")
    _add_common(sub)
    sub.add_argument("--input", required=True)
    sub.add_argument("--name")
    sub.set_defaults(func=cmd_plot_data)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = args.out or os.environ.get("CLARIKIT_OUT_DIR")
    if not out_dir:
        parser.error("--out (or CLARIKIT_OUT_DIR) is required")
    threads = args.threads if args.threads is not None else int(os.environ.get("CLARIKIT_THREADS", "1"))
    if threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    outputs = Outputs(out_dir)
    try:
        args.func(args, outputs)
    except (NumericalError, NonFiniteGradientError) as exc:
        outputs.discard_all()
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        outputs.discard_all()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
