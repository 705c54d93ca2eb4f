"""Click-bias analysis over adjacent-answer swap experiments.

The unit of analysis is a swap triple: two panes for the same query that are
identical except two adjacent answers trade places.  Comparing the click rate
of the same answer at the two positions isolates position and presentation
effects from relevance.  On top of the triples this module builds log-odds
scatter data, above-diagonal percentages per (answer count, swap position),
a four-feature logistic regression predicting the swapped pane's click rates,
and a family of baseline click models compared by cross entropy.

Click rates are per-impression answer click rates, Laplace-smoothed as
(clicks + 1) / (impressions + 2) so log odds stay finite on finite samples.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import ClarificationPane, EngagementStats
from .intents import normalize_phrase
from .tensor.text import fnv1a

CLICK_MODEL_KINDS = ("best_possible", "blind", "no_bias", "examination", "cascade", "logistic")
FEATURE_NAMES = ("intercept", "ctr_l", "ctr_r", "size_diff", "offset")

_EPS = 1e-6


class NumericalError(RuntimeError):
    """An iterative fit failed to converge; carries the final gradient norm."""


@dataclass(frozen=True)
class SwapTriple:
    """Pane pair differing by one adjacent transposition at swap_index, so
    C[i] == C'[i+1] and C[i+1] == C'[i] (1-based positions)."""

    query_id: str
    pane_c: str
    pane_c_prime: str
    swap_index: int
    answer_count: int


@dataclass(frozen=True)
class SwapFeatures:
    ctr_l: float
    ctr_r: float
    size_diff: float
    offset: int

    def __post_init__(self):
        if not -1.0 <= self.size_diff <= 1.0:
            raise ValueError(f"size_diff {self.size_diff} outside [-1, 1]")
        if self.offset < 0:
            raise ValueError("offset must be >= 0")

    def as_row(self) -> np.ndarray:
        return np.array([1.0, self.ctr_l, self.ctr_r, self.size_diff, float(self.offset)])


def build_swap_dataset(panes: Mapping[str, ClarificationPane]) -> list[SwapTriple]:
    """Find every unordered pane pair that is one adjacent transposition apart.

    Panes are grouped by (query, normalized question, answer text multiset);
    within a group every pair is tested.  The pane with the smaller id is
    taken as the observed side, which makes the construction independent of
    input order.
    """
    groups: dict[tuple, list[str]] = {}
    for pane_id in sorted(panes):
        pane = panes[pane_id]
        key = (pane.query_id, normalize_phrase(pane.question_text), tuple(sorted(pane.answer_texts())))
        groups.setdefault(key, []).append(pane_id)

    triples = []
    for (query_id, _, _), ids in groups.items():
        for a_idx in range(len(ids)):
            for b_idx in range(a_idx + 1, len(ids)):
                first, second = ids[a_idx], ids[b_idx]
                i = _adjacent_swap_index(panes[first], panes[second])
                if i is not None:
                    triples.append(
                        SwapTriple(
                            query_id=query_id,
                            pane_c=first,
                            pane_c_prime=second,
                            swap_index=i,
                            answer_count=panes[first].answer_count,
                        )
                    )
    triples.sort(key=lambda t: (t.query_id, t.pane_c, t.pane_c_prime))
    return triples


def _adjacent_swap_index(a: ClarificationPane, b: ClarificationPane) -> int | None:
    texts_a, texts_b = a.answer_texts(), b.answer_texts()
    if len(texts_a) != len(texts_b):
        return None
    diff = [idx for idx, (x, y) in enumerate(zip(texts_a, texts_b)) if x != y]
    if len(diff) != 2 or diff[1] != diff[0] + 1:
        return None
    i = diff[0]
    if texts_a[i] == texts_b[i + 1] and texts_a[i + 1] == texts_b[i]:
        return i + 1  # 1-based
    return None


def smoothed_rate(stats: EngagementStats, position: int) -> float:
    """Laplace-smoothed per-impression click rate of the answer at a 1-based
    position."""
    if stats.impressions < 1:
        raise ValueError("rate undefined for zero impressions")
    return (stats.per_position_clicks[position - 1] + 1.0) / (stats.impressions + 2.0)


def log_odds(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"log odds undefined for p={p}")
    return float(np.log(p / (1.0 - p)))


def swap_points(
    triple: SwapTriple, stats: Mapping[str, EngagementStats]
) -> tuple[tuple[float, float], tuple[float, float]]:
    """The two (rate at lower position, rate at higher position) points of a
    triple: one for each swapped answer, x measured where it sat deeper."""
    stats_c = stats[triple.pane_c]
    stats_cp = stats[triple.pane_c_prime]
    if stats_c.impressions < 1 or stats_cp.impressions < 1:
        raise ValueError(f"triple {triple.pane_c}/{triple.pane_c_prime} has a pane without impressions")
    i = triple.swap_index
    # answer C[i]: shown at i in C (higher) and at i+1 in C' (lower)
    point_one = (smoothed_rate(stats_cp, i + 1), smoothed_rate(stats_c, i))
    # answer C[i+1]: shown at i+1 in C (lower) and at i in C' (higher)
    point_two = (smoothed_rate(stats_c, i + 1), smoothed_rate(stats_cp, i))
    return point_one, point_two


def scatter_points(
    triples: Iterable[SwapTriple], stats: Mapping[str, EngagementStats]
) -> list[tuple[float, float, int, int]]:
    """(x, y, answer_count, swap_index) rows in log-odds space, two per triple."""
    rows = []
    for t in triples:
        for x, y in swap_points(t, stats):
            rows.append((log_odds(x), log_odds(y), t.answer_count, t.swap_index))
    return rows


def fit_scatter_line(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Ordinary least squares y = slope * x + intercept."""
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    if np.allclose(x, x[0]):
        raise ValueError("degenerate x values")
    x_mean, y_mean = x.mean(), y.mean()
    slope = float(((x - x_mean) * (y - y_mean)).sum() / ((x - x_mean) ** 2).sum())
    return slope, float(y_mean - slope * x_mean)


def pct_above_diagonal(
    triples: Iterable[SwapTriple], stats: Mapping[str, EngagementStats]
) -> dict[tuple[int, int], tuple[float, int]]:
    """Per (answer_count, swap_index) cell: the percentage of points whose
    higher-position rate exceeds their lower-position rate, and the point
    count.  Ties sit on the diagonal and are excluded from both sides, which
    keeps the unbiased null calibrated at exactly 50%."""
    above: dict[tuple[int, int], int] = {}
    counted: dict[tuple[int, int], int] = {}
    for t in triples:
        key = (t.answer_count, t.swap_index)
        for x, y in swap_points(t, stats):
            if y == x:
                continue
            counted[key] = counted.get(key, 0) + 1
            if y > x:
                above[key] = above.get(key, 0) + 1
    return {
        key: (100.0 * above.get(key, 0) / counted[key], counted[key])
        for key in sorted(counted)
    }


def swap_features(pane_c: ClarificationPane, stats_c: EngagementStats, swap_index: int) -> SwapFeatures:
    """Features of the observed pane: the two click rates, the relative size
    difference of the swapped answers, and the 0-based offset of the left one."""
    i = swap_index
    left, right = pane_c.answers[i - 1], pane_c.answers[i]
    return SwapFeatures(
        ctr_l=smoothed_rate(stats_c, i),
        ctr_r=smoothed_rate(stats_c, i + 1),
        size_diff=(left.render_size - right.render_size) / (left.render_size + right.render_size),
        offset=i - 1,
    )


def swap_targets(stats_c_prime: EngagementStats, swap_index: int) -> tuple[float, float]:
    """Labels: the swapped pane's click rates at the swap positions.  Label L
    is the promoted answer's rate at position i, label R the demoted one's at
    position i+1."""
    return smoothed_rate(stats_c_prime, swap_index), smoothed_rate(stats_c_prime, swap_index + 1)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass
class LogisticFit:
    weights: np.ndarray
    iterations: int
    gradient_norm: float

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return _sigmoid(rows @ self.weights)


def fit_fractional_logreg(
    rows: np.ndarray,
    targets: np.ndarray,
    sample_weights: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> LogisticFit:
    """Logistic regression with fractional labels (targets are rates), fit by
    batch gradient descent with backtracking line search.

    Equivalent to impression-weighted binary regression: the cross-entropy
    objective -[y log s + (1-y) log(1-s)] is linear in y.  Deterministic and
    seed-free.  Raises NumericalError if the gradient norm never reaches tol.

    Non-constant columns are standardized internally for conditioning (the
    stopping tolerance applies to the standardized problem) and the returned
    weights are mapped back to the raw feature scale.
    """
    n, d = rows.shape
    w = np.ones(n) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    w = w / w.sum()
    y = np.asarray(targets, dtype=np.float64)

    raw = rows
    center = raw.mean(axis=0)
    scale = raw.std(axis=0)
    constant = scale < 1e-12
    center[constant] = 0.0
    scale[constant] = 1.0
    center[0] = 0.0  # column 0 is the intercept; keep it as-is
    scale[0] = 1.0
    rows = (raw - center) / scale
    theta = np.zeros(d)

    def loss_and_grad(params):
        z = rows @ params
        # -[y z - log(1 + e^z)] summed with weights, stable via logaddexp
        loss = float((w * (np.logaddexp(0.0, z) - y * z)).sum())
        grad = rows.T @ (w * (_sigmoid(z) - y))
        return loss, grad

    def to_raw_scale(params: np.ndarray) -> np.ndarray:
        unscaled = params / scale
        unscaled[0] = params[0] - float((params[1:] * center[1:] / scale[1:]).sum())
        return unscaled

    # curvature bound: the logistic Hessian is at most X^T diag(w)/4 X, so
    # steps of 1/L always descend once line-search progress is unmeasurable
    gram_spectral = _power_iteration_spectral_norm(rows * np.sqrt(w)[:, None])
    safe_step = 1.0 / max(0.25 * gram_spectral, 1e-12)

    loss, grad = loss_and_grad(theta)
    step = 1.0
    polishing = False
    for iterations in range(1, max_iter + 1):
        gnorm = float(np.abs(grad).max())
        if gnorm < tol:
            return LogisticFit(weights=to_raw_scale(theta), iterations=iterations - 1, gradient_norm=gnorm)
        grad_sq = float(grad @ grad)
        if not polishing and 1e-4 * safe_step * grad_sq < 1e-15 * max(1.0, abs(loss)):
            polishing = True  # decreases are below float resolution of the loss
        if polishing:
            theta = theta - safe_step * grad
            loss, grad = loss_and_grad(theta)
            continue
        step = min(step * 2.0, 1e8)  # allow the step to grow back after cautious phases
        while True:
            candidate = theta - step * grad
            new_loss, new_grad = loss_and_grad(candidate)
            if new_loss <= loss - 1e-4 * step * grad_sq:
                break
            step *= 0.5
            if step < 1e-18:
                raise NumericalError(
                    f"line search stalled at iteration {iterations}; gradient norm {gnorm:.3e}"
                )
        theta, loss, grad = candidate, new_loss, new_grad
    gnorm = float(np.abs(grad).max())
    raise NumericalError(
        f"logistic regression did not converge in {max_iter} iterations; final gradient norm {gnorm:.3e}"
    )


def _power_iteration_spectral_norm(matrix: np.ndarray, iterations: int = 60) -> float:
    """Largest eigenvalue of matrix^T matrix, by deterministic power iteration."""
    v = np.ones(matrix.shape[1]) / np.sqrt(matrix.shape[1])
    value = 0.0
    for _ in range(iterations):
        u = matrix.T @ (matrix @ v)
        norm = float(np.linalg.norm(u))
        if norm == 0.0:
            return 0.0
        value = norm
        v = u / norm
    return value


@dataclass
class LogRegCvReport:
    feature_names: tuple[str, ...]
    fold_weights_l: list[np.ndarray]
    fold_weights_r: list[np.ndarray]

    @property
    def mean_weights_l(self) -> np.ndarray:
        return np.mean(self.fold_weights_l, axis=0)

    @property
    def mean_weights_r(self) -> np.ndarray:
        return np.mean(self.fold_weights_r, axis=0)


def triple_fold(triple: SwapTriple, folds: int) -> int:
    return fnv1a(triple.query_id) % folds


def regression_data(
    triples: Sequence[SwapTriple],
    panes: Mapping[str, ClarificationPane],
    stats: Mapping[str, EngagementStats],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Feature rows from the observed panes, the two fractional targets from
    the swapped panes, and impression weights."""
    rows, targets_l, targets_r, weights = [], [], [], []
    for t in triples:
        features = swap_features(panes[t.pane_c], stats[t.pane_c], t.swap_index)
        label_l, label_r = swap_targets(stats[t.pane_c_prime], t.swap_index)
        rows.append(features.as_row())
        targets_l.append(label_l)
        targets_r.append(label_r)
        weights.append(stats[t.pane_c_prime].impressions)
    return np.array(rows), np.array(targets_l), np.array(targets_r), np.array(weights, dtype=np.float64)


def fit_click_logreg(
    triples: Sequence[SwapTriple],
    panes: Mapping[str, ClarificationPane],
    stats: Mapping[str, EngagementStats],
    folds: int = 10,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> LogRegCvReport:
    """Cross-validated regressions for the two labels (promoted and demoted
    answer rates), returning the per-fold weight vectors."""
    if len(triples) < folds:
        raise ValueError(f"need at least {folds} triples for {folds}-fold cross-validation")
    rows, targets_l, targets_r, weights = regression_data(triples, panes, stats)
    fold_ids = np.array([triple_fold(t, folds) for t in triples])
    report = LogRegCvReport(feature_names=FEATURE_NAMES, fold_weights_l=[], fold_weights_r=[])
    for fold in range(folds):
        train = fold_ids != fold
        if train.sum() == 0:
            raise ValueError(f"fold {fold} has no training triples")
        fit_l = fit_fractional_logreg(rows[train], targets_l[train], weights[train], tol=tol, max_iter=max_iter)
        fit_r = fit_fractional_logreg(rows[train], targets_r[train], weights[train], tol=tol, max_iter=max_iter)
        report.fold_weights_l.append(fit_l.weights)
        report.fold_weights_r.append(fit_r.weights)
    return report


def cross_entropy(true_rates: Sequence[float], predicted_rates: Sequence[float]) -> float:
    """Mean of -[p log q + (1-p) log(1-q)] over points.  Predicting the true
    rates themselves gives the entropy floor."""
    p = np.asarray(true_rates, dtype=np.float64)
    q = np.asarray(predicted_rates, dtype=np.float64)
    if ((q <= 0.0) | (q >= 1.0)).any():
        raise ValueError("predicted rates must be strictly inside (0, 1)")
    return float(-(p * np.log(q) + (1.0 - p) * np.log(1.0 - q)).mean())


@dataclass
class ExaminationModel:
    """Position examination probabilities (position 1 pinned to 1.0) with
    per-answer attractiveness recovered from observed rates at fit time."""

    exam_probs: np.ndarray

    def predict_swap(self, triple, panes, stats) -> tuple[float, float]:
        i = triple.swap_index
        eps = self.exam_probs
        rate_i = smoothed_rate(stats[triple.pane_c], i)
        rate_next = smoothed_rate(stats[triple.pane_c], i + 1)
        # label L: the answer observed at i+1 moves up to i
        attract_l = rate_next / max(eps[i], _EPS)
        # label R: the answer observed at i moves down to i+1
        attract_r = rate_i / max(eps[i - 1], _EPS)
        return float(attract_l * eps[i - 1]), float(attract_r * eps[i])


def fit_examination_em(
    pane_stats: Mapping[str, EngagementStats],
    panes: Mapping[str, ClarificationPane],
    max_positions: int = 5,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Maximum-likelihood position examination probabilities under the
    examination model, by EM over latent examine/attract events.

    Answers are identified by (query, answer text) across panes, which is
    what lets swapped panes separate position from attractiveness.  The
    first position is pinned to 1.0; the product with attractiveness is what
    the likelihood identifies.
    """
    cells = []  # (position index, item index, impressions, clicks)
    item_ids: dict[tuple[str, str], int] = {}
    for pane_id in sorted(pane_stats):
        pane = panes[pane_id]
        stats = pane_stats[pane_id]
        for pos in range(1, pane.answer_count + 1):
            item_key = (pane.query_id, pane.answers[pos - 1].text)
            item = item_ids.setdefault(item_key, len(item_ids))
            cells.append((pos - 1, item, stats.impressions, stats.per_position_clicks[pos - 1]))

    positions = np.array([c[0] for c in cells])
    items = np.array([c[1] for c in cells])
    impressions = np.array([c[2] for c in cells], dtype=np.float64)
    clicks = np.array([c[3] for c in cells], dtype=np.float64)

    observed_positions = set(positions.tolist())
    missing = [k for k in range(max_positions) if k not in observed_positions]
    if missing:
        warnings.warn(f"positions {[m + 1 for m in missing]} never observed; examination probability pinned")

    eps = np.full(max_positions, 0.5)
    eps[0] = 1.0
    alpha = np.full(len(item_ids), 0.2)
    for _ in range(max_iter):
        e = eps[positions]
        a = alpha[items]
        no_click = impressions - clicks
        denom = np.maximum(1.0 - e * a, _EPS)
        examined_given_no = e * (1.0 - a) / denom
        attracted_given_no = a * (1.0 - e) / denom

        exam_events = clicks + no_click * examined_given_no
        attract_events = clicks + no_click * attracted_given_no

        new_eps = eps.copy()
        for k in range(max_positions):
            sel = positions == k
            if sel.any():
                new_eps[k] = exam_events[sel].sum() / impressions[sel].sum()
        new_alpha = np.bincount(items, weights=attract_events, minlength=len(item_ids)) / np.maximum(
            np.bincount(items, weights=impressions, minlength=len(item_ids)), 1.0
        )
        scale = max(new_eps[0], _EPS)
        new_eps = np.clip(new_eps / scale, _EPS, 1.0)
        new_alpha = np.clip(new_alpha * scale, _EPS, 1.0 - _EPS)
        delta = max(np.abs(new_eps - eps).max(), np.abs(new_alpha - alpha).max())
        eps, alpha = new_eps, new_alpha
        if delta < tol:
            break
    return eps


@dataclass
class CascadeModel:
    """Sequential scan model: the per-answer click probabilities are the
    closed-form maximum-likelihood estimates given observed rates, since
    examinations are observable when at most one answer is clicked."""

    def attractiveness(self, stats: EngagementStats) -> np.ndarray:
        rates = np.array(
            [smoothed_rate(stats, pos) for pos in range(1, len(stats.per_position_clicks) + 1)]
        )
        seen_before = np.concatenate([[0.0], np.cumsum(rates)[:-1]])
        return np.clip(rates / np.maximum(1.0 - seen_before, _EPS), _EPS, 1.0 - _EPS)

    def predict_swap(self, triple, panes, stats) -> tuple[float, float]:
        attract = self.attractiveness(stats[triple.pane_c])
        i = triple.swap_index
        order = list(range(len(attract)))
        order[i - 1], order[i] = order[i], order[i - 1]
        reordered = attract[order]
        no_click_before = np.concatenate([[1.0], np.cumprod(1.0 - reordered)[:-1]])
        predicted = reordered * no_click_before
        return float(predicted[i - 1]), float(predicted[i])


def fit_cascade_attractiveness(
    pane_stats: Mapping[str, EngagementStats], panes: Mapping[str, ClarificationPane]
) -> dict[tuple[str, str], float]:
    """Dataset-level maximum-likelihood attractiveness per (query, answer).

    Under the sequential model examinations are observable from aggregate
    counts: position k was examined in every impression with no click before
    k, so the MLE is pooled clicks over pooled examinations.  Answers whose
    positions were never examined are pinned to 0.5 with a warning.
    """
    clicks: dict[tuple[str, str], float] = {}
    examined: dict[tuple[str, str], float] = {}
    for pane_id in sorted(pane_stats):
        pane = panes[pane_id]
        stats = pane_stats[pane_id]
        seen_before = 0
        for pos in range(1, pane.answer_count + 1):
            key = (pane.query_id, pane.answers[pos - 1].text)
            clicks[key] = clicks.get(key, 0.0) + stats.per_position_clicks[pos - 1]
            examined[key] = examined.get(key, 0.0) + max(stats.impressions - seen_before, 0)
            seen_before += stats.per_position_clicks[pos - 1]
    out = {}
    for key in clicks:
        if examined[key] <= 0:
            warnings.warn(f"answer {key} never examined; attractiveness pinned")
            out[key] = 0.5
        else:
            out[key] = float(np.clip(clicks[key] / examined[key], _EPS, 1.0 - _EPS))
    return out


@dataclass
class ClickModel:
    """Unified click-rate predictor over swap triples.

    best_possible echoes the observed swapped-pane rates (the entropy
    floor); blind predicts one global rate; no_bias carries each answer's
    observed rate across the swap; examination rescales by fitted position
    examination probabilities; cascade recomposes pooled attractiveness in
    the swapped order; logistic applies the cross-validated regression's
    mean weights.
    """

    kind: str
    global_rate: float = 0.5
    exam_probs: np.ndarray | None = None
    weights_l: np.ndarray | None = None
    weights_r: np.ndarray | None = None

    def predict_swap(
        self,
        triple: SwapTriple,
        panes: Mapping[str, ClarificationPane],
        stats: Mapping[str, EngagementStats],
    ) -> tuple[float, float]:
        i = triple.swap_index
        if self.kind == "best_possible":
            return swap_targets(stats[triple.pane_c_prime], i)
        if self.kind == "blind":
            return self.global_rate, self.global_rate
        if self.kind == "no_bias":
            return smoothed_rate(stats[triple.pane_c], i + 1), smoothed_rate(stats[triple.pane_c], i)
        if self.kind == "examination":
            return ExaminationModel(self.exam_probs).predict_swap(triple, panes, stats)
        if self.kind == "cascade":
            return CascadeModel().predict_swap(triple, panes, stats)
        row = swap_features(panes[triple.pane_c], stats[triple.pane_c], i).as_row()
        q_l = float(_sigmoid(row @ self.weights_l))
        q_r = float(_sigmoid(row @ self.weights_r))
        return q_l, q_r


def fit_click_model(
    kind: str,
    triples: Sequence[SwapTriple],
    panes: Mapping[str, ClarificationPane],
    stats: Mapping[str, EngagementStats],
    folds: int = 10,
) -> ClickModel:
    """Fit one of the comparison click models on a swap dataset."""
    if kind not in CLICK_MODEL_KINDS:
        raise ValueError(f"unknown click model kind {kind!r}")
    if kind == "blind":
        total_clicks = 0.0
        total_slots = 0.0
        for t in triples:
            s = stats[t.pane_c]
            total_clicks += sum(s.per_position_clicks)
            total_slots += s.impressions * len(s.per_position_clicks)
        return ClickModel(kind=kind, global_rate=(total_clicks + 1.0) / (total_slots + 2.0))
    if kind == "examination":
        observed = {}
        for t in triples:
            observed[t.pane_c] = stats[t.pane_c]
            observed[t.pane_c_prime] = stats[t.pane_c_prime]
        return ClickModel(kind=kind, exam_probs=fit_examination_em(observed, panes))
    if kind == "logistic":
        report = fit_click_logreg(triples, panes, stats, folds=folds)
        return ClickModel(kind=kind, weights_l=report.mean_weights_l, weights_r=report.mean_weights_r)
    return ClickModel(kind=kind)


@dataclass
class CeCell:
    mean: float
    std: float
    folds: int


@dataclass
class CeReport:
    """Cross entropy per model, overall and per answer count, with the mean
    and standard deviation taken over cross-validation folds."""

    cells: dict[tuple[str, str], CeCell]  # (model, group) -> cell

    def mean(self, model: str, group: str = "overall") -> float:
        return self.cells[(model, group)].mean


def evaluate_click_models(
    triples: Sequence[SwapTriple],
    panes: Mapping[str, ClarificationPane],
    stats: Mapping[str, EngagementStats],
    kinds: Sequence[str] = CLICK_MODEL_KINDS,
    folds: int = 10,
    logreg_tol: float = 1e-10,
    logreg_max_iter: int = 100_000,
) -> CeReport:
    """Fold-wise cross entropy between observed swapped-pane rates and each
    model's predictions.  Models that need fitting (blind mean, examination
    positions, logistic weights) are fit on the training folds only."""
    for kind in kinds:
        if kind not in CLICK_MODEL_KINDS:
            raise ValueError(f"unknown click model kind {kind!r}")
    triples = list(triples)
    if len(triples) < folds:
        raise ValueError(f"need at least {folds} triples")
    rows, targets_l, targets_r, weights = regression_data(triples, panes, stats)
    fold_ids = np.array([triple_fold(t, folds) for t in triples])

    per_fold: dict[tuple[str, str], list[float]] = {}
    for fold in range(folds):
        train_mask = fold_ids != fold
        test_mask = ~train_mask
        if not test_mask.any() or not train_mask.any():
            continue
        test_triples = [t for t, m in zip(triples, test_mask) if m]
        truths = np.concatenate([targets_l[test_mask], targets_r[test_mask]])
        groups = np.array([str(t.answer_count) for t in test_triples] * 2)

        predictions = _fold_predictions(
            kinds, triples, panes, stats, rows, targets_l, targets_r, weights,
            train_mask, test_mask, test_triples, logreg_tol, logreg_max_iter,
        )
        for kind, preds in predictions.items():
            preds = np.clip(preds, _EPS, 1.0 - _EPS)
            per_fold.setdefault((kind, "overall"), []).append(cross_entropy(truths, preds))
            for group in sorted(set(groups.tolist())):
                sel = groups == group
                per_fold.setdefault((kind, group), []).append(cross_entropy(truths[sel], preds[sel]))

    cells = {
        key: CeCell(mean=float(np.mean(vals)), std=float(np.std(vals)), folds=len(vals))
        for key, vals in per_fold.items()
    }
    return CeReport(cells=cells)


def _fold_predictions(
    kinds, triples, panes, stats, rows, targets_l, targets_r, weights,
    train_mask, test_mask, test_triples, logreg_tol, logreg_max_iter,
) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    if "best_possible" in kinds:
        out["best_possible"] = np.concatenate([targets_l[test_mask], targets_r[test_mask]])
    if "blind" in kinds:
        total_clicks = 0.0
        total_slots = 0.0
        for t, m in zip(triples, train_mask):
            if not m:
                continue
            s = stats[t.pane_c]
            total_clicks += sum(s.per_position_clicks)
            total_slots += s.impressions * len(s.per_position_clicks)
        global_rate = (total_clicks + 1.0) / (total_slots + 2.0)
        out["blind"] = np.full(2 * len(test_triples), global_rate)
    if "no_bias" in kinds:
        # the answer keeps the rate observed at its old position
        preds_l = [smoothed_rate(stats[t.pane_c], t.swap_index + 1) for t in test_triples]
        preds_r = [smoothed_rate(stats[t.pane_c], t.swap_index) for t in test_triples]
        out["no_bias"] = np.array(preds_l + preds_r)
    if "examination" in kinds:
        train_panes = {}
        for t, m in zip(triples, train_mask):
            if m:
                train_panes[t.pane_c] = stats[t.pane_c]
                train_panes[t.pane_c_prime] = stats[t.pane_c_prime]
        model = ExaminationModel(exam_probs=fit_examination_em(train_panes, panes))
        pairs = [model.predict_swap(t, panes, stats) for t in test_triples]
        out["examination"] = np.array([p[0] for p in pairs] + [p[1] for p in pairs])
    if "cascade" in kinds:
        model = CascadeModel()
        pairs = [model.predict_swap(t, panes, stats) for t in test_triples]
        out["cascade"] = np.array([p[0] for p in pairs] + [p[1] for p in pairs])
    if "logistic" in kinds:
        fit_l = fit_fractional_logreg(
            rows[train_mask], targets_l[train_mask], weights[train_mask], tol=logreg_tol, max_iter=logreg_max_iter
        )
        fit_r = fit_fractional_logreg(
            rows[train_mask], targets_r[train_mask], weights[train_mask], tol=logreg_tol, max_iter=logreg_max_iter
        )
        out["logistic"] = np.concatenate([fit_l.predict(rows[test_mask]), fit_r.predict(rows[test_mask])])
    return out
