"""Evaluation metrics and the seed-aggregated comparison report.

MAUC follows the Hand & Till construction: average the two directed
ranking AUCs of every unordered class pair, ties counting one half. BCA
is the macro average of one-vs-rest balanced accuracies. The Wilcoxon
signed-rank test is exact: the null distribution of the rank sum is the
full enumeration over all 2^n sign assignments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation, MetricUndefinedError

HIGHER_IS_BETTER = {"MAUC": True, "BCA": True, "MAE": False}


def _rank_auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Probability a positive outranks a negative, ties counted 0.5."""
    scores = np.concatenate([pos_scores, neg_scores])
    ranks = _average_ranks(scores)
    n_pos, n_neg = len(pos_scores), len(neg_scores)
    pos_rank_sum = ranks[:n_pos].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def mauc(labels: Sequence[int], probs: Sequence[Sequence[float]]) -> float:
    """Multiclass AUC: mean over class pairs of [A(i|j) + A(j|i)] / 2,
    where A(i|j) ranks class-i against class-j samples by the class-i
    probability."""
    y = np.asarray(labels, dtype=int)
    p = np.asarray(probs, dtype=float)
    if p.ndim != 2 or len(y) != len(p):
        raise ContractViolation("labels and probability rows must align")
    n_classes = p.shape[1]
    for c in range(n_classes):
        if not np.any(y == c):
            raise MetricUndefinedError(f"class {c} absent from labels")

    total = 0.0
    pairs = 0
    for i in range(n_classes):
        for j in range(i + 1, n_classes):
            mask_i, mask_j = y == i, y == j
            a_ij = _rank_auc(p[mask_i, i], p[mask_j, i])
            a_ji = _rank_auc(p[mask_j, j], p[mask_i, j])
            total += (a_ij + a_ji) / 2
            pairs += 1
    return total / pairs


def argmax_classes(probs: Sequence[Sequence[float]]) -> list[int]:
    """Predicted class per row; ties resolve to the lowest class index."""
    return [int(np.argmax(row)) for row in np.asarray(probs, dtype=float)]


def bca(labels: Sequence[int], predicted: Sequence[int]) -> float:
    """Macro-averaged one-vs-rest balanced accuracy over classes present
    in the labels: mean of (sensitivity + specificity) / 2."""
    y = np.asarray(labels, dtype=int)
    yhat = np.asarray(predicted, dtype=int)
    if len(y) == 0:
        raise MetricUndefinedError("bca undefined on empty input")
    if len(y) != len(yhat):
        raise ContractViolation("labels and predictions must align")

    scores = []
    for c in np.unique(y):
        pos, pred_pos = y == c, yhat == c
        tp = int(np.sum(pos & pred_pos))
        fn = int(np.sum(pos & ~pred_pos))
        tn = int(np.sum(~pos & ~pred_pos))
        fp = int(np.sum(~pos & pred_pos))
        sensitivity = tp / (tp + fn)
        specificity = tn / (tn + fp) if (tn + fp) else 0.0
        scores.append((sensitivity + specificity) / 2)
    return float(np.mean(scores))


def mae(truth: Sequence[float], estimates: Sequence[float]) -> float:
    t = np.asarray(truth, dtype=float)
    e = np.asarray(estimates, dtype=float)
    if len(t) != len(e) or len(t) == 0:
        raise ContractViolation("mae needs equal non-zero lengths")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(e))):
        raise ContractViolation("mae inputs must be finite")
    return float(np.mean(np.abs(t - e)))


def _signed_rank_distribution(doubled_ranks: Sequence[int]) -> dict[int, int]:
    """Count, for every achievable rank sum, the sign assignments reaching
    it; equivalent to enumerating all 2^n assignments."""
    counts = {0: 1}
    for r in doubled_ranks:
        step = {}
        for total, ways in counts.items():
            step[total] = step.get(total, 0) + ways
            step[total + r] = step.get(total + r, 0) + ways
        counts = step
    return counts


def wilcoxon_exact(differences: Sequence[float],
                   alternative: str = "one-sided") -> float:
    """Exact signed-rank p-value for paired differences.

    Zero differences are dropped before ranking; |differences| get
    average ranks on ties. One-sided (default) returns P(W <= observed
    rank sum of the negative differences) under the exact null.
    """
    if alternative not in ("one-sided", "two-sided"):
        raise ContractViolation(f"unknown alternative {alternative!r}")
    diffs = [float(d) for d in differences if float(d) != 0.0]
    if not diffs:
        raise MetricUndefinedError("all differences zero")
    n = len(diffs)
    if n > 25:
        raise ContractViolation(f"exact enumeration limited to n<=25, got {n}")

    magnitudes = np.abs(np.asarray(diffs))
    ranks = _average_ranks(magnitudes)
    # doubling makes tied (half-integer) average ranks exact integers
    doubled = np.rint(ranks * 2).astype(int)
    w_minus = int(np.sum(doubled[np.asarray(diffs) < 0]))

    counts = _signed_rank_distribution(doubled.tolist())
    denom = 2 ** n
    total = int(np.sum(doubled))

    def tail_le(w: int) -> float:
        return sum(ways for s, ways in counts.items() if s <= w) / denom

    def tail_ge(w: int) -> float:
        return sum(ways for s, ways in counts.items() if s >= w) / denom

    if alternative == "one-sided":
        return tail_le(w_minus)
    low = min(w_minus, total - w_minus)
    return min(1.0, tail_le(low) + tail_ge(total - low))


@dataclass
class Comparison:
    opponent: str
    opponent_values: list[float]
    p_value: float
    significant: bool                # p <= 0.05
    winner: str


@dataclass
class MetricReport:
    """Per-seed metric values for one model on one task, with aggregates."""

    task: str
    metric: str
    model: str
    per_seed: list[float]
    mean: float = 0.0
    std: float = 0.0
    comparison: Optional[Comparison] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, task: str, metric: str, model: str,
                    per_seed: Sequence[float], **extra) -> "MetricReport":
        values = [float(v) for v in per_seed]
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return cls(task=task, metric=metric, model=model, per_seed=values,
                   mean=mean, std=std, extra=dict(extra))

    def to_dict(self) -> dict:
        payload = {"task": self.task, "metric": self.metric,
                   "model": self.model, "per_seed": self.per_seed,
                   "mean": self.mean, "std": self.std}
        if self.extra:
            payload["extra"] = self.extra
        if self.comparison is not None:
            payload["comparison"] = {
                "opponent": self.comparison.opponent,
                "opponent_values": self.comparison.opponent_values,
                "p_value": self.comparison.p_value,
                "significant": self.comparison.significant,
                "winner": self.comparison.winner,
            }
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricReport":
        report = cls(task=payload["task"], metric=payload["metric"],
                     model=payload.get("model", ""),
                     per_seed=[float(v) for v in payload["per_seed"]],
                     mean=float(payload["mean"]), std=float(payload["std"]),
                     extra=dict(payload.get("extra", {})))
        comp = payload.get("comparison")
        if comp:
            report.comparison = Comparison(
                opponent=comp["opponent"],
                opponent_values=[float(v) for v in comp["opponent_values"]],
                p_value=float(comp["p_value"]),
                significant=bool(comp["significant"]),
                winner=comp["winner"])
        return report

    def render_text(self) -> str:
        lines = [f"task {self.task}  metric {self.metric}  model {self.model}",
                 f"  per-seed: {', '.join(repr(v) for v in self.per_seed)}",
                 f"  mean ± std: {self.mean:.6g} ± {self.std:.6g}"]
        if self.comparison is not None:
            c = self.comparison
            marker = "*" if c.significant else "n.s."
            lines.append(
                f"  vs {c.opponent}: winner {c.winner}, "
                f"p={c.p_value:.6g} {marker}")
        return "\n".join(lines) + "\n"


def compare_reports(a: MetricReport, b: MetricReport,
                    alternative: str = "one-sided") -> MetricReport:
    """Paired test of two models' per-seed values, oriented at the winner.

    Differences are signed so that a positive value supports the model
    with the better mean, matching a test of "the best model wins".
    """
    if a.task != b.task or a.metric != b.metric:
        raise ContractViolation("can only compare reports of the same "
                                "task and metric")
    if len(a.per_seed) != len(b.per_seed):
        raise ContractViolation("reports have different seed counts")
    higher_better = HIGHER_IS_BETTER.get(a.metric.upper())
    if higher_better is None:
        raise MetricUndefinedError(f"no direction known for {a.metric}")

    a_better = (a.mean > b.mean) if higher_better else (a.mean < b.mean)
    winner, loser = (a, b) if a_better else (b, a)
    diffs = [w - l for w, l in zip(winner.per_seed, loser.per_seed)]
    if not higher_better:
        diffs = [-d for d in diffs]
    p = wilcoxon_exact(diffs, alternative=alternative)

    result = MetricReport.from_values(a.task, a.metric, a.model, a.per_seed)
    result.comparison = Comparison(
        opponent=b.model, opponent_values=list(b.per_seed),
        p_value=p, significant=p <= 0.05, winner=winner.model)
    return result
