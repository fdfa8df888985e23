"""Independent brute-force recomputations used as test oracles.

Everything here is deliberately written as plain scans over the raw
history, separate from the library's aggregation code, so the two sides
can disagree.
"""

from __future__ import annotations

from longcast.cohort import PatientHistory, Task, target_value
from longcast.summaries import DEMO_COLUMNS  # noqa: F401  (column census)


def oracle_numeric_fields(history, feature, t):
    """Recompute the seven per-feature statistics by direct scans."""
    obs = [(v.month, v.features[feature]) for v in history
           if v.features.get(feature) is not None]
    out = {f"mr_{feature}": None, f"time_since_mr_{feature}": None,
           f"mr_change_{feature}": None, f"low_{feature}": None,
           f"time_since_low_{feature}": None, f"high_{feature}": None,
           f"time_since_high_{feature}": None}
    if not obs:
        return out

    latest_month = None
    for s, _ in obs:
        if latest_month is None or s > latest_month:
            latest_month = s
    latest_value = [x for s, x in obs if s == latest_month][0]
    out[f"mr_{feature}"] = latest_value
    out[f"time_since_mr_{feature}"] = t - latest_month

    earlier = [(s, x) for s, x in obs if s < latest_month]
    if earlier:
        second_month = max(s for s, _ in earlier)
        second_value = [x for s, x in earlier if s == second_month][0]
        out[f"mr_change_{feature}"] = ((latest_value - second_value)
                                       / (latest_month - second_month))

    low = high = None
    for _, x in obs:
        if low is None or x < low:
            low = x
        if high is None or x > high:
            high = x
    low_month = min(s for s, x in obs if x == low)
    high_month = min(s for s, x in obs if x == high)
    out[f"low_{feature}"] = low
    out[f"time_since_low_{feature}"] = t - low_month
    out[f"high_{feature}"] = high
    out[f"time_since_high_{feature}"] = t - high_month
    return out


def oracle_dx_fields(history, t):
    obs = [(v.month, int(v.dx)) for v in history if v.dx is not None]
    out = dict.fromkeys(("mr_DX", "time_since_mr_DX", "best_DX",
                         "time_since_best_DX", "worst_DX",
                         "time_since_worst_DX", "milder_DX"))
    if not obs:
        return out
    latest_month = max(s for s, _ in obs)
    latest = [d for s, d in obs if s == latest_month][0]
    best = min(d for _, d in obs)
    worst = max(d for _, d in obs)
    out["mr_DX"] = float(latest)
    out["time_since_mr_DX"] = t - latest_month
    out["best_DX"] = float(best)
    out["time_since_best_DX"] = t - min(s for s, d in obs if d == best)
    out["worst_DX"] = float(worst)
    out["time_since_worst_DX"] = t - min(s for s, d in obs if d == worst)
    out["milder_DX"] = float(latest < worst)
    return out


def oracle_row_fields(patient: PatientHistory, cutoff_index: int, t: float,
                      task: Task, features, vent_scale: float = 1.0) -> dict:
    """Full independent recomputation of every column of one row."""
    history = list(patient.visits[:cutoff_index + 1])
    out = {"horizon": t - history[-1].month}
    for feature in features:
        out.update(oracle_numeric_fields(history, feature, t))
    out.update(oracle_dx_fields(history, t))

    demo = patient.demographics
    out["apoe4"] = None if demo.apoe4 is None else float(demo.apoe4)
    out["is_male"] = None if demo.is_male is None else float(demo.is_male)
    out["educ"] = demo.educ
    out["marital"] = None if demo.marital is None else float(demo.marital)
    out["current_age"] = (None if demo.baseline_age is None
                          else demo.baseline_age + t / 12)
    out["baseline_age"] = demo.baseline_age

    out["mr_target"] = None
    for visit in history:
        value = target_value(visit, task, vent_scale)
        if value is not None:
            out["mr_target"] = value

    out["y"] = None
    for visit in patient.visits:
        if visit.month == t:
            out["y"] = target_value(visit, task, vent_scale)
    return out


def oracle_pair_auc(pos_scores, neg_scores) -> float:
    """Quadratic pairwise win counting, ties worth one half."""
    wins = 0.0
    for a in pos_scores:
        for b in neg_scores:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos_scores) * len(neg_scores))


def oracle_mauc(labels, probs) -> float:
    n_classes = len(probs[0])
    total = 0.0
    pairs = 0
    for i in range(n_classes):
        for j in range(i + 1, n_classes):
            pos_i = [p[i] for label, p in zip(labels, probs) if label == i]
            neg_j = [p[i] for label, p in zip(labels, probs) if label == j]
            a_ij = oracle_pair_auc(pos_i, neg_j)
            pos_j = [p[j] for label, p in zip(labels, probs) if label == j]
            neg_i = [p[j] for label, p in zip(labels, probs) if label == i]
            a_ji = oracle_pair_auc(pos_j, neg_i)
            total += (a_ij + a_ji) / 2
            pairs += 1
    return total / pairs


def oracle_bca(labels, predicted) -> float:
    classes = sorted(set(labels))
    scores = []
    for c in classes:
        tp = sum(1 for y, p in zip(labels, predicted) if y == c and p == c)
        fn = sum(1 for y, p in zip(labels, predicted) if y == c and p != c)
        tn = sum(1 for y, p in zip(labels, predicted) if y != c and p != c)
        fp = sum(1 for y, p in zip(labels, predicted) if y != c and p == c)
        sens = tp / (tp + fn)
        spec = tn / (tn + fp) if (tn + fp) else 0.0
        scores.append((sens + spec) / 2)
    return sum(scores) / len(scores)


def _average_ranks_plain(values):
    indexed = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while (j + 1 < len(values)
               and values[indexed[j + 1]] == values[indexed[i]]):
            j += 1
        for idx in indexed[i:j + 1]:
            ranks[idx] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def oracle_wilcoxon_one_sided(differences) -> float:
    """Direct 2^n enumeration of sign assignments, P(W <= observed W-)."""
    diffs = [d for d in differences if d != 0.0]
    n = len(diffs)
    ranks = _average_ranks_plain([abs(d) for d in diffs])
    observed = sum(r for d, r in zip(diffs, ranks) if d < 0)
    count = 0
    for mask in range(2 ** n):
        w = sum(ranks[i] for i in range(n) if mask >> i & 1)
        if w <= observed + 1e-12:
            count += 1
    return count / 2 ** n
