"""Clustering evaluation: contingency tables, many-to-one accuracy,
one-to-one (Hungarian) matching, mapped span F1, oracle selection and
multi-run aggregation.

Many-to-one maps every cluster to its most frequent gold label; several
clusters may share a label. One-to-one restricts the mapping to be
injective and therefore never scores higher. Ties are broken toward the
lowest index / lexicographically smallest mapping so results are
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ArgumentError

MAPPING_MODES = ("many_to_one", "one_to_one")


@dataclass(frozen=True)
class Contingency:
    """Cluster x gold-label co-occurrence counts."""

    counts: np.ndarray  # (m, g) int64
    labels: tuple  # column order

    def __post_init__(self):
        if self.counts.ndim != 2:
            raise ArgumentError("contingency counts must be 2-d")
        if np.any(self.counts < 0):
            raise ArgumentError("contingency counts must be non-negative")
        if self.counts.shape[1] != len(self.labels):
            raise ArgumentError("label order does not match column count")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(pred, gold, m: int | None = None, labels=None) -> Contingency:
    """Count co-occurrences of predicted cluster ids and gold labels.

    ``labels`` fixes the column order; by default the sorted unique gold
    labels are used.
    """
    pred = np.asarray(pred)
    if len(pred) != len(gold):
        raise ArgumentError(f"{len(pred)} predictions vs {len(gold)} gold labels")
    if labels is None:
        labels = sorted(set(gold))
    labels = tuple(labels)
    col = {lab: j for j, lab in enumerate(labels)}
    n_rows = m if m is not None else (int(pred.max()) + 1 if len(pred) else 0)
    counts = np.zeros((n_rows, len(labels)), dtype=np.int64)
    if len(pred):
        gold_idx = np.fromiter((col[g] for g in gold), dtype=np.int64, count=len(pred))
        np.add.at(counts, (pred.astype(np.int64), gold_idx), 1)
    return Contingency(counts=counts, labels=labels)


def m1_accuracy(t: Contingency) -> float:
    """Many-to-one accuracy: each cluster votes for its majority label."""
    if t.total == 0:
        raise ArgumentError("empty contingency table")
    return float(t.counts.max(axis=1).sum() / t.total)


def _best_matched(counts: np.ndarray) -> int:
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return int(counts[rows, cols].sum())


def hungarian_match(t: Contingency) -> tuple[dict, int]:
    """Injective cluster -> label assignment maximizing matched items.

    Returns (mapping, matched count). Among equally good assignments the
    lexicographically smallest mapping (by cluster order, then label
    column index) is chosen; clusters left over when there are more
    clusters than labels stay unmapped.
    """
    m, g = t.counts.shape
    counts = t.counts
    if m > g:
        counts = np.concatenate([counts, np.zeros((m, m - g), dtype=counts.dtype)], axis=1)
    best = _best_matched(counts)
    free_rows = list(range(m))
    free_cols = list(range(counts.shape[1]))
    mapping: dict[int, object] = {}
    remaining = best
    for row in range(m):
        free_rows.remove(row)
        sub_rows = np.array(free_rows, dtype=int)
        for col in free_cols:
            rest_cols = np.array([c for c in free_cols if c != col], dtype=int)
            sub = counts[np.ix_(sub_rows, rest_cols)] if len(sub_rows) else np.zeros((0, 0), dtype=int)
            achievable = int(counts[row, col]) + (_best_matched(sub) if sub.size else 0)
            if achievable == remaining:
                if col < len(t.labels):
                    mapping[row] = t.labels[col]
                free_cols.remove(col)
                remaining -= int(counts[row, col])
                break
    return mapping, best


def many_to_one_mapping(t: Contingency) -> dict:
    """Cluster -> majority gold label (lowest column index on ties)."""
    mapping = {}
    for row in range(t.counts.shape[0]):
        mapping[row] = t.labels[int(np.argmax(t.counts[row]))]
    return mapping


def mapped_f1(pred, gold, mapping_mode: str = "one_to_one", labels=None) -> tuple[float, float, float]:
    """Precision, recall and F1 after relabeling clusters via the mapping.

    Predictions and gold cover the same item set (gold structure), so
    precision equals recall equals the fraction of correctly relabeled
    items.
    """
    if mapping_mode not in MAPPING_MODES:
        raise ArgumentError(f"unknown mapping mode {mapping_mode!r}")
    if len(pred) == 0:
        raise ArgumentError("empty evaluation set")
    t = contingency(pred, gold, labels=labels)
    if mapping_mode == "many_to_one":
        mapping = many_to_one_mapping(t)
        correct = sum(t.counts[c, t.labels.index(lab)] for c, lab in mapping.items())
    else:
        mapping, correct = hungarian_match(t)
    acc = correct / len(pred)
    return acc, acc, acc


def oracle_select(trace: list[tuple]) -> tuple:
    """(best id, best value, last id, last value); earliest wins ties."""
    if not trace:
        raise ArgumentError("empty selection trace")
    best_id, best_v = trace[0]
    for cid, v in trace[1:]:
        if v > best_v:
            best_id, best_v = cid, v
    last_id, last_v = trace[-1]
    return best_id, best_v, last_id, last_v


def aggregate_runs(values: list[float]) -> tuple[float, float, float]:
    """Mean, sample standard deviation (0 for a single run) and max."""
    if not values:
        raise ArgumentError("no values to aggregate")
    mean = sum(values) / len(values)
    if len(values) > 1:
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
    else:
        std = 0.0
    return mean, std, max(values)


@dataclass
class EvalReport:
    """Per-run metric values plus their aggregates, JSON serializable."""

    task: str
    seeds: list
    metrics: dict = field(default_factory=dict)  # name -> list of per-run values
    notes: dict = field(default_factory=dict)

    def aggregates(self) -> dict:
        out = {}
        for name, values in self.metrics.items():
            present = [v for v in values if v is not None]
            if not present:
                continue
            mean, std, mx = aggregate_runs(present)
            out[name] = {"mean": mean, "std": std, "max": mx, "n": len(present)}
        return out

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "seeds": list(self.seeds),
            "metrics": {k: list(v) for k, v in self.metrics.items()},
            "aggregates": self.aggregates(),
            "notes": dict(self.notes),
        }


def render_table(report: EvalReport) -> str:
    """Aligned text table: one row per metric, mean +/- std and max."""
    agg = report.aggregates()
    rows = [("metric", "mean", "std", "max", "n")]
    for name in report.metrics:
        if name not in agg:
            rows.append((name, "-", "-", "-", "0"))
            continue
        a = agg[name]
        rows.append(
            (name, f"{a['mean']:.4f}", f"{a['std']:.4f}", f"{a['max']:.4f}", str(a["n"]))
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
