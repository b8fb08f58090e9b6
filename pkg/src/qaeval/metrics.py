"""Evaluation measures for point-wise and system-wise QA evaluation.

Point-wise judgements are scored with precision/recall/F1. Per-question
rankings are scored with P@1, average precision, and reciprocal rank, and
system orderings are compared with Kendall's tau-b (tie-corrected, with a
two-sided significance value) and RMSE.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import norm


@dataclass(frozen=True)
class RankedList:
    """One question's candidates in system order (best first) with binary relevance."""

    question_id: str
    candidates: tuple[str, ...]
    relevance: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.candidates) != len(self.relevance):
            raise ValueError(
                f"question {self.question_id!r}: {len(self.candidates)} candidates "
                f"but {len(self.relevance)} relevance labels"
            )
        if any(r not in (0, 1) for r in self.relevance):
            raise ValueError(f"question {self.question_id!r}: relevance must be 0/1")

    @classmethod
    def from_scored(
        cls,
        question_id: str,
        candidates: Sequence[str],
        scores: Sequence[float],
        relevance: Sequence[int],
    ) -> "RankedList":
        """Order candidates by score descending; ties keep the original index order."""
        order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
        return cls(
            question_id=question_id,
            candidates=tuple(candidates[i] for i in order),
            relevance=tuple(int(relevance[i]) for i in order),
        )


@dataclass
class MetricReport:
    """A named metric value with its provenance (per-question values, count, extras)."""

    name: str
    value: float
    n: int
    per_question: list[float] | None = None
    extras: dict[str, float] = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {"name": self.name, "value": self.value, "n": self.n}
        if self.extras:
            rec["extras"] = dict(self.extras)
        return rec


def precision_recall_f1(
    decisions: Sequence[int], labels: Sequence[int]
) -> tuple[float, float, float]:
    """Standard binary P/R/F1; undefined ratios fall back to 0."""
    if len(decisions) != len(labels):
        raise ValueError(
            f"length mismatch: {len(decisions)} decisions vs {len(labels)} labels"
        )
    tp = sum(1 for d, l in zip(decisions, labels) if d == 1 and l == 1)
    fp = sum(1 for d, l in zip(decisions, labels) if d == 1 and l == 0)
    fn = sum(1 for d, l in zip(decisions, labels) if d == 0 and l == 1)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def f1_report(decisions: Sequence[int], labels: Sequence[int]) -> MetricReport:
    precision, recall, f1 = precision_recall_f1(decisions, labels)
    return MetricReport(
        name="f1",
        value=f1,
        n=len(labels),
        extras={"precision": precision, "recall": recall},
    )


def p_at_1(ranked: RankedList) -> float:
    """1 if the top-ranked candidate is relevant, else 0."""
    return float(ranked.relevance[0]) if ranked.relevance else 0.0


def average_precision(ranked: RankedList) -> float:
    """Mean of precision@k over relevant positions k; 0 when nothing is relevant.

    Questions without any relevant candidate are normally excluded upstream;
    returning 0 here keeps the judge-derived relevance path total.
    """
    hits = 0
    total = 0.0
    for k, rel in enumerate(ranked.relevance, start=1):
        if rel:
            hits += 1
            total += hits / k
    return total / hits if hits else 0.0


def reciprocal_rank(ranked: RankedList) -> float:
    """1/rank of the first relevant candidate; 0 when nothing is relevant."""
    for k, rel in enumerate(ranked.relevance, start=1):
        if rel:
            return 1.0 / k
    return 0.0


def _mean_over_questions(
    name: str, fn: Callable[[RankedList], float], ranked_lists: Sequence[RankedList]
) -> MetricReport:
    per_question = [fn(r) for r in ranked_lists]
    value = sum(per_question) / len(per_question) if per_question else 0.0
    return MetricReport(name=name, value=value, n=len(per_question), per_question=per_question)


def ranking_reports(ranked_lists: Sequence[RankedList]) -> dict[str, MetricReport]:
    """P@1, MAP and MRR over a set of per-question rankings."""
    return {
        "p_at_1": _mean_over_questions("p_at_1", p_at_1, ranked_lists),
        "map": _mean_over_questions("map", average_precision, ranked_lists),
        "mrr": _mean_over_questions("mrr", reciprocal_rank, ranked_lists),
    }


def _tie_counts(values: Sequence[float]) -> tuple[int, int, int]:
    """(sum t(t-1)/2, sum t(t-1)(t-2), sum t(t-1)(2t+5)) over tie groups."""
    pairs = 0
    triple = 0
    weighted = 0
    for t in Counter(values).values():
        pairs += t * (t - 1) // 2
        triple += t * (t - 1) * (t - 2)
        weighted += t * (t - 1) * (2 * t + 5)
    return pairs, triple, weighted


def kendall_tau_b(
    scores_a: Sequence[float],
    scores_h: Sequence[float],
    p_method: str = "auto",
) -> tuple[float, float]:
    """Tie-corrected Kendall rank correlation between two score lists.

    Returns (tau_b, two-sided p). ``p_method`` is one of:

    * ``"normal"`` — normal approximation with tie-corrected variance,
    * ``"exact"`` — permutation enumeration (requires n <= 8),
    * ``"auto"`` — exact when n <= 8 and neither list has ties, else normal.

    Raises on n < 2 and on an all-tied input, where tau is undefined.
    """
    n = len(scores_a)
    if len(scores_h) != n:
        raise ValueError(f"length mismatch: {n} vs {len(scores_h)}")
    if n < 2:
        raise ValueError("kendall_tau_b needs at least two items")

    a = [float(v) for v in scores_a]
    h = [float(v) for v in scores_h]
    concordant, discordant = _concordance_counts(a, h)
    n0 = n * (n - 1) // 2
    ties_a, a0, a1 = _tie_counts(a)
    ties_h, h0, h1 = _tie_counts(h)
    # one sqrt of the integer product keeps tau exact for identical tie shapes
    denom = math.sqrt(float((n0 - ties_a) * (n0 - ties_h)))
    if denom == 0.0:
        raise ValueError("tau undefined: at least one input is entirely tied")
    tau = (concordant - discordant) / denom

    if p_method == "auto":
        p_method = "exact" if (n <= 8 and ties_a == 0 and ties_h == 0) else "normal"
    if p_method == "exact":
        p_value = _exact_tau_p(a, h, abs(tau))
    elif p_method == "normal":
        m = n * (n - 1)
        var = (m * (2 * n + 5) - a1 - h1) / 18.0 + (2.0 * ties_a * ties_h) / m
        if a0 and h0:
            var += a0 * h0 / (9.0 * m * (n - 2))
        z = (concordant - discordant) / math.sqrt(var)
        p_value = 2.0 * float(norm.sf(abs(z)))
    else:
        raise ValueError(f"unknown p_method {p_method!r}")
    return tau, p_value


def _concordance_counts(a: Sequence[float], h: Sequence[float]) -> tuple[int, int]:
    concordant = 0
    discordant = 0
    for i, j in itertools.combinations(range(len(a)), 2):
        s = (a[i] - a[j]) * (h[i] - h[j])
        if s > 0:
            concordant += 1
        elif s < 0:
            discordant += 1
    return concordant, discordant


def _exact_tau_p(a: list[float], h: list[float], abs_tau: float) -> float:
    """Two-sided permutation p-value: share of orderings with |tau| >= observed."""
    n = len(a)
    if n > 8:
        raise ValueError("exact p-value enumeration is limited to n <= 8")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    hp = np.asarray(h, dtype=float)[perms]  # (n!, n)
    av = np.asarray(a, dtype=float)
    idx_i, idx_j = np.triu_indices(n, k=1)
    sign_a = np.sign(av[idx_i] - av[idx_j])  # (n0,)
    diff_h = np.sign(hp[:, idx_i] - hp[:, idx_j])  # (n!, n0)
    prod = sign_a[None, :] * diff_h
    c_minus_d = (prod > 0).sum(axis=1) - (prod < 0).sum(axis=1)
    n0 = n * (n - 1) // 2
    ties_a, _, _ = _tie_counts(list(av))
    ties_h, _, _ = _tie_counts(h)
    denom = math.sqrt(float((n0 - ties_a) * (n0 - ties_h)))
    taus = c_minus_d / denom
    return float(np.mean(np.abs(taus) >= abs_tau - 1e-12))


def rmse(values_a: Sequence[float], values_h: Sequence[float]) -> tuple[float, float]:
    """Root mean square error plus the std. deviation of the absolute errors."""
    if len(values_a) != len(values_h):
        raise ValueError(f"length mismatch: {len(values_a)} vs {len(values_h)}")
    if not values_a:
        raise ValueError("rmse needs at least one value")
    diffs = np.asarray(values_a, dtype=float) - np.asarray(values_h, dtype=float)
    value = float(np.sqrt(np.mean(diffs**2)))
    sigma = float(np.std(np.abs(diffs)))
    return value, sigma


def render_reports(reports: Iterable[MetricReport]) -> str:
    """Aligned plain-text table for a list of metric reports."""
    rows = []
    for rep in reports:
        extras = " ".join(f"{k}={v:.4f}" for k, v in sorted(rep.extras.items()))
        rows.append((rep.name, f"{rep.value:.4f}", str(rep.n), extras))
    if not rows:
        return "(no metrics)\n"
    widths = [max(len(r[i]) for r in rows + [("metric", "value", "n", "extras")]) for i in range(4)]
    header = ("metric", "value", "n", "extras")
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths).rstrip(),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
