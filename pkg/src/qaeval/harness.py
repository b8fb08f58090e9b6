"""System-wise evaluation: aggregate point-wise judgements into accuracy estimates.

A judge scores (question, reference, candidate) triples; the harness averages
scores over all available references, thresholds them, and aggregates per
system into accuracy (P@1) and ranking metrics, which are then compared
against the gold-standard computation via Kendall's tau-b and RMSE.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from .corpus import EvalTuple
from .metrics import (
    MetricReport,
    RankedList,
    f1_report,
    kendall_tau_b,
    ranking_reports,
    rmse,
)


class Judge(Protocol):
    def score(
        self, question: str, reference: str, candidate: str, short_answer: str | None = None
    ) -> float: ...


@dataclass
class RefEntry:
    """Gold data for one question: reference answers and optional candidate labels."""

    references: list[str]
    question: str = ""
    gold_labels: dict[str, int] | None = None


class ReferenceSet:
    """Per-question gold references, keyed by question id."""

    def __init__(self, entries: dict[str, RefEntry]):
        for qid, entry in entries.items():
            if not entry.references:
                raise ValueError(f"question {qid!r} has no reference answers")
            if not entry.question:
                entry.question = qid
        self.entries = entries

    def __contains__(self, qid: str) -> bool:
        return qid in self.entries

    def __getitem__(self, qid: str) -> RefEntry:
        try:
            return self.entries[qid]
        except KeyError:
            raise KeyError(f"question {qid!r} missing from the reference set") from None

    def gold_label(self, qid: str, candidate: str) -> int:
        labels = self[qid].gold_labels
        if labels is None or candidate not in labels:
            raise KeyError(
                f"no gold label for candidate {candidate!r} of question {qid!r}"
            )
        return labels[candidate]

    def has_gold_labels(self) -> bool:
        return all(entry.gold_labels is not None for entry in self.entries.values())


@dataclass
class SystemRun:
    """One system's answers: per question, candidates with optional scores.

    A single unscored candidate per question is a chosen-answer run; multiple
    scored candidates form a ranking run.
    """

    system_id: str
    answers: dict[str, list[tuple[str, float | None]]]

    def __post_init__(self) -> None:
        for qid, entries in self.answers.items():
            if not entries:
                raise ValueError(f"run {self.system_id!r}: question {qid!r} has no answers")
            scored = [score is not None for _, score in entries]
            if any(scored) and not all(scored):
                raise ValueError(
                    f"run {self.system_id!r}: question {qid!r} mixes scored and unscored answers"
                )

    def ranking(self, qid: str) -> list[str]:
        """Candidates ordered best-first: score descending, ties by input order."""
        entries = self.answers[qid]
        if entries[0][1] is None:
            return [answer for answer, _ in entries]
        order = sorted(range(len(entries)), key=lambda i: (-entries[i][1], i))
        return [entries[i][0] for i in order]

    def chosen(self, qid: str) -> str:
        return self.ranking(qid)[0]

    @property
    def is_ranked(self) -> bool:
        return any(
            len(entries) > 1 or entries[0][1] is not None
            for entries in self.answers.values()
        )


class OracleJudge:
    """Returns the gold label of the candidate; verifies aggregation end to end."""

    def __init__(self, labels: dict[str, dict[str, int]]):
        self.labels = labels

    @classmethod
    def from_references(cls, refs: ReferenceSet) -> "OracleJudge":
        labels: dict[str, dict[str, int]] = {}
        for qid, entry in refs.entries.items():
            if entry.gold_labels is None:
                raise ValueError(f"question {qid!r} has no gold labels for the oracle judge")
            labels[entry.question] = dict(entry.gold_labels)
        return cls(labels)

    @classmethod
    def from_tuples(cls, tuples: Sequence[EvalTuple]) -> "OracleJudge":
        labels: dict[str, dict[str, int]] = {}
        for t in tuples:
            labels.setdefault(t.question, {})[t.candidate] = t.label
        return cls(labels)

    def score(
        self, question: str, reference: str, candidate: str, short_answer: str | None = None
    ) -> float:
        try:
            return float(self.labels[question][candidate])
        except KeyError:
            raise KeyError(
                f"oracle has no label for candidate {candidate!r} of question {question!r}"
            ) from None


def score_multi_ref(judge: Judge, question: str, references: Sequence[str], candidate: str) -> float:
    """Mean judge probability over all references."""
    if not references:
        raise ValueError("at least one reference is required")
    return sum(judge.score(question, ref, candidate) for ref in references) / len(references)


@dataclass
class CalibrationResult:
    alpha: float
    dev_rmse: float
    grid: list[tuple[float, float]] = field(default_factory=list)


ALPHA_GRID = [round(i / 100.0, 2) for i in range(101)]


def eligible_questions(run: SystemRun, refs: ReferenceSet) -> list[str]:
    """Question ids that contribute to ranking metrics.

    For ranked runs with gold labels, questions whose candidate pool lacks a
    correct or lacks an incorrect answer are dropped; otherwise every question
    in the run counts.
    """
    qids = list(run.answers)
    if not run.is_ranked or not refs.has_gold_labels():
        return qids
    keep = []
    for qid in qids:
        labels = [refs.gold_label(qid, answer) for answer, _ in run.answers[qid]]
        if any(l == 1 for l in labels) and any(l == 0 for l in labels):
            keep.append(qid)
    return keep


def _chosen_scores(judge: Judge, run: SystemRun, refs: ReferenceSet, qids: Sequence[str]) -> list[float]:
    scores = []
    for qid in qids:
        entry = refs[qid]
        scores.append(score_multi_ref(judge, entry.question, entry.references, run.chosen(qid)))
    return scores


def estimate_system_accuracy(
    judge: Judge, run: SystemRun, refs: ReferenceSet, alpha: float
) -> float:
    """Fraction of questions whose chosen answer scores above the threshold."""
    qids = eligible_questions(run, refs)
    missing = [qid for qid in qids if qid not in refs]
    if missing:
        raise KeyError(f"run {run.system_id!r}: questions missing from references: {missing}")
    scores = _chosen_scores(judge, run, refs, qids)
    if not scores:
        return 0.0
    return sum(1 for s in scores if s > alpha) / len(scores)


def gold_system_accuracy(run: SystemRun, refs: ReferenceSet) -> float:
    """P@1 from gold labels of each question's chosen answer."""
    qids = eligible_questions(run, refs)
    if not qids:
        return 0.0
    hits = sum(refs.gold_label(qid, run.chosen(qid)) for qid in qids)
    return hits / len(qids)


def _ranked_lists(
    run: SystemRun, refs: ReferenceSet, relevance_of, qids: Sequence[str]
) -> list[RankedList]:
    lists = []
    for qid in qids:
        candidates = run.ranking(qid)
        relevance = [relevance_of(qid, c) for c in candidates]
        lists.append(RankedList(qid, tuple(candidates), tuple(relevance)))
    return lists


def estimate_ranking_metrics(
    judge: Judge, run: SystemRun, refs: ReferenceSet, alpha: float
) -> dict[str, float]:
    """P@1/MAP/MRR with candidate relevance = thresholded multi-reference score."""
    qids = eligible_questions(run, refs)

    def judged_relevance(qid: str, candidate: str) -> int:
        entry = refs[qid]
        return int(score_multi_ref(judge, entry.question, entry.references, candidate) > alpha)

    reports = ranking_reports(_ranked_lists(run, refs, judged_relevance, qids))
    return {name: rep.value for name, rep in reports.items()}


def gold_ranking_metrics(run: SystemRun, refs: ReferenceSet) -> dict[str, float]:
    qids = eligible_questions(run, refs)
    reports = ranking_reports(_ranked_lists(run, refs, refs.gold_label, qids))
    return {name: rep.value for name, rep in reports.items()}


def tune_threshold(
    judge: Judge, dev_runs: Sequence[SystemRun], refs: ReferenceSet
) -> CalibrationResult:
    """Grid-search the threshold minimizing accuracy RMSE against gold on dev runs.

    All 101 grid points are evaluated; selection prefers interior thresholds
    (endpoints 0.00 and 1.00 accept/reject everything and are degenerate),
    breaking ties toward the smallest value.
    """
    if not dev_runs:
        raise ValueError("threshold tuning needs at least one dev run")
    gold = [gold_system_accuracy(run, refs) for run in dev_runs]
    per_run_scores = []
    for run in dev_runs:
        qids = eligible_questions(run, refs)
        per_run_scores.append(_chosen_scores(judge, run, refs, qids))

    grid: list[tuple[float, float]] = []
    for alpha in ALPHA_GRID:
        estimates = [
            sum(1 for s in scores if s > alpha) / len(scores) if scores else 0.0
            for scores in per_run_scores
        ]
        grid.append((alpha, rmse(estimates, gold)[0]))

    best = min(value for _, value in grid)
    interior = [(a, v) for a, v in grid if 0.0 < a < 1.0]
    candidates = [a for a, v in interior if v == best] or [a for a, v in grid if v == best]
    alpha = min(candidates)
    dev_rmse = dict(grid)[alpha]
    return CalibrationResult(alpha=alpha, dev_rmse=dev_rmse, grid=grid)


@dataclass
class SystemComparison:
    """Judge-estimated vs gold metric values across systems."""

    metric: str
    systems: list[str]
    estimated: list[float]
    gold: list[float]
    tau: float
    p_value: float
    rmse: float
    sigma: float

    def to_record(self) -> dict:
        def _json_safe(value: float):
            return None if value != value else value  # NaN -> null

        return {
            "metric": self.metric,
            "systems": list(self.systems),
            "estimated": list(self.estimated),
            "gold": list(self.gold),
            "tau": _json_safe(self.tau),
            "p_value": _json_safe(self.p_value),
            "rmse": self.rmse,
            "sigma": self.sigma,
        }


def compare_systems(
    estimated: dict[str, float],
    gold: dict[str, float],
    metric: str = "p_at_1",
    strict: bool = True,
) -> SystemComparison:
    """Rank correlation and error between estimated and gold per-system values.

    With ``strict=False`` an all-tied input yields tau/p of NaN instead of an
    error (RMSE is still defined); reporting paths use this.
    """
    if set(estimated) != set(gold):
        raise ValueError(
            f"system sets differ: {sorted(estimated)} vs {sorted(gold)}"
        )
    systems = sorted(estimated)
    est_values = [estimated[s] for s in systems]
    gold_values = [gold[s] for s in systems]
    try:
        tau, p_value = kendall_tau_b(est_values, gold_values)
    except ValueError:
        if strict:
            raise
        tau, p_value = float("nan"), float("nan")
    error, sigma = rmse(est_values, gold_values)
    return SystemComparison(
        metric=metric,
        systems=systems,
        estimated=est_values,
        gold=gold_values,
        tau=tau,
        p_value=p_value,
        rmse=error,
        sigma=sigma,
    )


def render_comparison(comparison: SystemComparison) -> str:
    """Aligned text table in the per-system rows + summary shape."""
    width = max(len(s) for s in comparison.systems + ["system"])
    lines = [
        f"metric: {comparison.metric}",
        f"{'system'.ljust(width)}  {'estimated':>9}  {'gold':>9}",
    ]
    for system, est, gold in zip(comparison.systems, comparison.estimated, comparison.gold):
        lines.append(f"{system.ljust(width)}  {est:9.4f}  {gold:9.4f}")
    lines.append(
        f"tau={comparison.tau:.4f} p={comparison.p_value:.4g} "
        f"rmse={comparison.rmse:.4f} sigma={comparison.sigma:.4f}"
    )
    return "\n".join(lines) + "\n"


def pointwise_report(judge: Judge, tuples: Sequence[EvalTuple]) -> MetricReport:
    """P/R/F1 of thresholded judge decisions at 0.5 against the tuple labels."""
    decisions = []
    for t in tuples:
        prob = judge.score(t.question, t.reference, t.candidate, t.short_answer)
        decisions.append(int(prob > 0.5))
    return f1_report(decisions, [t.label for t in tuples])


def split_questions(
    qids: Sequence[str], dev_fraction: float = 0.2, seed: int = 0
) -> tuple[list[str], list[str]]:
    """Seeded dev/test split by question id (dev fraction first)."""
    import random

    order = list(qids)
    random.Random(seed).shuffle(order)
    cut = int(round(len(order) * dev_fraction))
    dev = sorted(order[:cut])
    test = sorted(order[cut:])
    return dev, test


def read_system_runs(path: str | Path) -> list[SystemRun]:
    """Read {system_id, qid, answer, score?} lines grouped into runs."""
    answers: dict[str, dict[str, list[tuple[str, float | None]]]] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}") from None
            for key in ("system_id", "qid", "answer"):
                if key not in obj:
                    raise ValueError(f"{path}:{line_no}: field {key!r}: missing field")
            score = obj.get("score")
            answers.setdefault(str(obj["system_id"]), {}).setdefault(str(obj["qid"]), []).append(
                (str(obj["answer"]), None if score is None else float(score))
            )
    return [SystemRun(system_id, per_q) for system_id, per_q in answers.items()]


def write_system_runs(path: str | Path, runs: Sequence[SystemRun]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for run in runs:
            for qid, entries in run.answers.items():
                for answer, score in entries:
                    obj = {"system_id": run.system_id, "qid": qid, "answer": answer}
                    if score is not None:
                        obj["score"] = score
                    handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_references(path: str | Path) -> ReferenceSet:
    """Read {qid, references[], gold_labels?, question?} lines."""
    entries: dict[str, RefEntry] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}") from None
            for key in ("qid", "references"):
                if key not in obj:
                    raise ValueError(f"{path}:{line_no}: field {key!r}: missing field")
            refs = obj["references"]
            if not isinstance(refs, list) or not refs:
                raise ValueError(f"{path}:{line_no}: field 'references': expected a non-empty list")
            gold = obj.get("gold_labels")
            if gold is not None:
                gold = {str(k): int(v) for k, v in gold.items()}
            entries[str(obj["qid"])] = RefEntry(
                references=[str(r) for r in refs],
                question=str(obj.get("question", "")),
                gold_labels=gold,
            )
    return ReferenceSet(entries)


def write_references(path: str | Path, refs: ReferenceSet) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for qid, entry in refs.entries.items():
            obj: dict = {"qid": qid, "question": entry.question, "references": entry.references}
            if entry.gold_labels is not None:
                obj["gold_labels"] = entry.gold_labels
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")
