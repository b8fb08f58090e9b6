"""Derive answer-sentence-selection data and judge training tuples from annotated corpora.

The input is a machine-reading style corpus: each question comes with an
ordered list of document sentences, a long-answer span (sentence indices) and
zero or more short extractive answers. From that we derive per-sentence
labels, candidate sets split into correct/incorrect answers, and finally the
(question, reference, candidate) training tuples built by pairing correct
answers with each other (positives) and with incorrect ones (negatives).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class As2Label(str, Enum):
    """Per-sentence label: one positive class and three kinds of negatives."""

    POSITIVE = "POSITIVE"
    NEG_IN_LONG = "NEG_IN_LONG"
    NEG_SHORT_ELSEWHERE = "NEG_SHORT_ELSEWHERE"
    NEG_OTHER = "NEG_OTHER"


@dataclass(frozen=True)
class MRDocument:
    """A question with its source document pre-split into sentences."""

    question_id: str
    question_text: str
    document_sentences: tuple[str, ...]
    long_answer_span: frozenset[int]
    short_answers: tuple[str, ...]


@dataclass(frozen=True)
class AS2Record:
    question_id: str
    question_text: str
    sentence: str
    label: As2Label


@dataclass
class CandidateSet:
    """A question's candidates partitioned into correct and incorrect answers."""

    question_id: str
    question_text: str
    correct: list[str]
    incorrect: list[str]


@dataclass(frozen=True)
class EvalTuple:
    """One judge input: question, reference answer, candidate answer, binary label."""

    question_id: str
    question: str
    reference: str
    candidate: str
    label: int
    short_answer: str | None = None


@dataclass
class DatasetStats:
    num_questions: int
    num_correct_answers: int
    num_wrong_answers: int
    num_positive_tuples: int
    num_negative_tuples: int


def normalize_text(text: str) -> str:
    """Lowercase and collapse whitespace runs; the match predicate for short answers."""
    return " ".join(text.lower().split())


def contains_short_answer(sentence: str, short_answers: Sequence[str]) -> bool:
    norm_sentence = normalize_text(sentence)
    for answer in short_answers:
        norm_answer = normalize_text(answer)
        if norm_answer and norm_answer in norm_sentence:
            return True
    return False


def derive_as2(docs: Iterable[MRDocument]) -> list[AS2Record]:
    """Label every sentence of every document.

    POSITIVE: inside the long-answer span and containing a short answer.
    NEG_IN_LONG: inside the span without a short answer.
    NEG_SHORT_ELSEWHERE: outside the span but containing a short answer.
    NEG_OTHER: everything else.
    """
    records: list[AS2Record] = []
    for doc in docs:
        if not doc.document_sentences:
            raise ValueError(f"document {doc.question_id!r}: empty sentence list")
        bad = [i for i in doc.long_answer_span if not 0 <= i < len(doc.document_sentences)]
        if bad:
            raise ValueError(
                f"document {doc.question_id!r}: long_answer_span indices {sorted(bad)} "
                f"out of range for {len(doc.document_sentences)} sentences"
            )
        for idx, sentence in enumerate(doc.document_sentences):
            in_span = idx in doc.long_answer_span
            has_short = contains_short_answer(sentence, doc.short_answers)
            if in_span and has_short:
                label = As2Label.POSITIVE
            elif in_span:
                label = As2Label.NEG_IN_LONG
            elif has_short:
                label = As2Label.NEG_SHORT_ELSEWHERE
            else:
                label = As2Label.NEG_OTHER
            records.append(
                AS2Record(
                    question_id=doc.question_id,
                    question_text=doc.question_text,
                    sentence=sentence,
                    label=label,
                )
            )
    return records


def to_candidate_sets(records: Iterable[AS2Record]) -> list[CandidateSet]:
    """Group sentence records per question, collapsing the label to correct/incorrect.

    Question order and per-question sentence order follow the input.
    """
    sets: dict[str, CandidateSet] = {}
    for rec in records:
        cs = sets.get(rec.question_id)
        if cs is None:
            cs = CandidateSet(rec.question_id, rec.question_text, [], [])
            sets[rec.question_id] = cs
        if rec.label is As2Label.POSITIVE:
            cs.correct.append(rec.sentence)
        else:
            cs.incorrect.append(rec.sentence)
    return list(sets.values())


def filter_multi_answer(sets: Iterable[CandidateSet]) -> list[CandidateSet]:
    """Keep only questions with at least two correct answers, order preserved."""
    return [cs for cs in sets if len(cs.correct) >= 2]


def build_eval_tuples(sets: Iterable[CandidateSet]) -> list[EvalTuple]:
    """Cross-product tuple construction over each question's candidates.

    Positives are all ordered pairs (reference, candidate) of distinct correct
    answers; negatives pair every correct answer with every incorrect one.
    Questions with fewer than two correct answers are dropped first.
    """
    tuples: list[EvalTuple] = []
    for cs in filter_multi_answer(sets):
        for reference in cs.correct:
            for candidate in cs.correct:
                if reference != candidate:
                    tuples.append(
                        EvalTuple(cs.question_id, cs.question_text, reference, candidate, 1)
                    )
        for reference in cs.correct:
            for candidate in cs.incorrect:
                tuples.append(
                    EvalTuple(cs.question_id, cs.question_text, reference, candidate, 0)
                )
    return tuples


def dataset_stats(
    sets: Sequence[CandidateSet], tuples: Sequence[EvalTuple]
) -> DatasetStats:
    return DatasetStats(
        num_questions=len(sets),
        num_correct_answers=sum(len(cs.correct) for cs in sets),
        num_wrong_answers=sum(len(cs.incorrect) for cs in sets),
        num_positive_tuples=sum(1 for t in tuples if t.label == 1),
        num_negative_tuples=sum(1 for t in tuples if t.label == 0),
    )


class RecordFormatError(ValueError):
    """A malformed line in a record file; carries the line number and field."""

    def __init__(self, path: str | Path, line_no: int, field: str, message: str):
        super().__init__(f"{path}:{line_no}: field {field!r}: {message}")
        self.path = str(path)
        self.line_no = line_no
        self.field = field


FORMATS = ("mr-document", "as2", "eval-tuple")


def _require(obj: dict, key: str, path, line_no: int):
    if key not in obj:
        raise RecordFormatError(path, line_no, key, "missing field")
    return obj[key]


def _parse_mr_document(obj: dict, path, line_no: int) -> MRDocument:
    sentences = _require(obj, "sentences", path, line_no)
    span = _require(obj, "long_answer_idx", path, line_no)
    if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
        raise RecordFormatError(path, line_no, "sentences", "expected a list of strings")
    if not isinstance(span, list) or not all(isinstance(i, int) for i in span):
        raise RecordFormatError(path, line_no, "long_answer_idx", "expected a list of ints")
    return MRDocument(
        question_id=str(_require(obj, "qid", path, line_no)),
        question_text=str(_require(obj, "question", path, line_no)),
        document_sentences=tuple(sentences),
        long_answer_span=frozenset(span),
        short_answers=tuple(_require(obj, "short_answers", path, line_no)),
    )


def _parse_as2(obj: dict, path, line_no: int) -> AS2Record:
    raw_label = _require(obj, "label", path, line_no)
    try:
        label = As2Label(raw_label)
    except ValueError:
        raise RecordFormatError(
            path, line_no, "label", f"unknown label {raw_label!r}"
        ) from None
    return AS2Record(
        question_id=str(_require(obj, "qid", path, line_no)),
        question_text=str(_require(obj, "question", path, line_no)),
        sentence=str(_require(obj, "sentence", path, line_no)),
        label=label,
    )


def _parse_eval_tuple(obj: dict, path, line_no: int) -> EvalTuple:
    label = _require(obj, "label", path, line_no)
    if label not in (0, 1):
        raise RecordFormatError(path, line_no, "label", f"expected 0 or 1, got {label!r}")
    short = obj.get("short_answer")
    return EvalTuple(
        question_id=str(_require(obj, "qid", path, line_no)),
        question=str(_require(obj, "question", path, line_no)),
        reference=str(_require(obj, "reference", path, line_no)),
        candidate=str(_require(obj, "candidate", path, line_no)),
        label=int(label),
        short_answer=None if short is None else str(short),
    )


_PARSERS = {
    "mr-document": _parse_mr_document,
    "as2": _parse_as2,
    "eval-tuple": _parse_eval_tuple,
}


def read_records(path: str | Path, format: str) -> list:
    """Read line-delimited records of the given format (one JSON object per line)."""
    if format not in _PARSERS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    parser = _PARSERS[format]
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordFormatError(path, line_no, "<line>", f"invalid JSON: {exc}") from None
            if not isinstance(obj, dict):
                raise RecordFormatError(path, line_no, "<line>", "expected a JSON object")
            records.append(parser(obj, path, line_no))
    return records


def _mr_document_obj(doc: MRDocument) -> dict:
    return {
        "qid": doc.question_id,
        "question": doc.question_text,
        "sentences": list(doc.document_sentences),
        "long_answer_idx": sorted(doc.long_answer_span),
        "short_answers": list(doc.short_answers),
    }


def _as2_obj(rec: AS2Record) -> dict:
    return {
        "qid": rec.question_id,
        "question": rec.question_text,
        "sentence": rec.sentence,
        "label": rec.label.value,
    }


def _eval_tuple_obj(t: EvalTuple) -> dict:
    obj = {"qid": t.question_id, "question": t.question, "reference": t.reference}
    if t.short_answer is not None:
        obj["short_answer"] = t.short_answer
    obj["candidate"] = t.candidate
    obj["label"] = t.label
    return obj


_WRITERS = {
    MRDocument: _mr_document_obj,
    AS2Record: _as2_obj,
    EvalTuple: _eval_tuple_obj,
}


def write_records(path: str | Path, records: Iterable) -> None:
    """Write records as UTF-8 JSON lines; the schema follows the record type."""
    with open(path, "w", encoding="utf-8") as handle:
        for rec in records:
            writer = _WRITERS.get(type(rec))
            if writer is None:
                raise TypeError(f"cannot serialize record of type {type(rec).__name__}")
            handle.write(json.dumps(writer(rec), ensure_ascii=False) + "\n")
