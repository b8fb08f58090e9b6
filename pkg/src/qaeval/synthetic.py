"""Seeded synthetic data: corpora, judge training tasks, and system benchmarks.

Desk-scale stand-ins for the corpora and system outputs the full pipeline
consumes. Everything is deterministic given the seed.
"""

from __future__ import annotations

import random
from typing import Sequence

from .corpus import CandidateSet, EvalTuple, MRDocument
from .harness import RefEntry, ReferenceSet, SystemRun

_WORDS = [
    "alder", "basalt", "cobalt", "dune", "ember", "fjord", "garnet", "harbor",
    "iris", "juniper", "kelp", "lagoon", "marble", "nectar", "onyx", "pampas",
    "quartz", "reef", "sable", "tundra", "umber", "vellum", "willow", "xenon",
    "yarrow", "zephyr", "amber", "birch", "cedar", "delta", "elm", "fern",
    "grove", "heath", "inlet", "jade", "knoll", "larch", "mesa", "north",
    "oak", "pine", "quay", "ridge", "slate", "thicket", "upland", "vale",
    "wharf", "yew",
]


def _phrase(rng: random.Random, length: int) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(length))


def make_corpus(n_questions: int, seed: int = 0) -> list[MRDocument]:
    """Machine-reading corpus exercising all four sentence label categories."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_questions):
        n_sentences = rng.randint(5, 10)
        span_len = rng.randint(2, min(4, n_sentences))
        span_start = rng.randint(0, n_sentences - span_len)
        span = frozenset(range(span_start, span_start + span_len))
        if rng.random() < 0.85:
            short_answers = tuple(
                _phrase(rng, rng.randint(1, 2)) for _ in range(rng.randint(1, 2))
            )
        else:
            short_answers = ()
        sentences = []
        for idx in range(n_sentences):
            sentence = _phrase(rng, rng.randint(4, 8))
            if short_answers:
                inject = rng.random() < (0.7 if idx in span else 0.15)
                if inject:
                    sentence = f"{sentence} {rng.choice(short_answers)} {rng.choice(_WORDS)}"
            sentences.append(sentence)
        docs.append(
            MRDocument(
                question_id=f"q{i:04d}",
                question_text=f"what lies near the {_phrase(rng, 2)}",
                document_sentences=tuple(sentences),
                long_answer_span=span,
                short_answers=short_answers,
            )
        )
    return docs


def make_candidate_sets(n_questions: int, seed: int = 0) -> list[CandidateSet]:
    """Candidate sets with varying correct/incorrect counts (some below 2 correct)."""
    rng = random.Random(seed)
    sets = []
    for i in range(n_questions):
        n_correct = rng.randint(1, 4)
        n_incorrect = rng.randint(0, 5)
        sets.append(
            CandidateSet(
                question_id=f"q{i:04d}",
                question_text=f"which of these mentions the {_phrase(rng, 1)}",
                correct=[f"{_phrase(rng, 5)} c{i}x{j}" for j in range(n_correct)],
                incorrect=[f"{_phrase(rng, 5)} w{i}x{j}" for j in range(n_incorrect)],
            )
        )
    return sets


def make_separable_tuples(
    n_per_class: int, seed: int = 0
) -> tuple[list[EvalTuple], list[EvalTuple]]:
    """Linearly separable judge tuples: positives overlap the reference, negatives do not.

    Returns a (train, dev) split. Positive candidates reuse most of the
    reference's tokens and carry a short answer cut from the reference;
    negative candidates use disjoint vocabulary.
    """
    rng = random.Random(seed)
    half = len(_WORDS) // 2
    ref_pool, other_pool = _WORDS[:half], _WORDS[half:]
    tuples = []
    for i in range(2 * n_per_class):
        label = 1 if i < n_per_class else 0
        ref_words = rng.sample(ref_pool, 6)
        question = " ".join(rng.sample(_WORDS, 4))
        reference = " ".join(ref_words)
        if label == 1:
            candidate_words = rng.sample(ref_words, 5)
            candidate = " ".join(candidate_words) + f" p{i}"
            short_answer = " ".join(ref_words[2:4])
        else:
            candidate = " ".join(rng.sample(other_pool, 5)) + f" n{i}"
            short_answer = rng.choice(other_pool)
        tuples.append(
            EvalTuple(
                question_id=f"sep{i:04d}",
                question=question,
                reference=reference,
                candidate=candidate,
                label=label,
                short_answer=short_answer,
            )
        )
    rng.shuffle(tuples)
    cut = int(0.75 * len(tuples))
    return tuples[:cut], tuples[cut:]


def make_overlap_task(
    n_train: int,
    n_dev: int,
    seed: int = 0,
    content_vocab: int = 12,
    text_len: int = 4,
    shared_tokens: int | None = None,
    positive_fraction: float = 0.6,
) -> tuple[list[EvalTuple], list[EvalTuple]]:
    """Token-overlap task for encoder judges.

    The label depends only on the reference/candidate relation: positive
    candidates reuse the reference's tokens (reordered, never the identical
    string; ``shared_tokens`` below ``text_len`` swaps some for outside
    words), negative candidates are token-disjoint from the reference.
    Questions come from a separate small vocabulary and carry no signal, so
    judges that never read the candidate cannot beat the base rate. The
    default profile is sized so the tiny encoder learns it within two epochs.
    """
    if content_vocab < 2 * text_len:
        raise ValueError("content_vocab must be at least twice text_len for disjoint negatives")
    rng = random.Random(seed)
    words = [f"w{i:02d}" for i in range(content_vocab)]
    question_words = [f"q{i}" for i in range(6)]
    shared = text_len if shared_tokens is None else shared_tokens
    if not 0 < shared <= text_len:
        raise ValueError(f"shared_tokens must be in 1..{text_len}")

    def build(index: int, label: int) -> EvalTuple:
        ref_words = rng.sample(words, text_len)
        question = " ".join(rng.sample(question_words, 2))
        outside = [w for w in words if w not in ref_words]
        if label == 1:
            candidate_words = rng.sample(ref_words, shared) + rng.sample(
                outside, text_len - shared
            )
            rng.shuffle(candidate_words)
            if candidate_words == ref_words:
                candidate_words = candidate_words[1:] + candidate_words[:1]
        else:
            candidate_words = rng.sample(outside, text_len)
        return EvalTuple(
            question_id=f"ov{index:05d}",
            question=question,
            reference=" ".join(ref_words),
            candidate=" ".join(candidate_words),
            label=label,
        )

    def build_split(n: int, offset: int) -> list[EvalTuple]:
        n_pos = round(n * positive_fraction)
        labels = [1] * n_pos + [0] * (n - n_pos)
        rng.shuffle(labels)
        return [build(offset + i, label) for i, label in enumerate(labels)]

    return build_split(n_train, 0), build_split(n_dev, n_train)


def make_system_benchmark(
    n_systems: int = 6,
    n_questions: int = 50,
    seed: int = 0,
    style: str = "ranked",
) -> tuple[list[SystemRun], ReferenceSet]:
    """Systems of graded quality answering a shared candidate pool per question.

    ``style`` is "ranked" (every candidate scored) or "chosen" (only the top
    answer, unscored). References are the gold-correct candidates; gold labels
    cover the full pool. A few questions get all-correct or all-wrong pools to
    exercise the eligibility rule.
    """
    if style not in ("ranked", "chosen"):
        raise ValueError(f"unknown style {style!r}")
    rng = random.Random(seed)
    entries: dict[str, RefEntry] = {}
    pools: dict[str, list[tuple[str, int]]] = {}
    for i in range(n_questions):
        qid = f"bm{i:03d}"
        question = f"question {i} about the {_phrase(rng, 2)}"
        n_candidates = rng.randint(4, 8)
        roll = rng.random()
        if roll < 0.04:
            labels = [1] * n_candidates
        elif roll < 0.08:
            labels = [0] * n_candidates
        else:
            n_pos = rng.randint(1, n_candidates - 1)
            labels = [1] * n_pos + [0] * (n_candidates - n_pos)
            rng.shuffle(labels)
        pool = [(f"{_phrase(rng, 5)} a{i}x{j}", labels[j]) for j in range(n_candidates)]
        pools[qid] = pool
        references = [text for text, label in pool if label == 1] or [_phrase(rng, 5)]
        entries[qid] = RefEntry(
            references=references,
            question=question,
            gold_labels={text: label for text, label in pool},
        )
    refs = ReferenceSet(entries)

    runs = []
    for k in range(n_systems):
        skill = 0.15 + (0.6 * k / max(1, n_systems - 1))
        answers: dict[str, list[tuple[str, float | None]]] = {}
        for qid, pool in pools.items():
            scored = [
                (text, rng.random() + skill * label) for text, label in pool
            ]
            if style == "ranked":
                answers[qid] = scored
            else:
                best = max(range(len(scored)), key=lambda j: scored[j][1])
                answers[qid] = [(scored[best][0], None)]
        runs.append(SystemRun(system_id=f"system_{k}", answers=answers))
    return runs, refs
