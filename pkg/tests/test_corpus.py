import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qaeval.corpus import (
    AS2Record,
    As2Label,
    CandidateSet,
    EvalTuple,
    MRDocument,
    RecordFormatError,
    build_eval_tuples,
    dataset_stats,
    derive_as2,
    filter_multi_answer,
    read_records,
    to_candidate_sets,
    write_records,
)


def doc(sentences, span, shorts, qid="q1"):
    return MRDocument(
        question_id=qid,
        question_text="what is it",
        document_sentences=tuple(sentences),
        long_answer_span=frozenset(span),
        short_answers=tuple(shorts),
    )


class TestDeriveAs2:
    def test_positive_definition(self):
        records = derive_as2([doc(["it began in 1901 indeed"], {0}, ["1901"])])
        assert records[0].label is As2Label.POSITIVE

    def test_in_span_without_short_answer(self):
        records = derive_as2([doc(["nothing relevant here"], {0}, ["1901"])])
        assert records[0].label is As2Label.NEG_IN_LONG

    def test_five_sentence_fixture(self):
        sentences = [
            "intro text",
            "the answer 1901 appears",
            "more span text",
            "unrelated filler",
            "a stray 1901 mention",
        ]
        records = derive_as2([doc(sentences, {1, 2}, ["1901"])])
        labels = [r.label for r in records]
        assert labels == [
            As2Label.NEG_OTHER,
            As2Label.POSITIVE,
            As2Label.NEG_IN_LONG,
            As2Label.NEG_OTHER,
            As2Label.NEG_SHORT_ELSEWHERE,
        ]

    def test_match_is_case_insensitive_and_whitespace_normalized(self):
        records = derive_as2([doc(["The  Answer  Is HERE now"], {0}, ["answer is here"])])
        assert records[0].label is As2Label.POSITIVE

    def test_empty_sentences_rejected_with_id(self):
        with pytest.raises(ValueError, match="q7"):
            derive_as2([doc([], {0}, [], qid="q7")])

    def test_bad_span_rejected_with_id(self):
        with pytest.raises(ValueError, match="q8"):
            derive_as2([doc(["one"], {3}, [], qid="q8")])

    def test_no_short_answers_means_no_positives(self):
        records = derive_as2([doc(["a", "b"], {0}, [])])
        assert all(r.label is not As2Label.POSITIVE for r in records)

    @given(
        st.lists(st.integers(0, 3), min_size=1, max_size=8),
        st.sets(st.integers(0, 7)),
        st.lists(st.sampled_from(["1901", "two words", "zz"]), max_size=2),
    )
    def test_labels_match_definition_oracle(self, word_ids, raw_span, shorts):
        vocab = ["alpha", "1901", "two words", "zz"]
        sentences = [f"prefix {vocab[w]} suffix" for w in word_ids]
        span = {i for i in raw_span if i < len(sentences)}
        d = doc(sentences, span, shorts)
        records = derive_as2([d])
        assert len(records) == len(sentences)
        for idx, record in enumerate(records):
            assert record.label.value == oracles.naive_as2_label(d, idx)


class TestCandidateSets:
    def test_collapse_groups_by_question_preserving_order(self):
        records = [
            AS2Record("q1", "w", "s1", As2Label.POSITIVE),
            AS2Record("q2", "x", "s2", As2Label.NEG_OTHER),
            AS2Record("q1", "w", "s3", As2Label.NEG_IN_LONG),
            AS2Record("q1", "w", "s4", As2Label.POSITIVE),
        ]
        sets = to_candidate_sets(records)
        assert [cs.question_id for cs in sets] == ["q1", "q2"]
        assert sets[0].correct == ["s1", "s4"]
        assert sets[0].incorrect == ["s3"]

    def test_filter_multi_answer(self):
        one = CandidateSet("a", "w", ["c1"], [])
        two = CandidateSet("b", "w", ["c1", "c2"], [])
        assert filter_multi_answer([one]) == []
        assert filter_multi_answer([two]) == [two]

    def test_filter_mixed_fixture(self):
        sets = [
            CandidateSet(f"q{i}", "w", [f"c{j}" for j in range(count)], [])
            for i, count in enumerate([1, 2, 0, 3, 1, 2, 1, 5, 0, 1])
        ]
        kept = filter_multi_answer(sets)
        assert len(kept) == 4
        assert [cs.question_id for cs in kept] == ["q1", "q3", "q5", "q7"]


class TestBuildEvalTuples:
    def test_smallest_admissible_case(self):
        cs = CandidateSet("q", "w", ["a", "b"], [])
        tuples = build_eval_tuples([cs])
        assert len(tuples) == 2
        assert all(t.label == 1 for t in tuples)

    def test_three_by_four_fixture(self):
        cs = CandidateSet("q", "w", ["a", "b", "c"], ["x", "y", "z", "v"])
        tuples = build_eval_tuples([cs])
        positives = [t for t in tuples if t.label == 1]
        negatives = [t for t in tuples if t.label == 0]
        assert len(positives) == 6
        assert len(negatives) == 12
        expected_pos, expected_neg = oracles.naive_pair_tuples(cs.correct, cs.incorrect)
        assert [(t.reference, t.candidate, t.label) for t in positives] == expected_pos
        assert [(t.reference, t.candidate, t.label) for t in negatives] == expected_neg

    def test_applies_filter_defensively(self):
        cs = CandidateSet("q", "w", ["only"], ["x"])
        assert build_eval_tuples([cs]) == []

    def test_no_positive_has_reference_equal_candidate(self):
        cs = CandidateSet("q", "w", ["a", "b", "c"], ["x"])
        for t in build_eval_tuples([cs]):
            if t.label == 1:
                assert t.reference != t.candidate

    def test_deterministic(self):
        sets = [CandidateSet("q", "w", ["a", "b", "c"], ["x", "y"])]
        assert build_eval_tuples(sets) == build_eval_tuples(sets)

    @given(st.integers(2, 6), st.integers(0, 6))
    def test_cardinality_law(self, n_correct, n_incorrect):
        correct = [f"c{i}" for i in range(n_correct)]
        incorrect = [f"w{i}" for i in range(n_incorrect)]
        tuples = build_eval_tuples([CandidateSet("q", "w", correct, incorrect)])
        positives = sum(1 for t in tuples if t.label == 1)
        negatives = sum(1 for t in tuples if t.label == 0)
        assert positives == n_correct * (n_correct - 1)
        assert negatives == n_correct * n_incorrect
        expected_pos, expected_neg = oracles.naive_pair_tuples(correct, incorrect)
        assert positives == len(expected_pos)
        assert negatives == len(expected_neg)


class TestDatasetStats:
    def test_empty(self):
        stats = dataset_stats([], [])
        assert vars(stats) == {
            "num_questions": 0,
            "num_correct_answers": 0,
            "num_wrong_answers": 0,
            "num_positive_tuples": 0,
            "num_negative_tuples": 0,
        }

    def test_fixture_counts(self):
        sets = [CandidateSet("q", "w", ["a", "b", "c"], ["x", "y", "z", "v"])]
        stats = dataset_stats(sets, build_eval_tuples(sets))
        assert stats.num_questions == 1
        assert stats.num_correct_answers == 3
        assert stats.num_wrong_answers == 4
        assert stats.num_positive_tuples == 6
        assert stats.num_negative_tuples == 12


class TestRecordIO:
    def test_eval_tuple_roundtrip(self, tmp_path):
        tuples = [
            EvalTuple("q1", "who", "ref a", "cand a", 1, short_answer="ref"),
            EvalTuple("q1", "who", "ref a", "cand b", 0),
            EvalTuple("q2", "what", "ref c", "cand c", 1),
        ]
        path = tmp_path / "tuples.jsonl"
        write_records(path, tuples)
        assert read_records(path, "eval-tuple") == tuples

    def test_mr_document_roundtrip(self, tmp_path):
        docs = [doc(["s one", "s two"], {1}, ["two"])]
        path = tmp_path / "docs.jsonl"
        write_records(path, docs)
        assert read_records(path, "mr-document") == docs

    def test_as2_roundtrip(self, tmp_path):
        records = [AS2Record("q", "w", "sent", As2Label.NEG_SHORT_ELSEWHERE)]
        path = tmp_path / "as2.jsonl"
        write_records(path, records)
        assert read_records(path, "as2") == records

    def test_missing_label_names_line_and_field(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = {"qid": "q", "question": "w", "reference": "r", "candidate": "c", "label": 1}
        bad = {k: v for k, v in good.items() if k != "label"}
        path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
        with pytest.raises(RecordFormatError) as excinfo:
            read_records(path, "eval-tuple")
        assert excinfo.value.line_no == 2
        assert excinfo.value.field == "label"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert read_records(path, "eval-tuple") == []

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(RecordFormatError, match="1"):
            read_records(path, "eval-tuple")

    def test_bad_label_value(self, tmp_path):
        path = tmp_path / "label.jsonl"
        path.write_text(
            json.dumps(
                {"qid": "q", "question": "w", "reference": "r", "candidate": "c", "label": 2}
            )
            + "\n"
        )
        with pytest.raises(RecordFormatError, match="label"):
            read_records(path, "eval-tuple")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="unknown format"):
            read_records(tmp_path / "x", "nope")

    def test_unknown_as2_label(self, tmp_path):
        path = tmp_path / "as2.jsonl"
        path.write_text(
            json.dumps({"qid": "q", "question": "w", "sentence": "s", "label": "BAD"}) + "\n"
        )
        with pytest.raises(RecordFormatError, match="unknown label"):
            read_records(path, "as2")


def test_pipeline_label_partition_and_counts():
    """Each sentence gets exactly one label and tuple counts follow the law."""
    from qaeval.synthetic import make_corpus

    docs = make_corpus(40, seed=5)
    records = derive_as2(docs)
    assert len(records) == sum(len(d.document_sentences) for d in docs)
    sets = filter_multi_answer(to_candidate_sets(records))
    tuples = build_eval_tuples(sets)
    stats = dataset_stats(sets, tuples)
    assert stats.num_positive_tuples == sum(
        len(cs.correct) * (len(cs.correct) - 1) for cs in sets
    )
    assert stats.num_negative_tuples == sum(
        len(cs.correct) * len(cs.incorrect) for cs in sets
    )
