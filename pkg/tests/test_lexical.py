import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qaeval.corpus import EvalTuple
from qaeval.lexical import (
    ALPHA_GRID,
    FeatureVector,
    LinearModel,
    featurize,
    fit_platt,
    predict_linear,
    sim_text,
    sim_token,
    tokenize,
    train_linear,
)
from qaeval.metrics import precision_recall_f1
from qaeval.synthetic import make_separable_tuples

ascii_text = st.text(
    alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=40
)


class TestTokenize:
    def test_empty(self):
        assert tokenize("") == []

    def test_name_with_initial(self):
        assert tokenize("George W. Bush") == ["george", "w", "bush"]

    def test_numbers_and_punctuation(self):
        assert tokenize("39 million people!") == ["39", "million", "people"]

    @given(ascii_text)
    def test_matches_character_walk_oracle(self, text):
        assert tokenize(text) == oracles.naive_tokenize(text)


class TestSimText:
    def test_identical(self):
        assert sim_text("same text here", "same text here") == 1.0

    def test_disjoint(self):
        assert sim_text("alpha beta", "gamma delta") == 0.0

    def test_fixture(self):
        assert sim_text("a b c", "b c d") == pytest.approx(2 / 3)

    def test_both_empty(self):
        assert sim_text("", "") == 0.0

    @given(ascii_text, ascii_text)
    def test_symmetry_range_and_oracle(self, a, b):
        value = sim_text(a, b)
        assert value == sim_text(b, a)
        assert 0.0 <= value <= 1.0
        assert value == pytest.approx(oracles.naive_sim_text(a, b))

    @given(ascii_text, ascii_text)
    def test_one_implies_equal_token_sets(self, a, b):
        if sim_text(a, b) == 1.0:
            assert set(tokenize(a)) == set(tokenize(b)) != set()


class TestSimToken:
    def test_contained(self):
        assert sim_token("39 million", "roughly 39 million people live there") == 1

    def test_absent_short_answer(self):
        assert sim_token(None, "anything") == 0

    def test_longer_name_not_contained(self):
        assert sim_token("george h w bush", "the george w bush presidency") == 0

    def test_whitespace_normalized(self):
        assert sim_token("  39   MILLION ", "about 39 million") == 1


class TestFeaturize:
    def test_all_equal(self):
        fv = featurize("same", "same", "same", "same")
        assert (fv.x1, fv.x2, fv.x3, fv.x4) == (1, 1.0, 1.0, 1.0)

    def test_all_disjoint_no_short(self):
        fv = featurize("one", "two", None, "three")
        assert (fv.x1, fv.x2, fv.x3, fv.x4) == (0, 0.0, 0.0, 0.0)

    def test_as_array(self):
        fv = FeatureVector(1, 0.5, 0.25, 0.125)
        assert fv.as_array().tolist() == [1.0, 0.5, 0.25, 0.125]


class TestPlatt:
    def test_recovers_monotone_map(self):
        rng = np.random.default_rng(0)
        scores = rng.normal(size=400)
        labels = (scores + rng.normal(scale=0.5, size=400) > 0).astype(int)
        a, b = fit_platt(scores, labels)
        assert a > 0
        probs = 1 / (1 + np.exp(-(a * np.sort(scores) + b)))
        assert np.all(np.diff(probs) >= 0)


@pytest.fixture(scope="module")
def model_and_data():
    train_tuples, dev_tuples = make_separable_tuples(120, seed=0)
    model = train_linear(train_tuples, dev_tuples, seed=0)
    return model, train_tuples, dev_tuples


class TestTrainLinear:
    def test_separable_dev_f1(self, model_and_data):
        model, _, dev_tuples = model_and_data
        decisions = [
            model.predict(t.question, t.reference, t.short_answer, t.candidate)[1]
            for t in dev_tuples
        ]
        _, _, f1 = precision_recall_f1(decisions, [t.label for t in dev_tuples])
        assert f1 >= 0.95

    def test_overlap_weight_positive(self, model_and_data):
        model, _, _ = model_and_data
        assert model.weights[1] > 0

    def test_training_point_predicted_positive(self, model_and_data):
        model, train_tuples, _ = model_and_data
        strong = next(t for t in train_tuples if t.label == 1)
        _, decision = model.predict(
            strong.question, strong.reference, strong.short_answer, strong.candidate
        )
        assert decision == 1

    def test_calibration_monotone(self, model_and_data):
        model, _, _ = model_and_data
        raws = np.linspace(-4, 4, 33)
        probs = [model.calibrate(r) for r in raws]
        assert all(p1 <= p2 for p1, p2 in zip(probs, probs[1:]))

    def test_single_class_rejected(self):
        tuples = [EvalTuple("q", "w", "r", f"c{i}", 1) for i in range(10)]
        with pytest.raises(ValueError, match="both classes"):
            train_linear(tuples, tuples)

    def test_degenerate_features_rejected(self):
        tuples = [EvalTuple("q", "w", "ref", "ref", i % 2) for i in range(10)]
        with pytest.raises(ValueError, match="degenerate"):
            train_linear(tuples, tuples)

    def test_empty_dev_rejected(self):
        tuples = [EvalTuple("q", "w", "r", f"c{i}", i % 2) for i in range(10)]
        with pytest.raises(ValueError, match="dev"):
            train_linear(tuples, [])

    def test_save_load_roundtrip(self, model_and_data, tmp_path):
        model, _, dev_tuples = model_and_data
        path = tmp_path / "model.txt"
        model.save(path)
        loaded = LinearModel.load(path)
        t = dev_tuples[0]
        assert loaded.predict(t.question, t.reference, t.short_answer, t.candidate) == (
            model.predict(t.question, t.reference, t.short_answer, t.candidate)
        )
        assert np.array_equal(loaded.weights, model.weights)

    def test_load_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("format=something-else\n")
        with pytest.raises(ValueError, match="not a linear judge"):
            LinearModel.load(path)


class TestPredictLinear:
    def constant_model(self, alpha):
        # calibration_a = 0 makes every probability exactly sigmoid(b)
        return LinearModel(
            weights=np.zeros(4), bias=0.0, calibration_a=0.0, calibration_b=0.0, alpha=alpha
        )

    def test_score_exactly_alpha_decides_zero(self):
        model = self.constant_model(alpha=0.5)
        score, decision = model.predict("q", "r", None, "t")
        assert score == 0.5
        assert decision == 0

    def test_absent_short_answer_is_defined(self):
        model = self.constant_model(alpha=0.4)
        score, decision = predict_linear(model, "q", "r", None, "t")
        assert score == 0.5
        assert decision == 1

    @given(
        st.floats(0.01, 0.99),
        st.floats(0.01, 0.99),
        st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)),
    )
    def test_decision_monotone_in_alpha(self, alpha_low, alpha_high, weights):
        low, high = sorted((alpha_low, alpha_high))
        base = LinearModel(
            weights=np.array(weights), bias=0.1, calibration_a=1.0, calibration_b=0.0, alpha=low
        )
        stricter = LinearModel(
            weights=np.array(weights), bias=0.1, calibration_a=1.0, calibration_b=0.0, alpha=high
        )
        _, decision_low = base.predict("alpha beta", "beta gamma", "beta", "gamma delta")
        _, decision_high = stricter.predict("alpha beta", "beta gamma", "beta", "gamma delta")
        assert decision_high <= decision_low

    def test_alpha_grid_is_interior(self):
        assert ALPHA_GRID[0] == 0.01
        assert ALPHA_GRID[-1] == 0.99
