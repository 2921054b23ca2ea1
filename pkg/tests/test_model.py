import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cfjoint import Condition, Hyperparams, JointLinearModel, LossSpec, Loss, Penalty, TrialDataset

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vec(d):
    return arrays(np.float64, d, elements=finite)


class TestPredictions:
    def test_zero_model_predicts_zero(self):
        m = JointLinearModel(w_t=[0.0, 0.0])
        assert m.predict_treatment([3.0, -1.0]) == 0.0

    def test_treatment_inner_product(self):
        assert JointLinearModel(w_t=[1, 2]).predict_treatment([3, 4]) == 11.0

    def test_unit_basis_projects(self):
        assert JointLinearModel(w_t=[1, 0]).predict_treatment([5, 7]) == 5.0

    def test_control_adds_delta(self):
        m = JointLinearModel(w_t=[1, 0], w_delta=[0, 1])
        assert m.predict_control([2, 3]) == 5.0
        assert m.predict_control([0, 0]) == 0.0

    def test_effect_negates_delta(self):
        m = JointLinearModel(w_t=[0, 0], w_delta=[1, 1])
        assert m.predict_effect([1, 1]) == -2.0

    def test_effect_doubles_with_input(self):
        m = JointLinearModel(w_t=[0.3, -1], w_delta=[0.5, 2])
        x = np.array([1.5, -0.25])
        assert m.predict_effect(2 * x) == pytest.approx(2 * m.predict_effect(x), rel=1e-15)

    def test_zero_delta_means_no_effect(self):
        m = JointLinearModel(w_t=[4.0, -2.0])
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(m.predict_control(x), m.predict_treatment(x))
        np.testing.assert_array_equal(m.predict_effect(x), 0.0)

    def test_w_c_is_sum(self):
        m = JointLinearModel(w_t=[1.0, 2.0], w_delta=[0.5, -4.0])
        np.testing.assert_array_equal(m.w_c, [1.5, -2.0])

    def test_dimension_mismatch(self):
        m = JointLinearModel(w_t=[1.0, 2.0])
        for op in (m.predict_treatment, m.predict_control, m.predict_effect, m.classify):
            with pytest.raises(ValueError, match="expected 2 features"):
                op([1.0, 2.0, 3.0])

    def test_weights_are_read_only(self):
        m = JointLinearModel(w_t=[1.0, 2.0])
        with pytest.raises(ValueError):
            m.w_t[0] = 5.0

    def test_rejects_non_finite_and_length_mismatch(self):
        with pytest.raises(ValueError):
            JointLinearModel(w_t=[np.nan, 1.0])
        with pytest.raises(ValueError, match="differ"):
            JointLinearModel(w_t=[1.0, 2.0], w_delta=[1.0])


class TestClassify:
    @pytest.mark.parametrize("score,label", [(3.2, 1.0), (-0.1, -1.0), (0.0, 1.0)])
    def test_sign_with_tie_to_positive(self, score, label):
        m = JointLinearModel(w_t=[score])
        assert m.classify([1.0]) == label

    def test_control_condition_and_threshold(self):
        m = JointLinearModel(w_t=[1.0], w_delta=[-2.0])
        assert m.classify([1.0], Condition.CONTROL) == -1.0
        assert m.classify([1.0], "treatment", threshold=1.0) == 1.0
        assert m.classify([1.0], threshold=1.5) == -1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(lambda d: st.tuples(vec(d), vec(d), vec(d))))
def test_effect_is_treatment_minus_control_exactly(args):
    w_t, w_d, x = args
    m = JointLinearModel(w_t=w_t, w_delta=w_d)
    assert m.predict_effect(x) == m.predict_treatment(x) - m.predict_control(x)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(lambda d: st.tuples(vec(d), vec(d), vec(d), vec(d))),
       finite, finite)
def test_predictions_are_linear(args, a, b):
    w_t, w_d, x, x2 = args
    m = JointLinearModel(w_t=w_t, w_delta=w_d)
    for op in (m.predict_treatment, m.predict_control, m.predict_effect):
        lhs = op(a * x + b * x2)
        rhs = a * op(x) + b * op(x2)
        # the tolerance scales with the magnitudes that were summed
        scale = np.abs(w_t).sum() + np.abs(w_d).sum()
        bound = 1e-12 * max(1.0, scale * (abs(a) * np.abs(x).max() + abs(b) * np.abs(x2).max()))
        assert abs(lhs - rhs) <= bound * 10


class TestHyperparams:
    def test_c3_and_dict_round_trip(self):
        hp = Hyperparams(gamma=0.25, lam=4.0, eta=1.0)
        assert hp.c3 == 2.0
        assert Hyperparams.from_dict(hp.as_dict()) == hp
        assert hp.as_dict() == {"gamma": 0.25, "lambda": 4.0, "eta": 1.0}

    @pytest.mark.parametrize("kw", [dict(gamma=-0.1), dict(gamma=1.5), dict(lam=0.0),
                                    dict(eta=-1.0), dict(lam=float("inf")),
                                    dict(gamma=float("nan"))])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            Hyperparams(**kw)

    def test_boundaries_allowed(self):
        Hyperparams(gamma=0.0)
        Hyperparams(gamma=1.0)


class TestLossSpec:
    def test_string_coercion_is_case_insensitive(self):
        spec = LossSpec("Logistic", "sqL2", "L1")
        assert spec.loss is Loss.LOGISTIC
        assert spec.q_reg is Penalty.SQL2 and spec.r_reg is Penalty.L1
        assert not spec.is_smooth
        assert LossSpec().is_smooth

    def test_unknown_value(self):
        with pytest.raises(ValueError):
            LossSpec("hinge")


class TestTrialDataset:
    def test_sizes(self):
        data = TrialDataset(np.ones((5, 3)), np.zeros(5), np.ones((2, 3)), np.zeros(2))
        assert (data.dimension, data.n_control, data.n_treatment) == (3, 5, 2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            TrialDataset(np.ones((5, 3)), np.zeros(5), np.ones((2, 4)), np.zeros(2))

    def test_label_count_mismatch(self):
        with pytest.raises(ValueError):
            TrialDataset(np.ones((5, 3)), np.zeros(4), np.ones((2, 3)), np.zeros(2))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            TrialDataset(np.ones((2, 1)), np.array([1.0, np.nan]), np.ones((1, 1)), np.zeros(1))
