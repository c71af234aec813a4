import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from conftest import random_model
from distlearn.core import (AgentSpec, BeliefState, DegeneratePosteriorError, HypothesisSet, LikelihoodModel,
                            SignalAlphabet, normalize_log, uniform_prior, validate_model)


class TestUniformPrior:
    def test_four(self):
        np.testing.assert_allclose(uniform_prior(4).probabilities, [0.25] * 4, rtol=0, atol=1e-15)

    def test_single_hypothesis(self):
        assert uniform_prior(1).probabilities.tolist() == [1.0]

    def test_three_sums_to_one(self):
        p = uniform_prior(3).probabilities
        np.testing.assert_allclose(p, 1 / 3, rtol=0, atol=1e-15)
        assert abs(p.sum() - 1.0) < 1e-15

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            uniform_prior(0)


class TestValidateModel:
    def test_uniform_model_is_clean(self):
        S = 4
        model = LikelihoodModel(np.full((3, S), 1 / S), np.full(S, 1 / S), 1 / S)
        assert validate_model(model) == []

    def test_short_row_is_named(self):
        model = LikelihoodModel([[0.5, 0.5], [0.6, 0.3]], [0.5, 0.5], 0.3)
        problems = validate_model(model)
        assert any("row 1" in p and "not 1" in p for p in problems)
        assert not any("row 0" in p for p in problems)

    def test_support_violation(self):
        model = LikelihoodModel([[0.5, 0.5], [1.0, 0.0]], [0.5, 0.5], 0.5)
        problems = validate_model(model)
        assert any("support" in p for p in problems)

    def test_zero_likelihood_outside_support_is_allowed(self):
        # f puts no mass on signal 1, so a zero there is acceptable
        model = LikelihoodModel.with_realized_floor([[0.5, 0.5], [1.0, 0.0]], [1.0, 0.0])
        assert validate_model(model) == []
        assert model.support_floor == 0.5

    def test_nonpositive_alpha(self):
        model = LikelihoodModel([[0.5, 0.5]], [0.5, 0.5], 0.0)
        assert any("alpha" in p for p in validate_model(model))

    def test_entries_out_of_range(self):
        model = LikelihoodModel([[1.5, -0.5]], [0.5, 0.5], 0.1)
        assert any("outside [0, 1]" in p for p in validate_model(model))

    def test_declared_alpha_above_realized_minimum(self):
        model = LikelihoodModel([[0.5, 0.5], [0.9, 0.1]], [0.5, 0.5], 0.2)
        assert any("< alpha" in p for p in validate_model(model))

    def test_realized_floor_never_exceeds_support_minimum(self, rng):
        for _ in range(50):
            model = random_model(rng, 3, 5)
            assert model.support_floor == pytest.approx(model.table.min())
            assert validate_model(model) == []


class TestBeliefState:
    def test_from_probabilities_keeps_exact_zero(self):
        b = BeliefState.from_probabilities([0.0, 0.25, 0.75])
        assert b.log_belief[0] == -np.inf
        np.testing.assert_allclose(b.probabilities, [0, 0.25, 0.75], atol=1e-15)

    def test_rejects_all_zero(self):
        with pytest.raises(ValueError):
            BeliefState(np.array([-np.inf, -np.inf]))

    def test_rejects_nan_and_posinf(self):
        with pytest.raises(ValueError):
            BeliefState(np.array([0.0, np.nan]))
        with pytest.raises(ValueError):
            BeliefState(np.array([0.0, np.inf]))

    def test_immutable(self):
        b = uniform_prior(3)
        with pytest.raises(ValueError):
            b.log_belief[0] = 0.0

    def test_from_log_all_neg_inf_is_degenerate(self):
        with pytest.raises(DegeneratePosteriorError):
            BeliefState.from_log([-np.inf, -np.inf])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-700, 700), min_size=1, max_size=12))
def test_normalize_round_trip(values):
    out = normalize_log(np.array(values))
    p = np.exp(out)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert (p >= 0).all()
    # same result as an independent log-sum-exp
    np.testing.assert_allclose(out, np.array(values) - logsumexp(values), rtol=0, atol=1e-9)


def test_normalize_preserves_neg_inf():
    out = normalize_log(np.array([-np.inf, 0.0, math.log(3.0)]))
    assert out[0] == -np.inf
    np.testing.assert_allclose(np.exp(out[1:]), [0.25, 0.75], atol=1e-15)


def test_normalize_rows_independent():
    lv = np.log(np.array([[1.0, 3.0], [2.0, 2.0]]))
    np.testing.assert_allclose(np.exp(normalize_log(lv)), [[0.25, 0.75], [0.5, 0.5]], atol=1e-15)


def test_hypothesis_and_alphabet_uniqueness():
    with pytest.raises(ValueError):
        HypothesisSet(("a", "a"))
    with pytest.raises(ValueError):
        HypothesisSet(())
    with pytest.raises(ValueError):
        SignalAlphabet((1, 1))
    with pytest.raises(ValueError):
        SignalAlphabet(())
    assert len(HypothesisSet.numbered(3)) == 3
    assert SignalAlphabet(("lo", "hi")).index("hi") == 1


def test_agent_spec_validation():
    model = LikelihoodModel.with_realized_floor([[0.5, 0.5], [0.2, 0.8]], [0.5, 0.5])
    spec = AgentSpec(model)
    np.testing.assert_allclose(spec.prior.probabilities, [0.5, 0.5])
    with pytest.raises(ValueError):
        AgentSpec(model, observation_rate=1.5)
    with pytest.raises(ValueError):
        AgentSpec(model, prior=uniform_prior(3))


def test_model_shape_checks():
    with pytest.raises(ValueError):
        LikelihoodModel([0.5, 0.5], [0.5, 0.5], 0.5)
    with pytest.raises(ValueError):
        LikelihoodModel([[0.5, 0.5]], [1.0], 0.5)
    with pytest.raises(ValueError):
        LikelihoodModel([[0.5, 0.5]], [0.5, 0.5], 0.5, SignalAlphabet(("a", "b", "c")))
