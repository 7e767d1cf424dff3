import numpy as np
import pytest

from mcmi import (MaximumLikelihood, MlModel, StepRecord, ValidationError, exact_value, ml_update,
                  ml_value, random_mrp, rel_residual_error, sample_stream)
from mcmi.rng import RngStream


def test_single_increment():
    m = ml_update(MlModel(2), StepRecord(0, 2.0, 1, 0, False))
    assert m.state_counts.tolist() == [1, 0]
    assert m.reward_sums.tolist() == [2.0, 0.0]
    assert m.transition_counts[0, 1] == 1


def test_p_hat_ratio_and_undefined_rows():
    m = MlModel(3)
    for nxt in (1, 1, 1, 0):
        m.update((0, 0.0, nxt))
    P = m.p_hat()
    assert P[0, 1] == 0.75
    assert np.isnan(P[2]).all()


def test_two_cycle_exact():
    recs = [StepRecord(0, 1.0, 1, 0, False), StepRecord(1, 0.0, 0, 0, False)]
    v = ml_value(MlModel(2).update_many(recs), 0.5)
    np.testing.assert_allclose(v.values, [4 / 3, 2 / 3], atol=1e-15)


def test_single_state_three_rewards():
    m = MlModel(1)
    for k in range(3):
        m.update((0, 1.0, 0))
    assert ml_value(m, 0.8).values[0] == pytest.approx(5.0, abs=1e-12)


def test_unvisited_is_zero_and_masked():
    m = MlModel(3).update_many([StepRecord(0, 1.0, 1, 0, True), StepRecord(1, 1.0, 0, 1, False)])
    v = ml_value(m, 0.5)
    assert v.values[2] == 0 and v.visited_mask.tolist() == [True, True, False]


def test_empty_model():
    with pytest.raises(ValidationError):
        ml_value(MlModel(2), 0.5)


def test_counts_consistent_and_rows_stochastic():
    mrp = random_mrp(15, seed=RngStream(3))
    s = sample_stream(mrp, "single_random_walk", 3000, RngStream(3))
    m = MlModel(15).update_many(s)
    assert np.array_equal(m.transition_counts.sum(axis=1), m.state_counts)
    P = m.p_hat()[m.visited]
    assert np.all(np.abs(P.sum(axis=1) - 1) <= 1e-15)
    one_by_one = MlModel(15)
    for rec in s:
        one_by_one.update(rec)
    assert np.array_equal(one_by_one.transition_counts, m.transition_counts)
    np.testing.assert_array_equal(one_by_one.reward_sums, m.reward_sums)


def test_update_out_of_range():
    with pytest.raises(IndexError):
        MlModel(2).update((0, 0.0, 2))


def test_ml_consistency_small():
    mrp = random_mrp(10, seed=RngStream(0))
    truth = exact_value(mrp)
    errs = [rel_residual_error(ml_value(MlModel(10).update_many(
        sample_stream(mrp, "single_random_walk", T, RngStream(1))), 0.8), truth) for T in (1000, 100000)]
    assert errs[1] < errs[0]


def test_estimator_fit_and_partial_fit(two_cycle):
    s = sample_stream(two_cycle, "single_random_walk", 100, RngStream(0))
    full = MaximumLikelihood(gamma=0.5).fit(s)
    np.testing.assert_allclose(full.predict([0, 1]), [4 / 3, 2 / 3], atol=1e-12)
    inc = MaximumLikelihood(gamma=0.5, n_states=2)
    inc.partial_fit([s[k] for k in range(50)])
    inc.partial_fit([s[k] for k in range(50, 100)])
    np.testing.assert_array_equal(inc.model_.transition_counts, full.model_.transition_counts)
