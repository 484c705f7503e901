import math

import numpy as np
import pytest
from scipy_free_binom import binom_cdf

from tvindist.boosting import (AmplifyPlan, BoostPlan, boost_rounds, BoostState, SmoothMeasure, amplify,
                               indist_test_measure, rejection_sampling, smooth_boost)
from tvindist.core import (Dataset, FiniteDistribution, Hypothesis, HypothesisClass, LearningRule,
                           population_loss)
from tvindist.coupling import uniform_reference
from tvindist.fixtures import make_weak_stump_learner, noisy_distribution, threshold_target
from tvindist.randomness import Tape
from tvindist.sampling import DistributionSampler


def test_amplify_constants():
    plan = AmplifyPlan(0.02, 0.1, 0.05)
    assert plan.eta == pytest.approx(0.19803, abs=1e-5)
    assert plan.beta_bound == pytest.approx(0.64315, abs=1e-5)
    assert plan.rounds == 7
    with pytest.raises(ValueError):
        AmplifyPlan(0.02, 0.7, 0.05)


def test_boost_rounds():
    assert boost_rounds(0.5, 0.5, 100) == 800
    assert BoostPlan(0.1, 0.25, 0.1, 0.1, 10, c_T=4).rounds == 640


def test_rejection_sampling_edges():
    S = Dataset(np.arange(10) % 4, np.zeros(10, dtype=int), 4)
    assert rejection_sampling(S, 5, SmoothMeasure.initial(4), Tape.root(0)) == S[:5]
    assert rejection_sampling(S, 1, SmoothMeasure(np.zeros((4, 2))), Tape.root(0)) is None


def test_rejection_sampling_half_measure_success_rate():
    # oracle: exhaustion means Binomial(1000, 1/2) < 100
    assert binom_cdf(99, 1000, 0.5) < 1e-100
    S = Dataset(np.zeros(1000, dtype=int), np.zeros(1000, dtype=int), 1)
    mu = SmoothMeasure(np.full((1, 2), 0.5))
    ok = sum(rejection_sampling(S, 100, mu, Tape.root(i)) is not None for i in range(500))
    assert ok / 500 >= 0.999


def test_rejection_acceptance_rate_tracks_measure():
    S = Dataset(np.zeros(20000, dtype=int), np.ones(20000, dtype=int), 1)
    mu = SmoothMeasure(np.array([[1.0, 0.3]]))
    out = rejection_sampling(S, 5000, mu, Tape.root(4))
    assert out is not None
    assert rejection_sampling(S, 7000, mu, Tape.root(4)) is None


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_indist_test_constant_measures(value, rng):
    D = FiniteDistribution([(0, 0), (1, 1)], [0.5, 0.5])
    mu = SmoothMeasure(np.full((2, 2), value))
    est = indist_test_measure(mu, DistributionSampler(D, rng), Tape.root(0), 0.5, 0.1, 0.3)
    assert abs(est - value) <= 0.1


def test_indist_test_half_mean():
    D = FiniteDistribution([(0, 0), (1, 1)], [0.5, 0.5])
    mu = SmoothMeasure(np.array([[1.0, 1.0], [0.0, 0.0]]))
    good = 0
    for i in range(300):
        est = indist_test_measure(mu, DistributionSampler(D, np.random.default_rng(i)), Tape.root(i),
                                  0.5, 0.1, 0.3)
        good += abs(est - 0.5) <= 0.1
    assert good / 300 >= 0.9


def test_indist_test_on_dataset_needs_enough_examples():
    mu = SmoothMeasure.initial(2)
    with pytest.raises(ValueError):
        indist_test_measure(mu, Dataset([0], [0], 2), Tape.root(0), 0.5, 0.1, 0.3)


def test_measure_range_and_majority_ties():
    state = BoostState(4)
    assert np.all(state.measure(0.25).values == 1.0)
    state.add(Hypothesis.from_bits("0011"))
    state.add(Hypothesis.from_bits("0101"))
    assert state.majority().bits == "0111"
    mu = state.measure(0.25)
    assert np.all((mu.values >= 0) & (mu.values <= 1))
    # point 3 is voted 1 twice: margin 2 - 2 theta for label 1
    theta = 0.25 / 2.25
    assert mu.values[3, 1] == pytest.approx(0.75 ** ((2 - 2 * theta) / 2))
    assert mu.values[3, 0] == 1.0


def test_smooth_measure_validation():
    with pytest.raises(ValueError):
        SmoothMeasure(np.full((2, 2), 1.5))


def test_smooth_boost_learns_threshold():
    d = 32
    rule = make_weak_stump_learner(0.25, d, 16)
    ref = uniform_reference(rule.reachable_set)
    target = threshold_target(d, 11)
    D = noisy_distribution(target)
    log = []
    h, state = smooth_boost(rule, D, 0.1, 0.5, 0.1, 0.25, ref, Tape.root(3), np.random.default_rng(3),
                            c_T=4, log=log.append)
    assert population_loss(h, D) <= 0.1
    assert len(log) == state.round
    assert log[-1]["measure_mean_estimate"] <= 0.2 / 3 + 1e-12
    assert all(set(r) == {"round", "measure_mean_estimate", "majority_error"} for r in log)


def test_amplify_deterministic_accurate_rule():
    target = Hypothesis.from_bits("0011")
    H = HypothesisClass(4, sorted([target, target.complement()]))
    rule = LearningRule(lambda S: FiniteDistribution.point_mass(target), H, 2)
    D = noisy_distribution(target)
    ref = uniform_reference(H)
    for i in range(20):
        h = amplify(rule, D, 0.0, 0.0, 0.0, 0.1, 0.1, 0.1, ref, Tape.root(i), np.random.default_rng(i))
        assert h == target


def test_amplify_fallback_fires_for_bad_rule():
    target = Hypothesis.from_bits("0011")
    bad = Hypothesis.from_bits("0110")
    H = HypothesisClass(4, sorted([target, bad]))
    rule = LearningRule(lambda S: FiniteDistribution.point_mass(bad), H, 2)
    D = noisy_distribution(target)
    trace = []
    h = amplify(rule, D, 0.0, 0.0, 0.9, 0.1, 0.1, 0.1, uniform_reference(H), Tape.root(0),
                np.random.default_rng(0), trace)
    assert h == Hypothesis.constant(4, 1)
    assert len(trace) == AmplifyPlan(0.0, 0.9, 0.1).rounds
