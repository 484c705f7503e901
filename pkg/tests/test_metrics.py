import csv
import io
import itertools
import json
import math

import numpy as np
import pytest

from tvindist.core import Dataset, FiniteDistribution, Hypothesis, HypothesisClass, LearningRule, tv_distance
from tvindist.coupling import uniform_reference
from tvindist.fixtures import (FixtureSpec, fixture_distribution, make_globally_stable_fixture,
                               make_noisy_constant_rule, make_uncoupled_uniform_rule, noisy_distribution)
from tvindist.metrics import (audit, expected_tv_indistinguishability, fixed_prior_from_certificate,
                              fixed_prior_tv, generalization_bound, generalization_gap_check,
                              global_stability_parameter, high_probability_certificate,
                              replicability_rate, rows_to_csv)
from tvindist.randomness import Tape
from tvindist.transforms import SeededRule, derandomize


def two_point_rule(scale=0.3, n=1):
    spec = FixtureSpec("noisy-constant", 2, n, Hypothesis.from_bits("01"), {"scale": scale})
    return make_noisy_constant_rule(spec), noisy_distribution(spec.target_hypothesis, 0.5)


def deterministic_seeded(h, d):
    H = HypothesisClass(d, [h])
    base = LearningRule(lambda S: FiniteDistribution.point_mass(h), H, 1)
    return SeededRule(base, None, lambda S, t: h)


def test_deterministic_rule_replicates():
    h = Hypothesis.from_bits("01")
    r = replicability_rate(deterministic_seeded(h, 2), noisy_distribution(h), 1, 100, Tape.root(0))
    assert r.estimate == 1.0 and r.ci == 0.0


def test_uncoupled_rule_replicates_half_the_time():
    spec = FixtureSpec("uncoupled-uniform", 3, 4, Hypothesis.from_bits("011"))
    A = make_uncoupled_uniform_rule(spec)
    r = replicability_rate(A, fixture_distribution(spec), 4, 2000, Tape.root(3))
    assert abs(r.estimate - 0.5) <= r.ci


def test_expected_tv_hand_enumeration():
    # labels differ with probability 1/2 and then the posteriors are 0.3 apart
    rule, D = two_point_rule(0.3)
    est = expected_tv_indistinguishability(rule, D, 1, 100)
    assert est.exact and est.estimate == pytest.approx(0.15)


def test_deterministic_non_constant_rule_matches_enumeration():
    h0, h1 = Hypothesis.from_bits("00"), Hypothesis.from_bits("11")
    H = HypothesisClass(2, [h0, h1])
    rule = LearningRule(lambda S: FiniteDistribution.point_mass(h1 if S.labels.sum() >= 2 else h0), H, 3)
    D = FiniteDistribution([(0, 0), (1, 1)], [0.6, 0.4])
    p = 3 * 0.4 ** 2 * 0.6 + 0.4 ** 3
    assert expected_tv_indistinguishability(rule, D, 3, 100).estimate == pytest.approx(2 * p * (1 - p))


def test_exact_and_monte_carlo_agree():
    rule, D = two_point_rule(0.8, n=3)
    exact = expected_tv_indistinguishability(rule, D, 3, 100, mode="exact")
    mc = expected_tv_indistinguishability(rule, D, 3, 3000, Tape.root(1), mode="mc")
    assert abs(exact.estimate - mc.estimate) <= mc.ci
    _, fp_exact = fixed_prior_tv(rule, D, 3, 100, mode="exact")
    _, fp_mc = fixed_prior_tv(rule, D, 3, 3000, Tape.root(2), mode="mc")
    assert abs(fp_exact.estimate - fp_mc.estimate) <= fp_mc.ci + 0.01


@pytest.mark.parametrize("scale", [0.0, 0.1, 0.5, 1.0])
def test_fixed_prior_sandwich_exact(scale):
    rule, D = two_point_rule(scale, n=3)
    tv = expected_tv_indistinguishability(rule, D, 3, 100).estimate
    prior, fp = fixed_prior_tv(rule, D, 3, 100)
    assert fp.estimate <= tv + 1e-15
    assert tv <= 2 * fp.estimate + 1e-15
    if scale == 0.0:
        assert fp.estimate == 0.0 and prior == rule.posterior(Dataset([], [], 2))


def test_certificate_conversion():
    rule, D = two_point_rule(0.9, n=3)
    prior, fp = fixed_prior_tv(rule, D, 3, 100)
    for eta in (0.0, 0.1, 0.2, 0.4):
        nu = high_probability_certificate(rule, D, 3, eta, prior)
        assert fp.estimate <= fixed_prior_from_certificate(eta, nu) + 1e-12
    assert fixed_prior_from_certificate(0.1, 0.2) == pytest.approx(0.28)


def test_global_stability_of_fixture():
    spec = FixtureSpec("globally-stable", 4, 1, Hypothesis.from_bits("0011"), {"eta": 0.4, "decoys": 3})
    gs = global_stability_parameter(make_globally_stable_fixture(spec), fixture_distribution(spec), 1,
                                    3000, Tape.root(5))
    assert gs.hypothesis == spec.target
    assert abs(gs.frequency.estimate - 0.4) <= gs.frequency.ci
    assert gs.holds


def test_global_stability_deterministic_and_uniform():
    h = Hypothesis.from_bits("01")
    gs = global_stability_parameter(deterministic_seeded(h, 2), noisy_distribution(h), 1, 100, Tape.root(0))
    assert gs.hypothesis == h and gs.frequency.estimate == 1.0
    spec = FixtureSpec("uncoupled-uniform", 2, 1, h)
    gs = global_stability_parameter(make_uncoupled_uniform_rule(spec), fixture_distribution(spec), 1,
                                    2000, Tape.root(1))
    assert abs(gs.frequency.estimate - 0.5) <= gs.frequency.ci + 0.01


def test_generalization_bound_arithmetic():
    assert generalization_bound(200, 0.05, 0.0025) == pytest.approx(math.sqrt(math.log(40) / 400) + 0.05)
    assert math.sqrt(math.log(40) / 400) == pytest.approx(0.09604, abs=1e-5)


def test_generalization_sample_independent():
    rule, D = two_point_rule(0.0)
    check = generalization_gap_check(rule, D, 400, 0.05, 0.0, 300, Tape.root(2))
    assert check.passed and check.exceedance.estimate <= 0.05 + check.exceedance.ci


def test_cross_definition_ordering_on_fixtures():
    for scale in (0.1, 0.4, 0.9):
        rule, D = two_point_rule(scale, n=2)
        A = derandomize(rule, uniform_reference(rule.reachable_set))
        r = replicability_rate(A, D, 2, 1500, Tape.root(int(scale * 10)))
        tv = expected_tv_indistinguishability(rule, D, 2, 100).estimate
        assert tv <= 1 - r.estimate + r.ci


def test_report_serialization():
    rule, D = two_point_rule(0.3, n=2)
    A = derandomize(rule, uniform_reference(rule.reachable_set))
    rep = audit(A, D, 2, 200, Tape.root(0), alpha=0.0, seed="00")
    obj = json.loads(rep.dumps())
    assert obj["trials"] == 200 and 0 <= obj["replicability_rate"]["estimate"] <= 1
    rows = list(csv.reader(io.StringIO(rows_to_csv(rep.csv_rows()))))
    assert rows[0] == ["quantity", "estimate", "ci", "bound", "pass"]
    assert len(rows) == 6
    assert rep.dumps() == audit(A, D, 2, 200, Tape.root(0), alpha=0.0, seed="00").dumps()


def test_trials_minimum():
    h = Hypothesis.from_bits("01")
    with pytest.raises(ValueError):
        replicability_rate(deterministic_seeded(h, 2), noisy_distribution(h), 1, 10, Tape.root(0))
