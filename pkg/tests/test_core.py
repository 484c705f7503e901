import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import distribution_pairs, mass_vectors
from tvindist.core import (Dataset, FiniteDistribution, Hypothesis, HypothesisClass, LearningRule,
                           dump_json, empirical_loss, enumerate_datasets, population_loss,
                           posterior_mixture, realizable_distribution, sample_dataset, tv_distance)


def max_event_gap(P, Q):
    """Oracle: TV as the largest |P(E) - Q(E)| over all events."""
    support = sorted(set(P.support) | set(Q.support))
    best = 0.0
    for r in range(len(support) + 1):
        for E in itertools.combinations(support, r):
            best = max(best, abs(sum(P.prob(s) for s in E) - sum(Q.prob(s) for s in E)))
    return best


@given(distribution_pairs())
@settings(max_examples=200, deadline=None)
def test_tv_matches_event_oracle(pair):
    P, Q = pair
    assert tv_distance(P, Q) == pytest.approx(max_event_gap(P, Q), abs=1e-12)


@given(distribution_pairs())
def test_tv_metric_basics(pair):
    P, Q = pair
    d = tv_distance(P, Q)
    assert 0.0 <= d <= 1.0
    assert d == tv_distance(Q, P)
    assert tv_distance(P, P) == 0.0


@given(st.data())
def test_tv_triangle(data):
    k = data.draw(st.integers(1, 5))
    P, Q, R = (FiniteDistribution(list(range(k)), data.draw(mass_vectors(k))) for _ in range(3))
    assert tv_distance(P, R) <= tv_distance(P, Q) + tv_distance(Q, R) + 1e-12


def test_tv_on_disjoint_supports():
    assert tv_distance(FiniteDistribution.point_mass(0), FiniteDistribution.point_mass(1)) == 1.0
    P = FiniteDistribution([0, 1, 2], [0.5, 0.3, 0.2])
    Q = FiniteDistribution([0, 1, 2], [0.3, 0.3, 0.4])
    assert tv_distance(P, Q) == pytest.approx(0.2)


def test_mixed_item_kinds_rejected():
    with pytest.raises(TypeError):
        tv_distance(FiniteDistribution.point_mass(1), FiniteDistribution.point_mass("1"))


def test_distribution_validation():
    with pytest.raises(ValueError):
        FiniteDistribution([0, 1], [0.5, 0.6])
    with pytest.raises(ValueError):
        FiniteDistribution([0, 1], [-0.1, 1.1])
    with pytest.raises(ValueError):
        FiniteDistribution([0, 0], [0.5, 0.5])


def test_distribution_is_immutable():
    P = FiniteDistribution([0, 1], [0.5, 0.5])
    with pytest.raises(ValueError):
        P.mass[0] = 1.0


@given(distribution_pairs(), st.floats(0, 1))
def test_mixture_is_pointwise(pair, w):
    P, Q = pair
    M = posterior_mixture([P, Q], [w, 1 - w])
    for s in M.support:
        assert M.prob(s) == pytest.approx(w * P.prob(s) + (1 - w) * Q.prob(s), abs=1e-9)
    assert M.mass.sum() == pytest.approx(1.0)


def test_json_round_trip():
    h = Hypothesis.from_bits("0110")
    P = FiniteDistribution([h, h.complement()], [0.25, 0.75])
    text = dump_json(P.to_json())
    assert FiniteDistribution.from_json(json.loads(text)) == P
    S = Dataset.from_pairs([(0, 1), (3, 0)], 4)
    assert Dataset.from_json(S.to_json(), 4) == S


def test_hypothesis_basics():
    h = Hypothesis.from_bits("0011")
    assert h(2) == 1 and h(0) == 0
    assert h.complement().bits == "1100"
    assert Hypothesis.constant(3, 1).bits == "111"
    with pytest.raises(ValueError):
        Hypothesis((0, 2))


def test_dataset_operations():
    S = Dataset.from_pairs([(0, 1), (1, 0), (2, 1)], 3)
    assert len(S) == 3
    assert list(S) == [(0, 1), (1, 0), (2, 1)]
    T = S.replace(1, (2, 1))
    assert list(T)[1] == (2, 1) and list(S)[1] == (1, 0)
    a, b = S.split([1, 2])
    assert len(a) == 1 and len(b) == 2
    with pytest.raises(ValueError):
        Dataset([5], [0], 3)


def test_losses():
    h = Hypothesis.from_bits("0101")
    D = realizable_distribution(h)
    assert population_loss(h, D) == 0.0
    assert population_loss(h.complement(), D) == 1.0
    S = Dataset.from_pairs([(0, 0), (1, 0)], 4)
    assert empirical_loss(h, S) == 0.5
    with pytest.raises(ValueError):
        empirical_loss(h, S[:0])


def test_sample_dataset_frequencies(rng):
    h = Hypothesis.from_bits("01")
    D = FiniteDistribution([(0, 0), (1, 1)], [0.2, 0.8])
    S = sample_dataset(D, 20000, rng, 2)
    assert abs(np.mean(S.points) - 0.8) < 0.02
    assert empirical_loss(h, S) == 0.0


def test_enumeration_sums_to_one():
    D = FiniteDistribution([(0, 0), (0, 1), (1, 1)], [0.2, 0.3, 0.5])
    total = sum(p for p, _ in enumerate_datasets(D, 3, 2))
    assert total == pytest.approx(1.0)
    assert sum(1 for _ in enumerate_datasets(D, 3, 2)) == 27


def test_rule_law_by_enumeration():
    H = HypothesisClass(1, [Hypothesis((0,)), Hypothesis((1,))])
    rule = LearningRule(lambda S: FiniteDistribution.point_mass(H[int(S.labels.sum() >= 1)]), H, 2)
    D = FiniteDistribution([(0, 0), (0, 1)], [0.5, 0.5])
    law = dict((post.support[0].bits, w) for w, post in rule.law(D))
    assert law == {"0": pytest.approx(0.25), "1": pytest.approx(0.75)}


def test_hypothesis_class_rejects_duplicates():
    h = Hypothesis.from_bits("01")
    with pytest.raises(ValueError):
        HypothesisClass(2, [h, h])
