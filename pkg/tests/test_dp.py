import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import distribution_pairs
from tvindist.core import Dataset, FiniteDistribution, Hypothesis
from tvindist.dp import (PreconditionError, approx_dp_delta, exp_mechanism_distribution,
                         exp_mechanism_learner, exp_mechanism_min_size, histogram_min_size,
                         laplace_from_uniform, max_log_ratio, stable_histogram)
from tvindist.randomness import Tape


def laplace_cdf(x, scale):
    return 0.5 * np.exp(x / scale) if x < 0 else 1 - 0.5 * np.exp(-x / scale)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(0.1, 5))
def test_laplace_inverse_cdf(u, scale):
    assert laplace_cdf(float(laplace_from_uniform(u, scale)), scale) == pytest.approx(u, abs=1e-9)


def test_histogram_precondition():
    need = histogram_min_size(0.2, 0.1, 1.0, 1e-4)
    assert need == math.ceil(8 * math.log(1 / (0.2 * 0.1 * 1e-4)) / 0.2)
    with pytest.raises(PreconditionError):
        stable_histogram([0] * (need - 1), 0.2, 0.1, 1.0, 1e-4, Tape.root(0))


def test_histogram_releases_frequent_items_only():
    items = ["a"] * 3000 + ["b"] * 950 + ["c"] * 50
    out = dict(stable_histogram(items, 0.2, 0.1, 1.0, 1e-4, Tape.root(3)))
    assert set(out) == {"a", "b"}
    assert out["a"] == pytest.approx(0.75, abs=0.01)
    assert out == dict(stable_histogram(items, 0.2, 0.1, 1.0, 1e-4, Tape.root(3)))


def test_absent_items_never_released():
    out = stable_histogram(["a"] * 4000, 0.2, 0.1, 1.0, 1e-4, Tape.root(1))
    assert [x for x, _ in out] == ["a"]


def event_oracle_delta(P, Q, eps):
    support = sorted(set(P.support) | set(Q.support))
    best = 0.0
    for r in range(len(support) + 1):
        for E in itertools.combinations(support, r):
            pe, qe = sum(P.prob(s) for s in E), sum(Q.prob(s) for s in E)
            best = max(best, pe - math.exp(eps) * qe, qe - math.exp(eps) * pe)
    return best


@given(distribution_pairs(max_size=5), st.floats(0, 2))
@settings(max_examples=150, deadline=None)
def test_approx_delta_matches_event_oracle(pair, eps):
    P, Q = pair
    assert approx_dp_delta(P, Q, eps) == pytest.approx(event_oracle_delta(P, Q, eps), abs=1e-12)


def test_max_log_ratio():
    P = FiniteDistribution([0, 1], [0.5, 0.5])
    Q = FiniteDistribution([0, 1], [0.25, 0.75])
    assert max_log_ratio(P, Q) == pytest.approx(math.log(2))
    assert max_log_ratio(P, FiniteDistribution.point_mass(0)) == math.inf


def test_exp_mechanism_distribution_formula():
    H = [Hypothesis.from_bits("00"), Hypothesis.from_bits("01")]
    S = Dataset.from_pairs([(1, 1), (0, 0)], 2)
    law = exp_mechanism_distribution(H, S, 1.0)
    # losses 0.5 and 0: weights exp(-0.5) and 1
    assert law.prob(H[1]) == pytest.approx(1 / (1 + math.exp(-0.5)))


def test_exp_mechanism_neighbors_small_exhaustive():
    H = [Hypothesis.from_bits(b) for b in ("000", "011", "101", "111")]
    examples = [(x, y) for x in range(3) for y in range(2)]
    eps = 0.7
    worst = 0.0
    for S in itertools.product(examples, repeat=3):
        base = exp_mechanism_distribution(H, Dataset.from_pairs(S, 3), eps)
        for i, z in itertools.product(range(3), examples):
            T = list(S)
            T[i] = z
            worst = max(worst, max_log_ratio(base, exp_mechanism_distribution(H, Dataset.from_pairs(T, 3), eps)))
    assert worst <= eps + 1e-9


def test_exp_mechanism_learner_size_check():
    H = [Hypothesis.from_bits("0"), Hypothesis.from_bits("1")]
    S = Dataset.from_pairs([(0, 0)] * 10, 1)
    assert exp_mechanism_min_size(2, 0.1, 0.1, 1.0) > 10
    with pytest.raises(PreconditionError):
        exp_mechanism_learner(H, S, 0.1, 0.1, 1.0, Tape.root(0))
    picked = exp_mechanism_learner(H, S, 0.1, 0.1, 1.0, Tape.root(0), check_size=False)
    assert picked in H
