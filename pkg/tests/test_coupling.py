import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import mass_vectors
from tvindist.core import FiniteDistribution, Hypothesis, HypothesisClass, tv_distance
from tvindist.coupling import (AbsoluteContinuityError, coupled_sample, density, disagreement_bound,
                               first_acceptance_window, mixture_reference, uniform_reference)
from tvindist.randomness import PoissonStripStream, Tape


def hypotheses(k, d=3):
    return [Hypothesis(tuple((i >> b) & 1 for b in range(d))) for i in range(k)]


def couple_many(P, Q, ref, trials, seed=0):
    out = np.empty((trials, 2), dtype=int)
    root = Tape.root(seed)
    for i in range(trials):
        stream = PoissonStripStream(root / i, ref.dist)
        out[i] = coupled_sample(P, ref, stream), coupled_sample(Q, ref, stream)
    return out


def test_disagreement_bound_values():
    assert disagreement_bound(0.2) == pytest.approx(1 / 3)
    assert disagreement_bound(0.0) == 0.0 and disagreement_bound(1.0) == 1.0
    with pytest.raises(ValueError):
        disagreement_bound(1.5)


@given(st.floats(0, 1), st.floats(0, 1))
def test_bound_monotone_and_dominates_tv(a, b):
    lo, hi = sorted((a, b))
    assert disagreement_bound(lo) <= disagreement_bound(hi)
    assert disagreement_bound(a) >= a - 1e-15


def test_marginals_and_disagreement():
    H = hypotheses(3)
    ref = uniform_reference(HypothesisClass(3, H))
    P = FiniteDistribution(H, [0.5, 0.3, 0.2])
    Q = FiniteDistribution(H, [0.3, 0.3, 0.4])
    pairs = couple_many(P, Q, ref, 20000)
    for col, target in ((0, P), (1, Q)):
        emp = np.bincount(pairs[:, col], minlength=3) / len(pairs)
        assert np.abs(emp - target.mass).sum() / 2 < 0.02
    rate = np.mean(pairs[:, 0] != pairs[:, 1])
    sigma = np.sqrt(rate * (1 - rate) / len(pairs))
    assert tv_distance(P, Q) - 3 * sigma <= rate <= disagreement_bound(0.2) + 3 * sigma


def test_identical_targets_always_agree():
    H = hypotheses(4)
    ref = uniform_reference(HypothesisClass(3, H))
    P = FiniteDistribution(H, [0.1, 0.2, 0.3, 0.4])
    pairs = couple_many(P, P, ref, 500)
    assert np.all(pairs[:, 0] == pairs[:, 1])


def test_point_mass_returns_its_item():
    H = hypotheses(3)
    ref = uniform_reference(HypothesisClass(3, H))
    assert coupled_sample(FiniteDistribution.point_mass(H[2]), ref, Tape.root(0)) == 2


def test_determinism():
    H = hypotheses(3)
    ref = uniform_reference(HypothesisClass(3, H))
    P = FiniteDistribution(H, [0.6, 0.3, 0.1])
    t = Tape.root(42) / "x"
    assert [coupled_sample(P, ref, t / i) for i in range(50)] == \
        [coupled_sample(P, ref, t / i) for i in range(50)]


def test_absolute_continuity_violation():
    H = hypotheses(3)
    ref = uniform_reference(HypothesisClass(3, H[:2]))
    with pytest.raises(AbsoluteContinuityError):
        coupled_sample(FiniteDistribution(H, [0.2, 0.3, 0.5]), ref, Tape.root(0))


def test_density_normalizes_against_reference():
    H = hypotheses(3)
    ref = uniform_reference(HypothesisClass(3, H))
    f = density(FiniteDistribution(H, [0.5, 0.3, 0.2]), ref)
    assert np.dot(f.values, ref.dist.mass) == pytest.approx(1.0)


def test_acceptance_time_is_exponential():
    # the accepted atom is the first point of a rate-1 process
    H = hypotheses(3)
    ref = uniform_reference(HypothesisClass(3, H))
    P = FiniteDistribution(H, [0.7, 0.2, 0.1])
    times = np.array([first_acceptance_window(P, ref, Tape.root(i)) for i in range(4000)])
    assert abs(times.mean() - 1.0) < 0.06
    assert abs(np.mean(times > 1.0) - np.exp(-1)) < 0.03


def test_mixture_reference_dominates_components():
    H = hypotheses(3)
    P = FiniteDistribution(H[:2], [0.5, 0.5])
    Q = FiniteDistribution(H[1:], [0.5, 0.5])
    ref = mixture_reference([P, Q])
    assert not ref.data_independent
    assert set(ref.support) == set(H)
    coupled_sample(P, ref, Tape.root(1))
    coupled_sample(Q, ref, Tape.root(1))


@given(st.data())
@settings(max_examples=8, deadline=None)
def test_coupling_bound_property(data):
    k = data.draw(st.integers(2, 4))
    H = hypotheses(k)
    ref = uniform_reference(HypothesisClass(3, H))
    P = FiniteDistribution(H, data.draw(mass_vectors(k)))
    Q = FiniteDistribution(H, data.draw(mass_vectors(k)))
    pairs = couple_many(P, Q, ref, 1500, seed=data.draw(st.integers(0, 10 ** 6)))
    rate = np.mean(pairs[:, 0] != pairs[:, 1])
    sigma = max(np.sqrt(rate * (1 - rate) / len(pairs)), 1 / len(pairs))
    assert rate <= disagreement_bound(tv_distance(P, Q)) + 4 * sigma
