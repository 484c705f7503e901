"""Amplification of TV indistinguishability and smooth boosting of accuracy."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Union

import numpy as np

from .core import Dataset, FiniteDistribution, Hypothesis, LearningRule, population_loss
from .coupling import ReferenceMeasure
from .randomness import Tape
from .replicable import HhParams, SqParams, replicable_agnostic_learner, replicable_heavy_hitters, replicable_sq
from .sampling import DistributionSampler, Sampler
from .transforms import AlgorithmFailure, derandomize, induced_sampler

# Amplification -----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class AmplifyPlan:
    rho: float
    beta: float
    beta_p: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if not 0.0 < self.beta_p < 1.0:
            raise ValueError("beta' must lie in (0, 1)")
        if not 0.0 <= self.beta < self.beta_bound:
            raise ValueError(f"beta={self.beta} must lie below {self.beta_bound:.6g}")

    @property
    def eta(self) -> float:
        return math.sqrt(2.0 * self.rho / (1.0 + self.rho))

    nu = eta

    @property
    def beta_bound(self) -> float:
        return (1.0 - self.eta) ** 2

    @property
    def rounds(self) -> int:
        margin = 1.0 - self.nu - self.beta / (1.0 - self.eta)
        return math.ceil(math.log(3.0 / self.beta_p) / margin)

    def heavy_hitter_params(self, rho_p: float) -> HhParams:
        k = self.rounds
        gap = 1.0 - self.eta
        return HhParams(0.75 * gap, 0.25 * gap, self.beta_p / (3 * k), rho_p / (2 * k))


def amplify(A: LearningRule, D: FiniteDistribution, alpha: float, rho: float, beta: float,
            rho_p: float, epsilon: float, beta_p: float, ref: ReferenceMeasure, tape: Tape,
            rng: np.random.Generator, trace: Optional[list] = None) -> Hypothesis:
    """Boost a ``rho``-TV indistinguishable, ``(alpha, beta)``-accurate rule to
    ``rho'``-TV indistinguishability at accuracy ``(alpha + epsilon, beta')``.

    Round ``i`` fixes a coupling tape, finds the heavy hitters of the induced
    hypothesis law and runs the replicable agnostic learner on them; the
    first candidate with estimated error at most ``alpha + epsilon/2`` is
    returned, otherwise the all-ones classifier. ``rng`` drives the data;
    ``tape`` holds all internal coins. Per-round events are appended to
    ``trace`` when given.
    """
    plan = AmplifyPlan(rho, beta, beta_p)
    k = plan.rounds
    hh = plan.heavy_hitter_params(rho_p)
    seeded = derandomize(A, ref)
    examples = DistributionSampler(D, rng)
    for i in range(k):
        round_tape = tape.derive(("amplify", i))
        hyps = induced_sampler(seeded, D, rng, tape=round_tape.derive("coupling"))
        L = replicable_heavy_hitters(hyps, hh, round_tape.derive("heavy-hitters"))
        if not L:
            if trace is not None:
                trace.append({"round": i, "candidates": 0})
            continue
        h, est = replicable_agnostic_learner(L, examples, epsilon / 2.0, beta_p / (3 * k),
                                             rho_p / (2 * k), round_tape.derive("agnostic"))
        if trace is not None:
            trace.append({"round": i, "candidates": len(L), "estimate": est})
        if est <= alpha + epsilon / 2.0:
            return h
    return Hypothesis.constant(A.reachable_set.domain_size, 1)


# Smooth boosting ---------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class SmoothMeasure:
    """Weights in ``[0, 1]`` on examples: ``values[x, y]`` for point ``x``, label ``y``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("values must have shape (domain_size, 2)")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("measure values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def initial(cls, domain_size: int) -> "SmoothMeasure":
        return cls(np.ones((domain_size, 2)))

    def __call__(self, example) -> float:
        x, y = example
        return float(self.values[x, y])

    def on(self, points, labels) -> np.ndarray:
        return self.values[np.asarray(points), np.asarray(labels)]

    def mean(self, D: FiniteDistribution) -> float:
        """Exact mean under a distribution over ``(x, y)``."""
        return float(sum(p * self.values[x, y] for (x, y), p in zip(D.support, D.mass)))


@dataclasses.dataclass
class BoostState:
    """Hypotheses so far and the per-point count of votes for label 1."""

    domain_size: int
    hypotheses: list = dataclasses.field(default_factory=list)
    ones: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.ones is None:
            self.ones = np.zeros(self.domain_size, dtype=np.int64)

    @property
    def round(self) -> int:
        return len(self.hypotheses)

    def add(self, h: Hypothesis) -> None:
        self.hypotheses.append(h)
        self.ones = self.ones + h.as_array()

    def margins(self, gamma: float) -> np.ndarray:
        """``M[x, y] = sum_i (y h_i(x) - theta)`` in the +-1 convention."""
        t = self.round
        theta = gamma / (2.0 + gamma)
        vote = 2 * self.ones - t
        return np.stack([-vote, vote], axis=1) - t * theta

    def measure(self, gamma: float) -> SmoothMeasure:
        M = self.margins(gamma)
        mu = np.where(M <= 0, 1.0, (1.0 - gamma) ** (np.maximum(M, 0.0) / 2.0))
        return SmoothMeasure(mu)

    def majority(self) -> Hypothesis:
        """Majority vote; ties go to label 1."""
        return Hypothesis(tuple(int(2 * c >= self.round) for c in self.ones))


def rejection_sampling(S_in: Dataset, size_out: int, mu: SmoothMeasure, tape: Tape) -> Optional[Dataset]:
    """First ``size_out`` examples accepted with probability ``mu(x, y)``.

    Example ``i`` is accepted when ``mu`` is at least the tape's ``i``-th
    uniform. Returns ``None`` when ``S_in`` runs out first.
    """
    if size_out == 0:
        return S_in[:0]
    b = tape.uniforms(len(S_in))
    accept = np.flatnonzero(mu.on(S_in.points, S_in.labels) >= b)
    if accept.size < size_out:
        return None
    keep = accept[:size_out]
    return Dataset(S_in.points[keep], S_in.labels[keep], S_in.domain_size)


class _DatasetSampler(Sampler):
    """Hands out the examples of a fixed dataset in order."""

    def __init__(self, S: Dataset):
        self.S = S
        self.used = 0

    def draw(self, n: int) -> list:
        if self.used + n > len(self.S):
            raise ValueError(f"dataset too small: need {n} more examples")
        part = self.S[self.used:self.used + n]
        self.used += n
        return list(part)


def indist_test_measure(mu: SmoothMeasure, S: Union[Dataset, Sampler], tape: Tape, rho: float,
                        beta: float, epsilon: float) -> float:
    """Replicable estimate of ``E[mu]`` within ``epsilon/3``.

    ``S`` is either a dataset with at least the oracle's sample size or a
    sampler of fresh examples.
    """
    sampler = _DatasetSampler(S) if isinstance(S, Dataset) else S
    return replicable_sq(mu, sampler, SqParams(epsilon / 3.0, rho, beta), tape)


def boost_rounds(epsilon: float, gamma: float, c_T: float = 100.0) -> int:
    """Round budget ``T = ceil(c_T / (epsilon gamma^2))``."""
    return math.ceil(c_T / (epsilon * gamma ** 2))


@dataclasses.dataclass(frozen=True)
class BoostPlan:
    epsilon: float
    gamma: float
    rho_p: float
    beta_p: float
    weak_sample_size: int
    c_T: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2)")
        for name in ("epsilon", "rho_p", "beta_p"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.c_T <= 0:
            raise ValueError("c_T must be positive")

    @property
    def rounds(self) -> int:
        return boost_rounds(self.epsilon, self.gamma, self.c_T)

    @property
    def draw_size(self) -> int:
        return math.ceil(self.weak_sample_size / self.epsilon * math.log(self.rounds / self.beta_p))

    def test_params(self) -> SqParams:
        T = self.rounds
        return SqParams(self.epsilon / 3.0, self.rho_p / (3 * T), self.beta_p / (3 * T))


def smooth_boost(A_weak: LearningRule, D: FiniteDistribution, epsilon: float, rho_p: float,
                 beta_p: float, gamma: float, ref: ReferenceMeasure, tape: Tape,
                 rng: np.random.Generator, c_T: float = 100.0,
                 log: Optional[Callable[[dict], None]] = None):
    """Smooth boosting with replicable stopping. Returns ``(majority, state)``.

    Round ``t`` rejection-samples ``n_w`` examples from fresh draws under
    the current measure (tape ``(t, 1)``), runs the derandomized weak learner
    on them (tape ``(t, 2)``), updates the measure and stops once the
    replicable estimate of its mean (tape ``(t, 3)``) is at most
    ``2 epsilon / 3``. Rejection exhaustion or running out of rounds raises
    :class:`AlgorithmFailure`. ``log`` receives one record per round.
    """
    n_w = A_weak.sample_size
    plan = BoostPlan(epsilon, gamma, rho_p, beta_p, n_w, c_T)
    weak = derandomize(A_weak, ref)
    d = A_weak.reachable_set.domain_size
    state = BoostState(d)
    mu = SmoothMeasure.initial(d)
    examples = DistributionSampler(D, rng)
    for t in range(1, plan.rounds + 1):
        rows = examples.draw_array(plan.draw_size)
        drawn = Dataset(rows[:, 0], rows[:, 1], d)
        S_t = rejection_sampling(drawn, n_w, mu, tape.derive((t, 1)))
        if S_t is None:
            raise AlgorithmFailure(f"rejection sampling exhausted in round {t}")
        state.add(weak.execute(S_t, tape.derive((t, 2))))
        mu = state.measure(gamma)
        test = plan.test_params()
        est = indist_test_measure(mu, examples, tape.derive((t, 3)), test.replicability,
                                  test.confidence, epsilon)
        if log is not None:
            log({"round": t, "measure_mean_estimate": est,
                 "majority_error": population_loss(state.majority(), D)})
        if est <= 2.0 * epsilon / 3.0:
            return state.majority(), state
    raise AlgorithmFailure(f"no stop within T={plan.rounds} rounds")
