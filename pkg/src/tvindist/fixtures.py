"""Synthetic learners with parameters that can be checked by brute force.

They stand in for black-box stable learners whose actual constructions are
far too expensive to run. Every fixture is a pure function of its
:class:`FixtureSpec`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from typing import Optional

import numpy as np

from .core import (Dataset, FiniteDistribution, Hypothesis, HypothesisClass, LearningRule,
                   realizable_distribution)
from .randomness import Tape
from .transforms import AlgorithmFailure, SeededRule

KINDS = ("noisy-constant", "globally-stable", "list-globally-stable", "weak-stump",
         "deterministic-erm", "uncoupled-uniform")


@dataclasses.dataclass(frozen=True)
class FixtureSpec:
    """Declarative description of a fixture.

    ``params`` holds the declared parameters relevant to ``kind`` (for
    example ``eta``, ``scale``, ``alpha``, ``L``, ``gamma``).
    """

    kind: str
    domain_size: int
    sample_size: int = 1
    target: Optional[Hypothesis] = None
    params: dict = dataclasses.field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fixture kind {self.kind!r}")
        if self.domain_size < 1 or self.sample_size < 1:
            raise ValueError("domain_size and sample_size must be positive")
        if self.target is not None and self.target.domain_size != self.domain_size:
            raise ValueError("target does not match domain_size")

    @property
    def target_hypothesis(self) -> Hypothesis:
        return self.target if self.target is not None else Hypothesis.constant(self.domain_size, 0)

    def param(self, name, default=None):
        return self.params.get(name, default)

    def to_json(self) -> dict:
        return {"kind": self.kind, "domain_size": self.domain_size,
                "sample_size": self.sample_size,
                "target": None if self.target is None else self.target.bits,
                "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_json(cls, obj) -> "FixtureSpec":
        target = obj.get("target")
        return cls(kind=obj["kind"], domain_size=int(obj["domain_size"]),
                   sample_size=int(obj.get("sample_size", 1)),
                   target=None if target is None else Hypothesis.from_bits(target),
                   params=dict(obj.get("params", {})), seed=int(obj.get("seed", 0)))


def noisy_distribution(target: Hypothesis, alpha: float = 0.0, marginal=None) -> FiniteDistribution:
    """Joint law with uniform (or given) marginal where ``target`` errs with
    probability ``alpha`` at every point."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    clean = realizable_distribution(target, marginal)
    if alpha == 0.0:
        return clean
    acc = {}
    for (x, y), p in zip(clean.support, clean.mass):
        acc[(x, y)] = acc.get((x, y), 0.0) + (1.0 - alpha) * p
        acc[(x, 1 - y)] = acc.get((x, 1 - y), 0.0) + alpha * p
    keys = sorted(k for k in acc if acc[k] > 0)
    return FiniteDistribution(keys, [acc[k] for k in keys])


def fixture_distribution(spec: FixtureSpec) -> FiniteDistribution:
    return noisy_distribution(spec.target_hypothesis, float(spec.param("alpha", 0.0)))


def flip(h: Hypothesis, points) -> Hypothesis:
    labels = list(h.labels)
    for x in points:
        labels[x] = 1 - labels[x]
    return Hypothesis(tuple(labels))


def decoys(target: Hypothesis, count: int) -> list:
    """``count`` distinct hypotheses different from ``target``.

    Decoy ``i`` (counting from 1) flips the target on the set bits of ``i``,
    so decoys are reproducible and distinct.
    """
    d = target.domain_size
    if count >= 2 ** d:
        raise ValueError("domain too small for that many decoys")
    out = []
    for i in range(1, count + 1):
        out.append(flip(target, [x for x in range(d) if (i >> x) & 1]))
    return out


def _label_one_mass(D: FiniteDistribution) -> float:
    return float(sum(p for (x, y), p in zip(D.support, D.mass) if y == 1))


def make_noisy_constant_rule(spec: FixtureSpec) -> LearningRule:
    """Posterior ``(1 - p) h0 + p h1`` with ``p = scale * (fraction of 1-labels)``.

    ``h0`` is the target; ``h1`` is its complement unless ``params["h1"]``
    gives one. The posterior depends on ``S`` only through the number of
    1-labels, which is binomial, so the law of the posterior is exact.
    """
    scale = float(spec.param("scale", 0.0))
    if not 0.0 <= scale <= 1.0:
        raise ValueError("perturbation scale must lie in [0, 1]")
    h0 = spec.target_hypothesis
    h1 = Hypothesis.from_bits(spec.param("h1")) if "h1" in spec.params else h0.complement()
    n = spec.sample_size
    reach = HypothesisClass(spec.domain_size, sorted([h0, h1]))

    def posterior_of_count(k, size):
        p = scale * k / size
        return FiniteDistribution.from_weights([h0, h1], [1.0 - p, p])

    def posterior_fn(S: Dataset) -> FiniteDistribution:
        if len(S) == 0:
            return posterior_of_count(0, 1)
        return posterior_of_count(int(np.sum(S.labels)), len(S))

    def posterior_law(D, size):
        q = _label_one_mass(D)
        weights = [math.comb(size, k) * q ** k * (1.0 - q) ** (size - k) for k in range(size + 1)]
        return [(w, posterior_of_count(k, size)) for k, w in enumerate(weights) if w > 0]

    return LearningRule(posterior_fn, reach, n, name=f"noisy-constant(scale={scale:g})",
                        posterior_law=posterior_law)


def make_globally_stable_fixture(spec: FixtureSpec) -> SeededRule:
    """Outputs the target with probability ``eta`` and otherwise a uniform decoy.

    The choice is driven by the tape alone. With fresh tapes the output law
    is ``eta`` on the target and ``(1 - eta) / m`` on each of ``m`` decoys.
    """
    eta = float(spec.param("eta", 1.0))
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    target = spec.target_hypothesis
    fakes = decoys(target, int(spec.param("decoys", 3))) if eta < 1.0 else []
    members = [target] + fakes
    weights = [eta] + [(1.0 - eta) / len(fakes)] * len(fakes) if fakes else [1.0]
    prior = FiniteDistribution.from_weights(members, weights)
    reach = HypothesisClass(spec.domain_size, sorted(members))
    base = LearningRule(lambda S: prior, reach, spec.sample_size, name=f"globally-stable(eta={eta:g})",
                        posterior_law=lambda D, n: [(1.0, prior)])

    def execute(S: Dataset, tape: Tape) -> Hypothesis:
        u = tape.derive("global-stable").uniform()
        if u < eta or not fakes:
            return target
        return fakes[min(len(fakes) - 1, int((u - eta) / (1.0 - eta) * len(fakes)))]

    return SeededRule(base, None, execute, lambda D, n: prior, name=base.name)


def _digest_int(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(part if isinstance(part, bytes) else repr(part).encode())
    return int.from_bytes(h.digest(), "little")


class ListLearner:
    """List-globally stable learner: each output list has at most ``L`` members
    and contains the target with probability ``eta``.

    The remaining slots hold decoys from a fixed pool. Which decoys appear is
    a uniformly random subset drawn with private coins and then rotated by a
    hash of the sample, so the lists depend on the data while their law does
    not. ``list_counts`` draws that law directly.
    """

    def __init__(self, target: Hypothesis, L: int, eta: float, pool, sample_size: int):
        if L < 1:
            raise ValueError("L must be at least 1")
        if not 0.0 < eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if len(pool) < L:
            raise ValueError("decoy pool smaller than L")
        self.target, self.L, self.eta = target, L, eta
        self.pool = tuple(pool)
        self.sample_size = sample_size

    def __call__(self, S: Dataset, rng: np.random.Generator) -> frozenset:
        include = rng.random() < self.eta
        slots = self.L - 1 if include else self.L
        m = len(self.pool)
        chosen = rng.choice(m, size=slots, replace=False)
        shift = _digest_int(S.points.tobytes(), S.labels.tobytes()) % m
        out = {self.pool[(i + shift) % m] for i in chosen}
        if include:
            out.add(self.target)
        return frozenset(out)

    @property
    def universe(self) -> tuple:
        return (self.target,) + self.pool

    def list_counts(self, count: int, D: FiniteDistribution, rng: np.random.Generator,
                    chunk: int = 65536):
        """``(universe, counts)``: how many of ``count`` fresh lists contain each item."""
        m = len(self.pool)
        include = rng.random(count) < self.eta
        counts = np.zeros(m + 1, dtype=np.int64)
        counts[0] = int(include.sum())
        for start in range(0, count, chunk):
            inc = include[start:start + chunk]
            # each row keeps the decoys holding its ``slots`` smallest keys
            keys = rng.random((inc.size, m))
            part = np.partition(keys, (self.L - 2, self.L - 1) if self.L > 1 else (0,), axis=1)
            cut_all = part[:, self.L - 1]
            cut = np.where(inc, part[:, self.L - 2], cut_all) if self.L > 1 else np.where(inc, -1.0, cut_all)
            counts[1:] += (keys <= cut[:, None]).sum(axis=0)
        return self.universe, counts


def generic_list_counts(learner, count: int, D: FiniteDistribution, rng: np.random.Generator):
    """List counts by actually drawing samples and running ``learner``."""
    from .core import sample_dataset

    tally: dict = {}
    for _ in range(count):
        for h in learner(sample_dataset(D, learner.sample_size, rng), rng):
            tally[h] = tally.get(h, 0) + 1
    universe = tuple(sorted(tally))
    return universe, np.array([tally[h] for h in universe], dtype=np.int64)


def make_list_global_fixture(spec: FixtureSpec) -> ListLearner:
    L = int(spec.param("L", 4))
    eta = float(spec.param("eta", 1.0))
    default_pool = min(9 * L, 2 ** min(spec.domain_size, 20) - 1)
    pool = decoys(spec.target_hypothesis, int(spec.param("pool_size", default_pool)))
    return ListLearner(spec.target_hypothesis, L, eta, pool, spec.sample_size)


def stump_class(domain_size: int) -> HypothesisClass:
    """All distinct single-threshold stumps: the two constants and, for each
    cut ``1 <= c < d``, the rules ``x >= c`` and ``x < c``."""
    d = domain_size
    members = [Hypothesis.constant(d, 0), Hypothesis.constant(d, 1)]
    for c in range(1, d):
        up = tuple(int(x >= c) for x in range(d))
        members.append(Hypothesis(up))
        members.append(Hypothesis(tuple(1 - b for b in up)))
    return HypothesisClass(d, members)


def threshold_target(domain_size: int, cut: int) -> Hypothesis:
    return Hypothesis(tuple(int(x >= cut) for x in range(domain_size)))


def is_threshold(h: Hypothesis) -> bool:
    """Monotone (non-decreasing) labellings are threshold functions."""
    return all(a <= b for a, b in zip(h.labels, h.labels[1:]))


def _erm(H: HypothesisClass, S: Dataset) -> Hypothesis:
    if len(S) == 0:
        raise AlgorithmFailure("empty effective sample")
    errors = (H.label_matrix()[:, S.points] != S.labels[None, :]).sum(axis=1)
    return H[int(np.argmin(errors))]


def make_weak_stump_learner(gamma: float, domain_size: int, sample_size: int = 32) -> LearningRule:
    """ERM over single-threshold stumps (deterministic: point-mass posteriors).

    The weak advantage ``gamma`` is a claim about threshold targets; it is
    checked by :func:`stump_advantage`, not assumed.
    """
    if not 0.0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    H = stump_class(domain_size)
    return LearningRule(lambda S: FiniteDistribution.point_mass(_erm(H, S)), H, sample_size,
                        name=f"weak-stump(gamma={gamma:g})")


def stump_advantage(target: Hypothesis, weights) -> float:
    """Best weighted advantage ``1/2 - err`` of any stump against ``target``.

    ``weights`` is a non-negative vector over domain points.
    """
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        raise ValueError("weights must have positive mass")
    w = w / w.sum()
    H = stump_class(target.domain_size)
    errs = (H.label_matrix() != target.as_array()[None, :]).astype(float) @ w
    return float(0.5 - errs.min())


def make_deterministic_erm(spec: FixtureSpec, H: Optional[HypothesisClass] = None) -> LearningRule:
    H = stump_class(spec.domain_size) if H is None else H
    return LearningRule(lambda S: FiniteDistribution.point_mass(_erm(H, S)), H, spec.sample_size,
                        name="deterministic-erm")


def make_uncoupled_uniform_rule(spec: FixtureSpec) -> SeededRule:
    """Uniform pick between the target and its complement, with coins hashed
    from ``(tape, S)``; sharing the tape does not align outputs."""
    target = spec.target_hypothesis
    pair = sorted([target, target.complement()])
    prior = FiniteDistribution.uniform(pair)
    base = LearningRule(lambda S: prior, HypothesisClass(spec.domain_size, pair), spec.sample_size,
                        name="uncoupled-uniform", posterior_law=lambda D, n: [(1.0, prior)])

    def execute(S: Dataset, tape: Tape) -> Hypothesis:
        key = _digest_int(tape.key, S.points.tobytes(), S.labels.tobytes())
        return pair[key & 1]

    return SeededRule(base, None, execute, lambda D, n: prior, name=base.name)


def build(spec: FixtureSpec):
    """Instantiate any fixture by kind."""
    if spec.kind == "noisy-constant":
        return make_noisy_constant_rule(spec)
    if spec.kind == "globally-stable":
        return make_globally_stable_fixture(spec)
    if spec.kind == "list-globally-stable":
        return make_list_global_fixture(spec)
    if spec.kind == "weak-stump":
        return make_weak_stump_learner(float(spec.param("gamma", 0.25)), spec.domain_size,
                                       spec.sample_size)
    if spec.kind == "deterministic-erm":
        return make_deterministic_erm(spec)
    return make_uncoupled_uniform_rule(spec)
