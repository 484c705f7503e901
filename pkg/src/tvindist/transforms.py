"""Stability transformations between TV indistinguishability, replicability,
global stability and differential privacy."""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (Dataset, FiniteDistribution, Hypothesis, LearningRule, posterior_mixture,
                   sample_dataset)
from .coupling import (AbsoluteContinuityError, ReferenceMeasure, coupled_index, density,
                       disagreement_bound)
from .dp import exp_mechanism_learner, exp_mechanism_min_size, histogram_min_size, stable_histogram
from .randomness import PoissonStripStream, Tape
from .replicable import HhParams, replicable_agnostic_learner, replicable_heavy_hitters
from .sampling import CallableSampler, DistributionSampler


class AlgorithmFailure(RuntimeError):
    """A declared failure outcome (for example an empty candidate list).

    These events are part of an algorithm's ``beta`` budget; harnesses catch
    and count them instead of substituting a default answer.
    """


@dataclasses.dataclass(frozen=True, eq=False)
class SeededRule:
    """A learning rule run as a deterministic function of ``(dataset, tape)``.

    ``output_law(D, n)``, when present, is the exact law of
    ``execute(S, r)`` with ``S ~ D^n`` and a fresh tape ``r``.
    """

    base: LearningRule
    ref: Optional[ReferenceMeasure]
    execute: Callable[[Dataset, Tape], Hypothesis]
    output_law: Optional[Callable[[FiniteDistribution, int], FiniteDistribution]] = None
    name: str = "seeded"

    @property
    def sample_size(self) -> int:
        return self.base.sample_size

    def __call__(self, S: Dataset, tape: Tape) -> Hypothesis:
        return self.execute(S, tape)

    def induced_law(self, D: FiniteDistribution, tape: Tape, n: Optional[int] = None):
        """Exact law of ``execute(S, tape)`` over ``S ~ D^n`` for a fixed tape,
        or ``None`` when the base rule has no enumerable law."""
        n = self.sample_size if n is None else n
        law = self.base.law(D, n)
        if law is None:
            return None
        acc: dict = {}
        for w, post in law:
            h = self._execute_posterior(post, tape)
            acc[h] = acc.get(h, 0.0) + w
        return FiniteDistribution.from_weights(sorted(acc), [acc[h] for h in sorted(acc)])

    def _execute_posterior(self, post, tape):
        raise NotImplementedError


class _DerandomizedRule(SeededRule):
    """``execute`` couples the posterior with the reference measure's Poisson atoms."""

    def _execute_posterior(self, post: FiniteDistribution, tape) -> Hypothesis:
        stream = tape if isinstance(tape, PoissonStripStream) else PoissonStripStream(tape, self.ref.dist)
        return self.ref.support[coupled_index(density(post, self.ref), stream)]


def _check_covers(A: LearningRule, ref: ReferenceMeasure) -> None:
    for h in A.reachable_set:
        if ref.dist.prob(h) <= 0:
            raise AbsoluteContinuityError(
                f"reference measure gives no mass to reachable hypothesis {h!r}")


def derandomize(A: LearningRule, ref: ReferenceMeasure) -> SeededRule:
    """Equivalent seeded rule whose randomness is the Poisson process on ``ref``.

    ``execute(S, tape)`` is the coupled sample of ``A.posterior(S)``; two
    datasets whose posteriors are at TV distance ``d`` produce different
    outputs on a shared tape with probability at most ``2d / (1 + d)``.
    """
    _check_covers(A, ref)

    def output_law(D, n):
        law = A.law(D, n)
        if law is None:
            return None
        return posterior_mixture([p for _, p in law], [w for w, _ in law])

    rule = _DerandomizedRule(A, ref, None, output_law, name=f"derandomized[{A.name}]")

    def execute(S: Dataset, tape) -> Hypothesis:
        return rule._execute_posterior(A.posterior(S), tape)

    object.__setattr__(rule, "execute", execute)
    return rule


def private_tapes(rng: np.random.Generator):
    """Endless supply of unshared tapes seeded from ``rng``."""
    while True:
        hi, lo = (int(v) for v in rng.integers(0, 2**63, size=2))
        yield Tape.root((hi << 64) | lo)


def verify_repl_implies_tv(A: SeededRule, D: FiniteDistribution, n: int, trials: int, tape: Tape):
    """Monte Carlo ``(replicability disagreement, expected TV)`` with the check
    ``expected TV <= disagreement + 3 sigma``. Returns a dict with both
    estimates, their CI half-widths and the verdict."""
    from . import metrics

    if trials < 100:
        raise ValueError("need at least 100 trials")
    repl = metrics.replicability_rate(A, D, n, trials, tape.derive("repl"))
    tv = metrics.expected_tv_indistinguishability(A.base, D, n, trials, tape.derive("tv"))
    disagreement = 1.0 - repl.estimate
    return {
        "replicability_disagreement": disagreement,
        "replicability_ci": repl.ci,
        "expected_tv": tv.estimate,
        "expected_tv_ci": tv.ci,
        "holds": tv.estimate <= disagreement + repl.ci + tv.ci,
    }


# Global stability -> replicability ------------------------------------


def induced_sampler(A: SeededRule, D: FiniteDistribution, rng: np.random.Generator,
                    tape: Optional[Tape] = None) -> CallableSampler:
    """Sample access to the hypothesis law induced by ``A`` on ``S ~ D^n``.

    With ``tape=None`` every draw uses fresh private randomness; otherwise the
    tape is held fixed and only the dataset varies. Exact laws are used for
    counting when the rule can provide them.
    """
    n = A.sample_size
    if tape is None:
        coins = private_tapes(rng)

        def draw_one():
            return A.execute(sample_dataset(D, n, rng), next(coins))

        law = A.output_law(D, n) if A.output_law is not None else None
    else:
        stream = PoissonStripStream(tape, A.ref.dist) if A.ref is not None else tape

        def draw_one():
            return A.execute(sample_dataset(D, n, rng), stream)

        law = A.induced_law(D, stream, n) if A.ref is not None else None
    return CallableSampler(draw_one, rng, law)


def global_to_replicable(A: SeededRule, D: FiniteDistribution, rho_gs: float, alpha_p: float,
                         beta_p: float, rho_p: float, tape: Tape, rng: np.random.Generator) -> Hypothesis:
    """Turn an ``rho_gs``-globally stable learner into a replicable one.

    Heavy hitters of the induced hypothesis law (threshold ``rho_gs/2``, error
    ``rho_gs/4``, confidence ``beta'/2``, replicability ``rho'/4``) feed the
    replicable agnostic learner with ``(alpha', beta'/2, rho'/2)``. ``rng``
    supplies the data and the learner's private coins; ``tape`` is shared.
    """
    params = HhParams(rho_gs / 2.0, rho_gs / 4.0, beta_p / 2.0, rho_p / 4.0)
    hyps = induced_sampler(A, D, rng)
    L = replicable_heavy_hitters(hyps, params, tape.derive("heavy-hitters"))
    if not L:
        raise AlgorithmFailure("heavy-hitter list is empty")
    h, _ = replicable_agnostic_learner(L, DistributionSampler(D, rng), alpha_p, beta_p / 2.0,
                                       rho_p / 2.0, tape.derive("agnostic"))
    return h


# List-global stability -> TV indistinguishability -----------------------


@dataclasses.dataclass(frozen=True)
class ListGlobalParams:
    eta: float
    rho: float
    alpha: float
    beta: float
    L: int
    constant_scale: float = 1e6

    def __post_init__(self):
        for name in ("eta", "rho", "alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v!r} must lie in (0, 1)")
        if self.L < 1:
            raise ValueError("L must be a positive integer")
        if not self.constant_scale > 0:
            raise ValueError("constant_scale must be positive")

    @property
    def tau(self) -> float:
        return 0.5 * self.eta

    @property
    def log_term(self) -> float:
        return math.log(self.L / (self.rho * self.tau))

    @property
    def gamma(self) -> float:
        return self.constant_scale * self.log_term / self.tau

    @property
    def k1(self) -> int:
        return math.ceil(self.constant_scale * self.log_term / self.tau ** 2)

    @property
    def k2(self) -> int:
        return math.ceil(self.constant_scale * self.gamma ** 2 * self.log_term / self.rho ** 2)


def listglobal_to_tv(A, params: ListGlobalParams, D: FiniteDistribution,
                     rng: np.random.Generator) -> FiniteDistribution:
    """Exponential-weights posterior built from a list-globally stable learner.

    ``A.list_counts(count, D, rng)`` must return ``(universe, counts)`` where
    ``counts[j]`` is the number of ``count`` fresh output lists containing
    ``universe[j]``. Candidates are hypotheses present in at least
    ``tau * k1`` of ``k1`` lists; their weights are ``exp(gamma * Q)`` with
    ``Q`` the fraction of ``k2`` further lists containing them.
    """
    universe, counts = A.list_counts(params.k1, D, rng)
    H = sorted(h for h, c in zip(universe, counts) if c >= params.tau * params.k1)
    if not H:
        raise AlgorithmFailure("no hypothesis reaches frequency tau in the first round")
    universe2, counts2 = A.list_counts(params.k2, D, rng)
    freq = {h: c / params.k2 for h, c in zip(universe2, counts2)}
    logits = params.gamma * np.array([freq.get(h, 0.0) for h in H])
    w = np.exp(logits - logits.max())
    return FiniteDistribution(H, w / w.sum())


# TV indistinguishability -> differential privacy -------------------------

TV_TO_DP_CONSTANT = 4.0


@dataclasses.dataclass(frozen=True)
class TvToDpPlan:
    """Constants of the private pipeline for a ``rho``-TV, ``beta``-confident learner."""

    rho: float
    beta: float
    beta_p: float
    epsilon: float
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if not 0.0 <= self.beta < (1.0 - self.rho) / (1.0 + self.rho):
            raise ValueError("beta must lie below (1 - rho) / (1 + rho)")
        if not (0.0 < self.beta_p < 1.0 and 0.0 < self.delta < 1.0 and self.epsilon > 0):
            raise ValueError("need beta', delta in (0, 1) and epsilon > 0")

    @property
    def rho_coupled(self) -> float:
        return disagreement_bound(self.rho)

    @property
    def p(self) -> float:
        return (1.0 - self.beta - self.rho_coupled) / 2.0

    @property
    def q(self) -> float:
        r = self.rho_coupled
        return (1.0 - self.beta - r) / (1.0 - self.beta + r)

    @property
    def k_batches(self) -> int:
        return math.ceil(math.log(3.0 / self.beta_p) / self.p)

    @property
    def eta(self) -> float:
        return self.q / self.k_batches

    @property
    def k_formula(self) -> int:
        inner = math.log(1.0 / self.beta_p) / (self.q * self.p * self.beta_p * self.delta)
        return math.ceil(TV_TO_DP_CONSTANT * math.log(inner) / (self.q * self.epsilon))

    @property
    def histogram_args(self):
        """``(eta, beta, epsilon, delta)`` handed to the stable histogram."""
        return self.eta / 2.0, self.beta_p / 3.0, self.epsilon / 2.0, self.delta

    @property
    def k_per_batch(self) -> int:
        # the histogram's size precondition must hold for all k * k' outputs
        need = histogram_min_size(*self.histogram_args)
        return max(self.k_formula, math.ceil(need / self.k_batches))

    def dataset_size(self, n: int, alpha_p: Optional[float] = None,
                     list_size: Optional[int] = None) -> int:
        """Examples needed for ``k * k'`` batches of size ``n``.

        With ``alpha_p`` the size also covers the exponential mechanism on a
        pruned list of ``list_size`` candidates (default ``floor(2/eta) + 1``,
        the most that can clear the ``eta/2`` pruning threshold with slack).
        """
        size = self.k_per_batch * self.k_batches * n
        if alpha_p is None:
            return size
        if list_size is None:
            list_size = math.floor(2.0 / self.eta) + 1
        need = exp_mechanism_min_size(list_size, alpha_p / 2.0, self.beta_p / 3.0, self.epsilon / 2.0)
        return max(size, need)


def coupled_batch_outputs(A: LearningRule, S: Dataset, plan: TvToDpPlan, ref: ReferenceMeasure,
                          tape: Tape) -> list:
    """``outputs[j][i]``: coupled draw from ``A(S_i^j)`` on batch tape ``tape/("batch", j)``."""
    n, k, kb = A.sample_size, plan.k_per_batch, plan.k_batches
    if len(S) < k * kb * n:
        raise ValueError(f"need {k * kb * n} examples, got {len(S)}")
    outputs = []
    for j in range(kb):
        stream = PoissonStripStream(tape.derive(("batch", j)), ref.dist)
        row = []
        for i in range(k):
            start = (j * k + i) * n
            post = A.posterior(S[start:start + n])
            row.append(ref.support[coupled_index(density(post, ref), stream)])
        outputs.append(row)
    return outputs


def tv_to_dp(A: LearningRule, S: Dataset, alpha_p: float, beta_p: float, epsilon: float,
             delta: float, ref: ReferenceMeasure, tape: Tape, rho: float, beta: float,
             alpha: float = 0.0) -> Hypothesis:
    """Private learner from an ``(alpha, beta)``-accurate ``rho``-TV indistinguishable rule.

    Batches of posteriors are coupled through a data-independent reference,
    all coupled outputs go through a stable histogram with privacy
    ``(epsilon/2, delta)``, estimates below ``eta/2`` are pruned, and the
    exponential mechanism with ``(alpha'/2, beta'/3, epsilon/2)`` picks the
    answer on ``S``. ``rho``, ``beta`` and ``alpha`` are the rule's declared
    guarantees.
    """
    if not 0.0 <= alpha < 0.5:
        raise ValueError("alpha must lie in [0, 1/2)")
    if not ref.data_independent:
        raise ValueError("the private pipeline requires a data-independent reference measure")
    _check_covers(A, ref)
    plan = TvToDpPlan(rho, beta, beta_p, epsilon, delta)
    outputs = coupled_batch_outputs(A, S, plan, ref, tape)
    flat = [h for row in outputs for h in row]
    eta_h, beta_h, eps_h, delta_h = plan.histogram_args
    released = stable_histogram(flat, eta_h, beta_h, eps_h, delta_h, tape.derive("histogram"))
    pruned = [h for h, est in released if est >= plan.eta / 2.0]
    if not pruned:
        raise AlgorithmFailure("no hypothesis survives pruning")
    return exp_mechanism_learner(pruned, S, alpha_p / 2.0, beta_p / 3.0, epsilon / 2.0,
                                 tape.derive("exp-mechanism"))
