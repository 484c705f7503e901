"""Empirical and exact measurement of the stability notions.

Monte Carlo estimates come with 3-sigma half-widths. Quantities that are
functions of the posterior law are computed exactly whenever that law has at
most ``ENUMERATION_LIMIT`` weighted terms.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from .core import (FiniteDistribution, LearningRule, dump_json, empirical_loss, population_loss,
                   posterior_mixture, sample_dataset, tv_distance)
from .randomness import PoissonStripStream, Tape
from .transforms import AlgorithmFailure, SeededRule

ENUMERATION_LIMIT = 10**6
FAILED = "<failure>"


@dataclasses.dataclass(frozen=True)
class Estimate:
    """A measured quantity with its 3-sigma half-width (0 for exact values)."""

    estimate: float
    ci: float
    trials: int
    exact: bool = False

    @property
    def upper(self) -> float:
        return self.estimate + self.ci

    @property
    def lower(self) -> float:
        return self.estimate - self.ci

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "ci": self.ci, "trials": self.trials, "exact": self.exact}


def binomial_estimate(successes: int, trials: int) -> Estimate:
    p = successes / trials
    return Estimate(p, 3.0 * math.sqrt(p * (1.0 - p) / trials), trials)


def mean_estimate(values) -> Estimate:
    v = np.asarray(values, dtype=float)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return Estimate(float(v.mean()), 3.0 * sd / math.sqrt(v.size), int(v.size))


def map_trials(fn: Callable[[int], object], trials: int, jobs: int = 1) -> list:
    """``[fn(0), ..., fn(trials-1)]``, optionally on a thread pool.

    Each trial must draw its randomness from its own index, so the result is
    the same for every ``jobs``.
    """
    if jobs <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(trials)))


def _require_trials(trials: int) -> None:
    if trials < 100:
        raise ValueError("need at least 100 trials")


def _run(A: SeededRule, S, tape):
    try:
        return A.execute(S, tape)
    except AlgorithmFailure:
        return FAILED


def replicability_rate(A: SeededRule, D: FiniteDistribution, n: int, trials: int, tape: Tape,
                       jobs: int = 1) -> Estimate:
    """Fraction of paired runs on fresh ``S, S'`` with a shared tape whose
    outputs are identical (a declared failure on both sides counts as equal)."""
    _require_trials(trials)

    def trial(i):
        shared = tape.derive(("pair", i))
        if A.ref is not None:
            shared = PoissonStripStream(shared, A.ref.dist)
        rng = tape.derive(("data", i)).rng()
        S, S2 = sample_dataset(D, n, rng), sample_dataset(D, n, rng)
        return _run(A, S, shared) == _run(A, S2, shared)

    return binomial_estimate(sum(map_trials(trial, trials, jobs)), trials)


def exact_expected_tv(law) -> float:
    w = np.array([p for p, _ in law])
    posts = [q for _, q in law]
    total = 0.0
    for i in range(len(posts)):
        for j in range(i + 1, len(posts)):
            total += 2.0 * w[i] * w[j] * tv_distance(posts[i], posts[j])
    return float(total)


def _law_if_small(A: LearningRule, D, n):
    law = A.law(D, n, max_terms=ENUMERATION_LIMIT)
    if law is None or len(law) ** 2 > ENUMERATION_LIMIT:
        return None
    return law


def expected_tv_indistinguishability(A: LearningRule, D: FiniteDistribution, n: int, trials: int,
                                     tape: Optional[Tape] = None, mode: str = "auto",
                                     jobs: int = 1) -> Estimate:
    """``E d_TV(A(S), A(S'))`` for independent ``S, S' ~ D^n``.

    ``mode`` is ``"exact"``, ``"mc"`` or ``"auto"`` (exact when the law is
    small enough).
    """
    if mode not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode != "mc":
        law = _law_if_small(A, D, n)
        if law is not None:
            return Estimate(exact_expected_tv(law), 0.0, 0, exact=True)
        if mode == "exact":
            raise ValueError("law too large for exact enumeration")
    if tape is None:
        raise ValueError("Monte Carlo mode needs a tape")

    def trial(i):
        rng = tape.derive(("tv", i)).rng()
        return tv_distance(A.posterior(sample_dataset(D, n, rng)),
                           A.posterior(sample_dataset(D, n, rng)))

    return mean_estimate(map_trials(trial, trials, jobs))


def fixed_prior_tv(A: LearningRule, D: FiniteDistribution, n: int, trials: int,
                   tape: Optional[Tape] = None, mode: str = "auto", jobs: int = 1):
    """``(prior, E d_TV(A(S), prior))`` with ``prior`` the mean posterior.

    In Monte Carlo mode the prior is the mixture of ``trials`` sampled
    posteriors and the expectation uses an independent batch.
    """
    if mode != "mc":
        law = _law_if_small(A, D, n)
        if law is not None:
            prior = posterior_mixture([q for _, q in law], [w for w, _ in law])
            value = sum(w * tv_distance(q, prior) for w, q in law)
            return prior, Estimate(float(value), 0.0, 0, exact=True)
        if mode == "exact":
            raise ValueError("law too large for exact enumeration")
    if tape is None:
        raise ValueError("Monte Carlo mode needs a tape")

    def posterior(label, i):
        return A.posterior(sample_dataset(D, n, tape.derive((label, i)).rng()))

    posts = map_trials(lambda i: posterior("prior", i), trials, jobs)
    prior = posterior_mixture(posts, np.full(len(posts), 1.0 / len(posts)))
    values = map_trials(lambda i: tv_distance(posterior("eval", i), prior), trials, jobs)
    return prior, mean_estimate(values)


def high_probability_certificate(A: LearningRule, D: FiniteDistribution, n: int, eta: float,
                                 prior: FiniteDistribution) -> float:
    """Exact ``nu = P_S(d_TV(A(S), prior) > eta)``."""
    law = A.law(D, n, max_terms=ENUMERATION_LIMIT)
    if law is None:
        raise ValueError("law too large for exact enumeration")
    return float(sum(w for w, q in law if tv_distance(q, prior) > eta))


def fixed_prior_from_certificate(eta: float, nu: float) -> float:
    """Fixed-prior TV implied by an ``(eta, nu)`` high-probability certificate."""
    return eta + nu - eta * nu


@dataclasses.dataclass(frozen=True)
class GlobalStability:
    hypothesis: object
    frequency: Estimate
    collision: float
    holds: bool


def global_stability_parameter(A: SeededRule, D: FiniteDistribution, n: int, trials: int,
                               tape: Tape, jobs: int = 1) -> GlobalStability:
    """Modal output over fresh samples and fresh tapes, and its frequency.

    ``collision`` is the unbiased pair-collision probability of the outputs;
    it never exceeds the largest point mass, which is the check reported in
    ``holds``.
    """
    _require_trials(trials)

    def trial(i):
        rng = tape.derive(("gs-data", i)).rng()
        return _run(A, sample_dataset(D, n, rng), tape.derive(("gs-coins", i)))

    outputs = map_trials(trial, trials, jobs)
    tally: dict = {}
    for h in outputs:
        tally[h] = tally.get(h, 0) + 1
    mode = max(sorted(tally, key=str), key=lambda h: tally[h])
    freq = binomial_estimate(tally[mode], trials)
    collision = sum(c * (c - 1) for c in tally.values()) / (trials * (trials - 1))
    return GlobalStability(mode, freq, collision, freq.estimate >= collision - freq.ci)


def generalization_bound(n: int, delta: float, rho: float) -> float:
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n)) + math.sqrt(rho)


@dataclasses.dataclass(frozen=True)
class GeneralizationCheck:
    bound: float
    exceedance: Estimate
    allowed: float
    passed: bool


def generalization_gap_check(A: LearningRule, D: FiniteDistribution, n: int, delta: float,
                             rho: float, trials: int, tape: Tape, jobs: int = 1) -> GeneralizationCheck:
    """Rate at which ``|E_h L_D(h) - E_h L_S(h)|`` exceeds the bound, with
    ``h ~ A(S)``; passes when that rate is at most ``delta + 4 sqrt(rho)``
    up to the 3-sigma half-width."""
    bound = generalization_bound(n, delta, rho)

    def trial(i):
        S = sample_dataset(D, n, tape.derive(("gen", i)).rng())
        post = A.posterior(S)
        gap = sum(p * (population_loss(h, D) - empirical_loss(h, S))
                  for h, p in zip(post.support, post.mass) if p > 0)
        return abs(gap) > bound

    rate = binomial_estimate(sum(map_trials(trial, trials, jobs)), trials)
    allowed = delta + 4.0 * math.sqrt(rho)
    return GeneralizationCheck(bound, rate, allowed, rate.estimate <= allowed + rate.ci)


@dataclasses.dataclass(frozen=True)
class StabilityReport:
    replicability_rate: Estimate
    expected_tv: Estimate
    fixed_prior_tv: Estimate
    accuracy: tuple
    trials: int
    seed: str

    def to_json(self) -> dict:
        alpha_hat, beta_hat = self.accuracy
        return {
            "seed": self.seed,
            "trials": self.trials,
            "replicability_rate": self.replicability_rate.to_json(),
            "expected_tv": self.expected_tv.to_json(),
            "fixed_prior_tv": self.fixed_prior_tv.to_json(),
            "accuracy": {"alpha_hat": alpha_hat, "beta_hat": beta_hat},
        }

    def dumps(self) -> str:
        return dump_json(self.to_json())

    def csv_rows(self) -> list:
        """Rows ``(quantity, estimate, ci, bound, pass)``."""
        disagreement = 1.0 - self.replicability_rate.estimate
        slack = self.replicability_rate.ci + self.expected_tv.ci
        fp, tv = self.fixed_prior_tv.estimate, self.expected_tv.estimate
        return [
            ("replicability_rate", self.replicability_rate.estimate, self.replicability_rate.ci, "", ""),
            ("expected_tv", tv, self.expected_tv.ci, disagreement, tv <= disagreement + slack),
            ("fixed_prior_tv", fp, self.fixed_prior_tv.ci, tv, fp <= tv + self.fixed_prior_tv.ci + self.expected_tv.ci),
            ("alpha_hat", self.accuracy[0], "", "", ""),
            ("beta_hat", self.accuracy[1], "", "", ""),
        ]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("quantity", "estimate", "ci", "bound", "pass"))
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def accuracy(A: SeededRule, D: FiniteDistribution, n: int, alpha: float, trials: int, tape: Tape,
             jobs: int = 1) -> tuple:
    """``(mean population error, fraction of runs with error above alpha)``;
    declared failures count as errors of 1."""

    def trial(i):
        rng = tape.derive(("acc-data", i)).rng()
        h = _run(A, sample_dataset(D, n, rng), tape.derive(("acc-coins", i)))
        return 1.0 if h == FAILED else population_loss(h, D)

    errs = np.array(map_trials(trial, trials, jobs))
    return float(errs.mean()), float(np.mean(errs > alpha))


def audit(A: SeededRule, D: FiniteDistribution, n: int, trials: int, tape: Tape, alpha: float = 0.0,
          seed: str = "", jobs: int = 1) -> StabilityReport:
    repl = replicability_rate(A, D, n, trials, tape.derive("repl"), jobs)
    tv = expected_tv_indistinguishability(A.base, D, n, trials, tape.derive("tv"), jobs=jobs)
    _, fp = fixed_prior_tv(A.base, D, n, trials, tape.derive("fixed-prior"), jobs=jobs)
    acc = accuracy(A, D, n, alpha, trials, tape.derive("accuracy"), jobs)
    return StabilityReport(repl, tv, fp, acc, trials, seed)
