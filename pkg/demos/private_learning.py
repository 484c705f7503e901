"""From TV indistinguishability to differential privacy.

A learner that outputs nearly the same hypothesis law on any two samples
is run on many disjoint batches with coupled randomness. A stable
histogram releases the outputs that recur, and the exponential mechanism
picks among them. The result is an (epsilon, delta)-private learner.
"""

import numpy as np

from tvindist import Hypothesis, Tape, population_loss, sample_dataset, tv_to_dp, uniform_reference
from tvindist.fixtures import FixtureSpec, fixture_distribution, make_noisy_constant_rule
from tvindist.metrics import exact_expected_tv
from tvindist.transforms import AlgorithmFailure, TvToDpPlan

target = Hypothesis.from_bits("001101")
spec = FixtureSpec("noisy-constant", 6, 2, target, {"scale": 0.1})
rule = make_noisy_constant_rule(spec)
D = fixture_distribution(spec)

law = rule.law(D, 2)
rho = exact_expected_tv(law)
beta = sum(w * post.prob(target.complement()) for w, post in law)
print(f"source learner: rho = {rho:.4f}, failure mass beta = {beta:.4f}")

eps, delta, alpha_p, beta_p = 1.0, 1e-3, 0.1, 0.2
plan = TvToDpPlan(0.1, 0.05, beta_p, eps, delta)
size = plan.dataset_size(rule.sample_size, alpha_p)
print(f"k' = {plan.k_batches} batches of k = {plan.k_per_batch} runs, eta = {plan.eta:.4f}")
print(f"dataset size = {size}")

ref = uniform_reference(rule.reachable_set)
correct = 0
runs = 20
for i in range(runs):
    S = sample_dataset(D, size, np.random.default_rng(i), 6)
    try:
        h = tv_to_dp(rule, S, alpha_p, beta_p, eps, delta, ref, Tape.root(7).derive(i), 0.1, 0.05)
    except AlgorithmFailure:
        continue
    correct += population_loss(h, D) <= alpha_p
print(f"private learner accurate in {correct}/{runs} runs")
