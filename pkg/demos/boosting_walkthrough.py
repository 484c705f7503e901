"""Boosting a weak stump learner with replicable stopping.

The weak learner returns a decision stump that beats random guessing by
gamma. Smooth boosting reweights the examples the current majority gets
wrong and stops once a replicable estimate of the measure's mass drops
below 2 epsilon / 3.
"""

import numpy as np

from tvindist import Tape, population_loss, uniform_reference
from tvindist.boosting import BoostPlan, smooth_boost
from tvindist.fixtures import make_weak_stump_learner, noisy_distribution, threshold_target

d, gamma, eps, rho_p, beta_p = 64, 0.25, 0.1, 0.1, 0.1
weak = make_weak_stump_learner(gamma, d, 32)
ref = uniform_reference(weak.reachable_set)
target = threshold_target(d, 23)
D = noisy_distribution(target)

plan = BoostPlan(eps, gamma, rho_p, beta_p, weak.sample_size, c_T=4)
print(f"round budget T = {plan.rounds}, fresh draws per round = {plan.draw_size}")


def show(record):
    print(f"round {record['round']:3d}: measure mean ~ {record['measure_mean_estimate']:.3f}, "
          f"majority error = {record['majority_error']:.3f}")


h, state = smooth_boost(weak, D, eps, rho_p, beta_p, gamma, ref, Tape.root(0xB0057),
                        np.random.default_rng(1), c_T=4, log=show)
print(f"stopped after {state.round} rounds; final error {population_loss(h, D):.3f} <= {eps}")
