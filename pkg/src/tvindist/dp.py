"""Differentially private subroutines and exact privacy checks on finite
supports.

Noise is drawn with inverse-CDF sampling from tape uniforms in ordinary
floating point. That is fine for simulation; it is not hardened against the
floating-point side channels that matter for deployed DP systems.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .core import Dataset, FiniteDistribution, Hypothesis, aligned, empirical_loss
from .randomness import Tape

HISTOGRAM_CONSTANT = 8.0
EXP_MECHANISM_CONSTANT = 4.0


class PreconditionError(ValueError):
    """Input too small for the mechanism's accuracy guarantee."""


@dataclasses.dataclass(frozen=True)
class DpParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must lie in [0, 1)")


def laplace_from_uniform(u, scale):
    """Inverse CDF of Laplace(0, scale) at ``u`` in ``[0, 1)``."""
    u = np.asarray(u, dtype=float) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def histogram_min_size(eta, beta, epsilon, delta) -> int:
    return math.ceil(HISTOGRAM_CONSTANT * math.log(1.0 / (eta * beta * delta)) / (eta * epsilon))


def stable_histogram(items: Sequence, eta: float, beta: float, epsilon: float, delta: float,
                     tape: Tape) -> list:
    """Release ``(item, noisy frequency)`` for frequent items.

    Every item present in ``items`` gets Laplace noise of scale
    ``2 / (epsilon n)`` on its frequency and is released when the noisy value
    reaches ``eta/2 + (2 / (epsilon n)) ln(2/delta)``. Items not present are
    never released, which is what costs ``delta``. Released estimates are
    clamped to ``[0, 1]`` and listed in sorted item order.
    """
    items = list(items)
    n = len(items)
    if not (0 < eta < 1 and 0 < beta < 1 and epsilon > 0 and 0 < delta < 1):
        raise ValueError("need eta, beta, delta in (0, 1) and epsilon > 0")
    need = histogram_min_size(eta, beta, epsilon, delta)
    if n < need:
        raise PreconditionError(f"stable_histogram needs at least n={need} items, got {n}")
    counts: dict = {}
    for x in items:
        counts[x] = counts.get(x, 0) + 1
    try:
        keys = sorted(counts)
    except TypeError:
        keys = list(counts)
    scale = 2.0 / (epsilon * n)
    threshold = eta / 2.0 + scale * math.log(2.0 / delta)
    released = []
    for x in keys:
        # one noise draw per distinct item, addressed by the item itself
        noise = float(laplace_from_uniform(tape.derive(("hist", x)).uniform(), scale))
        est = counts[x] / n + noise
        if est >= threshold:
            released.append((x, min(1.0, max(0.0, est))))
    return released


def exp_mechanism_min_size(H_size, alpha, beta, epsilon) -> int:
    return math.ceil(EXP_MECHANISM_CONSTANT * math.log(H_size / beta)
                     * max(1.0 / (epsilon * alpha), 1.0 / alpha ** 2))


def exp_mechanism_distribution(H: Sequence[Hypothesis], S: Dataset, epsilon: float) -> FiniteDistribution:
    """Closed-form output law: ``P(h) ∝ exp(-epsilon n L_S(h) / 2)``."""
    members = list(H)
    n = len(S)
    scores = np.array([-epsilon * n * empirical_loss(h, S) / 2.0 for h in members])
    w = np.exp(scores - scores.max())
    return FiniteDistribution(members, w / w.sum())


def exp_mechanism_learner(H: Sequence[Hypothesis], S: Dataset, alpha: float, beta: float,
                          epsilon: float, tape: Tape, check_size: bool = True) -> Hypothesis:
    """Exponential-mechanism selection from a finite list with utility ``-L_S``."""
    members = list(H)
    if not members:
        raise ValueError("empty candidate list")
    if check_size:
        need = exp_mechanism_min_size(len(members), alpha, beta, epsilon)
        if len(S) < need:
            raise PreconditionError(f"exp_mechanism_learner needs |S| >= {need}, got {len(S)}")
    law = exp_mechanism_distribution(members, S, epsilon)
    return law.sample(_UniformView(tape.derive("expmech")))


class _UniformView:
    """Adapter giving a tape the ``random()`` method used by ``sample``."""

    def __init__(self, tape):
        self.tape = tape

    def random(self, size=None):
        return self.tape.uniform() if size is None else self.tape.uniforms(size)


def approx_dp_delta(P: FiniteDistribution, Q: FiniteDistribution, epsilon: float) -> float:
    """Smallest ``delta`` with ``P`` and ``Q`` ``(epsilon, delta)``-indistinguishable.

    The worst event for ``P(E) - e^eps Q(E)`` is ``{w : P(w) > e^eps Q(w)}``,
    and symmetrically for the other direction.
    """
    _, p, q = aligned(P, Q)
    scale = math.exp(epsilon)
    forward = np.clip(p - scale * q, 0.0, None).sum()
    backward = np.clip(q - scale * p, 0.0, None).sum()
    return float(max(forward, backward))


def max_log_ratio(P: FiniteDistribution, Q: FiniteDistribution) -> float:
    """``max |log P(w)/Q(w)|`` over the union support (``inf`` on support mismatch)."""
    _, p, q = aligned(P, Q)
    both = (p > 0) & (q > 0)
    if np.any((p > 0) != (q > 0)):
        return math.inf
    return float(np.max(np.abs(np.log(p[both]) - np.log(q[both]))))
