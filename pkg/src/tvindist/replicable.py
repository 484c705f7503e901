"""Replicable statistical queries, heavy hitters and agnostic learning over a
finite class.

Each routine splits its randomness into data (the sampler, private to one
run) and internal coins (the tape, shared between runs whose outputs should
agree).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np

from .core import Hypothesis, HypothesisClass
from .randomness import Tape
from .sampling import Sampler


def _open_unit(name, value):
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name}={value!r} must lie in (0, 1)")


@dataclasses.dataclass(frozen=True)
class SqParams:
    tolerance: float
    replicability: float
    confidence: float

    def __post_init__(self):
        _open_unit("tolerance", self.tolerance)
        _open_unit("replicability", self.replicability)
        _open_unit("confidence", self.confidence)

    @property
    def inner_confidence(self) -> float:
        return min(self.confidence, self.replicability / 4.0)

    @property
    def sample_size(self) -> int:
        """Hoeffding size for accuracy ``tolerance * replicability / 4``."""
        tau, rho = self.tolerance, self.replicability
        return math.ceil(8.0 * math.log(2.0 / self.inner_confidence) / (tau * tau * rho * rho))


@dataclasses.dataclass(frozen=True)
class HhParams:
    threshold: float
    error: float
    confidence: float
    replicability: float

    def __post_init__(self):
        for name in ("threshold", "error", "confidence", "replicability"):
            _open_unit(name, getattr(self, name))
        if self.threshold - self.error <= 0.0 or self.threshold + self.error > 1.0:
            raise ValueError("band (threshold - error, threshold + error] must lie inside (0, 1]")

    def sample_sizes(self, distinct_candidates: int | None = None):
        """``(n1, n2)``; ``n2`` needs the number of distinct first-stage items."""
        low = self.threshold - self.error
        m = min(self.confidence, self.replicability)
        n1 = math.ceil(math.log(2.0 / (m * low)) / low)
        if distinct_candidates is None:
            return n1, None
        k = distinct_candidates + 1
        n2 = math.ceil(32.0 * (math.log(2.0 / m) + k)
                       / (self.replicability ** 2 * self.error ** 2))
        return n1, n2


def _empirical_mean(query: Callable, sampler: Sampler, n: int) -> float:
    items, counts = sampler.counts(n)
    values = np.fromiter((float(query(z)) for z in items), dtype=float, count=len(items))
    if np.any(values < 0) or np.any(values > 1):
        raise ValueError("query values must lie in [0, 1]")
    return float(np.dot(values, counts) / n)


def round_to_offset_grid(value: float, width: float, offset: float) -> float:
    return offset + width * round((value - offset) / width)


def replicable_sq(query: Callable, sampler: Sampler, params: SqParams, tape: Tape) -> float:
    """Estimate ``E[query]`` and snap it to a randomly shifted grid.

    The empirical mean of ``params.sample_size`` draws is within
    ``tolerance * replicability / 4`` of the truth except with probability
    ``min(confidence, replicability / 4)``; rounding to the grid of width
    ``tolerance`` shifted by a tape-drawn offset keeps the output within
    ``tolerance`` and makes two runs that share ``tape`` land on the same
    grid point except with probability at most ``replicability``.
    """
    mean = _empirical_mean(query, sampler, params.sample_size)
    width = params.tolerance
    offset = width * tape.derive("sq-offset").uniform()
    return min(1.0, max(0.0, round_to_offset_grid(mean, width, offset)))


def _sorted_items(items):
    try:
        return sorted(items)
    except TypeError:
        return list(items)


def replicable_heavy_hitters(sampler: Sampler, params: HhParams, tape: Tape) -> list:
    """Items whose frequency clears a tape-drawn threshold in ``[v - e/2, v + e/2]``.

    Candidates are the distinct items of a first sample of size ``n1``; their
    frequencies are re-estimated on a second sample of size ``n2``. Returns
    the surviving candidates in sorted order.
    """
    n1, _ = params.sample_sizes()
    candidates = set(sampler.draw(n1))
    _, n2 = params.sample_sizes(len(candidates))
    items, counts = sampler.counts(n2)
    freq = {item: c / n2 for item, c in zip(items, counts)}
    v, e = params.threshold, params.error
    cut = v - e / 2.0 + e * tape.derive("hh-threshold").uniform()
    return _sorted_items(x for x in candidates if freq.get(x, 0.0) >= cut)


def error_query(h: Hypothesis) -> Callable:
    labels = h.labels
    return lambda example: 1.0 if labels[example[0]] != example[1] else 0.0


def replicable_agnostic_learner(H, sampler: Sampler, epsilon: float, delta: float, rho: float,
                                tape: Tape):
    """Replicably estimate every member's error and return the minimizer.

    Each member ``H[i]`` is estimated by :func:`replicable_sq` with parameters
    ``(epsilon/2, rho/|H|, delta/|H|)`` on tape ``tape / ("agnostic", i)``.
    Ties go to the lowest index. Returns ``(hypothesis, estimated_error)``.
    """
    members = list(H.members if isinstance(H, HypothesisClass) else H)
    if not members:
        raise ValueError("empty hypothesis class")
    size = len(members)
    params = SqParams(epsilon / 2.0, rho / size, delta / size)
    estimates = [replicable_sq(error_query(h), sampler, params, tape.derive(("agnostic", i)))
                 for i, h in enumerate(members)]
    best = int(np.argmin(estimates))
    return members[best], estimates[best]
