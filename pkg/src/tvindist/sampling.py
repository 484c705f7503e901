"""Sample access to distributions.

Algorithms that only need i.i.d. draws take a sampler. A sampler draws
items (``draw``) and, when the underlying law is an explicit finite
distribution, returns multinomial counts directly (``counts``) -- the same
law as drawing and tallying, without materializing millions of items.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .core import FiniteDistribution


class Sampler:
    """Base class: i.i.d. draws from some distribution over hashable items."""

    def draw(self, n: int) -> list:
        raise NotImplementedError

    def counts(self, n: int):
        """``(items, counts)`` of ``n`` i.i.d. draws, items in first-seen order."""
        tally: dict = {}
        for item in self.draw(n):
            tally[item] = tally.get(item, 0) + 1
        return list(tally), np.fromiter(tally.values(), dtype=np.int64, count=len(tally))


class DistributionSampler(Sampler):
    """I.i.d. sampling from an explicit :class:`FiniteDistribution`."""

    def __init__(self, dist: FiniteDistribution, rng: np.random.Generator):
        self.dist = dist
        self.rng = rng
        self._cdf = np.cumsum(dist.mass)

    def draw(self, n: int) -> list:
        idx = np.searchsorted(self._cdf, self.rng.random(n) * self._cdf[-1], side="right")
        idx = np.minimum(idx, len(self.dist) - 1)
        support = self.dist.support
        return [support[i] for i in idx]

    def draw_array(self, n: int) -> np.ndarray:
        """Draws as an array (examples ``(x, y)`` become rows of an ``(n, 2)`` array)."""
        idx = np.searchsorted(self._cdf, self.rng.random(n) * self._cdf[-1], side="right")
        idx = np.minimum(idx, len(self.dist) - 1)
        return np.asarray(self.dist.support)[idx]

    def counts(self, n: int):
        c = self.rng.multinomial(int(n), self.dist.mass / self.dist.mass.sum())
        return list(self.dist.support), c.astype(np.int64)


class CallableSampler(Sampler):
    """Sample access through a one-draw callable (for black-box learners).

    If ``law`` is given it must be the exact distribution of a single draw;
    ``counts`` then uses it and ``draw_one`` is only used by ``draw``.
    """

    def __init__(self, draw_one: Callable[[], object], rng: Optional[np.random.Generator] = None,
                 law: Optional[FiniteDistribution] = None):
        self.draw_one = draw_one
        self.law = law
        self.rng = rng

    def draw(self, n: int) -> list:
        if self.law is not None and self.rng is not None:
            return DistributionSampler(self.law, self.rng).draw(n)
        return [self.draw_one() for _ in range(n)]

    def counts(self, n: int):
        if self.law is not None and self.rng is not None:
            return DistributionSampler(self.law, self.rng).counts(n)
        return super().counts(n)


def as_sampler(source, rng: Optional[np.random.Generator] = None) -> Sampler:
    if isinstance(source, Sampler):
        return source
    if isinstance(source, FiniteDistribution):
        if rng is None:
            raise ValueError("a generator is needed to sample from a distribution")
        return DistributionSampler(source, rng)
    raise TypeError(f"cannot sample from {source!r}")
