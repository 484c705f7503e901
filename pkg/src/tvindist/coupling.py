"""Pairwise-optimal coupling of finite distributions through shared Poisson
randomness.

Every target is sampled by the same rule: walk the atoms ``(h, y, t)`` of a
data-independent Poisson process in increasing ``t`` and return the first
``h`` whose density lies above ``y``. Targets that share a tape share atoms,
so two targets at TV distance ``d`` disagree with probability at most
``2d / (1 + d)``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from .core import FiniteDistribution, HypothesisClass
from .randomness import PoissonStripStream, Tape

DEFAULT_WINDOW_CAP = 10**6


class AbsoluteContinuityError(ValueError):
    """A target puts mass where the reference measure has none."""


class CouplingInconsistencyError(RuntimeError):
    """No atom was accepted within the window cap."""


@dataclasses.dataclass(frozen=True, eq=False)
class ReferenceMeasure:
    """Distribution over hypotheses used as the coupling's coordinate system.

    ``data_independent`` records whether the measure was fixed before seeing
    any data; the private pipeline refuses references without it.
    """

    dist: FiniteDistribution
    data_independent: bool = True

    @property
    def support(self):
        return self.dist.support

    def __len__(self):
        return len(self.dist)


@dataclasses.dataclass(frozen=True)
class Density:
    """Radon-Nikodym derivative of a target, indexed by reference support."""

    values: np.ndarray

    @property
    def max(self) -> float:
        return float(self.values.max())


def uniform_reference(reachable: HypothesisClass) -> ReferenceMeasure:
    if len(reachable) == 0:
        raise ValueError("reachable set is empty")
    return ReferenceMeasure(FiniteDistribution.uniform(reachable.members), True)


def mixture_reference(posteriors: Sequence[FiniteDistribution], weights: str = "geometric",
                      data_independent: bool = False) -> ReferenceMeasure:
    """Convex combination of ``posteriors``.

    ``weights="geometric"`` uses ``2^-i`` (``i = 1, 2, ...``) renormalized over
    the finite enumeration; ``"uniform"`` weighs them equally. Pass
    ``data_independent=True`` only when the enumeration itself was fixed
    without looking at data (for example, all datasets of a given size).
    """
    posteriors = list(posteriors)
    if not posteriors:
        raise ValueError("need at least one posterior")
    if weights == "geometric":
        w = np.array([0.5 ** (i + 1) for i in range(len(posteriors))])
    elif weights == "uniform":
        w = np.ones(len(posteriors))
    else:
        raise ValueError(f"unknown weighting {weights!r}")
    w = w / w.sum()
    acc: dict = {}
    for post, wi in zip(posteriors, w):
        for s, p in zip(post.support, post.mass):
            acc[s] = acc.get(s, 0.0) + wi * p
    support = [s for s in acc if acc[s] > 0]
    try:
        support.sort()
    except TypeError:
        pass
    mass = np.array([acc[s] for s in support])
    return ReferenceMeasure(FiniteDistribution(support, mass / mass.sum()), data_independent)


def density(target: FiniteDistribution, ref: ReferenceMeasure) -> Density:
    ref_dist = ref.dist
    values = np.zeros(len(ref_dist))
    for s, p in zip(target.support, target.mass):
        if p == 0:
            continue
        i = ref_dist._index.get(s)
        if i is None or ref_dist.mass[i] <= 0:
            raise AbsoluteContinuityError(f"target mass {p:g} on {s!r} outside the reference support")
        values[i] = p / ref_dist.mass[i]
    values.setflags(write=False)
    return Density(values)


def _point_mass_index(values: np.ndarray) -> Optional[int]:
    nz = np.flatnonzero(values)
    return int(nz[0]) if nz.size == 1 else None


def coupled_index(f: Density, stream: PoissonStripStream, window_cap: int = DEFAULT_WINDOW_CAP) -> int:
    """Reference-support index of the first accepted atom for density ``f``.

    Windows are scanned in order; inside a window every strip below
    ``ceil(max f)`` is examined before moving on, so the accepted atom has the
    globally smallest ``t`` among acceptable atoms. Ties in ``t`` fall to the
    lower ``(strip, draw)``.
    """
    values = f.values
    only = _point_mass_index(values)
    if only is not None:
        # A point mass accepts nothing else; the scan would end on it.
        return only
    strips = max(1, math.ceil(float(values.max())))
    for m in range(window_cap):
        best = None
        for j in range(strips):
            for atom in stream.window_atoms(j, m):
                if values[atom.h] > atom.y:
                    if best is None or atom < best:
                        best = atom
                    break
        if best is not None:
            return best.h
    raise CouplingInconsistencyError(f"no acceptance within {window_cap} windows")


def coupled_sample(target: FiniteDistribution, ref: ReferenceMeasure, tape,
                   window_cap: int = DEFAULT_WINDOW_CAP) -> int:
    """Sample from ``target`` using the Poisson atoms of ``tape``.

    ``tape`` is a :class:`Tape` or a :class:`PoissonStripStream` already built
    on ``ref`` (sharing the stream shares its memoized cells). Returns the
    index of the chosen item in ``ref.support``.
    """
    if isinstance(tape, PoissonStripStream):
        stream = tape
        if stream.reference is not ref.dist and stream.reference != ref.dist:
            raise ValueError("stream was built on a different reference measure")
    else:
        stream = PoissonStripStream(tape, ref.dist)
    return coupled_index(density(target, ref), stream, window_cap)


def coupled_item(target: FiniteDistribution, ref: ReferenceMeasure, tape, **kw):
    return ref.support[coupled_sample(target, ref, tape, **kw)]


def first_acceptance_window(target: FiniteDistribution, ref: ReferenceMeasure, tape: Tape) -> float:
    """Time ``t`` of the accepted atom (used to check the rate-1 acceptance)."""
    f = density(target, ref).values
    stream = PoissonStripStream(tape, ref.dist)
    strips = max(1, math.ceil(float(f.max())))
    m = 0
    while True:
        accepted = [a for j in range(strips) for a in stream.window_atoms(j, m) if f[a.h] > a.y]
        if accepted:
            return min(accepted).t
        m += 1


def disagreement_bound(rho: float) -> float:
    """Upper bound ``2 rho / (1 + rho)`` on coupled disagreement at TV ``rho``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho={rho!r} outside [0, 1]")
    return 2.0 * rho / (1.0 + rho)
