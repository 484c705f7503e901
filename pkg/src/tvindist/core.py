"""Finite distributions, hypotheses, datasets and learning rules.

Everything here is an immutable value. Distributions are explicit mass
vectors over an ordered support of hashable items; learning rules map a
dataset to such a distribution over hypotheses.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
from typing import Any, Callable, Hashable, Iterable, Optional, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-9


def _freeze(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclasses.dataclass(frozen=True, order=True)
class Hypothesis:
    """A total binary labelling of the domain ``{0, ..., d-1}``.

    Identity is label-vector equality, so hypotheses can be used directly as
    dictionary keys and as support items of a :class:`FiniteDistribution`.
    """

    labels: tuple

    def __post_init__(self):
        labels = tuple(int(b) for b in self.labels)
        if any(b not in (0, 1) for b in labels):
            raise ValueError("hypothesis labels must be bits")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_bits(cls, bits: str) -> "Hypothesis":
        return cls(tuple(int(c) for c in bits))

    @classmethod
    def constant(cls, domain_size: int, label: int) -> "Hypothesis":
        return cls((label,) * domain_size)

    @property
    def domain_size(self) -> int:
        return len(self.labels)

    @property
    def bits(self) -> str:
        return "".join(str(b) for b in self.labels)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int8)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.labels[int(x)]
        return self.as_array()[np.asarray(x, dtype=int)]

    def complement(self) -> "Hypothesis":
        return Hypothesis(tuple(1 - b for b in self.labels))

    def __repr__(self):
        return f"Hypothesis({self.bits!r})"


def _item_sort_key(item):
    return item


class FiniteDistribution:
    """Probability mass over an ordered finite support.

    ``support`` holds distinct hashable items and ``mass`` the matching
    probabilities. Masses must be nonnegative and sum to one within
    ``NORMALIZATION_TOL``.
    """

    __slots__ = ("_support", "_mass", "_index")

    def __init__(self, support: Sequence[Hashable], mass: Sequence[float]):
        support = tuple(support)
        mass = _freeze(mass)
        if mass.ndim != 1 or len(support) != mass.shape[0]:
            raise ValueError("support and mass must have the same length")
        if len(support) == 0:
            raise ValueError("empty support")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("masses must be finite and nonnegative")
        total = float(mass.sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1")
        index = {item: i for i, item in enumerate(support)}
        if len(index) != len(support):
            raise ValueError("support items must be distinct")
        self._support = support
        self._mass = mass
        self._index = index

    @classmethod
    def from_dict(cls, mapping) -> "FiniteDistribution":
        items = list(mapping.items())
        return cls([k for k, _ in items], [v for _, v in items])

    @classmethod
    def from_weights(cls, support, weights) -> "FiniteDistribution":
        """Normalize nonnegative ``weights`` into a distribution."""
        w = np.asarray(weights, dtype=float)
        return cls(support, w / w.sum())

    @classmethod
    def point_mass(cls, item) -> "FiniteDistribution":
        return cls([item], [1.0])

    @classmethod
    def uniform(cls, support) -> "FiniteDistribution":
        support = list(support)
        return cls(support, np.full(len(support), 1.0 / len(support)))

    @property
    def support(self) -> tuple:
        return self._support

    @property
    def mass(self) -> np.ndarray:
        return self._mass

    def __len__(self):
        return len(self._support)

    def __contains__(self, item):
        return item in self._index

    def index(self, item) -> int:
        return self._index[item]

    def prob(self, item) -> float:
        i = self._index.get(item)
        return 0.0 if i is None else float(self._mass[i])

    def as_dict(self) -> dict:
        return {item: float(p) for item, p in zip(self._support, self._mass)}

    def positive_support(self) -> tuple:
        return tuple(s for s, p in zip(self._support, self._mass) if p > 0)

    def expect(self, fn: Callable[[Any], float]) -> float:
        return float(sum(p * fn(s) for s, p in zip(self._support, self._mass)))

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        """Draw items by inverse-CDF lookup on ``rng`` uniforms."""
        cdf = np.cumsum(self._mass)
        if size is None:
            i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            return self._support[min(i, len(self._support) - 1)]
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        idx = np.minimum(idx, len(self._support) - 1)
        return [self._support[i] for i in idx]

    def __eq__(self, other):
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return self._support == other._support and np.array_equal(self._mass, other._mass)

    def __hash__(self):
        return hash((self._support, self._mass.tobytes()))

    def __repr__(self):
        body = ", ".join(f"{s!r}: {p:.6g}" for s, p in zip(self._support, self._mass))
        return f"FiniteDistribution({{{body}}})"

    # JSON -------------------------------------------------------------

    def to_json(self) -> dict:
        return {"support": [encode_item(s) for s in self._support],
                "mass": [float(p) for p in self._mass]}

    @classmethod
    def from_json(cls, obj) -> "FiniteDistribution":
        return cls([decode_item(s) for s in obj["support"]], obj["mass"])


def encode_item(item):
    """JSON encoding for support items: hypotheses become bit strings."""
    if isinstance(item, Hypothesis):
        return {"hypothesis": item.bits}
    if isinstance(item, tuple):
        return [encode_item(x) for x in item]
    if isinstance(item, (np.integer,)):
        return int(item)
    return item


def decode_item(obj):
    if isinstance(obj, dict) and "hypothesis" in obj:
        return Hypothesis.from_bits(obj["hypothesis"])
    if isinstance(obj, list):
        return tuple(decode_item(x) for x in obj)
    return obj


def _identity_kind(item):
    if isinstance(item, Hypothesis):
        return ("hypothesis", item.domain_size)
    if isinstance(item, (bool, np.bool_)):
        return ("bool",)
    if isinstance(item, (int, np.integer)):
        return ("int",)
    if isinstance(item, tuple):
        return ("tuple", len(item)) + tuple(_identity_kind(x) for x in item)
    return (type(item).__name__,)


def common_support(P: FiniteDistribution, Q: FiniteDistribution) -> tuple:
    """Canonically ordered union of two supports.

    Raises ``TypeError`` when the item universes mix kinds (for example an
    integer ``1`` and a string ``"1"``), since identity would be ambiguous.
    """
    kinds = {_identity_kind(s) for s in itertools.chain(P.support, Q.support)}
    if len(kinds) > 1:
        raise TypeError(f"supports mix incompatible item kinds: {sorted(map(str, kinds))}")
    union = set(P.support) | set(Q.support)
    try:
        return tuple(sorted(union))
    except TypeError:
        seen = dict.fromkeys(itertools.chain(P.support, Q.support))
        return tuple(seen)


def aligned(P: FiniteDistribution, Q: FiniteDistribution):
    """Return ``(support, p, q)`` with zero-filled masses on the union."""
    if P.support == Q.support:
        return P.support, P.mass, Q.mass
    support = common_support(P, Q)
    p = np.array([P.prob(s) for s in support])
    q = np.array([Q.prob(s) for s in support])
    return support, p, q


def tv_distance(P: FiniteDistribution, Q: FiniteDistribution) -> float:
    """Total variation distance ``0.5 * sum |p_i - q_i|`` on the union support."""
    _, p, q = aligned(P, Q)
    return float(min(1.0, 0.5 * np.abs(p - q).sum()))


def posterior_mixture(components: Sequence[FiniteDistribution],
                      weights: Sequence[float]) -> FiniteDistribution:
    """Pointwise convex combination of distributions over the union support."""
    components = list(components)
    weights = np.asarray(weights, dtype=float)
    if len(components) != len(weights):
        raise ValueError("components and weights differ in length")
    if len(components) == 0:
        raise ValueError("empty mixture")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > NORMALIZATION_TOL:
        raise ValueError("weights must be a probability vector")
    acc: dict = {}
    for comp, w in zip(components, weights):
        if w == 0:
            continue
        for s, p in zip(comp.support, comp.mass):
            acc[s] = acc.get(s, 0.0) + w * p
    support = list(acc)
    try:
        support.sort()
    except TypeError:
        pass
    mass = np.array([acc[s] for s in support])
    return FiniteDistribution(support, mass / mass.sum())


# Datasets and losses --------------------------------------------------


class Dataset:
    """An ordered sequence of labelled examples ``(point, label)``."""

    __slots__ = ("points", "labels", "domain_size")

    def __init__(self, points, labels, domain_size: Optional[int] = None):
        points = np.array(points, dtype=np.int64).reshape(-1)
        labels = np.array(labels, dtype=np.int8).reshape(-1)
        if points.shape != labels.shape:
            raise ValueError("points and labels differ in length")
        if points.size and points.min() < 0:
            raise ValueError("negative point index")
        if domain_size is not None and points.size and points.max() >= domain_size:
            raise ValueError("point index outside the domain")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be bits")
        points.setflags(write=False)
        labels.setflags(write=False)
        self.points = points
        self.labels = labels
        self.domain_size = domain_size

    @classmethod
    def from_pairs(cls, pairs, domain_size=None) -> "Dataset":
        pairs = list(pairs)
        return cls([p for p, _ in pairs], [y for _, y in pairs], domain_size)

    @classmethod
    def from_array(cls, arr, domain_size=None) -> "Dataset":
        arr = np.asarray(arr, dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], domain_size)

    def __len__(self):
        return int(self.points.shape[0])

    def __iter__(self):
        return iter(zip(self.points.tolist(), self.labels.tolist()))

    def __getitem__(self, key):
        if isinstance(key, slice):
            return Dataset(self.points[key], self.labels[key], self.domain_size)
        return int(self.points[key]), int(self.labels[key])

    def __eq__(self, other):
        return (isinstance(other, Dataset) and np.array_equal(self.points, other.points)
                and np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.points.tobytes(), self.labels.tobytes()))

    def __repr__(self):
        return f"Dataset({list(self)!r})"

    def replace(self, i: int, example) -> "Dataset":
        """Neighbouring dataset with example ``i`` swapped for ``example``."""
        points = self.points.copy()
        labels = self.labels.copy()
        points[i], labels[i] = example
        return Dataset(points, labels, self.domain_size)

    def split(self, sizes: Sequence[int]) -> list:
        out, start = [], 0
        for size in sizes:
            out.append(self[start:start + size])
            start += size
        return out

    def as_array(self) -> np.ndarray:
        return np.stack([self.points, self.labels.astype(np.int64)], axis=1)

    def to_json(self) -> list:
        return [[p, y] for p, y in self]

    @classmethod
    def from_json(cls, obj, domain_size=None) -> "Dataset":
        return cls.from_pairs(obj, domain_size)


def population_loss(h: Hypothesis, D: FiniteDistribution) -> float:
    """Exact misclassification mass of ``h`` under a distribution over ``(x, y)``."""
    labels = h.labels
    return float(sum(p for (x, y), p in zip(D.support, D.mass) if labels[x] != y))


def empirical_loss(h: Hypothesis, S: Dataset) -> float:
    if len(S) == 0:
        raise ValueError("empirical loss of an empty dataset")
    return float(np.mean(h.as_array()[S.points] != S.labels))


def sample_dataset(D: FiniteDistribution, n: int, rng: np.random.Generator,
                   domain_size: Optional[int] = None) -> Dataset:
    """Draw ``n`` i.i.d. examples from a distribution over ``(x, y)`` pairs."""
    cdf = np.cumsum(D.mass)
    idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    idx = np.minimum(idx, len(D) - 1)
    table = np.asarray(D.support, dtype=np.int64).reshape(-1, 2)
    rows = table[idx]
    return Dataset(rows[:, 0], rows[:, 1], domain_size)


def realizable_distribution(target: Hypothesis, marginal=None) -> FiniteDistribution:
    """Joint distribution over ``(x, target(x))`` with the given point marginal."""
    d = target.domain_size
    if marginal is None:
        marginal = np.full(d, 1.0 / d)
    marginal = np.asarray(marginal, dtype=float)
    pairs = [(x, target.labels[x]) for x in range(d) if marginal[x] > 0]
    return FiniteDistribution(pairs, [marginal[x] for x, _ in pairs])


def enumerate_datasets(D: FiniteDistribution, n: int, domain_size=None):
    """Yield ``(probability, dataset)`` for every length-``n`` sequence over
    the positive support of ``D``."""
    items = [(s, p) for s, p in zip(D.support, D.mass) if p > 0]
    for combo in itertools.product(items, repeat=n):
        prob = math.prod(p for _, p in combo)
        yield prob, Dataset.from_pairs([s for s, _ in combo], domain_size)


# Hypothesis classes and learning rules --------------------------------


class HypothesisClass:
    """Ordered set of distinct hypotheses over a common domain.

    Member order is fixed at construction and drives deterministic
    tie-breaking everywhere downstream.
    """

    def __init__(self, domain_size: int, members: Iterable[Hypothesis]):
        if domain_size <= 0:
            raise ValueError("domain_size must be positive")
        members = tuple(members)
        for h in members:
            if h.domain_size != domain_size:
                raise ValueError(f"{h!r} does not match domain size {domain_size}")
        if len(set(members)) != len(members):
            raise ValueError("duplicate label vectors in hypothesis class")
        self.domain_size = domain_size
        self.members = members
        self._index = {h: i for i, h in enumerate(members)}

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def __contains__(self, h):
        return h in self._index

    def index(self, h: Hypothesis) -> int:
        return self._index[h]

    def label_matrix(self) -> np.ndarray:
        return np.array([h.labels for h in self.members], dtype=np.int8)

    def __repr__(self):
        return f"HypothesisClass(domain_size={self.domain_size}, size={len(self)})"


@dataclasses.dataclass(frozen=True)
class LearningRule:
    """Randomized map from datasets to hypotheses, viewed through its posterior.

    ``posterior_fn`` maps a :class:`Dataset` to a distribution over members of
    ``reachable_set``; the reachable set is fixed before any data is seen.
    ``posterior_law`` is an optional exact description of the law of the
    posterior under ``S ~ D^n``: a callable ``(D, n) -> [(weight, posterior)]``.
    Rules that depend on the sample only through a small statistic supply it
    so that induced distributions can be computed exactly.
    """

    posterior_fn: Callable[[Dataset], FiniteDistribution]
    reachable_set: HypothesisClass
    sample_size: int
    name: str = "rule"
    posterior_law: Optional[Callable[[FiniteDistribution, int], list]] = None

    def posterior(self, S: Dataset) -> FiniteDistribution:
        return self.posterior_fn(S)

    def check_reachable(self, S: Dataset) -> None:
        post = self.posterior(S)
        for h in post.positive_support():
            if h not in self.reachable_set:
                raise ValueError(f"{self.name}: posterior leaves the reachable set at {h!r}")

    def law(self, D: FiniteDistribution, n: Optional[int] = None, max_terms: int = 10**6):
        """Exact ``[(weight, posterior)]`` law of ``A(S)`` for ``S ~ D^n``.

        Falls back to enumeration of all datasets when no closed form is
        attached; returns ``None`` when that would exceed ``max_terms``.
        """
        n = self.sample_size if n is None else n
        if self.posterior_law is not None:
            return self.posterior_law(D, n)
        support = [s for s, p in zip(D.support, D.mass) if p > 0]
        if len(support) ** n > max_terms:
            return None
        grouped: dict = {}
        for prob, S in enumerate_datasets(D, n, self.reachable_set.domain_size):
            post = self.posterior(S)
            grouped[post] = grouped.get(post, 0.0) + prob
        return [(w, post) for post, w in grouped.items()]


def dump_json(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
