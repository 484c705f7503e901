"""Replayable randomness: seeded tapes with named substreams, and the
strip-layered Poisson point process used as shared randomness by couplings.

A :class:`Tape` is a value: a 128-bit seed plus a path of labels. Its key is a
BLAKE2b digest of the seed and the path, so distinct paths give unrelated
streams and the same path always replays the same numbers. Two views of a
tape's randomness are provided:

* :meth:`Tape.uniforms` -- a keyed-hash counter generator, cheap for a handful
  of draws (used by every Poisson cell);
* :meth:`Tape.rng` -- a ``numpy`` Philox generator keyed by the tape, for bulk
  draws.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import threading
from typing import Hashable, NamedTuple, Union

import numpy as np

from .core import FiniteDistribution

_MASK128 = (1 << 128) - 1
_TWO_NEG_53 = 1.0 / (1 << 53)

# Poisson(1) CDF; the tail beyond 40 has mass below 1e-48.
_POISSON1_CDF = np.cumsum([math.exp(-1.0) / math.factorial(k) for k in range(41)])


@dataclasses.dataclass(frozen=True)
class Seed:
    """A 128-bit unsigned seed."""

    value: int

    def __post_init__(self):
        if not 0 <= int(self.value) <= _MASK128:
            raise ValueError("seed must fit in 128 bits")
        object.__setattr__(self, "value", int(self.value))

    @classmethod
    def from_hex(cls, text: str) -> "Seed":
        text = text.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if not text or len(text) > 32:
            raise ValueError(f"seed must be 1-32 hex digits, got {text!r}")
        return cls(int(text, 16))

    @property
    def hex(self) -> str:
        return f"{self.value:032x}"

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(16, "little")


def _encode_label(label) -> bytes:
    if isinstance(label, tuple):
        label = list(label)
    if isinstance(label, np.integer):
        label = int(label)
    data = json.dumps(label, separators=(",", ":"), default=_encode_default).encode()
    return len(data).to_bytes(4, "little") + data


def _encode_default(obj):
    if isinstance(obj, tuple):
        return list(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    bits = getattr(obj, "bits", None)
    if bits is not None:
        return {"h": bits}
    raise TypeError(f"cannot use {obj!r} as a tape label")


def _chain(key: bytes, label) -> bytes:
    h = hashlib.blake2b(key, digest_size=32, person=b"tvindist-tape")
    h.update(_encode_label(label))
    return h.digest()


@dataclasses.dataclass(frozen=True)
class Tape:
    """Deterministic random tape identified by ``(seed, path)``."""

    seed: Seed
    path: tuple = ()
    key: bytes = dataclasses.field(default=b"", compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.seed, Seed):
            object.__setattr__(self, "seed", Seed(self.seed))
        if not self.key:
            key = hashlib.blake2b(self.seed.to_bytes(), digest_size=32,
                                  person=b"tvindist-tape").digest()
            for label in self.path:
                key = _chain(key, label)
            object.__setattr__(self, "key", key)

    @classmethod
    def root(cls, seed: Union[int, str, Seed]) -> "Tape":
        if isinstance(seed, str):
            seed = Seed.from_hex(seed)
        return cls(seed if isinstance(seed, Seed) else Seed(seed))

    def derive(self, label: Hashable) -> "Tape":
        """Child tape whose path is this path extended by ``label``."""
        return Tape(self.seed, self.path + (label,), _chain(self.key, label))

    def __truediv__(self, label) -> "Tape":
        return self.derive(label)

    def uniforms(self, count: int, start: int = 0) -> np.ndarray:
        """Uniforms in ``[0, 1)`` at draw indices ``start .. start+count-1``.

        Draw ``i`` comes from 64-bit word ``i % 4`` of the keyed digest of
        block ``i // 4``, so any window of the stream can be replayed.
        """
        if count <= 0:
            return np.empty(0)
        first, last = start // 4, (start + count - 1) // 4
        words = bytearray()
        for block in range(first, last + 1):
            words += hashlib.blake2b(block.to_bytes(8, "little"), key=self.key,
                                     digest_size=32).digest()
        raw = np.frombuffer(bytes(words), dtype="<u8")
        off = start - 4 * first
        return (raw[off:off + count] >> np.uint64(11)) * _TWO_NEG_53

    def uniform(self, index: int = 0) -> float:
        return float(self.uniforms(1, index)[0])

    def rng(self) -> np.random.Generator:
        """A fresh Philox generator keyed by this tape (replays from its start)."""
        key = np.frombuffer(self.key[:16], dtype="<u8").astype(np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def as_tape(tape_or_seed) -> Tape:
    if isinstance(tape_or_seed, Tape):
        return tape_or_seed
    return Tape.root(tape_or_seed)


class Atom(NamedTuple):
    """A Poisson atom: reference support index ``h``, height ``y``, time ``t``.

    ``strip`` and ``draw`` locate the atom inside its cell and break ties.
    """

    t: float
    strip: int
    draw: int
    h: int
    y: float


def poisson1_inverse_cdf(u: float) -> int:
    return int(np.searchsorted(_POISSON1_CDF, u, side="right"))


class PoissonStripStream:
    """Lazily realized Poisson process with intensity ``reference x Leb x Leb``.

    The ``(y, t)`` quadrant is cut into unit cells ``[j, j+1) x [m, m+1)``.
    Cell ``(j, m)`` draws its atoms from the substream
    ``tape / ("poisson", j, m)``: one uniform for the Poisson(1) count, then
    ``(t, y, h)`` per atom. Atoms therefore depend only on the tape, the
    reference measure and the cell -- never on a target density -- and two
    targets coupled through the same tape see the same atoms.

    Cells are memoized behind a lock; :meth:`window_atoms` is idempotent and
    safe to call from several threads.
    """

    def __init__(self, tape: Tape, reference: FiniteDistribution):
        self.tape = tape
        self.reference = reference
        self._cdf = np.cumsum(reference.mass)
        self._cells: dict = {}
        self._lock = threading.Lock()

    def _generate(self, strip: int, window: int) -> tuple:
        sub = self.tape.derive(("poisson", strip, window))
        count = poisson1_inverse_cdf(sub.uniform(0))
        if count == 0:
            return ()
        u = sub.uniforms(3 * count, start=1).reshape(count, 3)
        hs = np.searchsorted(self._cdf, u[:, 2] * self._cdf[-1], side="right")
        hs = np.minimum(hs, len(self._cdf) - 1)
        atoms = [Atom(window + float(u[i, 0]), strip, i, int(hs[i]), strip + float(u[i, 1]))
                 for i in range(count)]
        atoms.sort()
        return tuple(atoms)

    def window_atoms(self, strip: int, window: int) -> tuple:
        """Sorted atoms with ``y`` in ``[strip, strip+1)`` and ``t`` in
        ``[window, window+1)``."""
        if strip < 0 or window < 0:
            raise ValueError("strip and window must be nonnegative")
        key = (strip, window)
        cell = self._cells.get(key)
        if cell is None:
            fresh = self._generate(strip, window)
            with self._lock:
                cell = self._cells.setdefault(key, fresh)
        return cell


def window_atoms(stream: PoissonStripStream, strip: int, window: int) -> tuple:
    return stream.window_atoms(strip, window)
