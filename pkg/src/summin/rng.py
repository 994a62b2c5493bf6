"""Seedable, portable pseudo-random stream.

The generator is SplitMix64 (Steele, Lea & Flood, 2014). Its 64-bit state is
advanced by the golden-ratio increment ``0x9E3779B97F4A7C15`` and every output
is the state passed through the SplitMix64 finalizer.  Because the output only
depends on the counter, ``n`` draws are produced in one vectorised pass.

Derived quantities, in the order they consume raw 64-bit words:

* uniform in [0, 1): ``(word >> 11) * 2**-53``
* Gaussian: Box-Muller over one pair of uniforms ``(u1, u2)``::

      rad = sqrt(-2 ln(1 - u1))
      z0, z1 = rad * cos(2 pi u2), rad * sin(2 pi u2)

  Pairs are consumed atomically; an odd request drops the trailing ``z1``.
* integer below ``n``: ``floor(uniform * n)``
* permutation: stable argsort of ``n`` raw words
* substream ``tag``: new generator seeded with
  ``finalize(seed ^ fnv1a64(tag))``.

Anything that reproduces these rules reproduces every stream in this package.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1
_TWO_PI = 2.0 * np.pi


def _finalize(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix64(value: int) -> int:
    """SplitMix64 finalizer applied to a single python integer."""
    return int(_finalize(np.array([value & _MASK], dtype=np.uint64))[0])


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


class Rng:
    """SplitMix64 stream with the derived draws used throughout the package."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK
        self._state = self.seed

    def __repr__(self):
        return f"Rng(seed={self.seed:#x}, state={self._state:#x})"

    @property
    def state(self) -> int:
        return self._state

    def substream(self, tag: str) -> "Rng":
        """Independent generator for a named role, unaffected by draws on self."""
        return Rng(mix64(self.seed ^ fnv1a64(tag)))

    def spawn(self, index: int) -> "Rng":
        """Child stream for trial/sample ``index``."""
        return self.substream(f"child:{int(index)}")

    def next_u64(self, n: int) -> np.ndarray:
        n = int(n)
        if n < 0:
            raise ValueError("n must be non-negative")
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self._state) + steps * _GAMMA
            out = _finalize(states)
        self._state = (self._state + n * int(_GAMMA)) & _MASK
        return out

    def uniform(self, size: int | None = None):
        n = 1 if size is None else int(size)
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return float(u[0]) if size is None else u

    def normal(self, size=None):
        if size is None:
            return float(self.normal(1)[0])
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        rad = np.sqrt(-2.0 * np.log1p(-u1))
        z = np.empty(2 * pairs)
        z[0::2] = rad * np.cos(_TWO_PI * u2)
        z[1::2] = rad * np.sin(_TWO_PI * u2)
        return z[:n].reshape(shape)

    def integers(self, high: int, size: int | None = None):
        """Uniform integers in ``[0, high)``."""
        if high <= 0:
            raise ValueError("high must be positive")
        u = self.uniform(1 if size is None else size)
        out = np.minimum(np.floor(u * high).astype(np.int64), high - 1)
        return int(out[0]) if size is None else out

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.next_u64(n), kind="stable")

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        if k > n:
            raise ValueError(f"cannot draw {k} distinct items from {n}")
        return self.permutation(n)[:k]

    def weighted_choice(self, weights) -> int:
        """Inverse-CDF draw; zero-weight entries are never returned.

        Ties in the cumulative sum resolve toward the lower index.
        """
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-D sequence")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        cum = np.cumsum(w)
        total = cum[-1]
        if total <= 0:
            raise ValueError("weights sum to zero")
        target = self.uniform() * total
        idx = int(np.searchsorted(cum, target, side="right"))
        # round-off can push target onto the total; fall back to the last positive weight
        if idx >= w.size:
            idx = int(np.flatnonzero(w > 0)[-1])
        return idx
