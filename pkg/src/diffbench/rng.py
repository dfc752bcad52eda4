"""Counter-based, splittable random number generation.

Every stream is a keyed counter: draw ``i`` of stream ``(seed, stream_id)``
is a pure function of ``(seed, stream_id, i)``, so sequences are bitwise
reproducible across runs and platforms and never depend on global state.
Distinct stream ids give disjoint keyed sequences, which makes it safe to
hand child streams to parallel workers.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0x6A09E667F3BCC909)

_INV_2_53 = float(2.0 ** -53)


def _mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer; bijective on uint64."""
    x = x.copy()
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def _mix_scalar(x: int) -> int:
    return int(_mix64(np.array([x], dtype=np.uint64))[0])


class RngStream:
    """One deterministic draw sequence identified by (seed, stream_id).

    The stream holds only a counter; all outputs are counter-based hashes,
    so state is trivially serializable and streams may be moved between
    threads (but must not be shared concurrently).
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        key = _mix_scalar(self.seed)
        key = _mix_scalar(key ^ _mix_scalar(self.stream_id ^ int(_STREAM_SALT)))
        self._key = np.uint64(key)
        self._counter = 0

    def child(self, stream_id: int) -> "RngStream":
        """Derive an independent stream from this stream's seed."""
        base = _mix_scalar(self.seed ^ _mix_scalar(self.stream_id))
        return RngStream(base, stream_id)

    def next_u64(self, n: int) -> np.ndarray:
        """Next n raw 64-bit words; advances the counter by n."""
        idx = np.arange(self._counter, self._counter + n, dtype=np.uint64)
        self._counter += n
        return _mix64(self._key + _GOLDEN * (idx + np.uint64(1)))

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform on (0, 1]; never exactly 0 so log() is safe."""
        bits = self.next_u64(n)
        return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53

    def uniform_range(self, n: int, low: float, high: float) -> np.ndarray:
        return low + (high - low) * self.uniform(n)

    def normal(self, n: int) -> np.ndarray:
        """n standard-normal doubles via Box-Muller, both outputs consumed.

        Consumes exactly 2*ceil(n/2) uniforms, so the draw count is a fixed
        function of n.
        """
        pairs = (n + 1) // 2
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def integers(self, n: int, low: int, high: int) -> np.ndarray:
        """n ints uniform on [low, high); bounded rejection-free multiply-shift."""
        if high <= low:
            raise ValueError("empty integer range")
        span = np.uint64(high - low)
        bits = self.next_u64(n)
        # multiply-shift: floor(span * bits / 2^64) via 128-bit emulation
        hi = (bits.astype(object) * int(span)) >> 64
        return (np.array(hi, dtype=np.uint64) + np.uint64(low & 0xFFFFFFFFFFFFFFFF)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) by sorting uniform keys."""
        return np.argsort(self.next_u64(n), kind="stable")

    def poisson(self, lam: np.ndarray) -> np.ndarray:
        """Elementwise Poisson draws via Knuth's product-of-uniforms method.

        Each round draws one uniform per element regardless of which
        elements are still active, keeping the draw count a function of the
        maximum count only (deterministic order).
        """
        lam = np.asarray(lam, dtype=np.float64)
        limit = np.exp(-lam)
        counts = np.zeros(lam.shape, dtype=np.int64)
        prod = self.uniform(lam.size).reshape(lam.shape)
        active = prod > limit
        while active.any():
            counts[active] += 1
            prod = prod * self.uniform(lam.size).reshape(lam.shape)
            active = prod > limit
        return counts
