"""Deterministic seeding: FNV-1a 64 hashing and SplitMix64 streams.

Every stochastic choice in the package (template picks, distractor draws, RRT
samples) comes from a SplitMix64 stream keyed by an FNV-1a hash of a string
key, so runs are bit-reproducible across platforms and process counts.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes | str) -> int:
    """64-bit FNV-1a hash of bytes (str is encoded as UTF-8)."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


class SplitMix64:
    """SplitMix64 generator (public-domain constants).

    next_u64 advances the state by the golden-gamma increment and mixes it.
    Output sequence for a given seed is fixed for all time; tests pin it.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        # 53-bit mantissa fill; in [0, 1)
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, n: int) -> int:
        """Integer in [0, n). Modulo reduction; bias is < n / 2**64."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def shuffle(self, items: list) -> None:
        # Fisher-Yates, in place
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, seq, k: int) -> list:
        """k distinct items, order given by a partial Fisher-Yates."""
        if k > len(seq):
            raise ValueError("sample larger than population")
        pool = list(seq)
        out = []
        for _ in range(k):
            out.append(pool.pop(self.randint(len(pool))))
        return out


def stream_key(scene_id: str, task: str, index: int) -> str:
    return f"{scene_id}/{task}/{index}"


def derive_stream(scene_id: str, task: str, index: int, master_seed: int = 0) -> SplitMix64:
    """Stream for one QA record: FNV-1a of "scene/task/index" XOR the master seed."""
    return SplitMix64(fnv1a64(stream_key(scene_id, task, index)) ^ (master_seed & _MASK64))
