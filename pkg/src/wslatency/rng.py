"""Counter-based random stream with a serializable position."""

from __future__ import annotations

import hashlib

import numpy as np

_BLOCK = 256
_TWO64 = 1 << 64


class RandomStream:
    """Uniform integer draws from a Philox stream keyed by ``seed``.

    The stream position is the number of 64-bit words consumed so far, so a
    stream can be saved as ``(seed, position)`` and rebuilt exactly.
    """

    __slots__ = ("seed", "position", "_bitgen", "_buf", "_off")

    def __init__(self, seed: int, position: int = 0):
        self.seed = seed
        self._bitgen = np.random.Philox(key=seed)
        self._buf: list[int] = []
        self._off = 0
        self.position = 0
        if position:
            skip_blocks, rest = divmod(position, _BLOCK)
            if skip_blocks:
                self._bitgen.random_raw(skip_blocks * _BLOCK)
            self.position = skip_blocks * _BLOCK
            for _ in range(rest):
                self.next_u64()

    def next_u64(self) -> int:
        if self._off == len(self._buf):
            self._buf = self._bitgen.random_raw(_BLOCK).tolist()
            self._off = 0
        x = self._buf[self._off]
        self._off += 1
        self.position += 1
        return x

    def randbelow(self, n: int) -> int:
        """Unbiased integer in ``[0, n)`` by rejection on 64-bit words."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _TWO64 - (_TWO64 % n)
        x = self.next_u64()
        while x >= limit:
            x = self.next_u64()
        return x % n

    def state(self) -> dict:
        return {"seed": self.seed, "position": self.position}

    @classmethod
    def from_state(cls, state: dict) -> "RandomStream":
        return cls(state["seed"], state["position"])


def derive_seed(base_seed: int, *parts: object) -> int:
    """Stable 64-bit seed from a base seed and any printable key parts."""
    text = ",".join(str(p) for p in parts).encode()
    digest = int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")
    return base_seed ^ digest
