"""
Counter-based seed streams.

One master seed per run or sweep; every (purpose, trial, batch) tuple maps to
an independent Philox stream, so trials can run in any order or in parallel
and still reproduce bit for bit.
"""
import hashlib

import numpy as np
from numpy.random import Generator, Philox, SeedSequence


def stable_hash_int(text: str) -> int:
    """64-bit hash of a string that does not change between interpreter runs."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class SeedStreams:
    """Factory for independent generators derived from a master seed."""

    def __init__(self, master_seed: int):
        if master_seed < 0:
            raise ValueError("master seed must be nonnegative")
        self.master_seed = int(master_seed)

    def sequence(self, purpose: str, *counters: int) -> SeedSequence:
        return SeedSequence(entropy=[self.master_seed, stable_hash_int(purpose), *map(int, counters)])

    def spawn(self, purpose: str, *counters: int) -> Generator:
        """
        Return a fresh generator for ``purpose`` at the given counters.

        Args:
            purpose: Label such as ``"explore"`` or ``"exploit"``
            counters: Nonnegative integers (trial index, batch index, ...)

        Returns:
            numpy Generator backed by a Philox bit generator
        """
        return Generator(Philox(self.sequence(purpose, *counters)))

    def child(self, purpose: str, *counters: int) -> "SeedStreams":
        """Derive a new master seed, e.g. one per trial of a sweep."""
        state = self.sequence(purpose, *counters).generate_state(2, dtype=np.uint32)
        return SeedStreams(int(state[0]) | (int(state[1]) << 32))

    def __repr__(self):
        return f"SeedStreams({self.master_seed})"
