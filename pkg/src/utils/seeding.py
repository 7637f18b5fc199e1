"""
Named random sub-streams derived from one run seed
"""

import zlib
from typing import Dict

import numpy as np


class RngStreams:
    """
    Derives independent generators by component name

    The same (seed, name) pair always yields the same stream, independent of
    which other streams were requested or in what order.
    """

    INIT = "init"
    NEGATIVES = "negatives"
    DROPOUT = "dropout"
    SHUFFLE = "shuffle"
    SYNTH = "synth"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: Dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        """Get (creating on first use) the generator for a component"""
        if name not in self._streams:
            key = zlib.crc32(name.encode("utf-8"))
            sequence = np.random.SeedSequence(self.seed, spawn_key=(key,))
            self._streams[name] = np.random.Generator(np.random.PCG64(sequence))
        return self._streams[name]

    def fresh(self, name: str) -> np.random.Generator:
        """A new generator for a component, restarted from its initial state"""
        key = zlib.crc32(name.encode("utf-8"))
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(key,))))
