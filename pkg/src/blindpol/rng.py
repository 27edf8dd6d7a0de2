"""Counter-based random streams.

Every round draws from its own Philox stream keyed by the master seed with
the round index in the top counter word, so a round's randomness does not
depend on which worker runs it or in what order. Streams that are not tied to a
round (for example the key-comparison sample) use a different ``purpose`` word.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

ROUND = 0
POSTPROCESS = 1


def stream(seed: int, index: int, purpose: int = ROUND) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & MASK64, counter=[0, 0, purpose, index]))


def round_rng(seed: int, index: int) -> np.random.Generator:
    return stream(seed, index, ROUND)


class RoundStreams:
    """Reusable source of per-round streams for one worker.

    ``for_round(i)`` rewinds a single Philox generator to the state that
    ``round_rng(seed, i)`` would start from, which is much cheaper than
    building a new generator each round. The returned generator is only valid
    until the next call.
    """

    def __init__(self, seed: int, purpose: int = ROUND):
        self._bitgen = np.random.Philox(key=seed & MASK64)
        self._gen = np.random.Generator(self._bitgen)
        self._key = self._bitgen.state["state"]["key"]
        self._purpose = purpose

    def for_round(self, index: int) -> np.random.Generator:
        self._bitgen.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.array([0, 0, self._purpose, index], dtype=np.uint64), "key": self._key},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self._gen
