"""Counter-based random streams keyed by (seed, stream, index).

Every block of the simulation draws from its own Philox stream, so results
do not depend on execution order or on how blocks are spread over workers.
"""
from __future__ import annotations

import numpy as np

MESSAGE = 0
CONTROL = 1
CONFIRM = 2
EVE = 3
TIES = 4
KEY = 5

_MASK64 = (1 << 64) - 1


def stream(seed: int, kind: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & _MASK64, kind, index])
    return np.random.Generator(np.random.Philox(ss))
