"""Seed splitting.

``derive_seed(base, *keys)`` feeds ``[base, *keys]`` to numpy's
``SeedSequence`` and returns the first 63 bits of its generated state, so a
single user seed fans out into independent, reproducible sub-streams.
"""
from __future__ import annotations

import numpy as np

# stream tags used as the first key
PARAM_INIT = 1
EMBEDDING = 2
SAMPLING = 3
MD_INIT = 4
SHUFFLE = 5
INSTANCE = 6


def derive_seed(base: int, *keys: int) -> int:
    state = np.random.SeedSequence([int(base), *map(int, keys)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 32 | int(state[1])) & (2**63 - 1))
